#include "lakewatch/geometry.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <nlohmann/json.hpp>

#include "lakewatch/error.hpp"

namespace lakewatch {

namespace {

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int orientation(Point o, Point a, Point b) {
  const double c = cross(o, a, b);
  if (c > 0) return 1;
  if (c < 0) return -1;
  return 0;
}

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

bool same_point(Point a, Point b) { return a.x == b.x && a.y == b.y; }

std::string format_coord(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Minimal recursive-descent reader for the WKT polygon grammar.
class WktReader {
 public:
  explicit WktReader(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }

  bool keyword(std::string_view kw) {
    skip_ws();
    if (s_.size() - pos_ < kw.size()) return false;
    for (std::size_t i = 0; i < kw.size(); ++i) {
      if (std::toupper(static_cast<unsigned char>(s_[pos_ + i])) != kw[i]) return false;
    }
    pos_ += kw.size();
    return true;
  }

  double number() {
    skip_ws();
    double v = 0.0;
    auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (res.ec != std::errc{}) fail("expected number");
    pos_ = static_cast<std::size_t>(res.ptr - s_.data());
    return v;
  }

  std::vector<Point> ring() {
    expect('(');
    std::vector<Point> pts;
    do {
      Point p;
      p.x = number();
      p.y = number();
      // tolerate Z/M ordinates
      skip_ws();
      while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ')') number(), skip_ws();
      pts.push_back(p);
    } while (consume(','));
    expect(')');
    return pts;
  }

  bool at_end() {
    skip_ws();
    return pos_ == s_.size();
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError("invalid WKT polygon: " + msg + " at offset " + std::to_string(pos_));
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

Polygon polygon_from_json_coords(const nlohmann::json& coords) {
  if (!coords.is_array() || coords.empty() || !coords[0].is_array()) {
    throw DataError("GeoJSON polygon has no outer ring");
  }
  std::vector<Point> ring;
  for (const auto& c : coords[0]) {
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
      throw DataError("GeoJSON polygon has malformed position");
    }
    ring.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  return Polygon(std::move(ring));
}

}  // namespace

Polygon::Polygon(std::vector<Point> ring) : ring_(std::move(ring)) {
  if (ring_.size() >= 2 && same_point(ring_.front(), ring_.back())) ring_.pop_back();
}

BBox Polygon::bbox() const {
  if (ring_.empty()) return {};
  BBox b{ring_[0].x, ring_[0].y, ring_[0].x, ring_[0].y};
  for (const Point& p : ring_) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

bool Polygon::is_simple() const {
  const std::size_t n = ring_.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (same_point(ring_[i], ring_[j])) return false;
    }
  }
  bool any_turn = false;
  for (std::size_t i = 0; i < n && !any_turn; ++i) {
    any_turn = orientation(ring_[i], ring_[(i + 1) % n], ring_[(i + 2) % n]) != 0;
  }
  if (!any_turn) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a1 = ring_[i], a2 = ring_[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(a1, a2, ring_[j], ring_[(j + 1) % n])) return false;
    }
  }
  return true;
}

bool Polygon::contains(Point p) const {
  const std::size_t n = ring_.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = ring_[i], b = ring_[j];
    if (orientation(a, b, p) == 0 && on_segment(a, b, p)) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool Polygon::intersects(const Polygon& other) const {
  if (ring_.size() < 3 || other.ring_.size() < 3) return false;
  if (!bbox().intersects(other.bbox())) return false;
  const std::size_t n = ring_.size(), m = other.ring_.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (segments_intersect(ring_[i], ring_[(i + 1) % n], other.ring_[j],
                             other.ring_[(j + 1) % m])) {
        return true;
      }
    }
  }
  return contains(other.ring_[0]) || other.contains(ring_[0]);
}

std::string Polygon::to_wkt() const {
  std::string out = "POLYGON((";
  for (std::size_t i = 0; i <= ring_.size(); ++i) {
    const Point& p = ring_[i % ring_.size()];
    if (i) out += ", ";
    out += format_coord(p.x);
    out += ' ';
    out += format_coord(p.y);
  }
  out += "))";
  return out;
}

Polygon parse_wkt_polygon(std::string_view wkt) {
  WktReader r(wkt);
  if (!r.keyword("POLYGON")) r.fail("expected POLYGON");
  r.skip_ws();
  r.keyword("Z") || r.keyword("M");
  r.expect('(');
  Polygon poly(r.ring());
  while (r.consume(',')) r.ring();
  r.expect(')');
  if (!r.at_end()) r.fail("trailing characters");
  if (!poly.is_simple()) {
    throw DataError("WKT polygon is not simple (needs >= 3 distinct vertices, no self-intersection)");
  }
  return poly;
}

GeoJsonPolygon parse_geojson_polygon(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid GeoJSON: ") + e.what());
  }
  GeoJsonPolygon out;
  out.crs_id = "EPSG:4326";
  if (doc.contains("crs")) {
    const auto& crs = doc["crs"];
    if (crs.contains("properties") && crs["properties"].contains("name")) {
      std::string name = crs["properties"]["name"].get<std::string>();
      // urn:ogc:def:crs:EPSG::32645 -> EPSG:32645
      if (auto pos = name.rfind("EPSG::"); pos != std::string::npos) {
        name = "EPSG:" + name.substr(pos + 6);
      } else if (name.find("CRS84") != std::string::npos) {
        name = "EPSG:4326";
      }
      out.crs_id = name;
    }
  }
  const nlohmann::json* geom = &doc;
  const nlohmann::json* props = nullptr;
  if (doc.value("type", "") == "FeatureCollection") {
    const auto& features = doc["features"];
    auto it = std::find_if(features.begin(), features.end(), [](const nlohmann::json& f) {
      return f.contains("geometry") && f["geometry"].value("type", "") == "Polygon";
    });
    if (it == features.end()) throw DataError("GeoJSON FeatureCollection has no Polygon feature");
    geom = &(*it)["geometry"];
    if (it->contains("properties")) props = &(*it)["properties"];
  } else if (doc.value("type", "") == "Feature") {
    geom = &doc["geometry"];
    if (doc.contains("properties")) props = &doc["properties"];
  }
  if (geom->value("type", "") != "Polygon") throw DataError("GeoJSON geometry is not a Polygon");
  out.polygon = polygon_from_json_coords((*geom)["coordinates"]);
  if (!out.polygon.is_simple()) throw DataError("GeoJSON polygon is not simple");
  if (props && props->is_object() && props->contains("name") && (*props)["name"].is_string()) {
    out.name = (*props)["name"].get<std::string>();
  }
  return out;
}

bool is_geographic_crs(std::string_view crs_id) {
  return crs_id == "EPSG:4326" || crs_id == "OGC:CRS84" || crs_id == "CRS84";
}

std::optional<UtmZone> utm_zone_of(std::string_view crs_id) {
  if (!crs_id.starts_with("EPSG:")) return std::nullopt;
  int code = 0;
  auto digits = crs_id.substr(5);
  auto res = std::from_chars(digits.data(), digits.data() + digits.size(), code);
  if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size()) return std::nullopt;
  if (code >= 32601 && code <= 32660) return UtmZone{code - 32600, true};
  if (code >= 32701 && code <= 32760) return UtmZone{code - 32700, false};
  return std::nullopt;
}

Point project_utm(Point lonlat, UtmZone zone) {
  // Krueger series to sixth order in the third flattening.
  constexpr double a = 6378137.0;
  constexpr double f = 1.0 / 298.257223563;
  constexpr double k0 = 0.9996;
  const double n = f / (2.0 - f);
  const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n, n6 = n5 * n;
  const double big_a = a / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
  const std::array<double, 6> alpha{
      n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0 +
          7891.0 * n6 / 37800.0,
      13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0 -
          1983433.0 * n6 / 1935360.0,
      61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 +
          167603.0 * n6 / 181440.0,
      49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
      34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
      212378941.0 * n6 / 319334400.0,
  };
  constexpr double deg = std::numbers::pi / 180.0;
  const double lon0 = (zone.zone * 6.0 - 183.0) * deg;
  const double phi = lonlat.y * deg;
  const double lam = lonlat.x * deg - lon0;

  const double c = 2.0 * std::sqrt(n) / (1.0 + n);
  const double t = std::sinh(std::atanh(std::sin(phi)) - c * std::atanh(c * std::sin(phi)));
  const double xi = std::atan2(t, std::cos(lam));
  const double eta = std::atanh(std::sin(lam) / std::sqrt(1.0 + t * t));

  double e_sum = eta, n_sum = xi;
  for (int j = 1; j <= 6; ++j) {
    e_sum += alpha[j - 1] * std::cos(2.0 * j * xi) * std::sinh(2.0 * j * eta);
    n_sum += alpha[j - 1] * std::sin(2.0 * j * xi) * std::cosh(2.0 * j * eta);
  }
  return {500000.0 + k0 * big_a * e_sum, (zone.north ? 0.0 : 10000000.0) + k0 * big_a * n_sum};
}

Polygon transform_polygon(const Polygon& poly, std::string_view from_crs, std::string_view to_crs) {
  if (from_crs == to_crs || (is_geographic_crs(from_crs) && is_geographic_crs(to_crs))) {
    return poly;
  }
  if (is_geographic_crs(from_crs)) {
    if (auto zone = utm_zone_of(to_crs)) {
      std::vector<Point> out;
      out.reserve(poly.ring().size());
      for (const Point& p : poly.ring()) out.push_back(project_utm(p, *zone));
      return Polygon(std::move(out));
    }
  }
  throw DataError("unsupported CRS transform " + std::string(from_crs) + " -> " +
                  std::string(to_crs));
}

}  // namespace lakewatch
