#include "lakewatch/catalog.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lakewatch/error.hpp"
#include "lakewatch/fsutil.hpp"
#include "lakewatch/geometry.hpp"

namespace lakewatch {

namespace {

std::string excerpt(std::string_view body, std::size_t limit = 160) {
  std::string out(body.substr(0, limit));
  for (char& c : out)
    if (c == '\n' || c == '\r') c = ' ';
  if (body.size() > limit) out += "...";
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

}  // namespace

const char* to_string(ProductKind k) {
  switch (k) {
    case ProductKind::GrdRtc20m: return "GRD_RTC_20m";
    case ProductKind::OperaRtc30m: return "OPERA_RTC_30m";
  }
  return "?";
}

const char* to_string(OrbitDirection o) {
  switch (o) {
    case OrbitDirection::Ascending: return "ascending";
    case OrbitDirection::Descending: return "descending";
    case OrbitDirection::Any: return "any";
  }
  return "?";
}

ProductKind parse_product_kind(std::string_view text) {
  if (text == "GRD_RTC_20m") return ProductKind::GrdRtc20m;
  if (text == "OPERA_RTC_30m") return ProductKind::OperaRtc30m;
  throw UsageError("unknown product kind '" + std::string(text) + "'");
}

OrbitDirection parse_orbit_direction(std::string_view text) {
  if (text == "ascending") return OrbitDirection::Ascending;
  if (text == "descending") return OrbitDirection::Descending;
  if (text == "any") return OrbitDirection::Any;
  throw UsageError("unknown orbit direction '" + std::string(text) + "'");
}

double product_pixel_size(ProductKind k) { return k == ProductKind::GrdRtc20m ? 20.0 : 30.0; }

void SearchQuery::validate() const {
  if (!(start < end)) throw UsageError("search window must satisfy start < end");
  try {
    parse_wkt_polygon(wkt);
  } catch (const DataError& e) {
    throw UsageError(std::string("search wkt: ") + e.what());
  }
}

void GranuleRecord::validate() const {
  if (granule_id.empty()) throw DataError("granule without id");
  parse_wkt_polygon(footprint_wkt);
  if (pixel_size_m != 20.0 && pixel_size_m != 30.0) {
    throw DataError("granule " + granule_id + ": pixel size must be 20 or 30 m");
  }
}

void to_json(nlohmann::json& j, const GranuleRecord& g) {
  j = nlohmann::json{{"granule_id", g.granule_id},
                     {"acquired_at", format_iso8601(g.acquired_at)},
                     {"footprint_wkt", g.footprint_wkt},
                     {"download_url", g.download_url},
                     {"polarization", g.polarization},
                     {"pixel_size_m", g.pixel_size_m},
                     {"product", to_string(g.product_kind)},
                     {"orbit", to_string(g.orbit_direction)}};
}

void from_json(const nlohmann::json& j, GranuleRecord& g) {
  g.granule_id = j.at("granule_id").get<std::string>();
  g.acquired_at = parse_iso8601_or_throw(j.at("acquired_at").get<std::string>(), "acquired_at");
  g.footprint_wkt = j.at("footprint_wkt").get<std::string>();
  g.download_url = j.at("download_url").get<std::string>();
  g.polarization = j.value("polarization", std::string("VV"));
  g.pixel_size_m = j.at("pixel_size_m").get<double>();
  g.product_kind = parse_product_kind(j.at("product").get<std::string>());
  g.orbit_direction = parse_orbit_direction(j.value("orbit", std::string("ascending")));
}

bool granule_matches(const GranuleRecord& g, const SearchQuery& q) {
  if (g.acquired_at < q.start || g.acquired_at > q.end) return false;
  if (g.product_kind != q.product_kind) return false;
  if (q.orbit_direction != OrbitDirection::Any && g.orbit_direction != q.orbit_direction) return false;
  return parse_wkt_polygon(g.footprint_wkt).intersects(parse_wkt_polygon(q.wkt));
}

UrlParts split_url(std::string_view url) {
  const auto scheme = url.find("://");
  if (scheme == std::string_view::npos) throw UsageError("URL without scheme: " + std::string(url));
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

std::vector<GranuleRecord> parse_search_response(std::string_view body) {
  std::vector<GranuleRecord> out;
  try {
    const auto doc = nlohmann::json::parse(body);
    for (const auto& item : doc.at("results")) {
      GranuleRecord g = item.get<GranuleRecord>();
      g.validate();
      out.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError("malformed catalog response (" + std::string(e.what()) + "): " + excerpt(body), false);
  } catch (const Error& e) {
    throw RemoteError("malformed catalog response (" + std::string(e.what()) + "): " + excerpt(body), false);
  }
  return out;
}

HttpCatalogClient::HttpCatalogClient(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  split_url(base_url_);
}

namespace {

httplib::Result http_get(const std::string& origin, const std::string& target, const httplib::Params& params,
                         std::chrono::seconds timeout) {
  httplib::Client cli(origin);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_follow_location(true);
  return params.empty() ? cli.Get(target) : cli.Get(target, params, httplib::Headers{});
}

void check_status(const httplib::Result& res, const std::string& what) {
  if (!res) throw RemoteError(what + ": " + httplib::to_string(res.error()), true);
  if (res->status >= 500) {
    throw RemoteError(what + ": HTTP " + std::to_string(res->status) + " " + excerpt(res->body), true);
  }
  if (res->status != 200) {
    throw RemoteError(what + ": HTTP " + std::to_string(res->status) + " " + excerpt(res->body), false);
  }
}

}  // namespace

std::vector<GranuleRecord> HttpCatalogClient::search(const SearchQuery& q) {
  q.validate();
  const UrlParts base = split_url(base_url_);
  const std::string prefix = base.target == "/" ? "" : base.target;
  const httplib::Params params{{"wkt", q.wkt},
                               {"start", format_iso8601(q.start)},
                               {"end", format_iso8601(q.end)},
                               {"product", to_string(q.product_kind)},
                               {"orbit", to_string(q.orbit_direction)}};
  const auto res = http_get(base.origin, prefix + "/search", params, timeout_);
  check_status(res, "catalog search failed");

  auto granules = parse_search_response(res->body);
  std::erase_if(granules, [&](const GranuleRecord& g) { return !granule_matches(g, q); });
  std::sort(granules.begin(), granules.end(), [](const GranuleRecord& a, const GranuleRecord& b) {
    return a.acquired_at != b.acquired_at ? a.acquired_at < b.acquired_at : a.granule_id < b.granule_id;
  });
  return granules;
}

std::string HttpCatalogClient::fetch(const std::string& url) {
  const UrlParts parts = url.starts_with("/") ? UrlParts{split_url(base_url_).origin, url} : split_url(url);
  const auto res = http_get(parts.origin, parts.target, {}, timeout_);
  check_status(res, "download of " + url + " failed");
  return res->body;
}

DownloadCache::DownloadCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_ / "by-granule");
}

std::filesystem::path DownloadCache::get(const GranuleRecord& g, CatalogClient& client) {
  const auto index = dir_ / "by-granule" / safe_file_name(g.granule_id);
  if (const auto digest = read_file(index)) {
    const std::string d = trim(*digest);
    const auto path = dir_ / (d + ".tif");
    if (const auto bytes = read_file(path); bytes && sha256_hex(*bytes) == d) return path;
  }
  const std::string bytes = client.fetch(g.download_url);
  if (bytes.empty()) throw RemoteError("empty download for granule " + g.granule_id, true);
  const std::string digest = sha256_hex(bytes);
  const auto path = dir_ / (digest + ".tif");
  if (const auto existing = read_file(path); !existing || *existing != bytes) write_file_atomic(path, bytes);
  write_file_atomic(index, digest + "\n");
  return path;
}

}  // namespace lakewatch
