#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lakewatch {

struct Point {
  double x = 0.0;  // easting or longitude
  double y = 0.0;  // northing or latitude
};

struct BBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool contains(Point p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  bool intersects(const BBox& o) const {
    return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
  }
  BBox expanded(double d) const { return {min_x - d, min_y - d, max_x + d, max_y + d}; }
};

/// Outer ring of a polygon, stored open (the closing vertex is dropped).
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Point> ring);

  const std::vector<Point>& ring() const { return ring_; }
  BBox bbox() const;

  /// At least 3 distinct vertices and no two non-adjacent edges touching.
  bool is_simple() const;

  /// Even-odd rule; points on the boundary count as inside.
  bool contains(Point p) const;

  /// Area overlap or boundary contact.
  bool intersects(const Polygon& other) const;

  std::string to_wkt() const;

 private:
  std::vector<Point> ring_;
};

/// Parses `POLYGON ((x y, ...), (hole...))`. Holes are ignored. Throws DataError.
Polygon parse_wkt_polygon(std::string_view wkt);

struct GeoJsonPolygon {
  Polygon polygon;
  std::string crs_id;  // "EPSG:4326" unless a legacy `crs` member says otherwise
  std::optional<std::string> name;
};

/// Accepts a Polygon geometry, a Feature, or a FeatureCollection (first polygon).
GeoJsonPolygon parse_geojson_polygon(std::string_view text);

/// True for CRS identifiers naming geographic lon/lat coordinates.
bool is_geographic_crs(std::string_view crs_id);

/// UTM zone encoded in an EPSG code (326zz north, 327zz south); nullopt otherwise.
struct UtmZone {
  int zone = 0;
  bool north = true;
};
std::optional<UtmZone> utm_zone_of(std::string_view crs_id);

/// WGS84 geographic (lon, lat in degrees) to UTM easting/northing (m).
Point project_utm(Point lonlat, UtmZone zone);

/// Moves a polygon from `from_crs` into `to_crs`. Supports identity and
/// EPSG:4326 -> WGS84 UTM; anything else throws DataError.
Polygon transform_polygon(const Polygon& poly, std::string_view from_crs,
                          std::string_view to_crs);

}  // namespace lakewatch
