#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lakewatch/geometry.hpp"

namespace lakewatch {

/// Radiometric scale of a raster's samples.
enum class Scale {
  LinearPower,  // sigma0 / gamma0 in linear power
  Decibel,
  UInt8,  // normalized 8-bit levels stored as floats
};

const char* to_string(Scale s);

/// North-up georeferencing with square pixels.
struct GeoReference {
  double origin_x = 0.0;  // easting of the top-left corner
  double origin_y = 0.0;  // northing of the top-left corner
  double pixel_size_m = 1.0;
  std::string crs_id;

  bool operator==(const GeoReference&) const = default;
};

/// Immutable georeferenced single-band raster with a validity mask.
///
/// Pixels equal to the nodata value are always invalid. Any other pixel may
/// additionally be marked invalid (e.g. lattice padding).
class RasterGrid {
 public:
  /// Validity derived from `nodata` (all valid if absent).
  RasterGrid(std::size_t width, std::size_t height, GeoReference geo, std::vector<float> data,
             std::optional<float> nodata = std::nullopt, Scale scale = Scale::LinearPower);

  /// Explicit validity; pixels equal to `nodata` are forced invalid.
  RasterGrid(std::size_t width, std::size_t height, GeoReference geo, std::vector<float> data,
             std::vector<std::uint8_t> validity, std::optional<float> nodata, Scale scale);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  const GeoReference& geo() const { return geo_; }
  double pixel_size_m() const { return geo_.pixel_size_m; }
  const std::string& crs_id() const { return geo_.crs_id; }
  Scale scale() const { return scale_; }
  const std::optional<float>& nodata() const { return nodata_; }

  std::span<const float> data() const { return data_; }
  std::span<const std::uint8_t> validity() const { return validity_; }

  float at(std::size_t col, std::size_t row) const { return data_[row * width_ + col]; }
  bool valid(std::size_t col, std::size_t row) const {
    return validity_[row * width_ + col] != 0;
  }
  std::size_t valid_count() const;

  /// Footprint in CRS units.
  BBox footprint() const;

  bool operator==(const RasterGrid&) const = default;

 private:
  void check_invariants();

  std::size_t width_;
  std::size_t height_;
  GeoReference geo_;
  std::vector<float> data_;
  std::vector<std::uint8_t> validity_;
  std::optional<float> nodata_;
  Scale scale_;
};

/// Decibel input converted to linear power (10^(x/10)); linear input is
/// returned unchanged. Throws DataError for 8-bit input.
RasterGrid to_linear_power(const RasterGrid& grid);

/// A monitored lake.
struct LakeAOI {
  std::string name;
  Polygon polygon;
  std::string polygon_crs = "EPSG:4326";
  double center_lat = 0.0;
  double center_lon = 0.0;
  double altitude_m = 0.0;

  std::string polygon_wkt() const { return polygon.to_wkt(); }
};

/// Builds and validates a LakeAOI from WKT. For geographic polygons the
/// centre must fall inside the polygon's bounding box.
LakeAOI make_lake_aoi(std::string name, std::string_view polygon_wkt, double center_lat,
                      double center_lon, double altitude_m,
                      std::string polygon_crs = "EPSG:4326");

inline constexpr double kDefaultBufferM = 500.0;
inline constexpr std::size_t kDefaultLattice = 256;

/// Minimal pixel window covering the buffered AOI bounding box, with the
/// box expanded outward to whole pixels. Throws DataError when disjoint.
RasterGrid crop_to_aoi(const RasterGrid& grid, const LakeAOI& aoi,
                       double buffer_m = kDefaultBufferM);

/// Pixel-window crop; the window must lie inside the grid.
RasterGrid crop_window(const RasterGrid& grid, std::size_t col0, std::size_t row0,
                       std::size_t width, std::size_t height);

/// Zero-pads right/bottom to the next multiple of `lattice`. Pad pixels are
/// 0 and invalid; the top-left corner georeference is unchanged.
RasterGrid pad_to_lattice(const RasterGrid& grid, std::size_t lattice = kDefaultLattice);

}  // namespace lakewatch
