#include "lakewatch/raster.hpp"

#include <algorithm>
#include <cmath>

#include "lakewatch/error.hpp"

namespace lakewatch {

namespace {

bool is_nodata(float v, const std::optional<float>& nodata) {
  if (!nodata) return false;
  if (std::isnan(*nodata)) return std::isnan(v);
  return v == *nodata;
}

// floor/ceil that forgive representation error on exact pixel boundaries
double snap_floor(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : std::floor(v);
}

double snap_ceil(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : std::ceil(v);
}

}  // namespace

const char* to_string(Scale s) {
  switch (s) {
    case Scale::LinearPower: return "linear";
    case Scale::Decibel: return "dB";
    case Scale::UInt8: return "uint8";
  }
  return "?";
}

RasterGrid::RasterGrid(std::size_t width, std::size_t height, GeoReference geo,
                       std::vector<float> data, std::optional<float> nodata, Scale scale)
    : width_(width),
      height_(height),
      geo_(std::move(geo)),
      data_(std::move(data)),
      validity_(data_.size(), 1),
      nodata_(nodata),
      scale_(scale) {
  check_invariants();
}

RasterGrid::RasterGrid(std::size_t width, std::size_t height, GeoReference geo,
                       std::vector<float> data, std::vector<std::uint8_t> validity,
                       std::optional<float> nodata, Scale scale)
    : width_(width),
      height_(height),
      geo_(std::move(geo)),
      data_(std::move(data)),
      validity_(std::move(validity)),
      nodata_(nodata),
      scale_(scale) {
  check_invariants();
}

void RasterGrid::check_invariants() {
  if (width_ == 0 || height_ == 0) throw DataError("raster dimensions must be positive");
  if (!(geo_.pixel_size_m > 0.0)) throw DataError("raster pixel size must be positive");
  if (data_.size() != width_ * height_) throw DataError("raster data length != width*height");
  if (validity_.size() != data_.size()) throw DataError("raster validity length != data length");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (is_nodata(data_[i], nodata_)) validity_[i] = 0;
    else validity_[i] = validity_[i] ? 1 : 0;
  }
}

std::size_t RasterGrid::valid_count() const {
  return static_cast<std::size_t>(std::count(validity_.begin(), validity_.end(), 1));
}

BBox RasterGrid::footprint() const {
  const double w = static_cast<double>(width_) * geo_.pixel_size_m;
  const double h = static_cast<double>(height_) * geo_.pixel_size_m;
  return {geo_.origin_x, geo_.origin_y - h, geo_.origin_x + w, geo_.origin_y};
}

LakeAOI make_lake_aoi(std::string name, std::string_view polygon_wkt, double center_lat,
                      double center_lon, double altitude_m, std::string polygon_crs) {
  LakeAOI aoi;
  aoi.name = std::move(name);
  aoi.polygon = parse_wkt_polygon(polygon_wkt);
  aoi.polygon_crs = std::move(polygon_crs);
  aoi.center_lat = center_lat;
  aoi.center_lon = center_lon;
  aoi.altitude_m = altitude_m;
  if (aoi.name.empty()) throw DataError("lake name must not be empty");
  if (is_geographic_crs(aoi.polygon_crs) &&
      !aoi.polygon.bbox().contains({center_lon, center_lat})) {
    throw DataError("lake '" + aoi.name + "': centre lies outside the polygon bounding box");
  }
  return aoi;
}

RasterGrid crop_window(const RasterGrid& grid, std::size_t col0, std::size_t row0,
                       std::size_t width, std::size_t height) {
  if (width == 0 || height == 0 || col0 + width > grid.width() || row0 + height > grid.height()) {
    throw DataError("crop window outside raster");
  }
  std::vector<float> data;
  std::vector<std::uint8_t> valid;
  data.reserve(width * height);
  valid.reserve(width * height);
  const auto src = grid.data();
  const auto src_valid = grid.validity();
  for (std::size_t r = row0; r < row0 + height; ++r) {
    const std::size_t off = r * grid.width() + col0;
    data.insert(data.end(), src.begin() + off, src.begin() + off + width);
    valid.insert(valid.end(), src_valid.begin() + off, src_valid.begin() + off + width);
  }
  GeoReference geo = grid.geo();
  geo.origin_x += static_cast<double>(col0) * geo.pixel_size_m;
  geo.origin_y -= static_cast<double>(row0) * geo.pixel_size_m;
  return RasterGrid(width, height, std::move(geo), std::move(data), std::move(valid),
                    grid.nodata(), grid.scale());
}

RasterGrid crop_to_aoi(const RasterGrid& grid, const LakeAOI& aoi, double buffer_m) {
  if (buffer_m < 0) throw DataError("buffer must be non-negative");
  const Polygon poly = transform_polygon(aoi.polygon, aoi.polygon_crs, grid.crs_id());
  // The bounding box of a round buffer equals the bounding box grown by the distance.
  const BBox box = poly.bbox().expanded(buffer_m);
  const auto& geo = grid.geo();
  const double ps = geo.pixel_size_m;

  const double c0 = snap_floor((box.min_x - geo.origin_x) / ps);
  const double c1 = snap_ceil((box.max_x - geo.origin_x) / ps);
  const double r0 = snap_floor((geo.origin_y - box.max_y) / ps);
  const double r1 = snap_ceil((geo.origin_y - box.min_y) / ps);

  const double w = static_cast<double>(grid.width());
  const double h = static_cast<double>(grid.height());
  const double cc0 = std::clamp(c0, 0.0, w), cc1 = std::clamp(c1, 0.0, w);
  const double rr0 = std::clamp(r0, 0.0, h), rr1 = std::clamp(r1, 0.0, h);
  if (cc1 <= cc0 || rr1 <= rr0) {
    throw DataError("AOI outside raster footprint (lake '" + aoi.name + "')");
  }
  return crop_window(grid, static_cast<std::size_t>(cc0), static_cast<std::size_t>(rr0),
                     static_cast<std::size_t>(cc1 - cc0), static_cast<std::size_t>(rr1 - rr0));
}

RasterGrid pad_to_lattice(const RasterGrid& grid, std::size_t lattice) {
  if (lattice == 0) throw DataError("lattice must be >= 1");
  const std::size_t w = (grid.width() + lattice - 1) / lattice * lattice;
  const std::size_t h = (grid.height() + lattice - 1) / lattice * lattice;
  if (w == grid.width() && h == grid.height()) return grid;

  std::vector<float> data(w * h, 0.0f);
  std::vector<std::uint8_t> valid(w * h, 0);
  const auto src = grid.data();
  const auto src_valid = grid.validity();
  for (std::size_t r = 0; r < grid.height(); ++r) {
    std::copy_n(src.begin() + r * grid.width(), grid.width(), data.begin() + r * w);
    std::copy_n(src_valid.begin() + r * grid.width(), grid.width(), valid.begin() + r * w);
  }
  return RasterGrid(w, h, grid.geo(), std::move(data), std::move(valid), grid.nodata(),
                    grid.scale());
}

RasterGrid to_linear_power(const RasterGrid& grid) {
  if (grid.scale() == Scale::LinearPower) return grid;
  if (grid.scale() != Scale::Decibel) throw DataError("cannot convert 8-bit levels to linear power");
  std::vector<float> out(grid.data().begin(), grid.data().end());
  const auto valid = grid.validity();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (valid[i]) out[i] = static_cast<float>(std::pow(10.0, out[i] / 10.0));
  }
  return RasterGrid(grid.width(), grid.height(), grid.geo(), std::move(out),
                    std::vector<std::uint8_t>(valid.begin(), valid.end()), grid.nodata(), Scale::LinearPower);
}

}  // namespace lakewatch
