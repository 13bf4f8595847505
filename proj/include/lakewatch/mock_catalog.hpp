#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "lakewatch/catalog.hpp"
#include "lakewatch/raster.hpp"

namespace lakewatch {

/// Parameters of a synthetic SAR scene: a dark elliptical lake at the AOI
/// centre on bright terrain, with gamma-distributed multiplicative speckle.
struct SyntheticScene {
  double semi_major_m = 1200.0;  // east-west
  double semi_minor_m = 500.0;   // north-south
  double water_db = -22.0;
  double land_db = -8.0;
  double looks = 4.0;
  double margin_m = 2000.0;  // terrain beyond the AOI bounding box
  std::uint64_t seed = 1;
};

/// UTM grid covering the AOI, in linear power (or dB when `scale` says so).
RasterGrid synthetic_scene(const LakeAOI& aoi, double pixel_size_m, const SyntheticScene& scene,
                           Scale scale = Scale::LinearPower);
/// The same scene encoded as a GeoTIFF.
std::string synthetic_granule_tiff(const LakeAOI& aoi, double pixel_size_m, const SyntheticScene& scene,
                                   Scale scale = Scale::LinearPower);
/// Catalog metadata for a synthetic granule; the footprint is the AOI
/// bounding box widened by 0.05 degrees.
GranuleRecord synthetic_record(const LakeAOI& aoi, std::string granule_id, TimePoint acquired_at,
                               ProductKind product);

/// In-process HTTP catalog speaking the search contract, with downloads at
/// /files/<granule_id>.tif. Listens on 127.0.0.1 at an ephemeral port
/// unless a port is given.
class MockCatalog {
 public:
  explicit MockCatalog(int port = 0);
  ~MockCatalog();
  MockCatalog(const MockCatalog&) = delete;
  MockCatalog& operator=(const MockCatalog&) = delete;

  int port() const;
  std::string base_url() const;

  /// Registers a granule; an empty download_url is pointed at this server.
  void add_granule(GranuleRecord record, std::string bytes);
  /// The next `n` search requests answer HTTP 500.
  void fail_next_searches(int n);
  /// Search responses become invalid JSON while set.
  void set_malformed(bool on);

  std::size_t search_requests() const;
  std::size_t download_requests() const;

  /// Blocks serving requests until stop() (used by the CLI).
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lakewatch
