#include "lakewatch/mock_catalog.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lakewatch/error.hpp"
#include "lakewatch/fsutil.hpp"
#include "lakewatch/geotiff.hpp"

namespace lakewatch {

RasterGrid synthetic_scene(const LakeAOI& aoi, double pixel_size_m, const SyntheticScene& scene, Scale scale) {
  if (!(pixel_size_m > 0.0)) throw UsageError("pixel size must be positive");
  if (scale == Scale::UInt8) throw UsageError("synthetic scenes are linear power or dB");
  const UtmZone zone{static_cast<int>(std::floor((aoi.center_lon + 180.0) / 6.0)) + 1, aoi.center_lat >= 0.0};
  const std::string crs = "EPSG:" + std::to_string((zone.north ? 32600 : 32700) + zone.zone);
  const BBox bb = transform_polygon(aoi.polygon, aoi.polygon_crs, crs).bbox().expanded(scene.margin_m);
  const double ox = std::floor(bb.min_x / pixel_size_m) * pixel_size_m;
  const double oy = std::ceil(bb.max_y / pixel_size_m) * pixel_size_m;
  const auto w = static_cast<std::size_t>(std::ceil((bb.max_x - ox) / pixel_size_m));
  const auto h = static_cast<std::size_t>(std::ceil((oy - bb.min_y) / pixel_size_m));
  const Point centre = project_utm({aoi.center_lon, aoi.center_lat}, zone);

  std::mt19937_64 rng(scene.seed);
  std::gamma_distribution<double> speckle(scene.looks, 1.0 / scene.looks);
  const double water = std::pow(10.0, scene.water_db / 10.0);
  const double land = std::pow(10.0, scene.land_db / 10.0);
  std::vector<float> data(w * h);
  for (std::size_t r = 0; r < h; ++r) {
    const double y = oy - (static_cast<double>(r) + 0.5) * pixel_size_m;
    for (std::size_t c = 0; c < w; ++c) {
      const double x = ox + (static_cast<double>(c) + 0.5) * pixel_size_m;
      const double u = (x - centre.x) / scene.semi_major_m, v = (y - centre.y) / scene.semi_minor_m;
      const double value = (u * u + v * v <= 1.0 ? water : land) * speckle(rng);
      data[r * w + c] = static_cast<float>(scale == Scale::Decibel ? 10.0 * std::log10(value) : value);
    }
  }
  return RasterGrid(w, h, GeoReference{ox, oy, pixel_size_m, crs}, std::move(data), std::nullopt, scale);
}

std::string synthetic_granule_tiff(const LakeAOI& aoi, double pixel_size_m, const SyntheticScene& scene,
                                   Scale scale) {
  const RasterGrid grid = synthetic_scene(aoi, pixel_size_m, scene, scale);
  static std::atomic<unsigned> counter{0};
  const auto path = std::filesystem::temp_directory_path() /
                    ("lakewatch-synthetic-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".tif");
  write_raster(path, grid, SampleType::Float32);
  auto bytes = read_file(path);
  std::filesystem::remove(path);
  if (!bytes) throw DataError("cannot read back synthetic granule");
  return std::move(*bytes);
}

GranuleRecord synthetic_record(const LakeAOI& aoi, std::string granule_id, TimePoint acquired_at,
                               ProductKind product) {
  const BBox bb = aoi.polygon.bbox().expanded(0.05);
  GranuleRecord g;
  g.granule_id = std::move(granule_id);
  g.acquired_at = acquired_at;
  g.footprint_wkt = Polygon({{bb.min_x, bb.min_y}, {bb.max_x, bb.min_y}, {bb.max_x, bb.max_y}, {bb.min_x, bb.max_y}})
                        .to_wkt();
  g.pixel_size_m = product_pixel_size(product);
  g.product_kind = product;
  g.orbit_direction = OrbitDirection::Descending;
  return g;
}

struct MockCatalog::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  mutable std::mutex mutex;
  std::vector<std::pair<GranuleRecord, std::string>> granules;
  int failures = 0;
  bool malformed = false;
  std::atomic<std::size_t> searches{0};
  std::atomic<std::size_t> downloads{0};

  void handle_search(const httplib::Request& req, httplib::Response& res) {
    ++searches;
    std::lock_guard lock(mutex);
    if (failures > 0) {
      --failures;
      res.status = 500;
      res.set_content(R"({"error":"internal"})", "application/json");
      return;
    }
    if (malformed) {
      res.set_content(R"({"results": [{"granule_id": "truncated)", "application/json");
      return;
    }
    SearchQuery q;
    try {
      const auto start = parse_iso8601(req.get_param_value("start"));
      const auto end = parse_iso8601(req.get_param_value("end"));
      if (!start || !end) throw UsageError("start and end must be ISO-8601");
      q.wkt = req.get_param_value("wkt");
      q.start = *start;
      q.end = *end;
      q.product_kind = parse_product_kind(req.get_param_value("product"));
      q.orbit_direction =
          req.has_param("orbit") ? parse_orbit_direction(req.get_param_value("orbit")) : OrbitDirection::Any;
      q.validate();
    } catch (const Error& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    nlohmann::json results = nlohmann::json::array();
    for (const auto& [record, bytes] : granules) {
      if (granule_matches(record, q)) results.push_back(record);
    }
    res.set_content(nlohmann::json{{"results", results}}.dump(), "application/json");
  }

  void handle_file(const httplib::Request& req, httplib::Response& res) {
    ++downloads;
    const std::string id = req.matches[1];
    std::lock_guard lock(mutex);
    for (const auto& [record, bytes] : granules) {
      if (record.granule_id == id) {
        res.set_content(bytes, "image/tiff");
        return;
      }
    }
    res.status = 404;
  }
};

MockCatalog::MockCatalog(int port) : impl_(std::make_unique<Impl>()) {
  impl_->server.Get("/search", [this](const auto& req, auto& res) { impl_->handle_search(req, res); });
  impl_->server.Get(R"(/files/(.+)\.tif)", [this](const auto& req, auto& res) { impl_->handle_file(req, res); });
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  } else if (impl_->server.bind_to_port("127.0.0.1", port)) {
    impl_->port = port;
  } else {
    impl_->port = -1;
  }
  if (impl_->port <= 0) throw RemoteError("mock catalog cannot bind port " + std::to_string(port), false);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockCatalog::~MockCatalog() {
  stop();
  wait();
}

int MockCatalog::port() const { return impl_->port; }

std::string MockCatalog::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

void MockCatalog::add_granule(GranuleRecord record, std::string bytes) {
  if (record.download_url.empty()) record.download_url = base_url() + "/files/" + record.granule_id + ".tif";
  std::lock_guard lock(impl_->mutex);
  impl_->granules.emplace_back(std::move(record), std::move(bytes));
}

void MockCatalog::fail_next_searches(int n) {
  std::lock_guard lock(impl_->mutex);
  impl_->failures = n;
}

void MockCatalog::set_malformed(bool on) {
  std::lock_guard lock(impl_->mutex);
  impl_->malformed = on;
}

std::size_t MockCatalog::search_requests() const { return impl_->searches.load(); }
std::size_t MockCatalog::download_requests() const { return impl_->downloads.load(); }

void MockCatalog::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockCatalog::stop() { impl_->server.stop(); }

}  // namespace lakewatch
