#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lakewatch/catalog.hpp"
#include "lakewatch/raster.hpp"
#include "lakewatch/speckle.hpp"

namespace lakewatch {

struct LakeConfig {
  LakeAOI aoi;
  ProductKind product_kind = ProductKind::GrdRtc20m;
  OrbitDirection orbit_direction = OrbitDirection::Any;
  const std::string& name() const { return aoi.name; }
};

struct PipelineConfig {
  std::vector<LakeConfig> lakes;

  struct Paths {
    std::filesystem::path state;
    std::filesystem::path cache;
    std::filesystem::path artifacts;
    std::filesystem::path series;
  } paths;

  struct Catalog {
    std::string url = "http://127.0.0.1:8081";
    TimePoint start;  // earliest acquisition considered before any mark exists
    std::chrono::seconds timeout{30};
  } catalog;

  struct Scheduler {
    std::chrono::seconds interval{3600};
    unsigned workers = 2;
    unsigned max_attempts = 3;
    std::chrono::seconds retry_backoff{300};  // first retry delay, doubled per attempt
    std::chrono::seconds poll_backoff{30};    // first delay after a failed poll, doubled, capped at interval
  } scheduler;

  struct Segmentation {
    std::string backend = "threshold";  // "threshold" or "model"
    std::optional<std::filesystem::path> model_path;
    double threshold = 0.5;
    double softness = 8.0;
  } segmentation;

  LeeParams lee;
  std::vector<ProductKind> speckle_products{ProductKind::OperaRtc30m};
  double crop_buffer_m = kDefaultBufferM;

  struct Server {
    std::string host = "127.0.0.1";
    int port = 8080;
  } server;

  const LakeConfig* find_lake(std::string_view name) const;
  bool speckle_for(ProductKind k) const;
  std::filesystem::path series_path(std::string_view lake) const;
  std::filesystem::path lake_artifacts(std::string_view lake) const;
  std::filesystem::path latest_pointer(std::string_view lake) const;
};

/// Parses a JSON configuration. Relative paths resolve against `base_dir`.
/// Throws UsageError describing the first invalid key.
PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// Lake names appear in URLs and file names: [a-z0-9_-]+.
bool valid_lake_name(std::string_view name);

}  // namespace lakewatch
