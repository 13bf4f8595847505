#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "lakewatch/catalog.hpp"
#include "lakewatch/config.hpp"
#include "lakewatch/error.hpp"
#include "lakewatch/mock_catalog.hpp"
#include "support.hpp"

namespace lakewatch::testing {

inline TimePoint utc(int y, unsigned m, unsigned d, unsigned h = 0) {
  using namespace std::chrono;
  return sys_days{year{y} / month{m} / day{d}} + hours{h};
}

inline LakeAOI tsho_rolpa_aoi() {
  return make_lake_aoi("tsho_rolpa", "POLYGON((86.44 27.855, 86.50 27.855, 86.50 27.875, 86.44 27.875, 86.44 27.855))",
                       27.8667, 86.4667, 4580.0);
}

/// Config rooted in `root` with one lake and fast scheduling.
inline PipelineConfig test_config(const std::filesystem::path& root, ProductKind product = ProductKind::GrdRtc20m) {
  PipelineConfig cfg;
  LakeConfig lake;
  lake.aoi = tsho_rolpa_aoi();
  lake.product_kind = product;
  cfg.lakes.push_back(lake);
  cfg.paths.state = root / "state";
  cfg.paths.cache = root / "cache";
  cfg.paths.artifacts = root / "artifacts";
  cfg.paths.series = root / "series";
  cfg.catalog.start = utc(2014, 10, 1);
  cfg.scheduler.interval = std::chrono::seconds{3600};
  cfg.scheduler.workers = 2;
  cfg.scheduler.retry_backoff = std::chrono::seconds{60};
  cfg.scheduler.poll_backoff = std::chrono::seconds{30};
  return cfg;
}

/// In-memory catalog with the same matching and ordering as the HTTP client.
class FakeCatalog final : public CatalogClient {
 public:
  void add(GranuleRecord g, std::string bytes) {
    std::lock_guard lock(mutex_);
    if (g.download_url.empty()) g.download_url = "mem://" + g.granule_id;
    files_[g.download_url] = std::move(bytes);
    granules_.push_back(std::move(g));
  }

  void add_synthetic(const LakeAOI& aoi, const std::string& id, TimePoint t, ProductKind product,
                     SyntheticScene scene = {}) {
    add(synthetic_record(aoi, id, t, product), synthetic_granule_tiff(aoi, product_pixel_size(product), scene));
  }

  std::vector<GranuleRecord> search(const SearchQuery& q) override {
    ++searches;
    if (fail_searches > 0) {
      --fail_searches;
      throw RemoteError("catalog search failed: HTTP 503", true);
    }
    std::lock_guard lock(mutex_);
    std::vector<GranuleRecord> out;
    for (const auto& g : granules_)
      if (granule_matches(g, q)) out.push_back(g);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.acquired_at != b.acquired_at ? a.acquired_at < b.acquired_at : a.granule_id < b.granule_id;
    });
    return out;
  }

  std::string fetch(const std::string& url) override {
    ++fetches;
    std::lock_guard lock(mutex_);
    const auto it = files_.find(url);
    if (it == files_.end()) throw RemoteError("download of " + url + " failed: HTTP 404", false);
    return it->second;
  }

  std::atomic<int> searches{0};
  std::atomic<int> fetches{0};
  std::atomic<int> fail_searches{0};

 private:
  std::mutex mutex_;
  std::vector<GranuleRecord> granules_;
  std::map<std::string, std::string> files_;
};

}  // namespace lakewatch::testing
