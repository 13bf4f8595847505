#include "lakewatch/ingest.hpp"

#include <algorithm>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "lakewatch/error.hpp"
#include "lakewatch/fsutil.hpp"
#include "lakewatch/geotiff.hpp"
#include "lakewatch/graph_model.hpp"
#include "lakewatch/imaging.hpp"
#include "lakewatch/normalize.hpp"
#include "lakewatch/speckle.hpp"
#include "lakewatch/timeseries.hpp"

namespace lakewatch {

std::string latest_to_json(const LatestArtifact& a) {
  return nlohmann::json{{"lake", a.lake},
                        {"granule_id", a.granule_id},
                        {"acquired_at", format_iso8601(a.acquired_at)},
                        {"area_m2", a.area_m2},
                        {"pixel_count", a.pixel_count},
                        {"image_path", a.image_path},
                        {"mask_path", a.mask_path},
                        {"series_path", a.series_path}}
      .dump(2);
}

LatestArtifact latest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    LatestArtifact a;
    a.lake = j.at("lake").get<std::string>();
    a.granule_id = j.at("granule_id").get<std::string>();
    a.acquired_at = parse_iso8601_or_throw(j.at("acquired_at").get<std::string>(), "acquired_at");
    a.area_m2 = j.at("area_m2").get<double>();
    a.pixel_count = j.at("pixel_count").get<std::uint64_t>();
    a.image_path = j.at("image_path").get<std::string>();
    a.mask_path = j.at("mask_path").get<std::string>();
    a.series_path = j.at("series_path").get<std::string>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("unreadable latest pointer: ") + e.what());
  }
}

std::optional<LatestArtifact> read_latest(const std::filesystem::path& pointer) {
  if (!std::filesystem::exists(pointer)) return std::nullopt;
  const auto text = read_file(pointer);
  if (!text) throw DataError("unreadable latest pointer " + pointer.string());
  return latest_from_json(*text);
}

std::vector<IngestJob> poll_once(JobStore& store, const PipelineConfig& config, CatalogClient& client, TimePoint now,
                                 const PollHooks& hooks) {
  std::vector<IngestJob> created;
  for (const auto& lake : config.lakes) {
    const auto mark = store.high_water_mark(lake.name());
    const TimePoint start = mark.value_or(config.catalog.start);
    if (!(start < now)) continue;
    const SearchQuery q{lake.aoi.polygon_wkt(), start, now, lake.product_kind, lake.orbit_direction};
    const auto granules = client.search(q);

    for (const auto& g : granules) {
      const auto id = IngestJob::make_id(lake.name(), g.granule_id);
      if (store.contains(id)) continue;
      auto job = IngestJob::discovered(lake.name(), g, now);
      store.put(job);
      created.push_back(std::move(job));
    }
    if (hooks.after_jobs_recorded) hooks.after_jobs_recorded(lake.name());

    if (!granules.empty()) {
      const auto newest = std::max_element(granules.begin(), granules.end(), [](const auto& a, const auto& b) {
                            return a.acquired_at < b.acquired_at;
                          })->acquired_at;
      const TimePoint next = newest - kMarkOverlap;
      if (!mark || next > *mark) store.set_high_water_mark(lake.name(), next);
    }
  }
  store.record_poll(now);
  return created;
}

std::unique_ptr<SegmenterBackend> make_backend(const PipelineConfig& config) {
  const auto& seg = config.segmentation;
  if (seg.backend == "model" && seg.model_path) {
    try {
      return std::make_unique<GraphModelBackend>(*seg.model_path);
    } catch (const BackendUnavailable& e) {
      spdlog::warn("{}; falling back to the threshold backend", e.what());
    }
  }
  return std::make_unique<ThresholdBackend>(seg.softness);
}

JobExecutor::JobExecutor(const PipelineConfig& config, CatalogClient& client, JobStore& store, const Clock& clock)
    : config_(config),
      client_(client),
      store_(store),
      clock_(clock),
      cache_(config.paths.cache),
      backend_(make_backend(config)) {}

IngestJob JobExecutor::execute(IngestJob job) {
  job.advance(JobState::Downloading, clock_.now());
  store_.put(job);
  try {
    const LakeConfig* lake = config_.find_lake(job.lake);
    if (!lake) throw DataError("lake '" + job.lake + "' is not configured");

    const auto path = cache_.get(job.granule, client_);
    const RasterGrid granule = load_raster(path);
    RasterGrid crop = crop_to_aoi(granule, lake->aoi, config_.crop_buffer_m);
    if (config_.speckle_for(job.granule.product_kind)) crop = enhanced_lee(to_linear_power(crop), config_.lee);
    const RasterGrid padded = pad_to_lattice(crop);
    const RasterGrid normalized = equalize(padded);

    const auto dir = config_.lake_artifacts(job.lake) / safe_file_name(job.granule.granule_id);
    std::filesystem::create_directories(dir);
    write_raster(dir / "normalized.tif", normalized, SampleType::UInt8);
    job.advance(JobState::Preprocessed, clock_.now());
    store_.put(job);

    const ProbabilityMap pm = backend_->segment(segmentation_input(*backend_, padded));
    const BinaryMask mask = largest_component(binarize(pm, config_.segmentation.threshold));
    write_raster(dir / "mask.tif", mask_raster(mask, normalized.geo()), SampleType::UInt8);
    job.advance(JobState::Segmented, clock_.now());
    store_.put(job);

    publish(job, normalized, mask, crop.width(), crop.height());
    job.advance(JobState::Published, clock_.now());
    job.last_error.reset();
    store_.put(job);
    spdlog::info("published {} ({} water pixels)", job.job_id, mask.water_count());
  } catch (const std::exception& e) {
    job.fail(e.what(), clock_.now());
    store_.put(job);
    spdlog::warn("job {} failed: {}", job.job_id, e.what());
  }
  return job;
}

void JobExecutor::publish(const IngestJob& job, const RasterGrid& normalized, const BinaryMask& mask,
                          std::size_t crop_w, std::size_t crop_h) {
  std::lock_guard lock(publish_mutex_);
  const auto dir = config_.lake_artifacts(job.lake) / safe_file_name(job.granule.granule_id);
  const auto obs = AreaObservation::from_count(job.lake, job.granule.acquired_at, mask.water_count(),
                                               normalized.pixel_size_m(), job.granule.granule_id);
  const auto series_path = config_.series_path(job.lake);
  AreaSeries series = read_series_csv(series_path, job.lake);
  series.upsert(obs);
  write_series_csv(series_path, series);

  const auto image = dir / "overlay.png";
  write_file_atomic(image, encode_png(render_overlay(normalized, mask, crop_w, crop_h)));

  // Publication is an idempotent overwrite; an older acquisition never replaces a newer one.
  const auto pointer = config_.latest_pointer(job.lake);
  std::optional<LatestArtifact> current;
  try {
    current = read_latest(pointer);
  } catch (const DataError& e) {
    spdlog::warn("replacing {}: {}", pointer.string(), e.what());
  }
  if (current && current->granule_id != job.granule.granule_id && current->acquired_at >= obs.acquired_at) return;
  const LatestArtifact latest{job.lake,         job.granule.granule_id, obs.acquired_at,
                              obs.area_m2,      obs.pixel_count,        image.string(),
                              (dir / "mask.tif").string(), series_path.string()};
  write_file_atomic(pointer, latest_to_json(latest));
}

IngestJob execute_job(IngestJob job, const PipelineConfig& config, CatalogClient& client, JobStore& store,
                      const Clock& clock) {
  return JobExecutor(config, client, store, clock).execute(std::move(job));
}

std::size_t recover_interrupted(JobStore& store, TimePoint now) {
  std::size_t n = 0;
  for (auto job : store.jobs()) {
    if (job.state == JobState::Downloading || job.state == JobState::Preprocessed ||
        job.state == JobState::Segmented) {
      job.fail("interrupted in state " + std::string(to_string(job.state)), now);
      store.put(job);
      ++n;
    }
  }
  return n;
}

std::size_t requeue_failed(JobStore& store, const PipelineConfig& config, TimePoint now) {
  std::size_t n = 0;
  for (auto job : store.jobs_in(JobState::Failed)) {
    if (job.attempts >= config.scheduler.max_attempts) continue;
    const auto wait = config.scheduler.retry_backoff * (1L << std::min(job.attempts - 1, 20u));
    if (now < job.updated_at + wait) continue;
    job.advance(JobState::Discovered, now);
    store.put(job);
    ++n;
  }
  return n;
}

Scheduler::Scheduler(const PipelineConfig& config, CatalogClient& client, JobStore& store, Clock& clock)
    : config_(config), client_(client), store_(store), clock_(clock), executor_(config, client, store, clock) {
  if (const auto n = recover_interrupted(store_, clock_.now())) spdlog::warn("{} interrupted job(s) marked failed", n);
}

Scheduler::TickReport Scheduler::tick(std::stop_token stop) {
  bool expected = false;
  if (!running_.compare_exchange_strong(expected, true)) {
    ++suppressed_;
    TickReport report;
    report.outcome = Outcome::Suppressed;
    return report;
  }
  struct Release {
    std::atomic<bool>& flag;
    ~Release() { flag = false; }
  } release{running_};
  ++ticks_run_;

  TickReport report;
  const TimePoint now = clock_.now();
  try {
    report.discovered = poll_once(store_, config_, client_, now, hooks_).size();
    poll_failures_ = 0;
  } catch (const Error& e) {
    report.outcome = Outcome::PollFailed;
    report.error = e.what();
    const auto* remote = dynamic_cast<const RemoteError*>(&e);
    report.error_retryable = remote && remote->retryable();
    ++poll_failures_;
    spdlog::warn("poll failed: {}", e.what());
  }

  requeue_failed(store_, config_, now);
  const auto pending = store_.jobs_in(JobState::Discovered);
  std::atomic<std::size_t> next{0}, published{0}, failed{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size() && !stop.stop_requested(); i = next++) {
      try {
        const auto done = executor_.execute(pending[i]);
        ++(done.state == JobState::Published ? published : failed);
      } catch (const StateError& e) {
        spdlog::warn("skipping {}: {}", pending[i].job_id, e.what());
      }
    }
  };
  const auto workers = std::min<std::size_t>(config_.scheduler.workers, pending.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  report.published = published;
  report.failed = failed;
  return report;
}

std::chrono::seconds Scheduler::next_delay() const {
  const unsigned failures = poll_failures_.load();
  if (failures == 0) return config_.scheduler.interval;
  const auto backoff = config_.scheduler.poll_backoff * (1L << std::min(failures - 1, 20u));
  return std::min(backoff, config_.scheduler.interval);
}

void Scheduler::run(std::stop_token stop) {
  TimePoint next = clock_.now();
  while (!stop.stop_requested()) {
    if (!clock_.wait_until(next, stop)) break;
    const TimePoint started = clock_.now();
    tick(stop);
    const auto delay = next_delay();
    next = started + delay;
    for (const TimePoint now = clock_.now(); next <= now; next += delay) ++suppressed_;
  }
}

}  // namespace lakewatch
