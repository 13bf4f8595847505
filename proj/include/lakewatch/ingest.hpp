#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "lakewatch/catalog.hpp"
#include "lakewatch/clock.hpp"
#include "lakewatch/config.hpp"
#include "lakewatch/jobs.hpp"
#include "lakewatch/segmentation.hpp"

namespace lakewatch {

/// The newest published result of a lake, as referenced by its pointer file.
struct LatestArtifact {
  std::string lake;
  std::string granule_id;
  TimePoint acquired_at;
  double area_m2 = 0.0;
  std::uint64_t pixel_count = 0;
  std::string image_path;
  std::string mask_path;
  std::string series_path;
  bool operator==(const LatestArtifact&) const = default;
};

std::string latest_to_json(const LatestArtifact& a);
LatestArtifact latest_from_json(const std::string& text);
/// nullopt when the pointer does not exist; DataError when it is unreadable.
std::optional<LatestArtifact> read_latest(const std::filesystem::path& pointer);

/// The overlap kept behind the newest seen acquisition when advancing a mark.
inline constexpr std::chrono::hours kMarkOverlap{24};

struct PollHooks {
  /// Runs after a lake's new jobs are durably recorded and before its mark advances.
  std::function<void(const std::string& lake)> after_jobs_recorded;
};

/// Queries every lake from its high-water mark to `now` and records a
/// Discovered job for each unseen granule. The mark moves to the newest
/// returned acquisition minus kMarkOverlap, never backwards, and only after
/// the jobs are on disk.
std::vector<IngestJob> poll_once(JobStore& store, const PipelineConfig& config, CatalogClient& client,
                                 TimePoint now, const PollHooks& hooks = {});

/// Configured backend; a model that fails to load falls back to the
/// threshold backend with a warning.
std::unique_ptr<SegmenterBackend> make_backend(const PipelineConfig& config);

/// Runs the processing chain for a Discovered job and persists each state.
/// Stage failures end in Failed with last_error and attempts + 1; a job not
/// in Discovered raises StateError.
class JobExecutor {
 public:
  JobExecutor(const PipelineConfig& config, CatalogClient& client, JobStore& store, const Clock& clock);

  IngestJob execute(IngestJob job);

 private:
  void publish(const IngestJob& job, const RasterGrid& normalized, const BinaryMask& mask, std::size_t crop_w,
               std::size_t crop_h);

  const PipelineConfig& config_;
  CatalogClient& client_;
  JobStore& store_;
  const Clock& clock_;
  DownloadCache cache_;
  std::unique_ptr<SegmenterBackend> backend_;
  std::mutex publish_mutex_;
};

IngestJob execute_job(IngestJob job, const PipelineConfig& config, CatalogClient& client, JobStore& store,
                      const Clock& clock);

/// Jobs left mid-chain by a crash are failed as "interrupted" so the retry
/// policy can pick them up. Returns how many were touched.
std::size_t recover_interrupted(JobStore& store, TimePoint now);

/// Failed jobs with attempts below the limit whose backoff elapsed go back
/// to Discovered. Returns how many were requeued.
std::size_t requeue_failed(JobStore& store, const PipelineConfig& config, TimePoint now);

class Scheduler {
 public:
  enum class Outcome { Ran, Suppressed, PollFailed };
  struct TickReport {
    Outcome outcome = Outcome::Ran;
    std::size_t discovered = 0;
    std::size_t published = 0;
    std::size_t failed = 0;
    std::optional<std::string> error;
    bool error_retryable = false;
  };

  Scheduler(const PipelineConfig& config, CatalogClient& client, JobStore& store, Clock& clock);

  void set_hooks(PollHooks hooks) { hooks_ = std::move(hooks); }

  /// One cycle: poll, requeue due retries, run pending jobs on the worker
  /// pool. Returns Suppressed if another cycle is in progress. A stop
  /// request lets in-flight jobs finish but starts no new ones.
  TickReport tick(std::stop_token stop = {});

  /// Ticks every interval until stopped. Triggers missed while a cycle was
  /// running are dropped; failed polls retry with doubling backoff capped at
  /// the interval.
  void run(std::stop_token stop);

  std::chrono::seconds next_delay() const;
  std::size_t ticks_run() const { return ticks_run_.load(); }
  std::size_t triggers_suppressed() const { return suppressed_.load(); }

 private:
  const PipelineConfig& config_;
  CatalogClient& client_;
  JobStore& store_;
  Clock& clock_;
  JobExecutor executor_;
  PollHooks hooks_;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> ticks_run_{0};
  std::atomic<std::size_t> suppressed_{0};
  std::atomic<unsigned> poll_failures_{0};
};

}  // namespace lakewatch
