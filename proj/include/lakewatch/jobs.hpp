#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lakewatch/catalog.hpp"
#include "lakewatch/timeutil.hpp"

namespace lakewatch {

enum class JobState { Discovered, Downloading, Preprocessed, Segmented, Published, Failed };

const char* to_string(JobState s);
JobState parse_job_state(std::string_view text);

/// Forward steps Discovered -> Downloading -> Preprocessed -> Segmented ->
/// Published, any non-terminal state -> Failed, and the retry requeue
/// Failed -> Discovered.
bool transition_allowed(JobState from, JobState to);

inline constexpr unsigned kDefaultMaxAttempts = 3;

struct IngestJob {
  std::string job_id;
  std::string lake;
  GranuleRecord granule;
  JobState state = JobState::Discovered;
  unsigned attempts = 0;
  std::optional<std::string> last_error;
  TimePoint updated_at;

  /// Deterministic id: "<lake>:<granule_id>".
  static std::string make_id(std::string_view lake, std::string_view granule_id);
  static IngestJob discovered(std::string lake, GranuleRecord granule, TimePoint now);

  /// Throws StateError("invalid state transition: A -> B").
  void advance(JobState to, TimePoint now);
  /// Moves to Failed with the error recorded and attempts incremented.
  void fail(std::string error, TimePoint now);

  bool terminal() const { return state == JobState::Published || state == JobState::Failed; }
  bool operator==(const IngestJob&) const = default;
};

struct JobCounts {
  std::size_t pending = 0;  // any non-terminal state
  std::size_t failed = 0;
  std::size_t published = 0;
};

/// Durable job state as an append-only JSON-lines log. Each line is a job
/// snapshot, a per-lake high-water mark or a poll timestamp; the current
/// state is the last record per key. A torn final line (crash mid-append)
/// is ignored on load. All methods are thread-safe.
class JobStore {
 public:
  /// Opens (creating if needed) `<dir>/jobs.jsonl`. Throws DataError on a
  /// corrupt record other than the final line.
  explicit JobStore(std::filesystem::path dir);

  bool contains(const std::string& job_id) const;
  std::optional<IngestJob> get(const std::string& job_id) const;
  /// All jobs in first-seen order.
  std::vector<IngestJob> jobs() const;
  std::vector<IngestJob> jobs_in(JobState state) const;
  JobCounts counts() const;

  /// Appends a snapshot and fsyncs before returning.
  void put(const IngestJob& job);

  std::optional<TimePoint> high_water_mark(const std::string& lake) const;
  void set_high_water_mark(const std::string& lake, TimePoint mark);
  std::optional<TimePoint> last_poll_at() const;
  void record_poll(TimePoint at);

  /// Rewrites the log with one record per key, atomically.
  void compact();
  std::size_t log_lines() const;

  const std::filesystem::path& log_path() const { return log_path_; }

 private:
  void apply_line(const std::string& line);
  void append(const std::string& line);

  std::filesystem::path log_path_;
  mutable std::mutex mutex_;
  std::map<std::string, IngestJob> jobs_;
  std::vector<std::string> order_;
  std::map<std::string, TimePoint> marks_;
  std::optional<TimePoint> last_poll_;
  std::size_t lines_ = 0;
};

/// Read-only view used by the API: loads the log without creating anything.
/// Returns nullopt when the store does not exist; throws DataError if corrupt.
std::optional<JobCounts> read_job_counts(const std::filesystem::path& state_dir,
                                         std::optional<TimePoint>* last_poll = nullptr);

}  // namespace lakewatch
