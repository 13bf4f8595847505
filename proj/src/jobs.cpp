#include "lakewatch/jobs.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "lakewatch/error.hpp"
#include "lakewatch/fsutil.hpp"

namespace lakewatch {

namespace {

constexpr const char* kLogName = "jobs.jsonl";

nlohmann::json job_to_json(const IngestJob& j) {
  return {{"type", "job"},
          {"job_id", j.job_id},
          {"lake", j.lake},
          {"granule", j.granule},
          {"state", to_string(j.state)},
          {"attempts", j.attempts},
          {"last_error", j.last_error ? nlohmann::json(*j.last_error) : nlohmann::json(nullptr)},
          {"updated_at", format_iso8601(j.updated_at)}};
}

IngestJob job_from_json(const nlohmann::json& o) {
  IngestJob j;
  j.job_id = o.at("job_id").get<std::string>();
  j.lake = o.at("lake").get<std::string>();
  j.granule = o.at("granule").get<GranuleRecord>();
  j.state = parse_job_state(o.at("state").get<std::string>());
  j.attempts = o.at("attempts").get<unsigned>();
  if (o.contains("last_error") && !o["last_error"].is_null()) j.last_error = o["last_error"].get<std::string>();
  j.updated_at = parse_iso8601_or_throw(o.at("updated_at").get<std::string>(), "updated_at");
  return j;
}

struct LogState {
  std::map<std::string, IngestJob>* jobs;
  std::vector<std::string>* order;
  std::map<std::string, TimePoint>* marks;
  std::optional<TimePoint>* last_poll;

  void apply(const std::string& line) {
    const auto o = nlohmann::json::parse(line);
    const std::string type = o.at("type").get<std::string>();
    if (type == "job") {
      IngestJob j = job_from_json(o);
      if (!jobs->contains(j.job_id)) order->push_back(j.job_id);
      (*jobs)[j.job_id] = std::move(j);
    } else if (type == "mark") {
      (*marks)[o.at("lake").get<std::string>()] = parse_iso8601_or_throw(o.at("at").get<std::string>(), "mark");
    } else if (type == "poll") {
      *last_poll = parse_iso8601_or_throw(o.at("at").get<std::string>(), "poll");
    } else {
      throw DataError("unknown record type '" + type + "'");
    }
  }
};

/// Applies every complete line; returns the byte length of the complete prefix.
std::size_t replay(const std::string& text, LogState& state, std::size_t* lines, const std::string& path) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // torn tail
    const std::string line = text.substr(pos, nl - pos);
    ++line_no;
    if (!line.empty()) {
      try {
        state.apply(line);
      } catch (const std::exception& e) {
        throw DataError("corrupt job store " + path + " line " + std::to_string(line_no) + ": " + e.what());
      }
      if (lines) ++*lines;
    }
    pos = nl + 1;
  }
  return pos;
}

JobCounts count_jobs(const std::map<std::string, IngestJob>& jobs) {
  JobCounts c;
  for (const auto& [id, j] : jobs) {
    if (j.state == JobState::Failed) ++c.failed;
    else if (j.state == JobState::Published) ++c.published;
    else ++c.pending;
  }
  return c;
}

}  // namespace

const char* to_string(JobState s) {
  switch (s) {
    case JobState::Discovered: return "Discovered";
    case JobState::Downloading: return "Downloading";
    case JobState::Preprocessed: return "Preprocessed";
    case JobState::Segmented: return "Segmented";
    case JobState::Published: return "Published";
    case JobState::Failed: return "Failed";
  }
  return "?";
}

JobState parse_job_state(std::string_view text) {
  for (auto s : {JobState::Discovered, JobState::Downloading, JobState::Preprocessed, JobState::Segmented,
                 JobState::Published, JobState::Failed}) {
    if (text == to_string(s)) return s;
  }
  throw DataError("unknown job state '" + std::string(text) + "'");
}

bool transition_allowed(JobState from, JobState to) {
  if (to == JobState::Failed) return from != JobState::Published && from != JobState::Failed;
  if (from == JobState::Failed) return to == JobState::Discovered;
  return from != JobState::Published && static_cast<int>(to) == static_cast<int>(from) + 1;
}

std::string IngestJob::make_id(std::string_view lake, std::string_view granule_id) {
  return std::string(lake) + ":" + std::string(granule_id);
}

IngestJob IngestJob::discovered(std::string lake, GranuleRecord granule, TimePoint now) {
  IngestJob j;
  j.job_id = make_id(lake, granule.granule_id);
  j.lake = std::move(lake);
  j.granule = std::move(granule);
  j.updated_at = now;
  return j;
}

void IngestJob::advance(JobState to, TimePoint now) {
  if (!transition_allowed(state, to)) {
    throw StateError(std::string("invalid state transition: ") + to_string(state) + " -> " + to_string(to));
  }
  state = to;
  updated_at = now;
}

void IngestJob::fail(std::string error, TimePoint now) {
  advance(JobState::Failed, now);
  last_error = std::move(error);
  ++attempts;
}

JobStore::JobStore(std::filesystem::path dir) : log_path_(dir / kLogName) {
  std::filesystem::create_directories(dir);
  const auto text = read_file(log_path_);
  if (!text) return;
  LogState state{&jobs_, &order_, &marks_, &last_poll_};
  const std::size_t complete = replay(*text, state, &lines_, log_path_.string());
  // Drop a torn tail so the next append starts on a fresh line.
  if (complete < text->size()) std::filesystem::resize_file(log_path_, complete);
}

bool JobStore::contains(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  return jobs_.contains(job_id);
}

std::optional<IngestJob> JobStore::get(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<IngestJob> JobStore::jobs() const {
  std::lock_guard lock(mutex_);
  std::vector<IngestJob> out;
  for (const auto& id : order_) out.push_back(jobs_.at(id));
  return out;
}

std::vector<IngestJob> JobStore::jobs_in(JobState state) const {
  auto all = jobs();
  std::erase_if(all, [&](const IngestJob& j) { return j.state != state; });
  return all;
}

JobCounts JobStore::counts() const {
  std::lock_guard lock(mutex_);
  return count_jobs(jobs_);
}

void JobStore::append(const std::string& line) {
  append_line_durable(log_path_, line);
  ++lines_;
}

void JobStore::put(const IngestJob& job) {
  std::lock_guard lock(mutex_);
  append(job_to_json(job).dump());
  if (!jobs_.contains(job.job_id)) order_.push_back(job.job_id);
  jobs_[job.job_id] = job;
}

std::optional<TimePoint> JobStore::high_water_mark(const std::string& lake) const {
  std::lock_guard lock(mutex_);
  const auto it = marks_.find(lake);
  if (it == marks_.end()) return std::nullopt;
  return it->second;
}

void JobStore::set_high_water_mark(const std::string& lake, TimePoint mark) {
  std::lock_guard lock(mutex_);
  append(nlohmann::json{{"type", "mark"}, {"lake", lake}, {"at", format_iso8601(mark)}}.dump());
  marks_[lake] = mark;
}

std::optional<TimePoint> JobStore::last_poll_at() const {
  std::lock_guard lock(mutex_);
  return last_poll_;
}

void JobStore::record_poll(TimePoint at) {
  std::lock_guard lock(mutex_);
  append(nlohmann::json{{"type", "poll"}, {"at", format_iso8601(at)}}.dump());
  last_poll_ = at;
}

void JobStore::compact() {
  std::lock_guard lock(mutex_);
  std::string text;
  std::size_t n = 0;
  for (const auto& id : order_) {
    text += job_to_json(jobs_.at(id)).dump() + "\n";
    ++n;
  }
  for (const auto& [lake, at] : marks_) {
    text += nlohmann::json{{"type", "mark"}, {"lake", lake}, {"at", format_iso8601(at)}}.dump() + "\n";
    ++n;
  }
  if (last_poll_) {
    text += nlohmann::json{{"type", "poll"}, {"at", format_iso8601(*last_poll_)}}.dump() + "\n";
    ++n;
  }
  write_file_atomic(log_path_, text);
  lines_ = n;
}

std::size_t JobStore::log_lines() const {
  std::lock_guard lock(mutex_);
  return lines_;
}

std::optional<JobCounts> read_job_counts(const std::filesystem::path& state_dir, std::optional<TimePoint>* last_poll) {
  const auto path = state_dir / kLogName;
  const auto text = read_file(path);
  if (!text) return std::nullopt;
  std::map<std::string, IngestJob> jobs;
  std::vector<std::string> order;
  std::map<std::string, TimePoint> marks;
  std::optional<TimePoint> poll;
  LogState state{&jobs, &order, &marks, &poll};
  replay(*text, state, nullptr, path.string());
  if (last_poll) *last_poll = poll;
  return count_jobs(jobs);
}

}  // namespace lakewatch
