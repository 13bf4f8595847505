#include "lakewatch/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "lakewatch/error.hpp"
#include "lakewatch/fsutil.hpp"

namespace lakewatch {

namespace {

constexpr const char* kCsvHeader = "date,area_m2,pixel_count,pixel_size_m,source_granule";

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line_no, const char* what) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DataError("series CSV line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
  return v;
}

}  // namespace

AreaObservation AreaObservation::from_count(std::string lake, TimePoint acquired_at,
                                            std::uint64_t pixel_count, double pixel_size_m,
                                            std::string source_granule) {
  if (!(pixel_size_m > 0.0)) throw DataError("pixel size must be positive");
  AreaObservation o;
  o.lake = std::move(lake);
  o.acquired_at = acquired_at;
  o.pixel_count = pixel_count;
  o.pixel_size_m = pixel_size_m;
  o.area_m2 = static_cast<double>(pixel_count) * pixel_size_m * pixel_size_m;
  o.source_granule = std::move(source_granule);
  return o;
}

AreaSeries::AreaSeries(std::string lake, std::vector<AreaObservation> observations)
    : lake_(std::move(lake)), observations_(std::move(observations)) {
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    if (observations_[i].lake != lake_) {
      throw DataError("observation for lake '" + observations_[i].lake + "' in series of '" + lake_ + "'");
    }
    if (i > 0 && !(observations_[i - 1].acquired_at < observations_[i].acquired_at)) {
      throw DataError("series acquisition times must be strictly increasing");
    }
  }
}

AreaSeries AreaSeries::normalized(std::string lake, std::vector<AreaObservation> observations) {
  std::stable_sort(observations.begin(), observations.end(),
                   [](const AreaObservation& a, const AreaObservation& b) { return a.acquired_at < b.acquired_at; });
  return AreaSeries(std::move(lake), std::move(observations));
}

void AreaSeries::upsert(AreaObservation obs) {
  if (obs.lake != lake_) throw DataError("observation lake does not match series");
  std::erase_if(observations_, [&](const AreaObservation& o) { return o.source_granule == obs.source_granule; });
  auto pos = std::lower_bound(observations_.begin(), observations_.end(), obs.acquired_at,
                              [](const AreaObservation& o, TimePoint t) { return o.acquired_at < t; });
  if (pos != observations_.end() && pos->acquired_at == obs.acquired_at) {
    throw DataError("another granule already holds acquisition time " + format_iso8601(obs.acquired_at));
  }
  observations_.insert(pos, std::move(obs));
}

AreaSeries AreaSeries::between(TimePoint from, TimePoint to) const {
  std::vector<AreaObservation> out;
  for (const auto& o : observations_) {
    if (o.acquired_at >= from && o.acquired_at <= to) out.push_back(o);
  }
  return AreaSeries(lake_, std::move(out));
}

double mask_area(const BinaryMask& mask, double pixel_size_m) {
  if (!(pixel_size_m > 0.0)) throw DataError("pixel size must be positive");
  return static_cast<double>(mask.water_count()) * pixel_size_m * pixel_size_m;
}

AreaSeries summer_maxima(const AreaSeries& series, SeasonWindow window) {
  std::map<int, const AreaObservation*> best;
  for (const auto& o : series.observations()) {
    const unsigned m = calendar_month(o.acquired_at);
    if (m < window.first_month || m > window.last_month) continue;
    auto& slot = best[calendar_year(o.acquired_at)];
    if (!slot || o.area_m2 > slot->area_m2) slot = &o;
  }
  std::vector<AreaObservation> out;
  out.reserve(best.size());
  for (const auto& [year, obs] : best) out.push_back(*obs);
  return AreaSeries(series.lake(), std::move(out));
}

TrendReport linear_trend(const AreaSeries& series) {
  const auto& obs = series.observations();
  if (obs.size() < 2) throw DataError("linear trend needs at least 2 observations");
  TrendReport rep;
  rep.n_points = obs.size();
  rep.epoch_year = fractional_year(obs.front().acquired_at);

  const auto n = static_cast<double>(obs.size());
  std::vector<double> x(obs.size()), y(obs.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    x[i] = fractional_year(obs[i].acquired_at) - rep.epoch_year;
    y[i] = obs[i].area_m2;
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  rep.slope_m2_per_year = sxy / sxx;
  rep.intercept_m2 = my - rep.slope_m2_per_year * mx;
  if (syy == 0.0) {
    rep.r_squared = 0.0;
    rep.r_squared_degenerate = true;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const double r = y[i] - (rep.intercept_m2 + rep.slope_m2_per_year * x[i]);
      ss_res += r * r;
    }
    rep.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return rep;
}

std::string series_to_csv(const AreaSeries& series) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& o : series.observations()) {
    out += format_iso8601(o.acquired_at);
    out += ',' + shortest(o.area_m2);
    out += ',' + std::to_string(o.pixel_count);
    out += ',' + shortest(o.pixel_size_m);
    out += ',' + csv_field(o.source_granule);
    out += '\n';
  }
  return out;
}

AreaSeries series_from_csv(const std::string& lake, const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<AreaObservation> obs;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kCsvHeader) throw DataError("series CSV has unexpected header '" + line + "'");
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw DataError("series CSV line " + std::to_string(line_no) + ": expected 5 fields");
    AreaObservation o;
    o.lake = lake;
    o.acquired_at = parse_iso8601_or_throw(f[0], "date");
    o.area_m2 = parse_number<double>(f[1], line_no, "area_m2");
    o.pixel_count = parse_number<std::uint64_t>(f[2], line_no, "pixel_count");
    o.pixel_size_m = parse_number<double>(f[3], line_no, "pixel_size_m");
    o.source_granule = f[4];
    obs.push_back(std::move(o));
  }
  return AreaSeries(lake, std::move(obs));
}

AreaSeries read_series_csv(const std::filesystem::path& path, const std::string& lake) {
  auto text = read_file(path);
  if (!text) return AreaSeries(lake, {});
  return series_from_csv(lake, *text);
}

void write_series_csv(const std::filesystem::path& path, const AreaSeries& series) {
  write_file_atomic(path, series_to_csv(series));
}

}  // namespace lakewatch
