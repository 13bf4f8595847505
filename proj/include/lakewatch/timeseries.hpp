#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lakewatch/segmentation.hpp"
#include "lakewatch/timeutil.hpp"

namespace lakewatch {

struct AreaObservation {
  std::string lake;
  TimePoint acquired_at;
  double area_m2 = 0.0;  // always pixel_count * pixel_size_m^2
  std::uint64_t pixel_count = 0;
  double pixel_size_m = 0.0;
  std::string source_granule;

  static AreaObservation from_count(std::string lake, TimePoint acquired_at, std::uint64_t pixel_count,
                                    double pixel_size_m, std::string source_granule);

  bool operator==(const AreaObservation&) const = default;
};

/// Observations of one lake with strictly increasing acquisition times.
class AreaSeries {
 public:
  AreaSeries() = default;
  /// Validates ordering and lake identity; throws DataError otherwise.
  AreaSeries(std::string lake, std::vector<AreaObservation> observations);

  /// Sorts by acquisition time first; duplicate timestamps are an error.
  static AreaSeries normalized(std::string lake, std::vector<AreaObservation> observations);

  const std::string& lake() const { return lake_; }
  const std::vector<AreaObservation>& observations() const { return observations_; }
  std::size_t size() const { return observations_.size(); }
  bool empty() const { return observations_.empty(); }

  /// Inserts or replaces (by source_granule) keeping time order.
  void upsert(AreaObservation obs);

  /// Observations with from <= acquired_at <= to.
  AreaSeries between(TimePoint from, TimePoint to) const;

  bool operator==(const AreaSeries&) const = default;

 private:
  std::string lake_;
  std::vector<AreaObservation> observations_;
};

/// water pixels * pixel_size_m^2
double mask_area(const BinaryMask& mask, double pixel_size_m);

/// Inclusive calendar-month window; June-September by default.
struct SeasonWindow {
  unsigned first_month = 6;
  unsigned last_month = 9;
};

/// One observation per calendar year: the largest area inside the window.
/// Ties keep the earlier acquisition. Years without in-window data vanish.
AreaSeries summer_maxima(const AreaSeries& series, SeasonWindow window = {});

struct TrendReport {
  double slope_m2_per_year = 0.0;
  double intercept_m2 = 0.0;  // fitted area at the first observation
  double r_squared = 0.0;
  std::size_t n_points = 0;
  double epoch_year = 0.0;  // fractional year of the first observation
  bool r_squared_degenerate = false;  // constant series
};

/// Ordinary least squares of area against calendar fractional years since
/// the first observation. Throws DataError for fewer than two points.
TrendReport linear_trend(const AreaSeries& series);

/// CSV with header `date,area_m2,pixel_count,pixel_size_m,source_granule`.
std::string series_to_csv(const AreaSeries& series);
AreaSeries series_from_csv(const std::string& lake, const std::string& csv_text);

/// Missing file reads as an empty series. Writes go through a temp file and rename.
AreaSeries read_series_csv(const std::filesystem::path& path, const std::string& lake);
void write_series_csv(const std::filesystem::path& path, const AreaSeries& series);

}  // namespace lakewatch
