// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <signal.h>
#include <tiffio.h>

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ingest_support.hpp"
#include "lakewatch/config.hpp"
#include "lakewatch/fsutil.hpp"
#include "lakewatch/geotiff.hpp"
#include "lakewatch/ingest.hpp"
#include "lakewatch/jobs.hpp"
#include "lakewatch/losses.hpp"
#include "lakewatch/metrics.hpp"
#include "lakewatch/normalize.hpp"
#include "lakewatch/speckle.hpp"
#include "lakewatch/timeseries.hpp"
#include "lee_oracle.hpp"
#include "process.hpp"
#include "support.hpp"

using namespace lakewatch;
using namespace lakewatch::testing;
using nlohmann::json;

namespace {

/// Thrown by `expect` with a description of the violated check.
struct Failure {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

/// Long-running CLI subcommand that announces itself with one JSON document.
class Daemon {
 public:
  Daemon(const std::filesystem::path& dir, const std::string& name, const std::vector<std::string>& args)
      : out_(dir / (name + ".out")), err_(dir / (name + ".err")), proc_(argv(args), out_, err_) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(15);
    while (std::chrono::steady_clock::now() < deadline) {
      const auto text = read_file(out_).value_or("");
      auto j = json::parse(text, nullptr, false);
      if (!j.is_discarded() && j.is_object()) {
        banner = std::move(j);
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    throw Failure{name + " did not start: " + read_file(err_).value_or("")};
  }
  ~Daemon() { proc_.terminate(); }

  json banner;

 private:
  static std::vector<std::string> argv(const std::vector<std::string>& args) {
    std::vector<std::string> v{LAKEWATCH_CLI};
    v.insert(v.end(), args.begin(), args.end());
    return v;
  }

  std::filesystem::path out_;
  std::filesystem::path err_;
  Process proc_;
};

json pipeline_config(const std::string& catalog_url) {
  return json{{"lakes",
               {{{"name", "tsho_rolpa"},
                 {"center_lat", 27.8667},
                 {"center_lon", 86.4667},
                 {"altitude_m", 4580},
                 {"polygon_wkt", "POLYGON((86.44 27.855, 86.50 27.855, 86.50 27.875, 86.44 27.875, 86.44 27.855))"},
                 {"product_kind", "GRD_RTC_20m"}}}},
              {"paths", {{"state", "state"}, {"cache", "cache"}, {"artifacts", "artifacts"}, {"series", "series"}}},
              {"catalog", {{"url", catalog_url}, {"start", "2014-10-01"}, {"timeout_s", 10}}},
              {"scheduler", {{"interval_s", 3600}, {"workers", 2}, {"max_attempts", 3}}},
              {"server", {{"host", "127.0.0.1"}, {"port", 0}}}};
}

std::filesystem::path write_config(const TempDir& dir, const std::string& catalog_url) {
  const auto path = dir / "lakewatch.json";
  write_file_atomic(path, pipeline_config(catalog_url).dump(2));
  return path;
}

/// Starts a three-granule mock catalog and writes a config pointing at it.
struct MockSetup {
  explicit MockSetup(const TempDir& dir)
      : mock(dir.path(), "mock",
             {"mock-catalog", "--config", write_config(dir, "http://127.0.0.1:1").string(), "--port", "0",
              "--granules", "3", "--log-level", "warn"}),
        config(write_config(dir, mock.banner.at("url").get<std::string>())),
        pipeline(load_config(config)) {}
  Daemon mock;
  std::filesystem::path config;
  PipelineConfig pipeline;
};

const std::vector<std::string> kGranules{"S1_tsho_rolpa_20210601", "S1_tsho_rolpa_20210613",
                                          "S1_tsho_rolpa_20210625"};

json ingest_once(const TempDir& dir, const std::filesystem::path& config) {
  const auto r = run_cli(dir.path(), {"ingest-once", "--config", config.string(), "--log-level", "warn"});
  expect(r.exited(0), "ingest-once failed (" + r.describe() + ")");
  return json::parse(r.out);
}

// ---------------------------------------------------------------- criteria

std::string metric_reproduction() {
  const auto m = metrics(ConfusionCounts{140443, 3057227, 7787, 5807});
  const std::vector<std::tuple<const char*, double, double>> table{{"accuracy", m.accuracy, 0.9958},
                                                                   {"precision", m.precision, 0.9475},
                                                                   {"recall", m.recall, 0.9603},
                                                                   {"f1", m.f1, 0.9538}};
  for (const auto& [name, got, want] : table) {
    expect(std::abs(got - want) <= 5e-4, std::string(name) + " = " + fmt(got) + ", expected " + fmt(want));
  }
  expect(std::abs(m.iou - 0.9117) <= 5e-4, "iou = " + fmt(m.iou) + ", expected 0.9117");
  expect(std::abs(m.iou - 0.9130) > 5e-4, "iou unexpectedly matches the batch-mean figure 0.9130");
  return "acc " + fmt(m.accuracy, 4) + " prec " + fmt(m.precision, 4) + " rec " + fmt(m.recall, 4) + " f1 " +
         fmt(m.f1, 4) + " iou " + fmt(m.iou, 5) + " (aggregate; reported 0.9130 not reproduced)";
}

std::string loss_gradients() {
  using LossFn = std::function<LossResult(const ProbabilityMap&, const BinaryMask&)>;
  const std::vector<std::pair<const char*, LossFn>> losses{
      {"bce", [](auto& p, auto& y) { return bce_loss(p, y); }},
      {"focal", [](auto& p, auto& y) { return focal_loss(p, y); }},
      {"dice", [](auto& p, auto& y) { return dice_loss(p, y); }},
      {"total", [](auto& p, auto& y) { return total_loss(p, y); }}};
  const double h = 1e-5;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    std::mt19937_64 rng(seed);
    const auto pm = random_probabilities(rng, 16, 16);
    const auto y = random_mask(rng, 16, 16, 0.4);
    for (const auto& [name, fn] : losses) {
      const auto res = fn(pm, y);
      for (std::size_t i = 0; i < pm.probs.size(); ++i) {
        auto plus = pm, minus = pm;
        plus.probs[i] += h;
        minus.probs[i] -= h;
        const double fd = (fn(plus, y).value - fn(minus, y).value) / (2 * h);
        const double an = res.gradient[i];
        const double rel = std::abs(fd - an) / std::max(std::abs(an), 1e-300);
        worst = std::max(worst, rel);
        expect(rel < 1e-5, std::string(name) + " gradient seed " + std::to_string(seed) + " pixel " +
                               std::to_string(i) + " relative error " + fmt(rel));
      }
    }
    const double bce = bce_loss(pm, y).value;
    const double focal = focal_loss(pm, y, {0.5, 0.0}).value;
    expect(std::abs(focal - 0.5 * bce) <= 1e-12, "focal(gamma 0, alpha 0.5) != bce/2 for seed " + std::to_string(seed));
    const double sum = bce + focal_loss(pm, y).value + dice_loss(pm, y).value;
    expect(std::abs(total_loss(pm, y).value - sum) <= 1e-12, "total != sum of parts for seed " + std::to_string(seed));
  }
  return "50 seeds x 4 losses x 256 pixels, worst relative error " + fmt(worst, 3);
}

double variance(std::span<const float> v) {
  double m = 0.0;
  for (float x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (float x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

std::string enhanced_lee_properties() {
  std::mt19937_64 rng(303);
  for (int trial = 0; trial < 20; ++trial) {
    std::gamma_distribution<float> speckle(1.0f + trial % 4, 1.0f / (1.0f + trial % 4));
    std::vector<float> v(32 * 32);
    for (auto& x : v) x = 20.0f * speckle(rng);
    const auto valid = random_validity(rng, v.size(), trial % 2 ? 0.85 : 1.0);
    RasterGrid g(32, 32, test_geo(), v, valid, std::nullopt, Scale::LinearPower);
    const LeeParams params{3 + 2 * static_cast<std::size_t>(trial % 3), 0.5 + 0.25 * trial, 1.0 + trial % 5};
    const auto out = enhanced_lee(g, params);
    const auto ref = oracle_enhanced_lee(g, static_cast<long>(params.window), params.damping, params.looks);
    for (std::size_t i = 0; i < v.size(); ++i) {
      expect(std::bit_cast<std::uint32_t>(out.data()[i]) == std::bit_cast<std::uint32_t>(ref[i]),
             "grid " + std::to_string(trial) + " pixel " + std::to_string(i) + " differs from the oracle");
    }
  }

  const auto flat = constant_grid(24, 24, 7.5f);
  expect(enhanced_lee(flat) == flat, "constant region changed");

  std::vector<float> point(21 * 21, 1.0f);
  point[10 * 21 + 10] = 1000.0f;
  const auto pg = make_grid(21, 21, point);
  const double mu = (48.0 + 1000.0) / 49.0;
  const double sd = std::sqrt((48.0 * (1.0 - mu) * (1.0 - mu) + (1000.0 - mu) * (1000.0 - mu)) / 49.0);
  expect(sd / mu >= LeeParams{}.cmax(), "point fixture is not in the Ci >= Cmax regime");
  expect(enhanced_lee(pg).at(10, 10) == 1000.0f, "strong point scatterer was smoothed");

  std::gamma_distribution<float> single_look(1.0f, 1.0f);
  std::vector<float> noisy(96 * 96);
  for (auto& x : noisy) x = 50.0f * single_look(rng);
  const auto ng = make_grid(96, 96, noisy);
  const double before = variance(ng.data()), after = variance(enhanced_lee(ng).data());
  expect(after < before, "variance did not drop");
  return "20/20 grids bit-identical to the oracle; variance ratio " + fmt(after / before, 3);
}

std::string normalization_properties(const TempDir& dir) {
  std::mt19937_64 rng(404);
  auto v = uniform_values(rng, 60 * 40, 0.001f, 3.0f);
  const auto valid = random_validity(rng, v.size(), 0.8);
  RasterGrid g(60, 40, test_geo(), v, valid, std::nullopt, Scale::LinearPower);
  const auto out = equalize(g);
  expect(out.scale() == Scale::UInt8, "output scale is not 8-bit");
  expect(out.nodata() && *out.nodata() == static_cast<float>(kNodata8), "nodata sentinel missing");
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float x = out.data()[i];
    expect(x >= 0.0f && x <= 255.0f && x == std::round(x), "level outside 0..255");
    expect(out.validity()[i] == valid[i], "validity changed");
    if (!valid[i]) expect(x == static_cast<float>(kNodata8), "invalid pixel is not the sentinel");
    else expect(x >= static_cast<float>(kLutFloor), "valid pixel collides with the sentinel");
  }
  for (int k = 0; k < 5000; ++k) {
    const std::size_t i = rng() % v.size(), j = rng() % v.size();
    if (!valid[i] || !valid[j] || !(v[i] < v[j])) continue;
    expect(out.data()[i] <= out.data()[j], "rank order violated");
  }

  write_raster(dir / "eq.tif", out, SampleType::UInt8);
  TIFF* tif = TIFFOpen((dir / "eq.tif").c_str(), "r");
  expect(tif != nullptr, "cannot reopen 8-bit output");
  std::uint16_t bits = 0;
  TIFFGetField(tif, TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFClose(tif);
  expect(bits == 8, "stored with " + std::to_string(bits) + " bits per sample");
  expect(load_raster(dir / "eq.tif") == out, "8-bit round trip changed the raster");

  std::vector<float> two(64 * 64);
  for (std::size_t i = 0; i < two.size(); ++i) two[i] = i % 3 ? 0.2f : 4.0f;
  const auto tl = equalize(make_grid(64, 64, two));
  for (std::size_t i = 0; i < two.size(); ++i) {
    expect(tl.data()[i] == (two[i] < 1.0f ? static_cast<float>(kLutFloor) : 255.0f), "two-level image not at extremes");
  }

  std::vector<float> ramp(256 * 64);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<float>(i) / static_cast<float>(ramp.size());
  std::shuffle(ramp.begin(), ramp.end(), rng);
  const auto rq = equalize(make_grid(256, 64, ramp));
  std::array<double, 256> hist{};
  for (float x : rq.data()) hist[static_cast<std::size_t>(x)] += 1.0;
  double cdf = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < 256; ++k) {
    cdf += hist[k] / static_cast<double>(ramp.size());
    worst = std::max(worst, std::abs(cdf - static_cast<double>(k + 1) / 256.0));
  }
  expect(worst <= 2.0 / 256.0, "ramp CDF deviation " + fmt(worst));
  return "ramp CDF deviation " + fmt(worst * 256.0, 3) + "/256; two-level -> {1, 255}";
}

std::string lattice_padding() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<std::size_t> dim(1, 700);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t w = dim(rng), h = dim(rng);
    auto v = uniform_values(rng, w * h, -5.0f, 5.0f);
    const auto valid = random_validity(rng, w * h, 0.9);
    RasterGrid g(w, h, test_geo(), v, valid, std::nullopt, Scale::LinearPower);
    const auto p = pad_to_lattice(g);
    const auto minimal = [](std::size_t n) { return (n + 255) / 256 * 256; };
    expect(p.width() == minimal(w) && p.height() == minimal(h),
           std::to_string(w) + "x" + std::to_string(h) + " padded to " + std::to_string(p.width()) + "x" +
               std::to_string(p.height()));
    expect(p.geo() == g.geo(), "georeference moved");
    for (std::size_t r = 0; r < p.height(); ++r) {
      for (std::size_t c = 0; c < p.width(); ++c) {
        if (r < h && c < w) {
          expect(std::bit_cast<std::uint32_t>(p.at(c, r)) == std::bit_cast<std::uint32_t>(g.at(c, r)) &&
                     p.valid(c, r) == g.valid(c, r),
                 "original pixel altered");
        } else {
          expect(p.at(c, r) == 0.0f && !p.valid(c, r), "pad pixel not zero and invalid");
        }
      }
    }
    expect(pad_to_lattice(p) == p, "padding is not idempotent");
  }
  return "100 sizes in 1..700";
}

std::string area_arithmetic() {
  auto one = empty_mask(1, 1);
  one.classes[0] = 1;
  const double a30 = mask_area(one, 30.0);
  expect(a30 == 900.0, "one 30 m pixel = " + fmt(a30));
  auto m = empty_mask(70, 60);
  for (std::size_t i = 0; i < 3850; ++i) m.classes[i] = 1;
  const double a20 = mask_area(m, 20.0);
  expect(a20 == 1.54e6, "3850 20 m pixels = " + fmt(a20));
  return "900 m2 and 1.54 km2";
}

AreaSeries synthetic_monthly_series(std::uint64_t seed) {
  using namespace std::chrono;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 2e4);
  const auto t0 = sys_days{year{2014} / January / 15};
  std::vector<AreaObservation> obs;
  for (int y = 2014; y < 2025; ++y) {
    for (unsigned mo = 1; mo <= 12; ++mo) {
      const TimePoint at = sys_days{year{y} / month{mo} / 15};
      const double t = duration<double>(at - t0).count() / (365.2425 * 86400.0);
      const double seasonal = 1e5 * std::cos(2.0 * std::numbers::pi * (t - 7.0 / 12.0));
      const double area = 1.5e6 + 8e3 * t + seasonal + noise(rng);
      AreaObservation o;
      o.lake = "tsho_rolpa";
      o.acquired_at = at;
      o.area_m2 = area;
      o.pixel_size_m = 20.0;
      o.source_granule = "G" + std::to_string(obs.size());
      obs.push_back(o);
    }
  }
  return AreaSeries("tsho_rolpa", obs);
}

std::string trend_recovery() {
  constexpr std::uint64_t kSeed = 7;
  const auto report = linear_trend(summer_maxima(synthetic_monthly_series(kSeed)));
  int hits = 0;
  for (std::uint64_t s = 1000; s < 1200; ++s) {
    hits += std::abs(linear_trend(summer_maxima(synthetic_monthly_series(s))).slope_m2_per_year - 8e3) <= 800.0;
  }
  const std::string context = "; " + std::to_string(hits) + "/200 other seeds within 10%";
  expect(report.n_points == 11, "expected 11 summer maxima, got " + std::to_string(report.n_points));
  expect(std::abs(report.slope_m2_per_year - 8e3) <= 800.0,
         "slope " + fmt(report.slope_m2_per_year) + " m2/yr outside 10% of 8000 (seed 7)" + context);
  return "slope " + fmt(report.slope_m2_per_year) + " m2/yr (seed 7)" + context;
}

std::string end_to_end() {
  TempDir dir;
  MockSetup setup(dir);
  const auto first = ingest_once(dir, setup.config);
  expect(first.at("discovered") == 3 && first.at("published") == 3, "first ingest: " + first.dump());

  const Daemon api(dir.path(), "serve",
                   {"serve", "--config", setup.config.string(), "--port", "0", "--log-level", "warn"});
  const auto url = api.banner.at("listening").get<std::string>();
  httplib::Client cli(url);
  const auto series = read_series_csv(setup.pipeline.series_path("tsho_rolpa"), "tsho_rolpa");
  expect(series.size() == 3, "series has " + std::to_string(series.size()) + " rows");

  const auto img = cli.Get("/images/tsho_rolpa/latest");
  expect(img && img->status == 200, "latest image request failed");
  expect(img->get_header_value("Content-Type") == "image/png", "latest is not a PNG");
  expect(img->get_header_value("X-Granule-Id") == kGranules.back(),
         "X-Granule-Id " + img->get_header_value("X-Granule-Id"));
  expect(img->get_header_value("X-Acquired-At") == "2021-06-25T06:00:00Z",
         "X-Acquired-At " + img->get_header_value("X-Acquired-At"));
  expect(std::stod(img->get_header_value("X-Area-M2")) == series.observations().back().area_m2,
         "X-Area-M2 does not match the series");
  const auto latest = read_latest(setup.pipeline.latest_pointer("tsho_rolpa"));
  expect(latest && read_file(latest->image_path) == img->body, "served image is not the published overlay");

  const auto areas = cli.Get("/lakes/tsho_rolpa/areas");
  expect(areas && areas->status == 200, "areas request failed");
  const auto rows = json::parse(areas->body);
  expect(rows.size() == 3, "areas returned " + std::to_string(rows.size()) + " rows");
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& o = series.observations()[i];
    expect(rows[i].at("date") == format_iso8601(o.acquired_at) && rows[i].at("area_m2") == o.area_m2 &&
               rows[i].at("pixel_count") == o.pixel_count && rows[i].at("granule_id") == kGranules[i] &&
               o.source_granule == kGranules[i],
           "row " + std::to_string(i) + " differs from the CSV: " + rows[i].dump());
  }

  const auto second = ingest_once(dir, setup.config);
  expect(second.at("discovered") == 0 && second.at("published") == 0, "second ingest: " + second.dump());
  expect(JobStore(setup.pipeline.paths.state).counts().published == 3, "job count changed on re-run");
  return "3 published, latest " + kGranules.back() + ", 3 rows, re-run discovered 0";
}

std::string fault_injection() {
  TempDir dir;
  MockSetup setup(dir);
  const auto crashed = run_cli(dir.path(), {"ingest-once", "--config", setup.config.string(), "--log-level", "warn"},
                               {"LAKEWATCH_FAULT=after_job_write"});
  expect(crashed.killed_by(SIGKILL), "fault run was not killed (" + crashed.describe() + ")");
  {
    const JobStore store(setup.pipeline.paths.state);
    expect(store.jobs().size() == 3, "crash left " + std::to_string(store.jobs().size()) + " jobs");
    expect(!store.high_water_mark("tsho_rolpa"), "mark advanced before the crash");
    expect(store.counts().published == 0, "jobs published before the crash");
  }

  const auto restart = ingest_once(dir, setup.config);
  expect(restart.at("published") == 3, "restart: " + restart.dump());
  const auto again = ingest_once(dir, setup.config);
  expect(again.at("discovered") == 0 && again.at("published") == 0, "re-poll: " + again.dump());

  std::map<std::string, int> published;
  std::ifstream log(setup.pipeline.paths.state / "jobs.jsonl");
  for (std::string line; std::getline(log, line);) {
    const auto rec = json::parse(line);
    if (rec.at("type") == "job" && rec.at("state") == "Published") ++published[rec.at("job_id").get<std::string>()];
  }
  for (const auto& g : kGranules) {
    const auto id = IngestJob::make_id("tsho_rolpa", g);
    expect(published[id] == 1, g + " published " + std::to_string(published[id]) + " times");
  }
  expect(published.size() == 3, "unexpected granules in the log");
  const auto series = read_series_csv(setup.pipeline.series_path("tsho_rolpa"), "tsho_rolpa");
  expect(series.size() == 3, "series has " + std::to_string(series.size()) + " rows");
  return "killed after job write, restart published 3, each granule once";
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<std::string()> check;
};

}  // namespace

int main() {
  TempDir scratch;
  const std::vector<Criterion> criteria{
      {1, "metric reproduction", 1.0, metric_reproduction},
      {2, "loss gradients", 10.0, loss_gradients},
      {3, "enhanced Lee properties", 10.0, enhanced_lee_properties},
      {4, "normalization properties", 5.0, [&] { return normalization_properties(scratch); }},
      {5, "lattice padding", 5.0, lattice_padding},
      {6, "area arithmetic", 1.0, area_arithmetic},
      {7, "trend recovery", 5.0, trend_recovery},
      {8, "end-to-end pipeline", 60.0, end_to_end},
      {9, "fault injection", 30.0, fault_injection},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    try {
      detail = c.check();
    } catch (const Failure& f) {
      ok = false;
      detail = f.what;
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && secs > c.budget_s) {
      ok = false;
      detail += "; over the " + fmt(c.budget_s) + " s budget";
    }
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << " (" << fmt(secs, 3) << " s): " << detail
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
