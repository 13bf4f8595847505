// lakewatch: command-line entry point for the lake monitoring pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 remote/service error.

#include <pthread.h>
#include <signal.h>

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lakewatch/api.hpp"
#include "lakewatch/catalog.hpp"
#include "lakewatch/clock.hpp"
#include "lakewatch/config.hpp"
#include "lakewatch/error.hpp"
#include "lakewatch/fsutil.hpp"
#include "lakewatch/geotiff.hpp"
#include "lakewatch/graph_model.hpp"
#include "lakewatch/imaging.hpp"
#include "lakewatch/ingest.hpp"
#include "lakewatch/jobs.hpp"
#include "lakewatch/metrics.hpp"
#include "lakewatch/mock_catalog.hpp"
#include "lakewatch/normalize.hpp"
#include "lakewatch/speckle.hpp"
#include "lakewatch/timeseries.hpp"

namespace lw = lakewatch;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRemote = 3 };

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

/// Blocks SIGINT and SIGTERM for this thread and every thread started later.
void block_termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

/// Waits for SIGINT/SIGTERM or a stop request. Returns the signal, or 0.
int wait_for_signal(std::stop_token stop) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  const timespec tick{0, 200'000'000};
  while (!stop.stop_requested()) {
    const int sig = sigtimedwait(&set, nullptr, &tick);
    if (sig > 0) return sig;
  }
  return 0;
}

lw::PollHooks fault_hooks() {
  lw::PollHooks hooks;
  const char* fault = std::getenv("LAKEWATCH_FAULT");
  if (!fault || !*fault) return hooks;
  if (std::string(fault) != "after_job_write") {
    throw lw::UsageError("LAKEWATCH_FAULT: unknown fault '" + std::string(fault) + "'");
  }
  hooks.after_jobs_recorded = [](const std::string& lake) {
    spdlog::warn("fault injection: killing process after recording jobs for {}", lake);
    spdlog::default_logger()->flush();
    std::raise(SIGKILL);
  };
  return hooks;
}

lw::TimePoint parse_time(const std::string& text, const char* what) {
  const auto t = lw::parse_iso8601(text);
  if (!t) throw lw::UsageError(std::string(what) + ": not an ISO-8601 date: " + text);
  return *t;
}

lw::LakeAOI aoi_from_file(const std::string& path) {
  const auto text = lw::read_file(path);
  if (!text) throw lw::UsageError("cannot read AOI file " + path);
  const auto gj = lw::parse_geojson_polygon(*text);
  const auto bb = gj.polygon.bbox();
  return lw::make_lake_aoi(gj.name.value_or("aoi"), gj.polygon.to_wkt(), 0.5 * (bb.min_y + bb.max_y),
                           0.5 * (bb.min_x + bb.max_x), 0.0, gj.crs_id);
}

lw::AreaSeries load_series(const std::string& csv, std::string lake) {
  const auto text = lw::read_file(csv);
  if (!text) throw lw::DataError("unreadable file: " + csv);
  if (lake.empty()) lake = std::filesystem::path(csv).stem().string();
  return lw::series_from_csv(lake, *text);
}

json observation_json(const lw::AreaObservation& o) {
  return {{"date", lw::format_iso8601(o.acquired_at)},
          {"area_m2", o.area_m2},
          {"pixel_count", o.pixel_count},
          {"pixel_size_m", o.pixel_size_m},
          {"granule_id", o.source_granule}};
}

json trend_json(const lw::TrendReport& t) {
  return {{"slope_m2_per_year", t.slope_m2_per_year},
          {"intercept_m2", t.intercept_m2},
          {"r_squared", t.r_squared},
          {"r_squared_degenerate", t.r_squared_degenerate},
          {"n_points", t.n_points},
          {"epoch_year", t.epoch_year}};
}

struct Options {
  // preprocess / segment / evaluate / area
  std::string in, out, aoi, prob_out, pred, truth, mask, backend = "threshold", model, render = "equalize";
  double buffer_m = lw::kDefaultBufferM, threshold = 0.5, softness = lw::kDefaultSoftness;
  bool speckle = false, keep_all = false;
  lw::LeeParams lee;
  std::vector<std::uint64_t> counts;
  // series / trend
  std::string csv, lake, from, to, plot;
  bool summer = false, all_points = false;
  unsigned season_first = 6, season_last = 9;
  // service commands
  std::string config, host;
  int port = -1;
  unsigned granules = 3, step_days = 12;
  std::string start = "2021-06-01T06:00:00Z";
  std::uint64_t seed = 1;
};

int cmd_preprocess(const Options& o) {
  const auto grid = lw::load_raster(o.in);
  lw::RasterGrid crop = lw::crop_to_aoi(grid, aoi_from_file(o.aoi), o.buffer_m);
  if (o.speckle) crop = lw::enhanced_lee(lw::to_linear_power(crop), o.lee);
  const auto padded = lw::pad_to_lattice(crop);
  const auto normalized = o.render == "log" ? lw::log_stretch(padded) : lw::equalize(padded);
  lw::write_raster(o.out, normalized, lw::SampleType::UInt8);
  emit({{"output", o.out},
        {"width", normalized.width()},
        {"height", normalized.height()},
        {"crop_width", crop.width()},
        {"crop_height", crop.height()},
        {"speckle_filtered", o.speckle},
        {"render", o.render}});
  return kOk;
}

int cmd_segment(const Options& o) {
  std::unique_ptr<lw::SegmenterBackend> backend;
  if (o.backend == "model") {
    if (o.model.empty()) throw lw::UsageError("--model is required with --backend model");
    backend = std::make_unique<lw::GraphModelBackend>(o.model);
  } else if (o.backend == "threshold") {
    backend = std::make_unique<lw::ThresholdBackend>(o.softness);
  } else {
    throw lw::UsageError("--backend must be threshold or model");
  }
  const auto grid = lw::load_raster(o.in);
  const auto pm = backend->segment(lw::segmentation_input(*backend, grid));
  auto mask = lw::binarize(pm, o.threshold);
  if (!o.keep_all) mask = lw::largest_component(mask);
  lw::write_raster(o.out, lw::mask_raster(mask, grid.geo()), lw::SampleType::UInt8);
  if (!o.prob_out.empty()) {
    lw::write_raster(o.prob_out, lw::probability_raster(pm, grid.geo()), lw::SampleType::Float32);
  }
  emit({{"output", o.out},
        {"backend", backend->identifier()},
        {"water_pixels", mask.water_count()},
        {"area_m2", lw::mask_area(mask, grid.pixel_size_m())},
        {"low_confidence", pm.low_confidence}});
  return kOk;
}

int cmd_evaluate(const Options& o) {
  lw::ConfusionCounts cc;
  if (!o.counts.empty()) {
    if (o.counts.size() != 4 || !o.pred.empty()) throw lw::UsageError("give either --counts tp,tn,fp,fn or masks");
    cc = {o.counts[0], o.counts[1], o.counts[2], o.counts[3]};
  } else {
    if (o.pred.empty() || o.truth.empty()) throw lw::UsageError("--pred and --truth are required");
    cc = lw::confusion(lw::mask_from_raster(lw::load_raster(o.pred)),
                       lw::mask_from_raster(lw::load_raster(o.truth)));
  }
  const auto m = lw::metrics(cc);
  emit({{"accuracy", m.accuracy},
        {"precision", m.precision},
        {"recall", m.recall},
        {"f1", m.f1},
        {"iou", m.iou},
        {"tp", cc.tp},
        {"tn", cc.tn},
        {"fp", cc.fp},
        {"fn", cc.fn},
        {"degenerate", m.degenerate}});
  return kOk;
}

int cmd_area(const Options& o) {
  const auto grid = lw::load_raster(o.mask);
  const auto mask = lw::mask_from_raster(grid);
  emit({{"pixel_count", mask.water_count()},
        {"pixel_size_m", grid.pixel_size_m()},
        {"area_m2", lw::mask_area(mask, grid.pixel_size_m())}});
  return kOk;
}

lw::AreaSeries selected_series(const Options& o) {
  lw::AreaSeries series;
  if (!o.csv.empty()) {
    series = load_series(o.csv, o.lake);
  } else if (!o.config.empty() && !o.lake.empty()) {
    const auto cfg = lw::load_config(o.config);
    if (!cfg.find_lake(o.lake)) throw lw::UsageError("lake '" + o.lake + "' is not configured");
    series = lw::read_series_csv(cfg.series_path(o.lake), o.lake);
  } else {
    throw lw::UsageError("give --csv, or --config with --lake");
  }
  if (!o.from.empty() || !o.to.empty()) {
    const auto from = o.from.empty() ? lw::TimePoint::min() : parse_time(o.from, "--from");
    const auto to = o.to.empty() ? lw::TimePoint::max() : parse_time(o.to, "--to");
    if (to < from) throw lw::UsageError("--from must not be after --to");
    series = series.between(from, to);
  }
  return series;
}

lw::SeasonWindow season(const Options& o) {
  if (o.season_first < 1 || o.season_last > 12 || o.season_first > o.season_last) {
    throw lw::UsageError("season months must satisfy 1 <= first <= last <= 12");
  }
  return {o.season_first, o.season_last};
}

int cmd_series(const Options& o) {
  auto series = selected_series(o);
  if (o.summer) series = lw::summer_maxima(series, season(o));
  json out = json::array();
  for (const auto& obs : series.observations()) out.push_back(observation_json(obs));
  emit(out);
  return kOk;
}

int cmd_trend(const Options& o) {
  const auto series = selected_series(o);
  const auto maxima = lw::summer_maxima(series, season(o));
  const auto& fitted = o.all_points ? series : maxima;
  const auto report = lw::linear_trend(fitted);
  if (!o.plot.empty()) lw::write_file_atomic(o.plot, lw::encode_png(lw::render_series_plot(series, maxima, report)));
  json j = trend_json(report);
  j["lake"] = series.lake();
  j["points"] = o.all_points ? "all" : "summer_maxima";
  emit(j);
  return kOk;
}

int cmd_ingest_once(const Options& o) {
  const auto cfg = lw::load_config(o.config);
  lw::HttpCatalogClient client(cfg.catalog.url, cfg.catalog.timeout);
  lw::JobStore store(cfg.paths.state);
  lw::SystemClock clock;
  lw::Scheduler scheduler(cfg, client, store, clock);
  scheduler.set_hooks(fault_hooks());
  const auto report = scheduler.tick();
  const auto counts = store.counts();
  json j{{"discovered", report.discovered},
         {"published", report.published},
         {"failed", report.failed},
         {"jobs_pending", counts.pending},
         {"jobs_failed", counts.failed},
         {"jobs_published", counts.published}};
  if (report.error) j["poll_error"] = *report.error;
  emit(j);
  return report.outcome == lw::Scheduler::Outcome::PollFailed ? kRemote : kOk;
}

void apply_server_overrides(lw::PipelineConfig& cfg, const Options& o) {
  if (!o.host.empty()) cfg.server.host = o.host;
  if (o.port >= 0) cfg.server.port = o.port;
}

int cmd_serve(const Options& o) {
  auto cfg = lw::load_config(o.config);
  apply_server_overrides(cfg, o);
  lw::ApiServer api(cfg);
  const int port = api.bind(cfg.server.host, cfg.server.port);
  emit({{"listening", "http://" + cfg.server.host + ":" + std::to_string(port)}});
  std::jthread waiter([&](std::stop_token st) {
    if (const int sig = wait_for_signal(st)) spdlog::info("signal {}: shutting down", sig);
    api.stop();
  });
  api.listen();
  return kOk;
}

int cmd_run(const Options& o) {
  auto cfg = lw::load_config(o.config);
  apply_server_overrides(cfg, o);
  lw::HttpCatalogClient client(cfg.catalog.url, cfg.catalog.timeout);
  lw::JobStore store(cfg.paths.state);
  lw::SystemClock clock;
  lw::Scheduler scheduler(cfg, client, store, clock);
  scheduler.set_hooks(fault_hooks());
  lw::ApiServer api(cfg);
  const int port = api.bind(cfg.server.host, cfg.server.port);
  api.start();
  emit({{"listening", "http://" + cfg.server.host + ":" + std::to_string(port)},
        {"interval_s", cfg.scheduler.interval.count()}});
  std::jthread loop([&](std::stop_token st) { scheduler.run(st); });
  if (const int sig = wait_for_signal({})) spdlog::info("signal {}: shutting down", sig);
  loop.request_stop();
  loop.join();
  api.stop();
  return kOk;
}

int cmd_mock_catalog(const Options& o) {
  const auto cfg = lw::load_config(o.config);
  lw::MockCatalog mock(o.port < 0 ? 0 : o.port);
  const auto start = parse_time(o.start, "--start");
  std::uint64_t seed = o.seed;
  for (const auto& lake : cfg.lakes) {
    const double ps = lw::product_pixel_size(lake.product_kind);
    for (unsigned i = 0; i < o.granules; ++i) {
      const auto t = start + std::chrono::days{static_cast<long>(i) * o.step_days};
      std::string id = "S1_" + lake.name() + "_" + lw::format_iso8601(t).substr(0, 10);
      std::erase(id, '-');
      lw::SyntheticScene scene;
      scene.seed = seed++;
      scene.semi_major_m += 20.0 * i;
      mock.add_granule(lw::synthetic_record(lake.aoi, id, t, lake.product_kind),
                       lw::synthetic_granule_tiff(lake.aoi, ps, scene));
    }
  }
  emit({{"url", mock.base_url()}, {"granules", o.granules * cfg.lakes.size()}});
  std::jthread waiter([&](std::stop_token st) {
    if (const int sig = wait_for_signal(st)) spdlog::info("signal {}: shutting down", sig);
    mock.stop();
  });
  mock.wait();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  block_termination_signals();
  spdlog::set_default_logger(spdlog::stderr_color_mt("lakewatch"));

  CLI::App app{"Glacial lake monitoring from SAR imagery"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  Options o;

  auto* pre = app.add_subcommand("preprocess", "Crop, optionally despeckle, pad and equalize a granule");
  pre->add_option("--in", o.in, "Input GeoTIFF")->required()->check(CLI::ExistingFile);
  pre->add_option("--aoi", o.aoi, "AOI polygon as GeoJSON")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", o.out, "Output 8-bit GeoTIFF")->required();
  pre->add_option("--buffer", o.buffer_m, "AOI buffer in metres")->check(CLI::NonNegativeNumber);
  pre->add_flag("--speckle", o.speckle, "Apply the Enhanced Lee filter");
  pre->add_option("--window", o.lee.window, "Lee window size (odd)");
  pre->add_option("--damping", o.lee.damping, "Lee damping factor");
  pre->add_option("--looks", o.lee.looks, "Equivalent number of looks");
  pre->add_option("--render", o.render, "8-bit rendering: equalize (display) or log (threshold segmentation)")
      ->check(CLI::IsMember({"equalize", "log"}));

  auto* seg = app.add_subcommand("segment", "Segment water in a raster");
  seg->add_option("--in", o.in, "Input GeoTIFF")->required()->check(CLI::ExistingFile);
  seg->add_option("--out", o.out, "Output mask GeoTIFF")->required();
  seg->add_option("--prob", o.prob_out, "Also write the probability map");
  seg->add_option("--backend", o.backend, "threshold or model");
  seg->add_option("--model", o.model, "Model graph file for --backend model");
  seg->add_option("--threshold", o.threshold, "Probability threshold")->check(CLI::Range(0.0, 1.0));
  seg->add_option("--softness", o.softness, "Sigmoid softness in intensity levels")->check(CLI::PositiveNumber);
  seg->add_flag("--keep-all", o.keep_all, "Keep every water component");

  auto* eval = app.add_subcommand("evaluate", "Segmentation metrics for a prediction against ground truth");
  eval->add_option("--pred", o.pred, "Predicted mask")->check(CLI::ExistingFile);
  eval->add_option("--truth", o.truth, "Ground-truth mask")->check(CLI::ExistingFile);
  eval->add_option("--counts", o.counts, "tp,tn,fp,fn instead of masks")->delimiter(',');

  auto* area = app.add_subcommand("area", "Water surface area of a mask");
  area->add_option("--mask", o.mask, "Mask GeoTIFF")->required()->check(CLI::ExistingFile);

  const auto add_series_options = [&](CLI::App* sub) {
    sub->add_option("--csv", o.csv, "Area series CSV")->check(CLI::ExistingFile);
    sub->add_option("--config", o.config, "Pipeline config (with --lake)")->check(CLI::ExistingFile);
    sub->add_option("--lake", o.lake, "Lake name");
    sub->add_option("--from", o.from, "Earliest acquisition (ISO-8601)");
    sub->add_option("--to", o.to, "Latest acquisition (ISO-8601)");
    sub->add_option("--season-first", o.season_first, "First month of the summer window");
    sub->add_option("--season-last", o.season_last, "Last month of the summer window");
  };
  auto* series = app.add_subcommand("series", "Print an area series as JSON");
  add_series_options(series);
  series->add_flag("--summer-maxima", o.summer, "Reduce to one maximum per summer");

  auto* trend = app.add_subcommand("trend", "Linear trend of summer maxima");
  add_series_options(trend);
  trend->add_flag("--all", o.all_points, "Fit every observation instead of summer maxima");
  trend->add_option("--plot", o.plot, "Write a PNG plot");

  auto* once = app.add_subcommand("ingest-once", "Poll the catalog once and process pending jobs");
  once->add_option("--config", o.config, "Pipeline config")->required()->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "Serve the read-only API");
  serve->add_option("--config", o.config, "Pipeline config")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", o.host, "Listen address");
  serve->add_option("--port", o.port, "Listen port (0 picks one)")->check(CLI::Range(0, 65535));

  auto* run = app.add_subcommand("run", "Scheduler and API in one process");
  run->add_option("--config", o.config, "Pipeline config")->required()->check(CLI::ExistingFile);
  run->add_option("--host", o.host, "Listen address");
  run->add_option("--port", o.port, "Listen port (0 picks one)")->check(CLI::Range(0, 65535));

  auto* mock = app.add_subcommand("mock-catalog", "Serve synthetic granules for the configured lakes");
  mock->add_option("--config", o.config, "Pipeline config")->required()->check(CLI::ExistingFile);
  mock->add_option("--port", o.port, "Listen port (0 picks one)")->check(CLI::Range(0, 65535));
  mock->add_option("--granules", o.granules, "Granules per lake");
  mock->add_option("--start", o.start, "First acquisition time");
  mock->add_option("--step-days", o.step_days, "Days between acquisitions")->check(CLI::PositiveNumber);
  mock->add_option("--seed", o.seed, "Speckle seed of the first granule");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*pre) return cmd_preprocess(o);
    if (*seg) return cmd_segment(o);
    if (*eval) return cmd_evaluate(o);
    if (*area) return cmd_area(o);
    if (*series) return cmd_series(o);
    if (*trend) return cmd_trend(o);
    if (*once) return cmd_ingest_once(o);
    if (*serve) return cmd_serve(o);
    if (*run) return cmd_run(o);
    if (*mock) return cmd_mock_catalog(o);
  } catch (const lw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case lw::ErrorKind::Usage: return kUsage;
      case lw::ErrorKind::Remote: return kRemote;
      default: return kData;
    }
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
