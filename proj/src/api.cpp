#include "lakewatch/api.hpp"

#include <charconv>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "lakewatch/error.hpp"
#include "lakewatch/fsutil.hpp"
#include "lakewatch/ingest.hpp"
#include "lakewatch/jobs.hpp"
#include "lakewatch/timeseries.hpp"

namespace lakewatch {

namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reject(httplib::Response& res, int status, std::string_view reason) {
  reply(res, status, json{{"reason", reason}});
}

std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

json latest_summary(const LatestArtifact& a) {
  return json{{"granule_id", a.granule_id}, {"acquired_at", format_iso8601(a.acquired_at)}, {"area_m2", a.area_m2}};
}

}  // namespace

struct ApiServer::Impl {
  PipelineConfig config;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  void health(httplib::Response& res) const {
    json body{{"status", "ok"}, {"last_poll_at", nullptr}, {"jobs_pending", 0}, {"jobs_failed", 0}};
    if (!std::filesystem::is_directory(config.paths.state)) {
      body["status"] = "degraded";
    } else {
      try {
        std::optional<TimePoint> last_poll;
        if (const auto counts = read_job_counts(config.paths.state, &last_poll)) {
          body["jobs_pending"] = counts->pending;
          body["jobs_failed"] = counts->failed;
          if (last_poll) body["last_poll_at"] = format_iso8601(*last_poll);
        }
      } catch (const Error& e) {
        spdlog::warn("health: {}", e.what());
        body["status"] = "degraded";
      }
    }
    reply(res, 200, body);
  }

  void lakes(httplib::Response& res) const {
    json out = json::array();
    for (const auto& lake : config.lakes) {
      json item{{"name", lake.name()},
                {"center_lat", lake.aoi.center_lat},
                {"center_lon", lake.aoi.center_lon},
                {"altitude_m", lake.aoi.altitude_m},
                {"product_kind", to_string(lake.product_kind)},
                {"latest", nullptr}};
      try {
        if (const auto latest = read_latest(config.latest_pointer(lake.name()))) item["latest"] = latest_summary(*latest);
      } catch (const Error& e) {
        spdlog::warn("lakes: {}", e.what());
      }
      out.push_back(std::move(item));
    }
    reply(res, 200, out);
  }

  void latest_image(const std::string& name, httplib::Response& res) const {
    if (!config.find_lake(name)) return reject(res, 404, "unknown_lake");
    std::optional<LatestArtifact> latest;
    try {
      latest = read_latest(config.latest_pointer(name));
    } catch (const Error& e) {
      spdlog::warn("latest {}: {}", name, e.what());
      return reject(res, 503, "store_unreadable");
    }
    if (!latest) return reject(res, 404, "no_results");
    const auto png = read_file(latest->image_path);
    if (!png) return reject(res, 503, "store_unreadable");
    res.set_header("X-Acquired-At", format_iso8601(latest->acquired_at));
    res.set_header("X-Area-M2", shortest(latest->area_m2));
    res.set_header("X-Granule-Id", latest->granule_id);
    res.set_content(*png, "image/png");
  }

  void areas(const std::string& name, const httplib::Request& req, httplib::Response& res) const {
    if (!config.find_lake(name)) return reject(res, 404, "unknown_lake");
    TimePoint from = TimePoint::min(), to = TimePoint::max();
    if (req.has_param("from")) {
      const auto t = parse_iso8601(req.get_param_value("from"));
      if (!t) return reject(res, 400, "bad_date");
      from = *t;
    }
    if (req.has_param("to")) {
      const auto t = parse_iso8601(req.get_param_value("to"));
      if (!t) return reject(res, 400, "bad_date");
      to = *t;
    }
    if (to < from) return reject(res, 400, "inverted_range");
    AreaSeries series;
    try {
      series = read_series_csv(config.series_path(name), name);
    } catch (const Error& e) {
      spdlog::warn("areas {}: {}", name, e.what());
      return reject(res, 503, "store_unreadable");
    }
    const AreaSeries selected = series.between(from, to);
    json out = json::array();
    for (const auto& o : selected.observations()) {
      out.push_back(json{{"date", format_iso8601(o.acquired_at)},
                         {"area_m2", o.area_m2},
                         {"pixel_count", o.pixel_count},
                         {"granule_id", o.source_granule}});
    }
    reply(res, 200, out);
  }
};

ApiServer::ApiServer(PipelineConfig config) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  auto& s = impl_->server;
  Impl* impl = impl_.get();
  s.Get("/health", [impl](const auto&, auto& res) { impl->health(res); });
  s.Get("/lakes", [impl](const auto&, auto& res) { impl->lakes(res); });
  s.Get(R"(/images/([^/]+)/latest)", [impl](const auto& req, auto& res) { impl->latest_image(req.matches[1], res); });
  s.Get(R"(/lakes/([^/]+)/areas)", [impl](const auto& req, auto& res) { impl->areas(req.matches[1], req, res); });
  s.set_error_handler([](const auto&, auto& res) {
    if (res.body.empty()) reject(res, res.status, res.status == 404 ? "not_found" : "error");
  });
  s.set_exception_handler([](const auto&, auto& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      spdlog::error("request failed: {}", e.what());
    } catch (...) {
    }
    reject(res, 500, "internal");
  });
}

ApiServer::~ApiServer() {
  stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    impl_->port = port;
  } else {
    impl_->port = -1;
  }
  if (impl_->port <= 0) throw RemoteError("cannot listen on " + host + ":" + std::to_string(port), false);
  return impl_->port;
}

void ApiServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

void ApiServer::stop() { impl_->server.stop(); }

int ApiServer::port() const { return impl_->port; }

}  // namespace lakewatch
