#include <doctest.h>

#include <httplib.h>

#include <functional>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "ingest_support.hpp"
#include "lakewatch/api.hpp"
#include "lakewatch/clock.hpp"
#include "lakewatch/fsutil.hpp"
#include "lakewatch/ingest.hpp"
#include "lakewatch/timeseries.hpp"

using namespace lakewatch;
using namespace lakewatch::testing;
using nlohmann::json;

namespace {

struct Served {
  explicit Served(const PipelineConfig& cfg) : server(cfg) {
    server.bind("127.0.0.1", 0);
    server.start();
  }
  httplib::Result get(const std::string& target) {
    httplib::Client cli("127.0.0.1", server.port());
    return cli.Get(target);
  }
  ApiServer server;
};

/// Publishes one synthetic granule per timestamp, in the given order.
void publish(const PipelineConfig& cfg, const std::vector<std::pair<std::string, TimePoint>>& granules,
             const std::function<void()>& after_each = {}) {
  FakeCatalog cat;
  std::uint64_t seed = 100;
  for (const auto& [id, t] : granules) {
    cat.add_synthetic(cfg.lakes[0].aoi, id, t, ProductKind::GrdRtc20m, SyntheticScene{.seed = seed++});
  }
  JobStore store(cfg.paths.state);
  VirtualClock clock(utc(2030, 1, 1));
  poll_once(store, cfg, cat, clock.now());
  for (const auto& [id, t] : granules) {
    const auto job = store.get(IngestJob::make_id("tsho_rolpa", id));
    REQUIRE(job);
    REQUIRE(execute_job(*job, cfg, cat, store, clock).state == JobState::Published);
    if (after_each) after_each();
  }
}

std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    out[e.path().string()] = e.is_regular_file() ? sha256_hex(*read_file(e.path())) : "dir";
  }
  return out;
}

}  // namespace

TEST_SUITE("dissemination-api") {
  TEST_CASE("health reports store state") {
    TempDir tmp;
    const auto cfg = test_config(tmp.path());
    Served api(cfg);

    auto res = api.get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["status"] == "degraded");

    std::filesystem::create_directories(cfg.paths.state);
    res = api.get("/health");
    auto body = json::parse(res->body);
    CHECK(body["status"] == "ok");
    CHECK(body["jobs_pending"] == 0);
    CHECK(body["jobs_failed"] == 0);
    CHECK(body["last_poll_at"].is_null());

    FakeCatalog cat;
    cat.add(synthetic_record(cfg.lakes[0].aoi, "BAD", utc(2021, 7, 1), ProductKind::GrdRtc20m), "garbage");
    {
      JobStore store(cfg.paths.state);
      VirtualClock clock(utc(2021, 7, 2));
      const auto jobs = poll_once(store, cfg, cat, clock.now());
      REQUIRE(jobs.size() == 1);
      execute_job(jobs[0], cfg, cat, store, clock);
    }
    body = json::parse(api.get("/health")->body);
    CHECK(body["status"] == "ok");
    CHECK(body["jobs_failed"] == 1);
    CHECK(body["jobs_pending"] == 0);
    CHECK(body["last_poll_at"] == "2021-07-02T00:00:00Z");

    write_file_atomic(cfg.paths.state / "jobs.jsonl", "garbage\n");
    CHECK(json::parse(api.get("/health")->body)["status"] == "degraded");
  }

  TEST_CASE("latest image endpoint") {
    TempDir tmp;
    const auto cfg = test_config(tmp.path());
    Served api(cfg);

    auto res = api.get("/images/atlantis/latest");
    REQUIRE(res);
    CHECK(res->status == 404);
    CHECK(json::parse(res->body)["reason"] == "unknown_lake");

    res = api.get("/images/tsho_rolpa/latest");
    CHECK(res->status == 404);
    CHECK(json::parse(res->body)["reason"] == "no_results");

    publish(cfg, {{"G_A", utc(2021, 6, 1, 0)}, {"G_B", utc(2021, 7, 1, 0)}});
    res = api.get("/images/tsho_rolpa/latest");
    REQUIRE(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "image/png");
    CHECK(res->body.substr(1, 3) == "PNG");
    CHECK(res->get_header_value("X-Granule-Id") == "G_B");
    CHECK(res->get_header_value("X-Acquired-At") == "2021-07-01T00:00:00Z");
    const auto latest = *read_latest(cfg.latest_pointer("tsho_rolpa"));
    CHECK(std::stod(res->get_header_value("X-Area-M2")) == latest.area_m2);
    CHECK(res->body == *read_file(latest.image_path));

    write_file_atomic(cfg.latest_pointer("tsho_rolpa"), "{ not json");
    res = api.get("/images/tsho_rolpa/latest");
    CHECK(res->status == 503);
    CHECK(json::parse(res->body)["reason"] == "store_unreadable");
  }

  TEST_CASE("latest acquisition never decreases across responses") {
    TempDir tmp;
    const auto cfg = test_config(tmp.path());
    Served api(cfg);
    const std::vector<std::pair<std::string, TimePoint>> order{
        {"G2", utc(2021, 8, 1)}, {"G1", utc(2021, 7, 1)}, {"G4", utc(2021, 9, 15)}, {"G3", utc(2021, 9, 1)}};
    std::string previous;
    publish(cfg, order, [&] {
      const auto res = api.get("/images/tsho_rolpa/latest");
      REQUIRE(res->status == 200);
      const auto at = res->get_header_value("X-Acquired-At");
      CHECK(at >= previous);
      previous = at;
    });
    CHECK(previous == "2021-09-15T00:00:00Z");
  }

  TEST_CASE("area series endpoint") {
    TempDir tmp;
    const auto cfg = test_config(tmp.path());
    Served api(cfg);

    auto res = api.get("/lakes/tsho_rolpa/areas");
    REQUIRE(res->status == 200);
    CHECK(json::parse(res->body).empty());

    publish(cfg, {{"G1", utc(2021, 6, 1)}, {"G2", utc(2021, 7, 1)}, {"G3", utc(2021, 8, 1)}});
    const auto series = read_series_csv(cfg.series_path("tsho_rolpa"), "tsho_rolpa");
    REQUIRE(series.size() == 3);

    const auto full = json::parse(api.get("/lakes/tsho_rolpa/areas")->body);
    REQUIRE(full.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& o = series.observations()[i];
      CHECK(full[i]["date"] == format_iso8601(o.acquired_at));
      CHECK(full[i]["area_m2"].get<double>() == o.area_m2);
      CHECK(full[i]["pixel_count"].get<std::uint64_t>() == o.pixel_count);
      CHECK(full[i]["granule_id"] == o.source_granule);
    }

    const auto two = json::parse(api.get("/lakes/tsho_rolpa/areas?from=2021-06-15&to=2021-08-01T00:00:00Z")->body);
    REQUIRE(two.size() == 2);
    CHECK(two[0]["granule_id"] == "G2");
    CHECK(two[1]["granule_id"] == "G3");

    res = api.get("/lakes/tsho_rolpa/areas?from=2021-09-01&to=2021-01-01");
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["reason"] == "inverted_range");
    res = api.get("/lakes/tsho_rolpa/areas?from=yesterday");
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["reason"] == "bad_date");
    CHECK(api.get("/lakes/atlantis/areas")->status == 404);
  }

  TEST_CASE("lakes listing") {
    TempDir tmp;
    const auto cfg = test_config(tmp.path());
    Served api(cfg);
    auto body = json::parse(api.get("/lakes")->body);
    REQUIRE(body.size() == 1);
    CHECK(body[0]["name"] == "tsho_rolpa");
    CHECK(body[0]["altitude_m"] == 4580.0);
    CHECK(body[0]["latest"].is_null());
    publish(cfg, {{"G1", utc(2021, 6, 1)}});
    body = json::parse(api.get("/lakes")->body);
    CHECK(body[0]["latest"]["granule_id"] == "G1");
    CHECK(api.get("/nope")->status == 404);
  }

  TEST_CASE("requests never modify the store") {
    TempDir tmp;
    const auto cfg = test_config(tmp.path());
    publish(cfg, {{"G1", utc(2021, 6, 1)}, {"G2", utc(2021, 7, 1)}});
    const auto before = snapshot(tmp.path());
    Served api(cfg);
    httplib::Client cli("127.0.0.1", api.server.port());

    const std::vector<std::string> paths{"/health",
                                         "/lakes",
                                         "/images/tsho_rolpa/latest",
                                         "/images/atlantis/latest",
                                         "/images/../latest",
                                         "/lakes/tsho_rolpa/areas",
                                         "/lakes/tsho_rolpa/areas?from=2021-06-15",
                                         "/lakes/tsho_rolpa/areas?to=garbage",
                                         "/lakes/%2e%2e/areas",
                                         "/state/jobs.jsonl"};
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> pick(0, paths.size() - 1);
    std::uniform_int_distribution<int> method(0, 3);
    for (int i = 0; i < 200; ++i) {
      const auto& p = paths[pick(rng)];
      httplib::Result res;
      switch (method(rng)) {
        case 0: res = cli.Post(p, "{}", "application/json"); break;
        case 1: res = cli.Put(p, "x", "text/plain"); break;
        case 2: res = cli.Delete(p); break;
        default: res = cli.Get(p); break;
      }
      REQUIRE(res);
      CHECK(res->status != 500);
    }
    CHECK(snapshot(tmp.path()) == before);
  }
}
