#include "lakewatch/config.hpp"

#include <algorithm>
#include <initializer_list>
#include <set>

#include <nlohmann/json.hpp>

#include "lakewatch/error.hpp"
#include "lakewatch/fsutil.hpp"

namespace lakewatch {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw UsageError("config: " + where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw UsageError("config: unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("config: " + where + "." + key + " has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

LakeConfig parse_lake(const json& j, const std::filesystem::path& base, std::size_t index) {
  const std::string where = "lakes[" + std::to_string(index) + "]";
  check_keys(j, {"name", "center_lat", "center_lon", "altitude_m", "polygon_wkt", "aoi_geojson", "product_kind", "orbit"},
             where);
  const auto name = get_or<std::string>(j, "name", "", where);
  if (!valid_lake_name(name)) throw UsageError("config: " + where + ".name must match [a-z0-9_-]+");
  std::string wkt;
  if (j.contains("polygon_wkt")) {
    wkt = get_or<std::string>(j, "polygon_wkt", "", where);
  } else if (j.contains("aoi_geojson")) {
    const auto path = resolve(base, get_or<std::string>(j, "aoi_geojson", "", where));
    const auto text = read_file(path);
    if (!text) throw UsageError("config: cannot read " + path.string());
    const auto gj = parse_geojson_polygon(*text);
    if (!is_geographic_crs(gj.crs_id)) throw UsageError("config: " + where + " AOI must be in EPSG:4326");
    wkt = gj.polygon.to_wkt();
  } else {
    throw UsageError("config: " + where + " needs polygon_wkt or aoi_geojson");
  }
  if (!j.contains("center_lat") || !j.contains("center_lon")) {
    throw UsageError("config: " + where + " needs center_lat and center_lon");
  }
  LakeConfig lake;
  try {
    lake.aoi = make_lake_aoi(name, wkt, get_or<double>(j, "center_lat", 0, where),
                             get_or<double>(j, "center_lon", 0, where), get_or<double>(j, "altitude_m", 0, where));
  } catch (const DataError& e) {
    throw UsageError("config: " + where + ": " + e.what());
  }
  lake.product_kind = parse_product_kind(get_or<std::string>(j, "product_kind", "GRD_RTC_20m", where));
  lake.orbit_direction = parse_orbit_direction(get_or<std::string>(j, "orbit", "any", where));
  return lake;
}

}  // namespace

bool valid_lake_name(std::string_view name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

const LakeConfig* PipelineConfig::find_lake(std::string_view name) const {
  for (const auto& l : lakes)
    if (l.name() == name) return &l;
  return nullptr;
}

bool PipelineConfig::speckle_for(ProductKind k) const {
  return std::find(speckle_products.begin(), speckle_products.end(), k) != speckle_products.end();
}

std::filesystem::path PipelineConfig::series_path(std::string_view lake) const {
  return paths.series / (std::string(lake) + ".csv");
}

std::filesystem::path PipelineConfig::lake_artifacts(std::string_view lake) const {
  return paths.artifacts / std::string(lake);
}

std::filesystem::path PipelineConfig::latest_pointer(std::string_view lake) const {
  return lake_artifacts(lake) / "latest.json";
}

PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, {"lakes", "paths", "catalog", "scheduler", "segmentation", "lee", "crop", "server"}, "config");

  PipelineConfig cfg;
  if (!doc.contains("lakes") || !doc["lakes"].is_array() || doc["lakes"].empty()) {
    throw UsageError("config: at least one lake is required");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc["lakes"].size(); ++i) {
    auto lake = parse_lake(doc["lakes"][i], base_dir, i);
    if (!names.insert(lake.name()).second) throw UsageError("config: duplicate lake '" + lake.name() + "'");
    cfg.lakes.push_back(std::move(lake));
  }

  const json paths = doc.value("paths", json::object());
  check_keys(paths, {"state", "cache", "artifacts", "series"}, "paths");
  cfg.paths.state = resolve(base_dir, get_or<std::string>(paths, "state", "var/state", "paths"));
  cfg.paths.cache = resolve(base_dir, get_or<std::string>(paths, "cache", "var/cache", "paths"));
  cfg.paths.artifacts = resolve(base_dir, get_or<std::string>(paths, "artifacts", "var/artifacts", "paths"));
  cfg.paths.series = resolve(base_dir, get_or<std::string>(paths, "series", "var/series", "paths"));

  const json catalog = doc.value("catalog", json::object());
  check_keys(catalog, {"url", "start", "timeout_s"}, "catalog");
  cfg.catalog.url = get_or<std::string>(catalog, "url", cfg.catalog.url, "catalog");
  try {
    split_url(cfg.catalog.url);
  } catch (const UsageError&) {
    throw UsageError("config: catalog.url must include a scheme");
  }
  const auto start = parse_iso8601(get_or<std::string>(catalog, "start", "2014-10-01", "catalog"));
  if (!start) throw UsageError("config: catalog.start is not an ISO-8601 date");
  cfg.catalog.start = *start;
  cfg.catalog.timeout = std::chrono::seconds{get_or<long>(catalog, "timeout_s", 30, "catalog")};

  const json sched = doc.value("scheduler", json::object());
  check_keys(sched, {"interval_s", "workers", "max_attempts", "retry_backoff_s", "poll_backoff_s"}, "scheduler");
  cfg.scheduler.interval = std::chrono::seconds{get_or<long>(sched, "interval_s", 3600, "scheduler")};
  cfg.scheduler.workers = get_or<unsigned>(sched, "workers", 2, "scheduler");
  cfg.scheduler.max_attempts = get_or<unsigned>(sched, "max_attempts", 3, "scheduler");
  cfg.scheduler.retry_backoff = std::chrono::seconds{get_or<long>(sched, "retry_backoff_s", 300, "scheduler")};
  cfg.scheduler.poll_backoff = std::chrono::seconds{get_or<long>(sched, "poll_backoff_s", 30, "scheduler")};
  if (cfg.scheduler.interval.count() <= 0) throw UsageError("config: scheduler.interval_s must be > 0");
  if (cfg.scheduler.workers == 0) throw UsageError("config: scheduler.workers must be >= 1");
  if (cfg.scheduler.max_attempts == 0) throw UsageError("config: scheduler.max_attempts must be >= 1");

  const json seg = doc.value("segmentation", json::object());
  check_keys(seg, {"backend", "model_path", "threshold", "softness"}, "segmentation");
  cfg.segmentation.backend = get_or<std::string>(seg, "backend", "threshold", "segmentation");
  if (seg.contains("model_path")) {
    cfg.segmentation.model_path = resolve(base_dir, get_or<std::string>(seg, "model_path", "", "segmentation"));
  }
  cfg.segmentation.threshold = get_or<double>(seg, "threshold", 0.5, "segmentation");
  cfg.segmentation.softness = get_or<double>(seg, "softness", 8.0, "segmentation");
  if (cfg.segmentation.backend != "threshold" && cfg.segmentation.backend != "model") {
    throw UsageError("config: segmentation.backend must be \"threshold\" or \"model\"");
  }
  if (cfg.segmentation.backend == "model" &&
      (!cfg.segmentation.model_path || !std::filesystem::exists(*cfg.segmentation.model_path))) {
    throw UsageError("config: segmentation.model_path must name an existing file when backend is \"model\"");
  }
  if (!(cfg.segmentation.threshold > 0.0 && cfg.segmentation.threshold < 1.0)) {
    throw UsageError("config: segmentation.threshold must lie in (0, 1)");
  }
  if (!(cfg.segmentation.softness > 0.0)) throw UsageError("config: segmentation.softness must be > 0");

  const json lee = doc.value("lee", json::object());
  check_keys(lee, {"window", "damping", "looks", "products"}, "lee");
  cfg.lee.window = get_or<std::size_t>(lee, "window", 7, "lee");
  cfg.lee.damping = get_or<double>(lee, "damping", 1.0, "lee");
  cfg.lee.looks = get_or<double>(lee, "looks", 1.0, "lee");
  cfg.lee.validate();
  if (lee.contains("products")) {
    cfg.speckle_products.clear();
    for (const auto& p : lee["products"]) cfg.speckle_products.push_back(parse_product_kind(p.get<std::string>()));
  }

  const json crop = doc.value("crop", json::object());
  check_keys(crop, {"buffer_m"}, "crop");
  cfg.crop_buffer_m = get_or<double>(crop, "buffer_m", kDefaultBufferM, "crop");
  if (!(cfg.crop_buffer_m >= 0.0)) throw UsageError("config: crop.buffer_m must be >= 0");

  const json server = doc.value("server", json::object());
  check_keys(server, {"host", "port"}, "server");
  cfg.server.host = get_or<std::string>(server, "host", "127.0.0.1", "server");
  cfg.server.port = get_or<int>(server, "port", 8080, "server");
  if (cfg.server.port < 0 || cfg.server.port > 65535) throw UsageError("config: server.port out of range");
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const auto text = read_file(path);
  if (!text) throw UsageError("cannot read config file " + path.string());
  return parse_config(*text, std::filesystem::absolute(path).parent_path());
}

}  // namespace lakewatch
