#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lakewatch/timeutil.hpp"

namespace lakewatch {

enum class ProductKind { GrdRtc20m, OperaRtc30m };
enum class OrbitDirection { Ascending, Descending, Any };

const char* to_string(ProductKind k);
const char* to_string(OrbitDirection o);
/// Accepts "GRD_RTC_20m" / "OPERA_RTC_30m"; throws UsageError otherwise.
ProductKind parse_product_kind(std::string_view text);
/// Accepts "ascending" / "descending" / "any"; throws UsageError otherwise.
OrbitDirection parse_orbit_direction(std::string_view text);
/// Nominal ground sampling of a product: 20 or 30 m.
double product_pixel_size(ProductKind k);

struct SearchQuery {
  std::string wkt;
  TimePoint start;
  TimePoint end;
  ProductKind product_kind = ProductKind::GrdRtc20m;
  OrbitDirection orbit_direction = OrbitDirection::Any;

  /// Throws UsageError unless start < end and wkt parses as a simple polygon.
  void validate() const;
};

struct GranuleRecord {
  std::string granule_id;
  TimePoint acquired_at;
  std::string footprint_wkt;
  std::string download_url;
  std::string polarization = "VV";
  double pixel_size_m = 20.0;
  ProductKind product_kind = ProductKind::GrdRtc20m;
  OrbitDirection orbit_direction = OrbitDirection::Ascending;

  /// Throws DataError for an empty id, unparsable footprint or a pixel size
  /// other than 20 or 30 m.
  void validate() const;
  bool operator==(const GranuleRecord&) const = default;
};

void to_json(nlohmann::json& j, const GranuleRecord& g);
void from_json(const nlohmann::json& j, GranuleRecord& g);

/// True when the granule satisfies every filter of the query.
bool granule_matches(const GranuleRecord& g, const SearchQuery& q);

/// Search endpoint contract. Implementations raise RemoteError (retryable)
/// for transport failures and HTTP 5xx, and RemoteError (fatal) for
/// malformed payloads.
class CatalogClient {
 public:
  virtual ~CatalogClient() = default;
  /// Matching granules sorted by acquired_at ascending (ties by id).
  virtual std::vector<GranuleRecord> search(const SearchQuery& q) = 0;
  /// Raw bytes behind a download URL.
  virtual std::string fetch(const std::string& url) = 0;
};

/// HTTP+JSON client: GET {base}/search?wkt=&start=&end=&product=&orbit=
/// answering {"results": [GranuleRecord...]}.
class HttpCatalogClient final : public CatalogClient {
 public:
  explicit HttpCatalogClient(std::string base_url,
                             std::chrono::seconds timeout = std::chrono::seconds{30});
  std::vector<GranuleRecord> search(const SearchQuery& q) override;
  std::string fetch(const std::string& url) override;

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

/// Splits "http://host:port/path?x" into scheme+authority and path+query.
struct UrlParts {
  std::string origin;  // e.g. "http://127.0.0.1:8081"
  std::string target;  // e.g. "/files/a.tif"
};
UrlParts split_url(std::string_view url);

/// Parses a search response body; throws RemoteError (not retryable) with an
/// excerpt of the payload when it does not follow the schema.
std::vector<GranuleRecord> parse_search_response(std::string_view body);

/// Content-addressed download cache: bytes live at `<dir>/<sha256>.tif` and
/// `<dir>/by-granule/<granule_id>` records the digest of each granule.
class DownloadCache {
 public:
  explicit DownloadCache(std::filesystem::path dir);

  /// Cached path for the granule, fetching it when absent or when the
  /// cached bytes no longer match their digest.
  std::filesystem::path get(const GranuleRecord& g, CatalogClient& client);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace lakewatch
