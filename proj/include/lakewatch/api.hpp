#pragma once

#include <memory>
#include <string>

#include "lakewatch/config.hpp"

namespace lakewatch {

/// Read-only HTTP view over the artifact store:
///   GET /images/{lake}/latest   PNG overlay, X-Acquired-At / X-Area-M2 / X-Granule-Id
///   GET /lakes                  configured lakes with their latest result
///   GET /lakes/{lake}/areas     [{date, area_m2, granule_id}], optional from/to
///   GET /health                 {status, last_poll_at, jobs_pending, jobs_failed}
/// Errors are JSON objects {"error": reason}.
class ApiServer {
 public:
  explicit ApiServer(PipelineConfig config);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds host:port (0 picks a free port) and returns the port. Throws RemoteError.
  int bind(const std::string& host, int port);
  /// Serves on a background thread after bind().
  void start();
  /// Serves on the calling thread until stop().
  void listen();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lakewatch
