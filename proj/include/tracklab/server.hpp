#pragma once

#include <memory>
#include <string>
#include <thread>

#include "tracklab/auth.hpp"
#include "tracklab/config.hpp"
#include "tracklab/error.hpp"
#include "tracklab/store.hpp"

namespace tracklab::api {

/// HTTP status for each error code.
int http_status(ErrorCode code);
/// Machine-readable code sent on the wire.
std::string_view wire_code(ErrorCode code);

/// JSON service under /api. Handlers share only the store, the
/// authenticator and the workflow lock.
class ApiServer {
 public:
  ApiServer(config::ServiceConfig cfg, store::Store& store);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds to the port (0 picks a free one) and returns it.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call bind() first.
  void run();
  /// bind() plus run() on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  auth::Authenticator& authenticator();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace tracklab::api
