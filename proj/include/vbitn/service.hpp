#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include "json.hpp"
#include "vbitn/data_synth.hpp"
#include "vbitn/networks.hpp"
#include "vbitn/trainer.hpp"

namespace httplib {
class Server;
}

namespace vbitn {

struct ServiceOptions {
  std::size_t max_image_bytes = 1 << 20;  // decoded PNG size limit (413 above)
  std::string cors_origin = "*";
  std::filesystem::path static_dir;       // served at "/" when set
};

/// A cached source image and its posterior.
struct ApiSession {
  std::string id;
  Image image;
  std::size_t image_index = 0;
  Posterior<float> posterior;
};

/// JSON inference API over an immutable model snapshot.
///
///   GET  /api/meta
///   POST /api/session       {image | index}
///   POST /api/translate     {session_id | image | index, target, seed}
///   POST /api/edit/style    {..., target, l, seed}
///   POST /api/edit/content  {..., target, m, seed}
///   POST /api/mix           {..., weights, seed}
///
/// Errors come back as {"error": {"status", "message"}} with 400 (bad JSON
/// or fields), 404 (unknown session or route), 413 (image too large) or 422
/// (constraint violations such as weights off the simplex).
class Service {
 public:
  Service(LoadedModel model, std::optional<ImageBatch> dataset = std::nullopt,
          ServiceOptions options = {});
  ~Service();

  struct Response {
    int status = 200;
    std::string body;
  };
  /// Routes one request without any network I/O; safe to call concurrently.
  Response handle(const std::string& method, const std::string& path, const std::string& body);

  /// Binds and serves until stop(); returns false if binding failed.
  bool listen(const std::string& host, int port);
  /// Binds to an OS-chosen port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();

  const std::string& checkpoint_id() const { return model_.hash; }

 private:
  Response route(const std::string& method, const std::string& path, const std::string& body);
  std::shared_ptr<const ApiSession> session_for(const nlohmann::json& request);
  std::shared_ptr<const ApiSession> make_session(const nlohmann::json& request);
  void install_routes();

  LoadedModel model_;
  std::optional<ImageBatch> dataset_;
  ServiceOptions options_;
  std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<const ApiSession>> sessions_;
  std::atomic<std::uint64_t> next_session_{1};
  std::unique_ptr<httplib::Server> server_;
};

/// Shortest decimal that reads back as the same float.
std::string shortest_float(float v);

}  // namespace vbitn
