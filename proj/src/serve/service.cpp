#include "vbitn/service.hpp"

#include <charconv>
#include <cstdlib>
#include <mutex>
#include <set>

#include "httplib.h"
#include "vbitn/base64.hpp"
#include "vbitn/image_io.hpp"
#include "vbitn/translation.hpp"

namespace vbitn {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxSamples = 64;

struct ApiError {
  int status;
  std::string message;
};

[[noreturn]] void fail(int status, std::string message) { throw ApiError{status, std::move(message)}; }

json float_array(std::span<const float> values) {
  json arr = json::array();
  for (float v : values) arr.push_back(std::strtod(shortest_float(v).c_str(), nullptr));
  return arr;
}

json latents_json(const LatentPair& p) {
  return {{"y", float_array(p.y)},
          {"z", float_array(p.z)},
          {"y_source", p.y_source},
          {"z_source", p.z_source}};
}

std::string png_base64(const Tensor<float>& image) { return base64_encode(encode_png(to_image(image))); }

std::uint64_t get_seed(const json& req) {
  if (!req.contains("seed")) fail(400, "missing field 'seed'");
  const auto& s = req["seed"];
  if (s.is_number_unsigned()) return s.get<std::uint64_t>();
  if (s.is_number_integer() && s.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(s.get<std::int64_t>());
  if (s.is_string()) {
    const auto& str = s.get_ref<const std::string&>();
    std::uint64_t v = 0;
    auto r = std::from_chars(str.data(), str.data() + str.size(), v);
    if (r.ec == std::errc() && r.ptr == str.data() + str.size()) return v;
  }
  fail(400, "field 'seed' must be an unsigned 64-bit integer");
}

std::string get_string(const json& req, const char* key) {
  if (!req.contains(key) || !req[key].is_string()) fail(400, std::string("missing string field '") + key + "'");
  return req[key].get<std::string>();
}

std::size_t get_count(const json& req, const char* key) {
  if (!req.contains(key) || !req[key].is_number_integer()) {
    fail(400, std::string("missing integer field '") + key + "'");
  }
  const auto v = req[key].get<std::int64_t>();
  if (v < 1 || v > static_cast<std::int64_t>(kMaxSamples)) {
    fail(422, std::string("'") + key + "' must lie in [1, " + std::to_string(kMaxSamples) + "]");
  }
  return static_cast<std::size_t>(v);
}

json error_body(int status, const std::string& message) {
  return {{"error", {{"status", status}, {"message", message}}}};
}

}  // namespace

std::string shortest_float(float v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Service::Service(LoadedModel model, std::optional<ImageBatch> dataset, ServiceOptions options)
    : model_(std::move(model)), dataset_(std::move(dataset)), options_(std::move(options)) {
  model_.bundle = model_.bundle.snapshot();
}

Service::~Service() = default;

std::shared_ptr<const ApiSession> Service::make_session(const json& req) {
  Image image;
  std::size_t index = 0;
  const auto& net = model_.bundle.net;
  if (req.contains("image")) {
    if (!req["image"].is_string()) fail(400, "field 'image' must be a base64 PNG string");
    const auto& text = req["image"].get_ref<const std::string&>();
    if (text.size() / 4 * 3 > options_.max_image_bytes) {
      fail(413, "image exceeds " + std::to_string(options_.max_image_bytes) + " bytes");
    }
    std::vector<std::uint8_t> bytes;
    try {
      bytes = base64_decode(text);
    } catch (const std::invalid_argument& e) {
      fail(400, e.what());
    }
    if (bytes.size() > options_.max_image_bytes) {
      fail(413, "image exceeds " + std::to_string(options_.max_image_bytes) + " bytes");
    }
    try {
      image = decode_png(bytes);
    } catch (const ImageError& e) {
      fail(422, e.what());
    }
    if (image.height != net.height || image.width != net.width) {
      fail(422, "image must be " + std::to_string(net.height) + "x" + std::to_string(net.width) +
                    " RGB, got " + std::to_string(image.height) + "x" +
                    std::to_string(image.width));
    }
  } else if (req.contains("index")) {
    if (!dataset_) fail(422, "this server has no dataset; send an inline image");
    if (!req["index"].is_number_integer() || req["index"].get<std::int64_t>() < 0 ||
        static_cast<std::size_t>(req["index"].get<std::int64_t>()) >= dataset_->size()) {
      fail(422, "'index' must lie in [0, " + std::to_string(dataset_->size()) + ")");
    }
    index = req["index"].get<std::size_t>();
    image = dataset_->image(index);
  } else {
    fail(400, "provide 'session_id', 'image' or 'index'");
  }
  auto posterior = encode_source(model_.bundle, to_tensor(image));
  return std::make_shared<ApiSession>(ApiSession{"", std::move(image), index, std::move(posterior)});
}

std::shared_ptr<const ApiSession> Service::session_for(const json& req) {
  if (req.contains("session_id") && !req["session_id"].is_null()) {
    if (!req["session_id"].is_string()) fail(400, "'session_id' must be a string");
    const auto id = req["session_id"].get<std::string>();
    std::shared_lock lock(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(404, "unknown session '" + id + "'");
    return it->second;
  }
  return make_session(req);
}

Service::Response Service::route(const std::string& method, const std::string& path,
                                 const std::string& body) {
  const auto& bundle = model_.bundle;
  if (method == "GET" && path == "/api/meta") {
    json domains = json::array();
    for (const auto& d : bundle.domains) {
      domains.push_back({{"id", d.id}, {"alpha", float_array(d.alpha)}, {"is_source", d.is_source}});
    }
    json meta{{"domains", domains},
              {"style_dim", bundle.net.style_dim},
              {"content_dim", bundle.net.content_dim},
              {"image_shape", {bundle.net.height, bundle.net.width, bundle.net.channels}},
              {"checkpoint_id", model_.hash},
              {"mix_decoder_rule", "argmax weight, ties to lowest index"},
              {"dataset_size", dataset_ ? dataset_->size() : 0}};
    return {200, meta.dump()};
  }
  static const std::set<std::string> post_routes = {"/api/session", "/api/translate", "/api/edit/style",
                                                     "/api/edit/content", "/api/mix"};
  if (method != "POST" || !post_routes.count(path)) fail(404, "no route for " + method + " " + path);

  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error& e) {
    fail(400, std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object()) fail(400, "request body must be a JSON object");

  if (path == "/api/session") {
    auto s = make_session(req);
    auto owned = std::const_pointer_cast<ApiSession>(s);
    char buf[24];
    const std::uint64_t n = next_session_.fetch_add(1);
    std::snprintf(buf, sizeof buf, "s%016llx",
                  static_cast<unsigned long long>(Rng::mix(n ^ Rng::hash(model_.hash))));
    owned->id = buf;
    {
      std::unique_lock lock(sessions_mu_);
      sessions_[owned->id] = s;
    }
    const auto& q = s->posterior;
    json out{{"session_id", s->id},
             {"image_index", s->image_index},
             {"posterior",
              {{"style", {{"mean", float_array(q.style.mean().data())}, {"std", float_array(q.style.std().data())}}},
               {"content",
                {{"mean", float_array(q.content.mean().data())}, {"std", float_array(q.content.std().data())}}}}}};
    return {200, out.dump()};
  }

  auto session = session_for(req);
  const std::uint64_t seed = get_seed(req);
  Rng rng = request_rng(seed);
  const SourceRef src{session->image_index};
  json out{{"session_id", session->id.empty() ? json(nullptr) : json(session->id)}, {"seed", seed}};

  auto check_target = [&](const std::string& t) {
    std::size_t d = 0;
    try {
      d = bundle.domain_index(t);
    } catch (const std::out_of_range&) {
      fail(422, "unknown target domain '" + t + "'");
    }
    if (d == 0) fail(422, "'" + t + "' is the source domain, not a target");
  };

  if (path == "/api/translate") {
    const auto target = get_string(req, "target");
    check_target(target);
    auto t = translate(bundle, session->posterior, target, rng, src);
    out["target"] = target;
    out["image"] = png_base64(t.image);
    out["latents"] = latents_json(t.latents);
    return {200, out.dump()};
  }
  if (path == "/api/edit/style" || path == "/api/edit/content") {
    const bool styles = path == "/api/edit/style";
    const auto target = get_string(req, "target");
    check_target(target);
    const std::size_t count = get_count(req, styles ? "l" : "m");
    auto results = styles ? edit_styles(bundle, session->posterior, target, count, rng, src)
                          : edit_contents(bundle, session->posterior, target, count, rng, src);
    json images = json::array(), varied = json::array(), latents = json::array();
    for (const auto& t : results) {
      images.push_back(png_base64(t.image));
      varied.push_back(float_array(styles ? std::span<const float>(t.latents.y) : std::span<const float>(t.latents.z)));
      latents.push_back(latents_json(t.latents));
    }
    out["target"] = target;
    out["images"] = images;
    out[styles ? "y_list" : "z_list"] = varied;
    out[styles ? "z" : "y"] = float_array(styles ? results[0].latents.z : results[0].latents.y);
    out["latents"] = latents;
    return {200, out.dump()};
  }
  if (path == "/api/mix") {
    if (!req.contains("weights") || !req["weights"].is_array()) fail(400, "missing array field 'weights'");
    std::vector<double> w;
    for (const auto& v : req["weights"]) {
      if (!v.is_number()) fail(400, "'weights' must contain numbers");
      w.push_back(v.get<double>());
    }
    MixedTranslation m;
    try {
      m = mixed_translate(bundle, session->posterior, w, rng, src);
    } catch (const std::invalid_argument& e) {
      fail(422, e.what());
    }
    out["weights"] = w;
    out["image"] = png_base64(m.result.image);
    out["y"] = float_array(m.result.latents.y);
    out["z"] = float_array(m.result.latents.z);
    out["latents"] = latents_json(m.result.latents);
    out["chosen_decoder"] = bundle.domains[m.chosen_decoder].id;
    out["component"] = bundle.domains[m.component].id;
    return {200, out.dump()};
  }
  fail(404, "no route for POST " + path);
}

Service::Response Service::handle(const std::string& method, const std::string& path,
                                  const std::string& body) {
  try {
    return route(method, path, body);
  } catch (const ApiError& e) {
    return {e.status, error_body(e.status, e.message).dump()};
  } catch (const std::exception& e) {
    return {500, error_body(500, e.what()).dump()};
  }
}

void Service::install_routes() {
  if (server_) return;
  server_ = std::make_unique<httplib::Server>();
  server_->set_payload_max_length(options_.max_image_bytes * 2 + 4096);
  const auto origin = options_.cors_origin;
  server_->set_default_headers({{"Access-Control-Allow-Origin", origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    auto r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server_->Get("/api/.*", forward);
  server_->Post("/api/.*", forward);
  server_->Options("/api/.*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (!options_.static_dir.empty()) server_->set_mount_point("/", options_.static_dir.string());
}

bool Service::listen(const std::string& host, int port) {
  install_routes();
  return server_->listen(host, port);
}

int Service::bind_any_port(const std::string& host) {
  install_routes();
  return server_->bind_to_any_port(host);
}

bool Service::listen_after_bind() { return server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace vbitn
