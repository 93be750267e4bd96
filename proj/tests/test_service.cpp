#include <gtest/gtest.h>

#include <charconv>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "vbitn/base64.hpp"
#include "vbitn/service.hpp"
#include "vbitn/translation.hpp"

using namespace vbitn;
using nlohmann::json;

namespace {

LoadedModel three_domain_model() {
  TrainConfig c;
  c.domains = {"ink", "paint", "neon"};
  c.widths = {4, 8};
  c.seed = 12;
  auto bundle = ModelBundle<float>::create(c.net(), make_domains(c.domains, c.style_dim, 3.0f), c.seed);
  return {c, bundle.snapshot(), "00000000deadbeef"};
}

class ServiceTest : public ::testing::Test {
 protected:
  ServiceTest() : model(three_domain_model()), data(generate_dataset("ink", 8, 0, "test")), service(model, data) {}

  json call(const std::string& path, const json& body, int expect = 200) {
    auto r = service.handle("POST", path, body.dump());
    EXPECT_EQ(r.status, expect) << path << " " << r.body;
    return json::parse(r.body);
  }

  int status_of(const std::string& path, const std::string& body) {
    return service.handle("POST", path, body).status;
  }

  // PNG payload the service should return for a direct library call.
  std::string direct_png(const Tensor<float>& image) { return base64_encode(encode_png(to_image(image))); }

  LoadedModel model;
  ImageBatch data;
  Service service;
};

}  // namespace

TEST_F(ServiceTest, MetaDescribesModel) {
  auto r = service.handle("GET", "/api/meta", "");
  ASSERT_EQ(r.status, 200);
  auto j = json::parse(r.body);
  ASSERT_EQ(j["domains"].size(), 3u);
  EXPECT_EQ(j["domains"][0]["id"], "ink");
  EXPECT_TRUE(j["domains"][0]["is_source"].get<bool>());
  EXPECT_EQ(j["domains"][2]["alpha"][2], 3.0);
  EXPECT_EQ(j["style_dim"], 8);
  EXPECT_EQ(j["checkpoint_id"], "00000000deadbeef");
  EXPECT_EQ(j["dataset_size"], 8);
}

TEST_F(ServiceTest, SessionTranslateMatchesLibrary) {
  auto s = call("/api/session", {{"index", 3}});
  const auto id = s["session_id"].get<std::string>();
  EXPECT_EQ(s["posterior"]["content"]["mean"].size(), 16u);
  auto t = call("/api/translate", {{"session_id", id}, {"target", "paint"}, {"seed", 42}});
  EXPECT_EQ(t["session_id"], id);

  Rng rng = request_rng(42);
  auto expect = translate(model.bundle, to_tensor(data.image(3)), "paint", rng, {3});
  EXPECT_EQ(t["image"], direct_png(expect.image));
  EXPECT_EQ(t["latents"]["z_source"], "posterior-of-image:3");
  ASSERT_EQ(t["latents"]["y"].size(), 8u);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(t["latents"]["y"][k].get<float>(), expect.latents.y[k]);
}

TEST_F(ServiceTest, ColdCallWithInlineImage) {
  auto png = base64_encode(encode_png(data.image(5)));
  auto t = call("/api/translate", {{"image", "data:image/png;base64," + png}, {"target", "neon"}, {"seed", "7"}});
  EXPECT_TRUE(t["session_id"].is_null());
  Rng rng = request_rng(7);
  auto expect = translate(model.bundle, to_tensor(decode_png(encode_png(data.image(5)))), "neon", rng);
  EXPECT_EQ(t["image"], direct_png(expect.image));
}

TEST_F(ServiceTest, OneHotMixAndSingleStyleEditMatchTranslate) {
  const auto id = call("/api/session", {{"index", 1}})["session_id"].get<std::string>();
  for (std::uint64_t seed : {0ull, 5ull, 18446744073709551615ull}) {
    auto t_neon = call("/api/translate", {{"session_id", id}, {"target", "neon"}, {"seed", seed}});
    auto mix = call("/api/mix", {{"session_id", id}, {"weights", {0, 1}}, {"seed", seed}});
    EXPECT_EQ(mix["image"], t_neon["image"]);
    EXPECT_EQ(mix["chosen_decoder"], "neon");
    EXPECT_EQ(mix["latents"], t_neon["latents"]);
    auto style = call("/api/edit/style", {{"session_id", id}, {"target", "neon"}, {"l", 1}, {"seed", seed}});
    EXPECT_EQ(style["images"][0], t_neon["image"]);
    auto content = call("/api/edit/content", {{"session_id", id}, {"target", "neon"}, {"m", 1}, {"seed", seed}});
    EXPECT_EQ(content["images"][0], t_neon["image"]);
  }
}

TEST_F(ServiceTest, EditsReturnRequestedCounts) {
  const auto id = call("/api/session", {{"index", 0}})["session_id"].get<std::string>();
  auto style = call("/api/edit/style", {{"session_id", id}, {"target", "paint"}, {"l", 6}, {"seed", 1}});
  EXPECT_EQ(style["images"].size(), 6u);
  EXPECT_EQ(style["y_list"].size(), 6u);
  EXPECT_EQ(style["z"].size(), 16u);
  auto content = call("/api/edit/content", {{"session_id", id}, {"target", "paint"}, {"m", 3}, {"seed", 1}});
  EXPECT_EQ(content["images"].size(), 3u);
  EXPECT_EQ(content["z_list"].size(), 3u);
  EXPECT_EQ(content["y"].size(), 8u);
}

TEST_F(ServiceTest, ErrorStatuses) {
  const auto id = call("/api/session", {{"index", 0}})["session_id"].get<std::string>();
  const auto sid = "\"session_id\":\"" + id + "\"";
  EXPECT_EQ(status_of("/api/translate", "{not json"), 400);
  EXPECT_EQ(status_of("/api/translate", "[1,2]"), 400);
  EXPECT_EQ(status_of("/api/translate", "{" + sid + ",\"target\":\"paint\"}"), 400);
  EXPECT_EQ(status_of("/api/translate", "{" + sid + ",\"target\":\"paint\",\"seed\":-1}"), 400);
  EXPECT_EQ(status_of("/api/translate", "{\"target\":\"paint\",\"seed\":1}"), 400);
  EXPECT_EQ(status_of("/api/translate", "{\"session_id\":\"s123\",\"target\":\"paint\",\"seed\":1}"), 404);
  EXPECT_EQ(status_of("/api/nowhere", "{}"), 404);
  EXPECT_EQ(service.handle("GET", "/api/translate", "").status, 404);
  EXPECT_EQ(status_of("/api/translate", "{" + sid + ",\"target\":\"sketch\",\"seed\":1}"), 422);
  EXPECT_EQ(status_of("/api/translate", "{" + sid + ",\"target\":\"ink\",\"seed\":1}"), 422);
  EXPECT_EQ(status_of("/api/edit/style", "{" + sid + ",\"target\":\"paint\",\"l\":0,\"seed\":1}"), 422);
  EXPECT_EQ(status_of("/api/edit/style", "{" + sid + ",\"target\":\"paint\",\"l\":65,\"seed\":1}"), 422);
  EXPECT_EQ(status_of("/api/edit/content", "{" + sid + ",\"target\":\"paint\",\"seed\":1}"), 400);
  EXPECT_EQ(status_of("/api/mix", "{" + sid + ",\"weights\":[0.5,0.6],\"seed\":1}"), 422);
  EXPECT_EQ(status_of("/api/mix", "{" + sid + ",\"weights\":[1],\"seed\":1}"), 422);
  EXPECT_EQ(status_of("/api/mix", "{" + sid + ",\"weights\":\"half\",\"seed\":1}"), 400);
  EXPECT_EQ(status_of("/api/session", "{\"index\":8}"), 422);
  EXPECT_EQ(status_of("/api/session", "{\"image\":\"@@@\"}"), 400);
  EXPECT_EQ(status_of("/api/session", "{\"image\":\"" + base64_encode({1, 2, 3, 4, 5, 6}) + "\"}"), 422);
  Image small{16, 16, std::vector<float>(16 * 16 * 3, 0.5f)};
  EXPECT_EQ(status_of("/api/session", "{\"image\":\"" + base64_encode(encode_png(small)) + "\"}"), 422);
  auto body = json::parse(service.handle("POST", "/api/mix", "{" + sid + ",\"weights\":[2,-1],\"seed\":1}").body);
  EXPECT_EQ(body["error"]["status"], 422);
  EXPECT_FALSE(body["error"]["message"].get<std::string>().empty());
}

TEST(ServiceLimits, OversizedImageIs413AndMissingDatasetIs422) {
  ServiceOptions opts;
  opts.max_image_bytes = 64;
  Service s(three_domain_model(), std::nullopt, opts);
  auto png = base64_encode(encode_png(generate_dataset("ink", 1, 0).image(0)));
  EXPECT_EQ(s.handle("POST", "/api/session", json{{"image", png}}.dump()).status, 413);
  EXPECT_EQ(s.handle("POST", "/api/session", json{{"index", 0}}.dump()).status, 422);
}

TEST_F(ServiceTest, SessionIdsAreDistinct) {
  std::set<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.insert(call("/api/session", {{"index", i % 8}})["session_id"].get<std::string>());
  EXPECT_EQ(ids.size(), 20u);
}

TEST(ShortestFloat, RoundTripsExactly) {
  for (float v : {0.1f, 1.0f / 3.0f, -2.5e-12f, 3.0f, 16777217.0f, 1e38f}) {
    auto s = shortest_float(v);
    float back = 0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
  }
  EXPECT_EQ(shortest_float(0.1f), "0.1");
  EXPECT_EQ(shortest_float(3.0f), "3");
}

TEST(Base64, RoundTripAndRejection) {
  std::vector<std::uint8_t> bytes = {0, 1, 2, 250, 251, 252, 253};
  EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
  EXPECT_EQ(base64_encode({'M', 'a'}), "TWE=");
  EXPECT_EQ(base64_decode("TWE"), (std::vector<std::uint8_t>{'M', 'a'}));
  EXPECT_EQ(base64_decode("data:image/png;base64,TWE="), (std::vector<std::uint8_t>{'M', 'a'}));
  EXPECT_THROW(base64_decode("TW!="), std::invalid_argument);
}

TEST_F(ServiceTest, ConcurrentHttpRequestsAgree) {
  const int port = service.bind_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread server([&] { service.listen_after_bind(); });

  httplib::Client probe("127.0.0.1", port);
  auto meta = probe.Get("/api/meta");
  ASSERT_TRUE(meta);
  EXPECT_EQ(meta->status, 200);
  EXPECT_EQ(meta->get_header_value("Access-Control-Allow-Origin"), "*");
  auto pre = probe.Options("/api/translate");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);

  const auto id = json::parse(probe.Post("/api/session", json{{"index", 2}}.dump(), "application/json")->body)["session_id"]
                      .get<std::string>();
  const auto expect = call("/api/translate", {{"session_id", id}, {"target", "paint"}, {"seed", 99}})["image"];

  std::vector<std::thread> clients;
  std::vector<int> statuses(32, 0);
  std::vector<std::string> images(32);
  for (int i = 0; i < 32; ++i) {
    clients.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", port);
      const bool same_seed = i % 2 == 0;
      json body{{"session_id", id}, {"target", i % 4 == 1 ? "neon" : "paint"}, {"seed", same_seed ? 99 : i}};
      auto r = c.Post("/api/translate", body.dump(), "application/json");
      if (!r) {
        statuses[i] = -static_cast<int>(r.error());
        return;
      }
      statuses[i] = r->status;
      images[i] = json::parse(r->body)["image"].get<std::string>();
    });
  }
  for (auto& t : clients) t.join();
  service.stop();
  server.join();
  for (int i = 0; i < 32; ++i) {
    EXPECT_EQ(statuses[i], 200) << i;
    if (i % 2 == 0) EXPECT_EQ(images[i], expect) << i;
  }
}
