#include <gtest/gtest.h>

#include <algorithm>

#include "json.hpp"
#include "vbitn/data_synth.hpp"
#include "vbitn/metrics.hpp"

using namespace vbitn;

namespace {

Image constant(float r, float g, float b, std::size_t size = 32) {
  Image im{size, size, {}};
  for (std::size_t p = 0; p < size * size; ++p) im.pixels.insert(im.pixels.end(), {r, g, b});
  return im;
}

ImageBatch batch_of(const std::vector<Image>& images, const std::string& domain) {
  ImageBatch b;
  for (const auto& im : images) b.push_back(im, domain);
  return b;
}

}  // namespace

TEST(Diversity, IdenticalImagesScoreZero) {
  auto im = generate_dataset("paint", 1, 3).image(0);
  EXPECT_EQ(diversity({im, im, im}), 0.0);
}

TEST(Diversity, BlackAndWhiteScoreOne) {
  EXPECT_DOUBLE_EQ(diversity({constant(0, 0, 0), constant(1, 1, 1)}), 1.0);
  // Pairwise distances 1, 1/2, 1/2.
  EXPECT_NEAR(diversity({constant(0, 0, 0), constant(1, 1, 1), constant(.5f, .5f, .5f)}), 2.0 / 3.0, 1e-12);
}

TEST(Diversity, InvariantToOrder) {
  auto b = generate_dataset("neon", 6, 4);
  std::vector<Image> v;
  for (std::size_t i = 0; i < 6; ++i) v.push_back(b.image(i));
  const double d = diversity(v);
  std::reverse(v.begin(), v.end());
  std::rotate(v.begin(), v.begin() + 2, v.end());
  EXPECT_NEAR(diversity(v), d, 1e-12);
  EXPECT_GT(d, 0.0);
  EXPECT_LE(d, 1.0);
}

TEST(Diversity, RejectsDegenerateInput) {
  EXPECT_THROW(diversity({constant(0, 0, 0)}), std::invalid_argument);
  EXPECT_THROW(diversity({constant(0, 0, 0), constant(0, 0, 0, 16)}), std::invalid_argument);
  EXPECT_THROW(luminance_8x8(constant(0, 0, 0, 12)), std::invalid_argument);
}

TEST(Luminance, UsesRec601Weights) {
  auto l = luminance_8x8(constant(0.2f, 0.6f, 1.0f));
  for (double v : l) EXPECT_NEAR(v, 0.299 * 0.2 + 0.587 * 0.6 + 0.114 * 1.0, 1e-6);
}

TEST(ColorFeatures, MatchesHandComputation) {
  Image im{1, 2, {1.0f, 0.5f, 0.0f, 0.2f, 0.2f, 0.2f}};
  auto f = color_features(im);
  EXPECT_NEAR(f[0], (1.0 + 0.0) / 2, 1e-7);
  EXPECT_NEAR(f[1], (1.0 + 0.0) / 2, 1e-7);
  EXPECT_NEAR(f[2], (0.0 + 0.0) / 2, 1e-7);
}

TEST(DomainClassifier, UntrainedUseIsAnError) {
  DomainClassifier c;
  EXPECT_FALSE(c.trained());
  EXPECT_THROW(c.predict(constant(0, 0, 0)), std::logic_error);
  EXPECT_THROW(domain_score({constant(0, 0, 0)}, c, "ink"), std::logic_error);
}

TEST(DomainClassifier, IdenticalClassesTieToFirstFitted) {
  std::vector<Image> grays = {constant(.3f, .3f, .3f), constant(.6f, .6f, .6f)};
  DomainClassifier c;
  c.fit({batch_of(grays, "first"), batch_of(grays, "second")});
  EXPECT_EQ(c.predict(constant(.5f, .5f, .5f)), "first");
  EXPECT_EQ(c.labels(), (std::vector<std::string>{"first", "second"}));
}

TEST(DomainClassifier, ScoresAreFractionsOfTarget) {
  std::vector<ImageBatch> fit = {generate_dataset("ink", 256, 1), generate_dataset("paint", 256, 1)};
  DomainClassifier c;
  c.fit(fit);
  auto ink = generate_dataset("ink", 10, 2, "test"), paint = generate_dataset("paint", 10, 2, "test");
  std::vector<Image> mixed;
  for (std::size_t i = 0; i < 10; ++i) mixed.push_back(i < 3 ? paint.image(i) : ink.image(i));
  EXPECT_DOUBLE_EQ(domain_score(mixed, c, "paint"), 0.3);
  EXPECT_DOUBLE_EQ(domain_score(mixed, c, "ink"), 0.7);
  EXPECT_DOUBLE_EQ(domain_score(mixed, c, "neon"), 0.0);
  EXPECT_THROW(domain_score({}, c, "ink"), std::invalid_argument);
  EXPECT_THROW(c.fit({fit[0]}), std::invalid_argument);
}

TEST(Iou, HandCases) {
  EXPECT_EQ(iou({1, 1, 0}, {1, 1, 0}), 1.0);
  EXPECT_EQ(iou({1, 0, 0}, {0, 1, 0}), 0.0);
  EXPECT_EQ(iou({0, 0, 0}, {0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(iou({1, 1, 0, 0}, {0, 1, 1, 0}), 1.0 / 3.0);
  EXPECT_THROW(iou({1}, {1, 0}), std::invalid_argument);
}

TEST(MaskExtractor, CalibratesOnRealImages) {
  std::vector<ImageBatch> real;
  for (const auto& d : known_style_domains()) real.push_back(generate_dataset(d, 256, 0));
  MaskExtractor ex;
  const double score = ex.calibrate(real);
  EXPECT_GE(score, 0.9);
  EXPECT_GT(ex.threshold(), 0.0);
  for (const auto& d : known_style_domains()) {
    EXPECT_GE(ex.mean_iou(generate_dataset(d, 256, 0, "test")), 0.9) << d;
  }
}

TEST(MaskExtractor, FlatImageGivesExactMask) {
  SceneSpec s;
  StyleSpec st;
  st.foreground = {0.9f, 0.1f, 0.1f};
  st.background = {0.1f, 0.1f, 0.9f};
  auto r = render(s, st);
  EXPECT_EQ(MaskExtractor(0.3).extract(r.image), r.mask);
  auto blank = constant(0.4f, 0.4f, 0.4f);
  auto m = MaskExtractor(0.3).extract(blank);
  EXPECT_EQ(std::count(m.begin(), m.end(), 1), 0);
}

TEST(ContentIou, RealImagesAgainstOwnMasks) {
  auto b = generate_dataset("paint", 20, 8);
  std::vector<Image> images;
  std::vector<std::vector<std::uint8_t>> masks;
  for (std::size_t i = 0; i < b.size(); ++i) {
    images.push_back(b.image(i));
    masks.push_back(b.mask(i));
  }
  MaskExtractor ex(0.18);
  EXPECT_GE(content_iou(images, masks, ex), 0.9);
  std::rotate(masks.begin(), masks.begin() + 1, masks.end());
  EXPECT_LT(content_iou(images, masks, ex), 0.6);
  masks.pop_back();
  EXPECT_THROW(content_iou(images, masks, ex), std::invalid_argument);
}

TEST(EvalReport, JsonAndText) {
  EvalReport r{0.25, 0.95, 0.75, -1234.5, 200, "paint"};
  auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["kind"], "eval");
  EXPECT_EQ(j["target"], "paint");
  EXPECT_EQ(j["n"], 200);
  EXPECT_DOUBLE_EQ(j["domain_score"].get<double>(), 0.95);
  EXPECT_DOUBLE_EQ(j["content_iou"].get<double>(), 0.75);
  EXPECT_DOUBLE_EQ(j["elbo_test"].get<double>(), -1234.5);
  EXPECT_NE(r.to_text().find("diversity-proxy"), std::string::npos);
}
