#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vbitn/data_synth.hpp"
#include "vbitn/image_io.hpp"

namespace vbitn {

/// Mean over unordered pairs of ||a_i - a_j||_2 / sqrt(64), where a is the
/// 8x8 box-filtered luminance of each image. Lies in [0, 1].
/// Throws std::invalid_argument for fewer than two images or mixed sizes.
double diversity(const std::vector<Image>& images);

/// 8x8 box-filtered Rec.601 luminance; height and width must be multiples of 8.
std::array<double, 64> luminance_8x8(const Image& image);

/// Colour statistics used by the domain classifier:
/// mean chroma (max - min channel), mean (R - B), mean (G - (R + B) / 2).
std::array<double, 3> color_features(const Image& image);

/// Gaussian naive Bayes over color_features with equal class priors.
class DomainClassifier {
 public:
  void fit(const std::vector<ImageBatch>& labelled);
  bool trained() const { return !labels_.empty(); }
  /// Highest log-likelihood class; exact ties go to the class fitted first.
  /// Throws std::logic_error if untrained.
  std::string predict(const Image& image) const;
  /// Fraction of `images` labelled `domain`.
  double accuracy(const ImageBatch& images, const std::string& domain) const;
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::vector<std::array<double, 3>> mean_;
  std::vector<std::array<double, 3>> var_;
};

/// Fraction of images the classifier assigns to `target`.
double domain_score(const std::vector<Image>& images, const DomainClassifier& classifier,
                    const std::string& target);

/// Foreground = pixels whose RGB distance from the border-median background
/// colour exceeds a threshold chosen to maximise IoU on real images.
class MaskExtractor {
 public:
  MaskExtractor() = default;
  explicit MaskExtractor(double threshold) : threshold_(threshold) {}
  /// Picks the threshold on a grid (middle of the near-optimal range);
  /// returns the mean IoU it achieves.
  double calibrate(const std::vector<ImageBatch>& real);
  double mean_of_batches(const std::vector<ImageBatch>& real) const;
  std::vector<std::uint8_t> extract(const Image& image) const;
  double threshold() const { return threshold_; }
  /// Mean IoU against the batch's ground-truth masks.
  double mean_iou(const ImageBatch& real) const;

 private:
  double threshold_ = 0.25;
};

/// |a & b| / |a | b|; two empty masks give 1. Throws on size mismatch.
double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

/// Mean IoU between extracted masks of `translated` and `source_masks`.
double content_iou(const std::vector<Image>& translated,
                   const std::vector<std::vector<std::uint8_t>>& source_masks,
                   const MaskExtractor& extractor);

struct EvalReport {
  double diversity = 0;
  double domain_score = 0;
  double content_iou = 0;
  double elbo_test = 0;
  std::size_t n = 0;
  std::string target;

  std::string to_text() const;
  std::string to_json() const;
};

}  // namespace vbitn
