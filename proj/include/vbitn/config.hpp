#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbitn/networks.hpp"
#include "vbitn/objectives.hpp"

namespace vbitn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training configuration. Text form is INI with three sections:
///
///   [train]  epochs, batch_size, max_steps, learning_rate, beta1, beta2,
///            adam_eps, gamma_ind, gamma_rec, gamma_adv, mc_samples,
///            sigma_x, seed, disc_steps, checkpoint_every, run_id
///   [model]  style_dim, content_dim, separation, widths, height, width
///   [data]   root, domains, train_count, test_count, seed
///
/// Missing keys take the defaults below; unknown keys are rejected.
struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  std::size_t max_steps = 0;  // 0 = no cap beyond epochs
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  LossWeights weights;
  std::size_t mc_samples = 1;
  double sigma_x = 0.1;
  std::uint64_t seed = 0;
  std::size_t disc_steps = 1;  // discriminator updates per generator update
  std::size_t checkpoint_every = 500;
  std::string run_id = "run";

  std::size_t style_dim = 8;
  std::size_t content_dim = 16;
  double separation = 3.0;
  std::vector<std::size_t> widths = {16, 32, 64};
  std::size_t height = 32;
  std::size_t width = 32;

  std::string data_root = "data";
  std::vector<std::string> domains = {"ink", "paint"};
  std::size_t train_count = 4096;
  std::size_t test_count = 512;
  std::uint64_t data_seed = 0;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  NetConfig net() const;

  /// Canonical INI text; parse(to_ini()) reproduces every field.
  std::string to_ini() const;
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
};

/// Reads a whole text file; throws std::runtime_error if unreadable.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace vbitn
