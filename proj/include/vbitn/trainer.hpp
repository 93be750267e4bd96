#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vbitn/adam.hpp"
#include "vbitn/checkpoint.hpp"
#include "vbitn/config.hpp"
#include "vbitn/data_synth.hpp"
#include "vbitn/metrics.hpp"
#include "vbitn/networks.hpp"

namespace vbitn {

struct DomainElbo {
  std::string domain;
  double recon_loglik = 0;
  double kl_style = 0;
  double kl_content = 0;
  double elbo = 0;
};

/// One line of runs/{run_id}/log.ndjson.
struct TrainLogRecord {
  std::uint64_t step = 0;  // 1-based count of completed generator updates
  std::uint64_t epoch = 0;
  double l_ind = 0;
  double l_rec = 0;
  double l_adv_gen = 0;
  double l_adv_disc = 0;
  double total_gen = 0;
  LossWeights weights;
  std::vector<DomainElbo> domains;
  std::vector<double> disc_acc_real;  // per target; empty when gamma_adv = 0
  std::vector<double> disc_acc_fake;
  double wall_ms = 0;
  std::string status = "ok";  // "abort" on the diagnostic record of a failed step
  std::string message;

  /// Without wall-clock the record is a pure function of config and data.
  std::string to_json(bool with_wall = true) const;
};

/// Model plus optimizer state, advanced one generator/discriminator round at
/// a time. All randomness for step s comes from streams keyed by
/// (seed, s, role), so a resumed run replays an uninterrupted one exactly.
class Trainer {
 public:
  /// `train_sets[d]` belongs to config.domains[d]; index 0 is the source.
  Trainer(TrainConfig config, std::vector<ImageBatch> train_sets);
  /// Restores parameters, optimizer moments and the step counter.
  static Trainer resume(const std::filesystem::path& checkpoint, std::vector<ImageBatch> train_sets);

  /// Throws NonFiniteError if a loss or gradient is not finite; parameters
  /// then keep their pre-step values.
  TrainLogRecord step();

  std::uint64_t steps_done() const { return step_; }
  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  /// epochs * steps_per_epoch, capped by max_steps when set.
  std::uint64_t total_steps() const;

  const TrainConfig& config() const { return config_; }
  const ModelBundle<float>& bundle() const { return bundle_; }
  const AdamState& generator_state() const { return gen_opt_; }
  const AdamState& discriminator_state() const { return disc_opt_; }

  CheckpointData checkpoint() const;
  void save_checkpoint(const std::filesystem::path& path) const;

  /// Dataset indices used by domain `d` at step `s` (0-based).
  std::vector<std::size_t> batch_indices(std::size_t d, std::uint64_t s) const;

 private:
  TrainLogRecord advance();

  TrainConfig config_;
  std::vector<ImageBatch> train_;
  ModelBundle<float> bundle_;
  AdamState gen_opt_;
  AdamState disc_opt_;
  std::uint64_t step_ = 0;
  std::size_t steps_per_epoch_ = 0;
};

struct RunOptions {
  std::filesystem::path run_dir;  // empty = run_directory(config)
  bool write_files = true;        // log and checkpoints
  std::uint64_t stop_after = 0;   // stop at this step count; 0 = total_steps()
  std::function<void(const TrainLogRecord&)> on_step;
};

struct RunResult {
  std::vector<TrainLogRecord> records;
  std::filesystem::path last_checkpoint;
};

/// Steps until done, appending to log.ndjson and checkpointing per cadence
/// and at the end. On a non-finite failure writes a diagnostic record and
/// rethrows; earlier checkpoints are left in place.
RunResult run_training(Trainer& trainer, const RunOptions& options = {});

/// $VBITN_RUN_DIR (default "runs") / run_id.
std::filesystem::path run_directory(const TrainConfig& config);

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, std::uint64_t step);

/// Parameters and config of a trained model.
struct LoadedModel {
  TrainConfig config;
  ModelBundle<float> bundle;
  std::string hash;  // content hash of the checkpoint file
};

void save_checkpoint(const std::filesystem::path& path, const ModelBundle<float>& bundle,
                     const TrainConfig& config);
LoadedModel load_checkpoint(const std::filesystem::path& path);

/// Mean negative ELBO per domain over `test_sets` with noise keyed by `seed`,
/// so repeated calls at different training steps see identical noise.
std::vector<double> heldout_neg_elbo(const ModelBundle<float>& bundle,
                                     const std::vector<ImageBatch>& test_sets,
                                     std::size_t mc_samples, double sigma_x, std::uint64_t seed);

/// Translates the first n source test images into `target` and scores them.
/// Diversity averages edit_styles(l = 4) sets over up to 32 sources.
EvalReport evaluate_translation(const ModelBundle<float>& bundle, const ImageBatch& source_test,
                                const std::string& target, const DomainClassifier& classifier,
                                const MaskExtractor& extractor, std::uint64_t seed, std::size_t n);

/// Converts an [H, W, C] or [1, H, W, C] tensor to an Image.
Image to_image(const Tensor<float>& t);
Tensor<float> to_tensor(const Image& image);

}  // namespace vbitn
