#include "vbitn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "vbitn/autodiff/ops.hpp"
#include "vbitn/objectives.hpp"
#include "vbitn/translation.hpp"

namespace vbitn {

namespace {

constexpr std::size_t kEvalChunk = 128;

/// Integers are stored as four base-2^16 digits so float payloads hold them exactly.
Tensor<float> encode_counter(std::uint64_t v) {
  std::vector<float> d(4);
  for (int i = 0; i < 4; ++i) d[i] = static_cast<float>((v >> (16 * i)) & 0xFFFF);
  return Tensor<float>({4}, d);
}

std::uint64_t decode_counter(const CheckpointData& data, const std::string& name) {
  auto it = data.tensors.find(name);
  if (it == data.tensors.end() || it->second.numel() != 4) {
    throw FormatError("checkpoint is missing counter '" + name + "'");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const float f = it->second[i];
    if (!(f >= 0.0f && f < 65536.0f) || f != std::floor(f)) {
      throw FormatError("checkpoint counter '" + name + "' is corrupt");
    }
    v |= static_cast<std::uint64_t>(f) << (16 * i);
  }
  return v;
}

void export_adam(const AdamState& s, const std::string& prefix, CheckpointData& data) {
  data.tensors.insert_or_assign(prefix + "/t", encode_counter(s.t));
  for (const auto& [name, m] : s.m) {
    data.tensors.insert_or_assign(prefix + "/m/" + name, Tensor<float>({m.size()}, m));
    data.tensors.insert_or_assign(prefix + "/v/" + name, Tensor<float>({m.size()}, s.v.at(name)));
  }
}

AdamState import_adam(const CheckpointData& data, const std::string& prefix,
                      const std::vector<NamedParam<float>>& params) {
  AdamState s;
  s.t = decode_counter(data, prefix + "/t");
  if (s.t == 0) return s;
  for (const auto& p : params) {
    auto m = data.tensors.find(prefix + "/m/" + p.name);
    auto v = data.tensors.find(prefix + "/v/" + p.name);
    if (m == data.tensors.end() || v == data.tensors.end() || m->second.numel() != p.value.numel() ||
        v->second.numel() != p.value.numel()) {
      throw FormatError("checkpoint optimizer state for '" + p.name + "' is missing or malformed");
    }
    s.m[p.name].assign(m->second.data().begin(), m->second.data().end());
    s.v[p.name].assign(v->second.data().begin(), v->second.data().end());
  }
  return s;
}

std::vector<DomainSpec> domains_of(const TrainConfig& c) {
  return make_domains(c.domains, c.style_dim, static_cast<float>(c.separation));
}

void zero_grads(const std::vector<NamedParam<float>>& params) {
  for (auto p : params) p.value.zero_grad();
}

double fraction(const Tensor<float>& probs, bool real) {
  std::size_t hits = 0;
  for (float p : probs.data()) hits += (real ? p > 0.5f : p < 0.5f) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(probs.numel());
}

double mean_of(const Tensor<float>& t) {
  double s = 0;
  for (float v : t.data()) s += v;
  return s / static_cast<double>(t.numel());
}

bool finite(const Tensor<float>& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

}  // namespace

std::string TrainLogRecord::to_json(bool with_wall) const {
  nlohmann::json j;
  j["kind"] = "train";
  j["step"] = step;
  j["epoch"] = epoch;
  j["status"] = status;
  if (!message.empty()) j["message"] = message;
  j["l_ind"] = l_ind;
  j["l_rec"] = l_rec;
  j["l_adv_gen"] = l_adv_gen;
  j["l_adv_disc"] = l_adv_disc;
  j["total_gen"] = total_gen;
  j["weights"] = {{"ind", weights.ind}, {"rec", weights.rec}, {"adv", weights.adv}};
  for (const auto& d : domains) {
    j["elbo"][d.domain] = {{"recon_loglik", d.recon_loglik},
                           {"kl_style", d.kl_style},
                           {"kl_content", d.kl_content},
                           {"elbo", d.elbo}};
  }
  if (!disc_acc_real.empty()) {
    j["disc_acc_real"] = disc_acc_real;
    j["disc_acc_fake"] = disc_acc_fake;
  }
  if (with_wall) j["wall_ms"] = wall_ms;
  return j.dump();
}

Trainer::Trainer(TrainConfig config, std::vector<ImageBatch> train_sets)
    : config_(std::move(config)), train_(std::move(train_sets)) {
  config_.validate();
  if (train_.size() != config_.domains.size()) {
    throw std::invalid_argument("trainer needs one dataset per domain (" +
                                std::to_string(config_.domains.size()) + "), got " +
                                std::to_string(train_.size()));
  }
  steps_per_epoch_ = std::numeric_limits<std::size_t>::max();
  for (std::size_t d = 0; d < train_.size(); ++d) {
    if (train_[d].height != config_.height || train_[d].width != config_.width) {
      throw std::invalid_argument("dataset for '" + config_.domains[d] + "' has images of the wrong size");
    }
    steps_per_epoch_ = std::min(steps_per_epoch_, train_[d].size() / config_.batch_size);
  }
  if (steps_per_epoch_ == 0) {
    throw std::invalid_argument("every domain needs at least batch_size (" +
                                std::to_string(config_.batch_size) + ") training images");
  }
  bundle_ = ModelBundle<float>::create(config_.net(), domains_of(config_), config_.seed);
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint, std::vector<ImageBatch> train_sets) {
  auto data = read_checkpoint_file(checkpoint);
  Trainer t(TrainConfig::parse(data.config_text), std::move(train_sets));
  import_parameters(data, t.bundle_);
  t.gen_opt_ = import_adam(data, "opt/gen", t.bundle_.generator_parameters());
  t.disc_opt_ = import_adam(data, "opt/disc", t.bundle_.discriminator_parameters());
  t.step_ = decode_counter(data, "state/step");
  return t;
}

std::uint64_t Trainer::total_steps() const {
  std::uint64_t n = static_cast<std::uint64_t>(config_.epochs) * steps_per_epoch_;
  if (config_.max_steps > 0) n = std::min<std::uint64_t>(n, config_.max_steps);
  return n;
}

std::vector<std::size_t> Trainer::batch_indices(std::size_t d, std::uint64_t s) const {
  const std::uint64_t epoch = s / steps_per_epoch_;
  const std::size_t slot = static_cast<std::size_t>(s % steps_per_epoch_);
  std::vector<std::size_t> perm(train_[d].size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = Rng::keyed(config_.seed, epoch, "perm/" + config_.domains[d]);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  const auto first = perm.begin() + static_cast<std::ptrdiff_t>(slot * config_.batch_size);
  return {first, first + static_cast<std::ptrdiff_t>(config_.batch_size)};
}

TrainLogRecord Trainer::step() {
  try {
    return advance();
  } catch (const DomainError& e) {
    // Only non-finite activations can push a posterior scale out of range.
    throw NonFiniteError("numerical failure at step " + std::to_string(step_ + 1) + ": " + e.what());
  }
}

TrainLogRecord Trainer::advance() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t s = step_;
  const auto& w = config_.weights;
  const AdamHyper hyper{config_.learning_rate, config_.beta1, config_.beta2, config_.adam_eps};
  const std::size_t targets = bundle_.num_targets();
  Rng rng = Rng::keyed(config_.seed, s, "train");

  std::vector<Tensor<float>> batches;
  for (std::size_t d = 0; d < train_.size(); ++d) batches.push_back(train_[d].gather(batch_indices(d, s)));

  auto ind = loss_ind<float>(bundle_, batches, config_.mc_samples, static_cast<float>(config_.sigma_x), rng);

  const bool need_fakes = w.rec > 0 || w.adv > 0;
  std::vector<Tensor<float>> fakes;
  std::vector<UsedLatents<float>> used;
  if (need_fakes) {
    for (std::size_t i = 1; i <= targets; ++i) {
      auto tb = translate_batch(bundle_, ind.posteriors[0], i, rng);
      fakes.push_back(tb.images);
      used.push_back(tb.latents);
    }
  }
  Tensor<float> l_rec = Tensor<float>::scalar(0.0f);
  if (w.rec > 0) l_rec = loss_rec(bundle_, fakes, used, rng);
  AdversarialTerms<float> adv{Tensor<float>::scalar(0.0f), Tensor<float>::scalar(0.0f), {}, {}};
  if (w.adv > 0) {
    std::vector<Tensor<float>> real(batches.begin() + 1, batches.end());
    adv = loss_adv(bundle_, real, fakes);
  }
  auto report = total_generator_loss(w, ind.loss, l_rec, adv);

  TrainLogRecord rec;
  rec.step = s + 1;
  rec.epoch = s / steps_per_epoch_;
  rec.l_ind = report.l_ind.item();
  rec.l_rec = report.l_rec.item();
  rec.l_adv_gen = report.l_adv_gen.item();
  rec.l_adv_disc = report.l_adv_disc.item();
  rec.total_gen = report.total_gen.item();
  rec.weights = w;
  for (std::size_t d = 0; d < ind.per_domain.size(); ++d) {
    const auto& b = ind.per_domain[d];
    rec.domains.push_back({config_.domains[d], mean_of(b.recon_loglik), mean_of(b.kl_style),
                           mean_of(b.kl_content), mean_of(b.elbo)});
  }
  for (std::size_t i = 0; i < adv.d_real.size(); ++i) {
    rec.disc_acc_real.push_back(fraction(adv.d_real[i], true));
    rec.disc_acc_fake.push_back(fraction(adv.d_fake[i], false));
  }
  const bool ok = std::isfinite(rec.total_gen) && std::isfinite(rec.l_adv_disc) &&
                  std::all_of(ind.per_domain.begin(), ind.per_domain.end(),
                              [](const auto& b) { return finite(b.elbo); });
  if (!ok) throw NonFiniteError("non-finite loss at step " + std::to_string(s + 1));

  const auto gen_params = bundle_.generator_parameters();
  const auto disc_params = bundle_.discriminator_parameters();
  zero_grads(gen_params);
  zero_grads(disc_params);
  report.total_gen.backward();
  adam_step(gen_params, gen_opt_, hyper);

  if (w.adv > 0) {
    std::vector<Tensor<float>> real(batches.begin() + 1, batches.end());
    std::vector<Tensor<float>> detached;
    for (const auto& f : fakes) detached.push_back(f.detach());
    for (std::size_t k = 0; k < config_.disc_steps; ++k) {
      Tensor<float> term = k == 0 ? adv.disc_term : loss_adv(bundle_, real, detached).disc_term;
      zero_grads(disc_params);
      term.backward();
      adam_step(disc_params, disc_opt_, hyper);
    }
  }
  ++step_;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

CheckpointData Trainer::checkpoint() const {
  CheckpointData data;
  data.config_text = config_.to_ini();
  export_parameters(bundle_, data);
  export_adam(gen_opt_, "opt/gen", data);
  export_adam(disc_opt_, "opt/disc", data);
  data.tensors.insert_or_assign("state/step", encode_counter(step_));
  return data;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  write_checkpoint_file(path, checkpoint());
}

std::filesystem::path run_directory(const TrainConfig& config) {
  const char* env = std::getenv("VBITN_RUN_DIR");
  const std::filesystem::path root = (env && *env) ? env : "runs";
  return root / config.run_id;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, std::uint64_t step) {
  return run_dir / ("ckpt-" + std::to_string(step) + ".vbit");
}

RunResult run_training(Trainer& trainer, const RunOptions& options) {
  RunResult result;
  const auto dir = options.run_dir.empty() ? run_directory(trainer.config()) : options.run_dir;
  std::ofstream log;
  if (options.write_files) {
    std::filesystem::create_directories(dir);
    // A fresh run replaces any earlier log under the same run id; a resumed
    // run continues it.
    log.open(dir / "log.ndjson", trainer.steps_done() == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("cannot open " + (dir / "log.ndjson").string());
  }
  const std::uint64_t stop = options.stop_after ? std::min(options.stop_after, trainer.total_steps())
                                                : trainer.total_steps();
  const std::size_t cadence = trainer.config().checkpoint_every;
  std::uint64_t last_saved = 0;
  while (trainer.steps_done() < stop) {
    TrainLogRecord rec;
    try {
      rec = trainer.step();
    } catch (const NonFiniteError& e) {
      TrainLogRecord diag;
      diag.step = trainer.steps_done() + 1;
      diag.status = "abort";
      diag.message = e.what();
      diag.weights = trainer.config().weights;
      if (log) log << diag.to_json() << "\n" << std::flush;
      result.records.push_back(diag);
      throw;
    }
    if (log) log << rec.to_json() << "\n";
    if (options.on_step) options.on_step(rec);
    result.records.push_back(std::move(rec));
    if (options.write_files && cadence > 0 && trainer.steps_done() % cadence == 0) {
      result.last_checkpoint = checkpoint_path(dir, trainer.steps_done());
      trainer.save_checkpoint(result.last_checkpoint);
      last_saved = trainer.steps_done();
    }
  }
  if (options.write_files && last_saved != trainer.steps_done()) {
    result.last_checkpoint = checkpoint_path(dir, trainer.steps_done());
    trainer.save_checkpoint(result.last_checkpoint);
  }
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const ModelBundle<float>& bundle,
                     const TrainConfig& config) {
  CheckpointData data;
  data.config_text = config.to_ini();
  export_parameters(bundle, data);
  write_checkpoint_file(path, data);
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto data = decode_checkpoint(bytes);
  TrainConfig config;
  try {
    config = TrainConfig::parse(data.config_text);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint carries an invalid config: ") + e.what());
  }
  auto bundle = ModelBundle<float>::create(config.net(), domains_of(config), config.seed);
  import_parameters(data, bundle);
  return {config, bundle.snapshot(), content_hash(bytes)};
}

std::vector<double> heldout_neg_elbo(const ModelBundle<float>& bundle,
                                     const std::vector<ImageBatch>& test_sets,
                                     std::size_t mc_samples, double sigma_x, std::uint64_t seed) {
  if (test_sets.size() != bundle.domains.size()) {
    throw std::invalid_argument("heldout_neg_elbo: need one test set per domain");
  }
  const auto frozen = bundle.snapshot();
  std::vector<double> out;
  for (std::size_t d = 0; d < test_sets.size(); ++d) {
    Rng rng = Rng::keyed(seed, d, "heldout");
    double total = 0;
    const std::size_t n = test_sets[d].size();
    for (std::size_t start = 0; start < n; start += kEvalChunk) {
      std::vector<std::size_t> idx(std::min(kEvalChunk, n - start));
      std::iota(idx.begin(), idx.end(), start);
      auto b = elbo<float>(test_sets[d].gather(idx), frozen.encoders[d], frozen.decoders[d],
                           frozen.style_prior(d), frozen.content_prior(), mc_samples,
                           static_cast<float>(sigma_x), rng);
      for (float v : b.elbo.data()) total -= v;
    }
    out.push_back(total / static_cast<double>(n));
  }
  return out;
}

Image to_image(const Tensor<float>& t) {
  const auto& s = t.shape();
  if (!((s.size() == 3 && s[2] == 3) || (s.size() == 4 && s[0] == 1 && s[3] == 3))) {
    throw ShapeError("to_image: expected [H,W,3] or [1,H,W,3], got " + vbitn::to_string(s));
  }
  const std::size_t h = s[s.size() - 3], w = s[s.size() - 2];
  return Image{h, w, std::vector<float>(t.data().begin(), t.data().end())};
}

Tensor<float> to_tensor(const Image& image) {
  return Tensor<float>({image.height, image.width, 3}, image.pixels);
}

EvalReport evaluate_translation(const ModelBundle<float>& bundle, const ImageBatch& source_test,
                                const std::string& target, const DomainClassifier& classifier,
                                const MaskExtractor& extractor, std::uint64_t seed, std::size_t n) {
  if (!source_test.has_masks()) throw std::invalid_argument("evaluation needs source masks");
  n = std::min(n, source_test.size());
  if (n == 0) throw std::invalid_argument("evaluation needs at least one source image");
  const auto frozen = bundle.snapshot();
  std::vector<Image> translated;
  std::vector<std::vector<std::uint8_t>> masks;
  double div_total = 0;
  std::size_t div_sets = 0;
  for (std::size_t k = 0; k < n; ++k) {
    auto q = encode_source(frozen, to_tensor(source_test.image(k)));
    Rng rng = Rng::keyed(seed, k, "eval/translate");
    translated.push_back(to_image(translate(frozen, q, target, rng, {k}).image));
    masks.push_back(source_test.mask(k));
    if (k < 32) {
      Rng srng = Rng::keyed(seed, k, "eval/styles");
      std::vector<Image> set;
      for (const auto& t : edit_styles(frozen, q, target, 4, srng, {k})) set.push_back(to_image(t.image));
      div_total += diversity(set);
      ++div_sets;
    }
  }
  EvalReport r;
  r.target = target;
  r.n = n;
  r.diversity = div_total / static_cast<double>(div_sets);
  r.domain_score = domain_score(translated, classifier, target);
  r.content_iou = content_iou(translated, masks, extractor);
  return r;
}

}  // namespace vbitn
