#include "vbitn/objectives.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vbitn/autodiff/ops.hpp"

namespace vbitn {

template <typename T>
Tensor<T> gaussian_loglik(const Tensor<T>& x, const Tensor<T>& reconstruction, T sigma_x) {
  if (x.shape() != reconstruction.shape()) {
    throw ShapeError("gaussian_loglik: image " + to_string(x.shape()) + " vs reconstruction " +
                     to_string(reconstruction.shape()));
  }
  if (!(sigma_x > T(0))) throw DomainError("gaussian_loglik: sigma_x must be > 0");
  const double pixels = static_cast<double>(x.numel() / x.dim(0));
  const double var = static_cast<double>(sigma_x) * static_cast<double>(sigma_x);
  const T norm = static_cast<T>(-0.5 * pixels * std::log(2.0 * std::numbers::pi * var));
  auto sq = row_sum(square(sub(x, reconstruction)));
  return add_scalar(scale(sq, static_cast<T>(-0.5 / var)), norm);
}

template <typename T>
ElboBreakdown<T> elbo(const Tensor<T>& x, const Posterior<T>& q, const Decoder<T>& dec,
                      const DiagGaussian<T>& prior_y, const DiagGaussian<T>& prior_z,
                      std::size_t mc_samples, T sigma_x, Rng& rng) {
  if (mc_samples == 0) throw std::invalid_argument("elbo: need at least one MC sample");
  if (prior_y.dim() != q.style.dim() || prior_z.dim() != q.content.dim()) {
    throw ShapeError("elbo: prior dimensions (" + std::to_string(prior_y.dim()) + ", " +
                     std::to_string(prior_z.dim()) + ") do not match posterior (" +
                     std::to_string(q.style.dim()) + ", " + std::to_string(q.content.dim()) + ")");
  }
  Tensor<T> recon;
  for (std::size_t l = 0; l < mc_samples; ++l) {
    auto eps_y = standard_normal<T>(q.style.mean().shape(), rng);
    auto eps_z = standard_normal<T>(q.content.mean().shape(), rng);
    auto ll = gaussian_loglik(x, dec(rsample(q.style, eps_y), rsample(q.content, eps_z)), sigma_x);
    recon = l == 0 ? ll : add(recon, ll);
  }
  if (mc_samples > 1) recon = scale(recon, T(1) / static_cast<T>(mc_samples));
  auto kl_y = kl_to(q.style, prior_y);
  auto kl_z = kl_to(q.content, prior_z);
  auto bound = sub(sub(recon, kl_y), kl_z);
  return {recon, kl_y, kl_z, bound};
}

template <typename T>
ElboBreakdown<T> elbo(const Tensor<T>& x, const Encoder<T>& enc, const Decoder<T>& dec,
                      const DiagGaussian<T>& prior_y, const DiagGaussian<T>& prior_z,
                      std::size_t mc_samples, T sigma_x, Rng& rng) {
  return elbo(x, enc(x), dec, prior_y, prior_z, mc_samples, sigma_x, rng);
}

template <typename T>
InterDomainTerm<T> loss_ind(const ModelBundle<T>& bundle, const std::vector<Tensor<T>>& batches,
                            std::size_t mc_samples, T sigma_x, Rng& rng) {
  if (batches.size() != bundle.domains.size()) {
    throw std::invalid_argument("loss_ind: got " + std::to_string(batches.size()) +
                                " batches for " + std::to_string(bundle.domains.size()) +
                                " domains");
  }
  InterDomainTerm<T> out;
  const auto prior_z = bundle.content_prior();
  for (std::size_t d = 0; d < batches.size(); ++d) {
    auto q = bundle.encoders[d](batches[d]);
    auto b = elbo(batches[d], q, bundle.decoders[d], bundle.style_prior(d), prior_z, mc_samples,
                  sigma_x, rng);
    auto term = neg(mean(b.elbo));
    out.loss = d == 0 ? term : add(out.loss, term);
    out.per_domain.push_back(std::move(b));
    out.posteriors.push_back(std::move(q));
  }
  return out;
}

template <typename T>
Tensor<T> loss_rec(const ModelBundle<T>& bundle, const std::vector<Tensor<T>>& translated,
                   const std::vector<UsedLatents<T>>& used, Rng& rng) {
  if (translated.size() != bundle.num_targets() || used.size() != translated.size()) {
    throw std::invalid_argument("loss_rec: need one translated batch and latent set per target");
  }
  Tensor<T> total;
  for (std::size_t i = 0; i < translated.size(); ++i) {
    const auto& x = translated[i];
    const auto y_used = used[i].style.detach();
    const auto z_used = used[i].content.detach();
    if (y_used.rank() != 2 || z_used.rank() != 2 || y_used.dim(0) != x.dim(0) ||
        z_used.dim(0) != x.dim(0)) {
      throw ShapeError("loss_rec: latents " + to_string(y_used.shape()) + ", " +
                       to_string(z_used.shape()) + " misaligned with batch " +
                       to_string(x.shape()));
    }
    auto q_target = bundle.encoders[i + 1](x);
    auto q_source = bundle.encoders[0](x);
    auto eps_y = standard_normal<T>(q_target.style.mean().shape(), rng);
    auto eps_z = standard_normal<T>(q_source.content.mean().shape(), rng);
    auto y_err = mean(row_sum(square(sub(rsample(q_target.style, eps_y), y_used))));
    auto z_err = mean(row_sum(square(sub(rsample(q_source.content, eps_z), z_used))));
    auto term = add(z_err, y_err);
    total = i == 0 ? term : add(total, term);
  }
  return total;
}

template <typename T>
AdversarialTerms<T> loss_adv(const ModelBundle<T>& bundle, const std::vector<Tensor<T>>& real,
                             const std::vector<Tensor<T>>& fake) {
  if (real.size() != bundle.num_targets() || fake.size() != real.size()) {
    throw std::invalid_argument("loss_adv: need one real and one fake batch per target");
  }
  const T lo = static_cast<T>(kProbClamp);
  const T hi = static_cast<T>(1.0 - kProbClamp);
  auto neg_log = [&](const Tensor<T>& p) { return neg(log(clamp(p, lo, hi))); };
  auto neg_log_1m = [&](const Tensor<T>& p) {
    return neg(log(clamp(add_scalar(neg(p), T(1)), lo, hi)));
  };
  AdversarialTerms<T> out;
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (real[i].rank() == 0 || fake[i].rank() == 0) throw ShapeError("loss_adv: empty batch");
    const auto& disc = bundle.discriminators[i];
    auto gen = mean(neg_log(disc(fake[i], /*frozen=*/true)));
    auto p_real = disc(real[i].detach());
    auto p_fake = disc(fake[i].detach());
    auto dt = add(mean(neg_log(p_real)), mean(neg_log_1m(p_fake)));
    out.d_real.push_back(p_real);
    out.d_fake.push_back(p_fake);
    out.gen_term = i == 0 ? gen : add(out.gen_term, gen);
    out.disc_term = i == 0 ? dt : add(out.disc_term, dt);
  }
  return out;
}

void LossWeights::validate() const {
  for (double w : {ind, rec, adv}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("loss weights must be finite and >= 0");
    }
  }
}

template <typename T>
LossReport<T> total_generator_loss(const LossWeights& w, const Tensor<T>& l_ind,
                                   const Tensor<T>& l_rec, const AdversarialTerms<T>& adv) {
  w.validate();
  auto total = add(add(scale(l_ind, static_cast<T>(w.ind)), scale(l_rec, static_cast<T>(w.rec))),
                   scale(adv.gen_term, static_cast<T>(w.adv)));
  return {l_ind, l_rec, adv.gen_term, adv.disc_term, total, w};
}

#define VBITN_INSTANTIATE_OBJ(T)                                                               \
  template Tensor<T> gaussian_loglik(const Tensor<T>&, const Tensor<T>&, T);                   \
  template ElboBreakdown<T> elbo(const Tensor<T>&, const Posterior<T>&, const Decoder<T>&,     \
                                 const DiagGaussian<T>&, const DiagGaussian<T>&, std::size_t,  \
                                 T, Rng&);                                                     \
  template ElboBreakdown<T> elbo(const Tensor<T>&, const Encoder<T>&, const Decoder<T>&,       \
                                 const DiagGaussian<T>&, const DiagGaussian<T>&, std::size_t,  \
                                 T, Rng&);                                                     \
  template InterDomainTerm<T> loss_ind(const ModelBundle<T>&, const std::vector<Tensor<T>>&,   \
                                       std::size_t, T, Rng&);                                  \
  template Tensor<T> loss_rec(const ModelBundle<T>&, const std::vector<Tensor<T>>&,            \
                              const std::vector<UsedLatents<T>>&, Rng&);                       \
  template AdversarialTerms<T> loss_adv(const ModelBundle<T>&, const std::vector<Tensor<T>>&,  \
                                        const std::vector<Tensor<T>>&);                        \
  template LossReport<T> total_generator_loss(const LossWeights&, const Tensor<T>&,            \
                                              const Tensor<T>&, const AdversarialTerms<T>&);

VBITN_INSTANTIATE_OBJ(float)
VBITN_INSTANTIATE_OBJ(double)

}  // namespace vbitn
