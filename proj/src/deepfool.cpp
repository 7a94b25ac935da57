#include "dfal/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "dfal/errors.hpp"

namespace dfal {

namespace {

// Extra step length in input units so that a point sitting exactly on a
// boundary (tie broken toward k0) still moves across it.
constexpr double kBoundaryNudge = 1e-10;

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

AdversarialResult broken(const Tensor& x, std::size_t original, std::size_t iterations) {
  AdversarialResult r;
  r.perturbation = Tensor(x.shape());
  r.iterations = iterations;
  r.original_label = original;
  return r;
}

}  // namespace

void AttackConfig::validate() const {
  if (!(overshoot >= 0.0)) throw InvalidInput("overshoot must be nonnegative");
  if (max_iter == 0) throw InvalidInput("max_iter must be positive");
  if (clip && !(clip_min < clip_max)) throw InvalidInput("clip range is empty");
}

AdversarialResult deepfool(const Network& net, const Tensor& x, const AttackConfig& cfg) {
  cfg.validate();
  const std::size_t n = x.size();
  const std::size_t classes = net.spec().class_count;
  const double scale = 1.0 + cfg.overshoot;

  const Tensor logits0 = net.forward(x);
  if (!logits0.all_finite()) return broken(x, 0, 0);
  const std::size_t k0 = argmax(logits0.values());

  std::vector<double> r_tot(n, 0.0);
  Tensor point = x;
  std::vector<double> w(n);
  std::size_t iter = 0;
  std::size_t label = k0;

  const auto place = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double v = x[i] + scale * r_tot[i];
      if (cfg.clip) v = std::clamp(v, cfg.clip_min, cfg.clip_max);
      point[i] = v;
    }
  };

  while (label == k0 && iter < cfg.max_iter) {
    const LogitJacobian jac = net.logit_jacobian(point);
    if (!finite(jac.logits)) return broken(x, k0, iter);
    for (const auto& g : jac.gradients)
      if (!finite(g)) return broken(x, k0, iter);

    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = classes;
    double best_wnorm = 0.0, best_f = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      if (k == k0) continue;
      const double f = jac.logits[k] - jac.logits[k0];
      for (std::size_t i = 0; i < n; ++i) w[i] = jac.gradients[k][i] - jac.gradients[k0][i];
      const double wnorm = cfg.p == NormOrder::l2 ? norm_l2(w) : norm_l1(w);
      if (wnorm == 0.0) continue;
      const double dist = std::abs(f) / wnorm;
      if (dist < best) {
        best = dist;
        best_k = k;
        best_wnorm = wnorm;
        best_f = f;
      }
    }
    // Every linearized boundary is flat: no direction changes the prediction.
    if (best_k == classes) break;

    const double length = best + kBoundaryNudge;
    // The step raises f_l - f_k0 when it is negative and lowers it otherwise.
    const double sign = best_f <= 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = jac.gradients[best_k][i] - jac.gradients[k0][i];
      if (cfg.p == NormOrder::l2) {
        r_tot[i] += sign * length * wi / best_wnorm;
      } else {
        r_tot[i] += sign * length * (wi > 0.0 ? 1.0 : (wi < 0.0 ? -1.0 : 0.0));
      }
    }
    ++iter;
    place();
    const Tensor logits = net.forward(point);
    if (!logits.all_finite()) return broken(x, k0, iter);
    label = argmax(logits.values());
  }

  AdversarialResult result;
  result.perturbation = Tensor(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    result.perturbation[i] = cfg.clip ? point[i] - x[i] : scale * r_tot[i];
  if (!result.perturbation.all_finite()) return broken(x, k0, iter);
  result.norm = cfg.p == NormOrder::l2 ? norm_l2(result.perturbation.values())
                                       : norm_linf(result.perturbation.values());
  result.iterations = iter;
  result.original_label = k0;
  result.adversarial_label = label;
  result.success = label != k0;
  return result;
}

std::vector<AdversarialResult> batch_deepfool(
    const Network& net, std::span<const std::reference_wrapper<const Tensor>> xs,
    const AttackConfig& cfg, Execution exec) {
  cfg.validate();
  std::vector<AdversarialResult> out(xs.size());
  for_each_index(xs.size(), exec, [&](std::size_t i) {
    try {
      out[i] = deepfool(net, xs[i].get(), cfg);
    } catch (const InvalidInput&) {
      out[i] = broken(xs[i].get(), 0, 0);
    }
  });
  return out;
}

}  // namespace dfal
