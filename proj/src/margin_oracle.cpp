#include <cmath>
#include <limits>
#include <numbers>

#include "dfal/data.hpp"
#include "dfal/errors.hpp"

namespace dfal {

namespace {

std::vector<std::vector<double>> probe_directions(std::size_t dim, std::size_t count) {
  std::vector<std::vector<double>> dirs;
  if (dim == 1) return {{1.0}, {-1.0}};
  if (dim == 2) {
    for (std::size_t i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
      dirs.push_back({std::cos(a), std::sin(a)});
    }
    return dirs;
  }
  // Fibonacci sphere.
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    const double r = std::sqrt(1.0 - z * z);
    const double a = golden * static_cast<double>(i);
    dirs.push_back({r * std::cos(a), r * std::sin(a), z});
  }
  return dirs;
}

}  // namespace

double margin_oracle(const Network& net, const Tensor& x, const MarginOracleConfig& cfg) {
  const std::size_t dim = x.size();
  if (dim == 0 || dim > 3)
    throw UnsupportedInput("margin oracle supports inputs of dimension 1 to 3, got " +
                           std::to_string(dim));
  if (!(cfg.radius_max > 0.0) || cfg.radial_steps == 0 || cfg.directions == 0)
    throw InvalidInput("margin oracle needs a positive radius and step counts");

  const std::size_t k0 = net.predict(x);
  Tensor probe = x;
  const auto flips = [&](const std::vector<double>& d, double rho) {
    for (std::size_t i = 0; i < dim; ++i) probe[i] = x[i] + rho * d[i];
    return net.predict(probe) != k0;
  };

  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : probe_directions(dim, cfg.directions)) {
    double inside = 0.0;
    for (std::size_t j = 1; j <= cfg.radial_steps; ++j) {
      if (inside >= best) break;
      const double rho = cfg.radius_max * static_cast<double>(j) / static_cast<double>(cfg.radial_steps);
      if (!flips(d, rho)) {
        inside = rho;
        continue;
      }
      double lo = inside, hi = rho;
      for (std::size_t b = 0; b < cfg.bisection_steps; ++b) {
        const double mid = 0.5 * (lo + hi);
        (flips(d, mid) ? hi : lo) = mid;
      }
      best = std::min(best, hi);
      break;
    }
  }
  return best;
}

std::vector<double> batch_margin_oracle(const Network& net,
                                        std::span<const std::reference_wrapper<const Tensor>> xs,
                                        const MarginOracleConfig& cfg, Execution exec) {
  std::vector<double> out(xs.size());
  for_each_index(xs.size(), exec, [&](std::size_t i) { out[i] = margin_oracle(net, xs[i].get(), cfg); });
  return out;
}

}  // namespace dfal
