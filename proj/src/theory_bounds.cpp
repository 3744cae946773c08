#include "mcsgm/theory_bounds.hpp"

#include <cmath>

#include "mcsgm/errors.hpp"

namespace mcsgm::theory_bounds {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

void require(bool ok, const char* msg) {
  if (!ok) throw InvalidConfigurationError(msg);
}

double t_d(std::size_t t) { return static_cast<double>(t); }

}  // namespace

chain::ChainSpectrum synthetic_symmetric_spectrum(std::size_t n, double lambda) {
  require(n >= 1, "synthetic spectrum: n >= 1");
  require(lambda >= 0.5 && lambda < 1.0, "synthetic spectrum: lambda in [1/2, 1)");
  chain::ChainSpectrum spec;
  spec.n = n;
  spec.lambda = lambda;
  spec.symmetric = true;
  spec.k_p = 0;
  spec.c_p = std::pow(t_d(n), 1.5);
  spec.stationary.assign(n, 1.0 / t_d(n));
  spec.eigenvalues.assign(n, {0.0, 0.0});
  spec.eigenvalues[0] = {1.0, 0.0};
  if (n >= 2) spec.eigenvalues[1] = {2.0 * lambda - 1.0, 0.0};
  return spec;
}

double sgd_stability_bound(const BoundInputs& in, bool smooth) {
  require(in.n >= 1 && in.eta >= 0.0, "sgd_stability_bound: n >= 1, eta >= 0");
  double sum_eta = t_d(in.t_steps) * in.eta;
  if (smooth) {
    require(in.l > 0.0, "sgd_stability_bound: smooth case needs L");
    require(in.eta <= 2.0 / in.l + 1e-15, "sgd_stability_bound: eta <= 2/L required");
    return 2.0 * in.g * sum_eta / t_d(in.n);
  }
  double sum_eta_sq = t_d(in.t_steps) * in.eta * in.eta;
  return 2.0 * in.g * std::sqrt(sum_eta_sq) + 4.0 * in.g * sum_eta / t_d(in.n);
}

double sgd_gen_bound(const BoundInputs& in, bool smooth) {
  if (smooth) {
    require(in.l > 0.0, "sgd_gen_bound: smooth case needs L");
    require(in.eta <= 2.0 / in.l + 1e-15, "sgd_gen_bound: eta <= 2/L required");
    return 2.0 * in.g * in.g * t_d(in.t_steps) * in.eta / t_d(in.n);
  }
  return in.g * sgd_stability_bound(in, false);
}

double sgda_stability_bound(const BoundInputs& in, bool smooth) {
  require(in.n >= 1 && in.eta >= 0.0, "sgda_stability_bound: n >= 1, eta >= 0");
  double sum_eta = t_d(in.t_steps) * in.eta;
  double sum_eta_sq = t_d(in.t_steps) * in.eta * in.eta;
  if (smooth) {
    require(in.l > 0.0, "sgda_stability_bound: smooth case needs L");
    require(sum_eta_sq <= 1.0 / (2.0 * in.l * in.l) + 1e-15,
            "sgda_stability_bound: sum eta^2 <= 1/(2L^2) required");
    return 4.0 * in.g * std::sqrt(sum_eta_sq / t_d(in.n)) +
           8.0 * kSqrt2 * in.g * sum_eta / t_d(in.n);
  }
  return 2.0 * in.g * std::sqrt(2.0 * sum_eta_sq) + 4.0 * kSqrt2 * in.g * sum_eta / t_d(in.n);
}

SgdaGenBounds sgda_gen_bounds(const BoundInputs& in, bool smooth) {
  double stab = sgda_stability_bound(in, smooth);
  SgdaGenBounds out;
  out.weak_pd = in.g * stab;
  require(in.rho > 0.0, "sgda_gen_bounds: primal bound needs rho > 0");
  require(in.l > 0.0, "sgda_gen_bounds: primal bound needs L");
  out.primal = (1.0 + in.l / in.rho) * in.g * stab;
  return out;
}

double sgd_opt_bound(const BoundInputs& in) {
  require(in.eta > 0.0 && in.t_steps >= 1, "sgd_opt_bound: eta > 0 and T >= 1 required");
  if (in.l > 0.0)
    require(in.eta <= 2.0 / in.l + 1e-15, "sgd_opt_bound: eta <= 2/L required");
  const double eta = in.eta;
  const double sum_eta = t_d(in.t_steps) * eta;
  const double d_big = std::sqrt((in.g * in.g + 2.0 * in.f0_sup) * sum_eta) + in.d0;
  const std::vector<std::size_t> ks = chain::k_schedule(in.spectrum, d_big, in.n, in.t_steps);
  const std::size_t k_p = in.spectrum.k_p;

  double burn_in = 0.0;  // sum_{j=1}^{K_P - 1} eta_j
  if (k_p >= 2) burn_in = t_d(std::min<std::size_t>(k_p - 1, in.t_steps)) * eta;

  double harmonic = 0.0;  // sum_{j=K_P}^{T} eta_j / j
  for (std::size_t j = std::max<std::size_t>(k_p, 1); j <= in.t_steps; ++j)
    harmonic += eta / t_d(j);

  double drift = 0.0;  // sum_j (4 eta_j sum_{k=j-k_j+1}^j eta_k + eta_j^2)
  for (std::size_t j = 1; j <= in.t_steps; ++j)
    drift += 4.0 * eta * (t_d(ks[j - 1]) * eta) + eta * eta;

  double numerator = in.d0 * in.d0 + 4.0 * in.g * d_big * burn_in + in.g * harmonic +
                     in.g * in.g * drift;
  return numerator / (2.0 * sum_eta);
}

double sgda_opt_bound(const BoundInputs& in) {
  require(in.eta > 0.0 && in.t_steps >= 1, "sgda_opt_bound: eta > 0 and T >= 1 required");
  const double d_big = in.d_w + in.d_v;
  require(d_big > 0.0, "sgda_opt_bound: domain diameters required");
  const std::vector<std::size_t> ks =
      chain::k_schedule_squared(in.spectrum, d_big, in.n, in.t_steps);
  const std::size_t k_p = in.spectrum.k_p;
  const double t = t_d(in.t_steps);

  double sum_k = 0.0;
  for (std::size_t k : ks) sum_k += t_d(k);

  double inv_sq = 0.0;  // sum_{j=K_P}^{T} 1/j^2
  for (std::size_t j = std::max<std::size_t>(k_p, 1); j <= in.t_steps; ++j)
    inv_sq += 1.0 / (t_d(j) * t_d(j));

  return in.g * in.g * in.eta + d_big * d_big / (2.0 * t * in.eta) +
         (2.0 * in.g * t_d(k_p) * d_big + 12.0 * in.g * in.g * in.eta * sum_k +
          in.g * inv_sq) /
             t;
}

double nonconvex_opt_bound(const BoundInputs& in, double fs_w0) {
  require(in.l > 0.0, "nonconvex_opt_bound: L required");
  require(in.eta > 0.0 && in.t_steps >= 1, "nonconvex_opt_bound: eta > 0 and T >= 1 required");
  require(in.d_w > 0.0, "nonconvex_opt_bound: domain diameter required");
  const double eta = in.eta;
  const double sum_eta = t_d(in.t_steps) * eta;
  const std::vector<std::size_t> ks = chain::k_schedule(in.spectrum, in.d_w, in.n, in.t_steps);
  const std::size_t k_p = in.spectrum.k_p;

  double burn_in = 0.0;
  if (k_p >= 2) burn_in = t_d(std::min<std::size_t>(k_p - 1, in.t_steps)) * eta;
  double c_const = 2.0 * (fs_w0 + 2.0 * in.g * in.g * burn_in);

  double harmonic = 0.0;
  for (std::size_t j = std::max<std::size_t>(k_p, 1); j <= in.t_steps; ++j)
    harmonic += eta / t_d(j);

  double drift = 0.0;  // sum_j (eta^2 + k_j sum eta_k^2 + 6 eta sum eta_k)
  for (std::size_t j = 1; j <= in.t_steps; ++j) {
    double window = t_d(ks[j - 1] + 1);  // k from j-k_j to j inclusive
    drift += eta * eta + t_d(ks[j - 1]) * window * eta * eta + 6.0 * eta * window * eta;
  }

  return (c_const + harmonic) / (2.0 * sum_eta) +
         in.g * in.g * in.l * drift / (2.0 * sum_eta);
}

}  // namespace mcsgm::theory_bounds
