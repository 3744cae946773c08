#pragma once

#include <cstddef>

#include "mcsgm/chain.hpp"

namespace mcsgm::theory_bounds {

// Inputs shared by the closed-form bound calculators; eta is the constant
// per-step size.
struct BoundInputs {
  double g = 1.0;      // Lipschitz constant
  double l = 0.0;      // smoothness constant; <= 0 means absent
  double rho = 0.0;    // strong concavity of the dual block
  std::size_t n = 1;   // sample count / chain states
  std::size_t t_steps = 1;
  double eta = 0.0;
  chain::ChainSpectrum spectrum;
  double d0 = 0.0;     // ||w*||_2
  double f0_sup = 0.0; // sup_z f(0; z)
  double d_w = 0.0;    // diameter of W
  double d_v = 0.0;    // diameter of V
  double b = 0.0;      // sup of f, high-probability contexts
  double gamma = 0.05; // confidence level
};

// Spectrum stand-in for calculator sweeps over lambda with everything else
// fixed: symmetric chain with the given contraction parameter.
chain::ChainSpectrum synthetic_symmetric_spectrum(std::size_t n, double lambda);

// On-average argument stability of MC-SGD:
//   smooth      (2G/n) sum eta_j              (needs eta <= 2/L)
//   non-smooth  2G sqrt(sum eta_j^2) + (4G/n) sum eta_j
double sgd_stability_bound(const BoundInputs& in, bool smooth);

// Generalization gap of MC-SGD: 2 G^2 T eta / n when smooth, else
// G times the non-smooth stability bound.
double sgd_gen_bound(const BoundInputs& in, bool smooth);

// On-average argument stability of MC-SGDA:
//   smooth      4G sqrt(sum eta_j^2 / n) + (8 sqrt2 G / n) sum eta_j
//               (needs sum eta_j^2 <= 1/(2L^2))
//   non-smooth  2G sqrt(2 sum eta_j^2) + (4 sqrt2 G / n) sum eta_j
double sgda_stability_bound(const BoundInputs& in, bool smooth);

struct SgdaGenBounds {
  double weak_pd = 0.0;  // G * stability
  double primal = 0.0;   // (1 + L/rho) * G * stability
};
SgdaGenBounds sgda_gen_bounds(const BoundInputs& in, bool smooth);

// Expected empirical optimization gap of MC-SGD (convex case), evaluated
// with the proof-form numerator (||w*||^2 rather than the printed ||w*||):
//   [ D0^2 + 4 G D sum_{j<K_P} eta + G sum_{j>=K_P} eta/j
//     + G^2 sum_j (4 eta k_j eta + eta^2) ] / (2 sum eta),
// with D = sqrt((G^2 + 2 sup f(0;z)) sum eta) + D0 and the k_j look-back
// schedule.
double sgd_opt_bound(const BoundInputs& in);

// Expected primal-dual gap of MC-SGDA:
//   G^2 eta + D^2/(2 T eta)
//   + (2 G K_P D + 12 G^2 eta sum k_j + G sum_{j>=K_P} 1/j^2) / T,
// D = D_w + D_v, with the squared-index look-back schedule.
double sgda_opt_bound(const BoundInputs& in);

// Gradient-norm bound for smooth non-convex MC-SGD; fs_w0 = F_S(w_0):
//   (C + sum_{j>=K_P} eta/j) / (2 sum eta)
//   + G^2 L sum_j (eta^2 + k_j S2_j + 6 eta S1_j) / (2 sum eta),
// C = 2 (F_S(w_0) + 2 G^2 sum_{j<K_P} eta), S1/S2 the look-back step sums.
double nonconvex_opt_bound(const BoundInputs& in, double fs_w0);

}  // namespace mcsgm::theory_bounds
