#include "mcsgm/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "mcsgm/errors.hpp"
#include "mcsgm/kernels.hpp"

namespace mcsgm::optim {

StepSchedule StepSchedule::constant(double eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("StepSchedule: eta must be nonnegative");
  return {Kind::constant, eta};
}

double StepSchedule::resolve(std::size_t t_steps) const {
  switch (kind) {
    case Kind::constant:
      return eta;
    case Kind::inv_sqrt_tlogt: {
      if (t_steps < 2)
        throw InvalidConfigurationError("StepSchedule: (T log T)^{-1/2} needs T >= 2");
      double t = static_cast<double>(t_steps);
      return 1.0 / std::sqrt(t * std::log(t));
    }
    case Kind::t_pow_neg34: {
      if (t_steps < 1) throw InvalidConfigurationError("StepSchedule: T >= 1 required");
      return std::pow(static_cast<double>(t_steps), -0.75);
    }
  }
  return 0.0;
}

std::string StepSchedule::name() const {
  switch (kind) {
    case Kind::constant: return "constant";
    case Kind::inv_sqrt_tlogt: return "inv_sqrt_tlogt";
    case Kind::t_pow_neg34: return "t_pow_neg34";
  }
  return "?";
}

void check_sgd_schedule(const losses::LossFamily& fam, double eta) {
  if (fam.smooth && fam.l && eta > 2.0 / *fam.l + 1e-15)
    throw InvalidConfigurationError("schedule: smooth SGD requires eta <= 2/L");
}

void check_sgda_schedule(const losses::MinimaxFamily& fam, double eta, std::size_t t_steps) {
  double sum_sq = static_cast<double>(t_steps) * eta * eta;
  if (sum_sq > 1.0 / (2.0 * fam.l * fam.l) + 1e-15)
    throw InvalidConfigurationError("schedule: smooth SGDA requires T eta^2 <= 1/(2 L^2)");
}

namespace {

std::size_t thin_stride(std::size_t t_steps) { return std::max<std::size_t>(1, t_steps / 1000); }

const losses::Example& pick(const losses::Dataset& s, std::uint32_t index_1based) {
  if (index_1based == 0 || index_1based > s.n())
    throw std::invalid_argument("mc_sgd: path index outside [1, n]");
  return s.examples[index_1based - 1];
}

const losses::SaddleExample& pick(const losses::SaddleDataset& s, std::uint32_t index_1based) {
  if (index_1based == 0 || index_1based > s.n())
    throw std::invalid_argument("mc_sgda: path index outside [1, n]");
  return s.examples[index_1based - 1];
}

}  // namespace

Trajectory mc_sgd(const losses::LossFamily& fam, const losses::Dataset& s,
                  const chain::ChainPath& path, const StepSchedule& sched,
                  std::span<const double> w0, const DomainSpec& domain) {
  if (w0.size() != fam.d) throw std::invalid_argument("mc_sgd: w0 dimension mismatch");
  const std::size_t t_steps = path.indices.size();
  const double eta = sched.resolve(t_steps);
  check_sgd_schedule(fam, eta);

  Trajectory traj;
  traj.eta = eta;
  traj.t_steps = t_steps;
  const std::size_t stride = thin_stride(t_steps);

  std::vector<double> w(w0.begin(), w0.end());
  std::vector<double> grad(fam.d);
  std::vector<double> weighted_sum(fam.d, 0.0);

  for (std::size_t t = 1; t <= t_steps; ++t) {
    losses::subgradient_into(fam, w, pick(s, path.indices[t - 1]), grad);
    kernels::axpy(-eta, grad.data(), w.data(), fam.d);
    project_in_place(domain, w);
    kernels::axpy(eta, w.data(), weighted_sum.data(), fam.d);
    if (t % stride == 0 || t == t_steps) {
      traj.iterates.push_back(w);
      traj.iterate_steps.push_back(t);
    }
  }

  if (t_steps == 0) {
    traj.averaged.assign(w0.begin(), w0.end());
  } else if (eta == 0.0) {
    traj.averaged = w;  // zero step: all iterates coincide
  } else {
    traj.averaged = weighted_sum;
    kernels::scal(1.0 / (eta * static_cast<double>(t_steps)), traj.averaged.data(), fam.d);
  }
  return traj;
}

SaddleTrajectory mc_sgda(const losses::MinimaxFamily& fam, const losses::SaddleDataset& s,
                         const chain::ChainPath& path, const StepSchedule& sched,
                         std::span<const double> w0, std::span<const double> v0,
                         const DomainSpec& w_domain, const DomainSpec& v_domain) {
  if (w0.size() != fam.d_w || v0.size() != fam.d_v)
    throw std::invalid_argument("mc_sgda: initial point dimension mismatch");
  const std::size_t t_steps = path.indices.size();
  const double eta = sched.resolve(t_steps);

  SaddleTrajectory traj;
  traj.eta = eta;
  traj.t_steps = t_steps;
  const std::size_t stride = thin_stride(t_steps);

  std::vector<double> w(w0.begin(), w0.end());
  std::vector<double> v(v0.begin(), v0.end());
  std::vector<double> gw(fam.d_w), gv(fam.d_v);
  std::vector<double> w_sum(fam.d_w, 0.0), v_sum(fam.d_v, 0.0);

  for (std::size_t t = 1; t <= t_steps; ++t) {
    const losses::SaddleExample& z = pick(s, path.indices[t - 1]);
    // simultaneous update: both partials at (w_{t-1}, v_{t-1})
    losses::minimax_subgrad_w_into(fam, w, v, z, gw);
    losses::minimax_subgrad_v_into(fam, w, v, z, gv);
    kernels::axpy(-eta, gw.data(), w.data(), fam.d_w);
    kernels::axpy(eta, gv.data(), v.data(), fam.d_v);
    project_in_place(w_domain, w);
    project_in_place(v_domain, v);
    kernels::axpy(eta, w.data(), w_sum.data(), fam.d_w);
    kernels::axpy(eta, v.data(), v_sum.data(), fam.d_v);
    if (t % stride == 0 || t == t_steps) {
      traj.iterates.emplace_back(w, v);
      traj.iterate_steps.push_back(t);
    }
  }

  if (t_steps == 0) {
    traj.averaged_w.assign(w0.begin(), w0.end());
    traj.averaged_v.assign(v0.begin(), v0.end());
  } else if (eta == 0.0) {
    traj.averaged_w = w;
    traj.averaged_v = v;
  } else {
    traj.averaged_w = w_sum;
    traj.averaged_v = v_sum;
    kernels::scal(1.0 / (eta * static_cast<double>(t_steps)), traj.averaged_w.data(), fam.d_w);
    kernels::scal(1.0 / (eta * static_cast<double>(t_steps)), traj.averaged_v.data(), fam.d_v);
  }
  return traj;
}

std::vector<double> average_iterates(const std::vector<std::vector<double>>& iterates,
                                     std::span<const double> weights) {
  if (iterates.empty()) throw std::invalid_argument("average_iterates: empty sequence");
  if (weights.size() != iterates.size())
    throw std::invalid_argument("average_iterates: weight count mismatch");
  const std::size_t d = iterates.front().size();
  std::vector<double> out(d, 0.0);
  double weight_sum = 0.0;
  for (std::size_t j = 0; j < iterates.size(); ++j) {
    kernels::axpy(weights[j], iterates[j].data(), out.data(), d);
    weight_sum += weights[j];
  }
  if (weight_sum == 0.0) throw std::invalid_argument("average_iterates: zero total weight");
  kernels::scal(1.0 / weight_sum, out.data(), d);
  return out;
}

std::vector<double> average_iterates(const std::vector<std::vector<double>>& iterates,
                                     const StepSchedule& sched) {
  if (iterates.empty()) throw std::invalid_argument("average_iterates: empty sequence");
  double eta = sched.kind == StepSchedule::Kind::constant ? sched.eta
                                                          : sched.resolve(iterates.size());
  if (eta == 0.0) eta = 1.0;  // zero-step limit: plain mean
  std::vector<double> weights(iterates.size(), eta);
  return average_iterates(iterates, weights);
}

std::pair<double, double> nonexpansive_witness(const losses::LossFamily& fam,
                                               std::span<const double> w,
                                               std::span<const double> w_prime,
                                               const losses::Example& z, double eta) {
  if (!fam.smooth || !fam.l)
    throw UnsupportedFamilyError("nonexpansive_witness: requires a smooth family");
  if (!fam.convex)
    throw UnsupportedFamilyError("nonexpansive_witness: requires a convex family");
  std::vector<double> gw = losses::subgradient(fam, w, z);
  std::vector<double> gwp = losses::subgradient(fam, w_prime, z);
  double lhs_sq = 0.0, rhs_sq = 0.0;
  for (std::size_t i = 0; i < fam.d; ++i) {
    double a = (w[i] - eta * gw[i]) - (w_prime[i] - eta * gwp[i]);
    double b = w[i] - w_prime[i];
    lhs_sq += a * a;
    rhs_sq += b * b;
  }
  return {std::sqrt(lhs_sq), std::sqrt(rhs_sq)};
}

}  // namespace mcsgm::optim
