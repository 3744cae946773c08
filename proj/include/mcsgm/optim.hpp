#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcsgm/chain.hpp"
#include "mcsgm/domain.hpp"
#include "mcsgm/losses.hpp"

namespace mcsgm::optim {

// Constant-within-run step size; the non-constant kinds only determine the
// constant from the run length T.
struct StepSchedule {
  enum class Kind { constant, inv_sqrt_tlogt, t_pow_neg34 };
  Kind kind = Kind::constant;
  double eta = 0.0;  // used by kind == constant

  static StepSchedule constant(double eta);
  static StepSchedule inv_sqrt_tlogt() { return {Kind::inv_sqrt_tlogt, 0.0}; }
  static StepSchedule t_pow_neg34() { return {Kind::t_pow_neg34, 0.0}; }

  // eta for a run of length T; natural log; T < 2 rejected for the
  // (T log T)^{-1/2} kind.
  double resolve(std::size_t t_steps) const;
  std::string name() const;
};

// Throws InvalidConfigurationError when the smooth-case preconditions fail:
// eta <= 2/L for SGD, T eta^2 <= 1/(2 L^2) for SGDA.
void check_sgd_schedule(const losses::LossFamily& fam, double eta);
void check_sgda_schedule(const losses::MinimaxFamily& fam, double eta, std::size_t t_steps);

struct Trajectory {
  std::vector<std::vector<double>> iterates;  // thinned checkpoints
  std::vector<std::size_t> iterate_steps;     // step index of each checkpoint
  std::vector<double> averaged;               // sum eta_j w_j / sum eta_j
  double eta = 0.0;
  std::size_t t_steps = 0;
};

struct SaddleTrajectory {
  std::vector<std::pair<std::vector<double>, std::vector<double>>> iterates;
  std::vector<std::size_t> iterate_steps;
  std::vector<double> averaged_w;
  std::vector<double> averaged_v;
  double eta = 0.0;
  std::size_t t_steps = 0;
};

// w_t = Proj_W(w_{t-1} - eta * subgrad f(w_{t-1}; z_{i_t})), indices from the
// chain path; deterministic given all inputs. Checkpoints are thinned to
// every max(1, T/1000)-th step plus the final one; the weighted average is
// exact regardless of thinning.
Trajectory mc_sgd(const losses::LossFamily& fam, const losses::Dataset& s,
                  const chain::ChainPath& path, const StepSchedule& sched,
                  std::span<const double> w0, const DomainSpec& domain);

// Simultaneous update: both partial subgradients are taken at
// (w_{t-1}, v_{t-1}) before either variable moves; descent in w, ascent in v.
SaddleTrajectory mc_sgda(const losses::MinimaxFamily& fam, const losses::SaddleDataset& s,
                         const chain::ChainPath& path, const StepSchedule& sched,
                         std::span<const double> w0, std::span<const double> v0,
                         const DomainSpec& w_domain, const DomainSpec& v_domain);

// eta-weighted average of an explicit iterate sequence (w_1..w_T, without
// w_0); plain mean for a constant schedule.
std::vector<double> average_iterates(const std::vector<std::vector<double>>& iterates,
                                     const StepSchedule& sched);
std::vector<double> average_iterates(const std::vector<std::vector<double>>& iterates,
                                     std::span<const double> weights);

// (lhs, rhs) of the gradient-map non-expansiveness inequality
// ||(w - eta grad f(w;z)) - (w' - eta grad f(w';z))|| <= ||w - w'||
// for a smooth convex family with eta <= 2/L.
std::pair<double, double> nonexpansive_witness(const losses::LossFamily& fam,
                                               std::span<const double> w,
                                               std::span<const double> w_prime,
                                               const losses::Example& z, double eta);

}  // namespace mcsgm::optim
