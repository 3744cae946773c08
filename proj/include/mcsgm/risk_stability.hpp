#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mcsgm/chain.hpp"
#include "mcsgm/losses.hpp"
#include "mcsgm/optim.hpp"

namespace mcsgm::risk_stability {

// Neighboring dataset S^(i): only position i (1-based) is replaced.
struct NeighborSpec {
  std::size_t index = 1;
  losses::Example replacement;
};

struct SaddleNeighborSpec {
  std::size_t index = 1;
  losses::SaddleExample replacement;
};

struct StabilityEstimate {
  double mean_distance = 0.0;
  double std_error = 0.0;
  std::size_t replicates = 0;
  std::string kind;  // "erm" or "minimax"
  std::vector<double> distances;
};

struct RiskReport {
  std::size_t replicates = 0;
  double empirical = 0.0;
  double empirical_se = 0.0;
  double population = 0.0;
  double population_se = 0.0;
  double gen_gap = 0.0;  // population - empirical, exactly
  double gen_gap_se = 0.0;
  double excess = 0.0;
  double excess_se = 0.0;
  // minimax-only quantities
  double weak_pd_population = 0.0;
  double weak_pd_empirical = 0.0;
  double weak_pd_gen = 0.0;
  double primal_population = 0.0;
  double primal_population_se = 0.0;
  double primal_empirical = 0.0;
  double primal_empirical_se = 0.0;
  double primal_gen = 0.0;
  double primal_excess = 0.0;
};

struct TwinResult {
  std::vector<double> averaged_s;
  std::vector<double> averaged_neighbor;
  double distance = 0.0;
};

struct SaddleTwinResult {
  std::vector<double> w_s, v_s;
  std::vector<double> w_neighbor, v_neighbor;
  double distance = 0.0;  // ||dw|| + ||dv||
};

// Coupled twin run: both trajectories share the identical chain path, so
// their divergence isolates the single-sample perturbation.
TwinResult twin_sgd(const losses::LossFamily& fam, const losses::Dataset& s,
                    const NeighborSpec& nb, const chain::ChainPath& path,
                    const optim::StepSchedule& sched, std::span<const double> w0,
                    const optim::DomainSpec& domain);

SaddleTwinResult twin_sgda(const losses::MinimaxFamily& fam, const losses::SaddleDataset& s,
                           const SaddleNeighborSpec& nb, const chain::ChainPath& path,
                           const optim::StepSchedule& sched, std::span<const double> w0,
                           std::span<const double> v0, const optim::DomainSpec& w_domain,
                           const optim::DomainSpec& v_domain);

// Shared experiment plumbing for the Monte-Carlo estimators: each replicate
// derives its seeds as hash(master_seed, replicate); aggregation is a
// deterministic fold in replicate order.
struct ReplicateConfig {
  std::size_t n = 0;
  std::size_t t_steps = 0;
  optim::StepSchedule sched;
  chain::ChainConfig chain_cfg;
  std::size_t replicates = 2;
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;
};

StabilityEstimate estimate_stability_sgd(const losses::LossFamily& fam,
                                         const losses::Generator& gen,
                                         const ReplicateConfig& cfg,
                                         const optim::DomainSpec& domain);

StabilityEstimate estimate_stability_sgda(const losses::MinimaxFamily& fam,
                                          const losses::SaddleGenerator& gen,
                                          const ReplicateConfig& cfg,
                                          const optim::DomainSpec& w_domain,
                                          const optim::DomainSpec& v_domain);

RiskReport generalization_report_sgd(const losses::LossFamily& fam,
                                     const losses::Generator& gen, const ReplicateConfig& cfg,
                                     const optim::DomainSpec& domain, std::size_t n_test);

// Weak primal-dual risks via the averaged-coefficient reduction (exact for
// the affine-in-coefficients saddle families).
RiskReport weak_pd_report(const losses::MinimaxFamily& fam, const losses::SaddleGenerator& gen,
                          const ReplicateConfig& cfg, const optim::DomainSpec& w_domain,
                          const optim::DomainSpec& v_domain, std::size_t n_population);

// Primal risks; requires rho > 0 so the inner max is a closed form.
RiskReport primal_report(const losses::MinimaxFamily& fam, const losses::SaddleGenerator& gen,
                         const ReplicateConfig& cfg, const optim::DomainSpec& w_domain,
                         const optim::DomainSpec& v_domain, std::size_t n_population);

// F_S(averaged iterate) - F_S(comparator).
double opt_gap_sgd(const losses::LossFamily& fam, const losses::Dataset& s,
                   const optim::Trajectory& traj, std::span<const double> comparator);

// max_v F_S(w_bar, v) - min_w F_S(w, v_bar) by closed-form inner solves.
double pd_gap_sgda(const losses::MinimaxFamily& fam, const losses::SaddleDataset& s,
                   const optim::SaddleTrajectory& traj, const optim::DomainSpec& w_domain,
                   const optim::DomainSpec& v_domain);

struct GradNormTrace {
  std::vector<std::size_t> steps;
  std::vector<double> sq_norms;     // ||grad F_S(w_j)||^2 at stored checkpoints
  std::vector<double> running_min;  // prefix minimum
};

GradNormTrace grad_norm_trace(const losses::LossFamily& fam, const losses::Dataset& s,
                              const optim::Trajectory& traj);

// min_w over the ball of the primal function R(w) = max_v F(w, v) built from
// population coefficients; used as the excess-primal comparator.
double minimize_primal(const losses::SaddleCoefficients& coeffs, double rho,
                       const optim::DomainSpec& w_domain, const optim::DomainSpec& v_domain);

void to_json(nlohmann::json& j, const StabilityEstimate& est);
void to_json(nlohmann::json& j, const RiskReport& report);
// Full structured record: every estimate/report field plus the configuration
// echo that produced it.
nlohmann::json report_record(const ReplicateConfig& cfg, const StabilityEstimate& est);
nlohmann::json report_record(const ReplicateConfig& cfg, const RiskReport& report);

}  // namespace mcsgm::risk_stability
