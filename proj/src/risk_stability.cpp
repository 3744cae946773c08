#include "mcsgm/risk_stability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mcsgm/errors.hpp"
#include "mcsgm/kernels.hpp"
#include "mcsgm/parallel.hpp"
#include "mcsgm/rng.hpp"
#include "mcsgm/stats.hpp"

namespace mcsgm::risk_stability {

namespace {

using losses::SaddleCoefficients;

std::vector<double> zeros(std::size_t d) { return std::vector<double>(d, 0.0); }

// max over the ball of c0 + <g, v> - rho/2 ||v||^2
double ball_max(std::span<const double> g, double c0, double rho,
                const optim::DomainSpec& domain) {
  double gn = kernels::nrm2(g.data(), g.size());
  if (rho > 0.0) {
    double len = gn / rho;
    if (domain.is_ball()) len = std::min(len, domain.radius);
    return c0 + gn * len - 0.5 * rho * len * len;
  }
  if (!domain.is_ball()) throw std::invalid_argument("ball_max: unbounded linear maximization");
  return c0 + domain.radius * gn;
}

// min over the ball of c0 + <h, w>
double ball_min(std::span<const double> h, double c0, const optim::DomainSpec& domain) {
  double hn = kernels::nrm2(h.data(), h.size());
  if (hn == 0.0) return c0;
  if (!domain.is_ball()) throw std::invalid_argument("ball_min: unbounded linear minimization");
  return c0 - domain.radius * hn;
}

void atw_into(std::span<const double> a, std::span<const double> w, std::size_t d_w,
              std::size_t d_v, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < d_w; ++i) kernels::axpy(w[i], a.data() + i * d_v, out.data(), d_v);
}

void av_into(std::span<const double> a, std::span<const double> v, std::size_t d_w,
             std::size_t d_v, std::span<double> out) {
  for (std::size_t i = 0; i < d_w; ++i) out[i] = kernels::dot(a.data() + i * d_v, v.data(), d_v);
}

SaddleCoefficients population_coefficients(const losses::SaddleGenerator& gen, std::size_t d_w,
                                           std::size_t d_v, std::size_t n_draws,
                                           std::uint64_t seed) {
  losses::SaddleDataset s = losses::generate_saddle_dataset(gen, std::max<std::size_t>(n_draws, 2), seed);
  return losses::mean_coefficients(s, d_w, d_v);
}

}  // namespace

TwinResult twin_sgd(const losses::LossFamily& fam, const losses::Dataset& s,
                    const NeighborSpec& nb, const chain::ChainPath& path,
                    const optim::StepSchedule& sched, std::span<const double> w0,
                    const optim::DomainSpec& domain) {
  if (nb.index == 0 || nb.index > s.n())
    throw std::invalid_argument("twin_sgd: neighbor index outside [1, n]");
  losses::Dataset neighbor = s;
  neighbor.examples[nb.index - 1] = nb.replacement;

  optim::Trajectory run_s = optim::mc_sgd(fam, s, path, sched, w0, domain);
  optim::Trajectory run_n = optim::mc_sgd(fam, neighbor, path, sched, w0, domain);

  TwinResult out;
  out.distance = std::sqrt(kernels::dist2(run_s.averaged, run_n.averaged));
  out.averaged_s = std::move(run_s.averaged);
  out.averaged_neighbor = std::move(run_n.averaged);
  return out;
}

SaddleTwinResult twin_sgda(const losses::MinimaxFamily& fam, const losses::SaddleDataset& s,
                           const SaddleNeighborSpec& nb, const chain::ChainPath& path,
                           const optim::StepSchedule& sched, std::span<const double> w0,
                           std::span<const double> v0, const optim::DomainSpec& w_domain,
                           const optim::DomainSpec& v_domain) {
  if (nb.index == 0 || nb.index > s.n())
    throw std::invalid_argument("twin_sgda: neighbor index outside [1, n]");
  losses::SaddleDataset neighbor = s;
  neighbor.examples[nb.index - 1] = nb.replacement;

  optim::SaddleTrajectory run_s = optim::mc_sgda(fam, s, path, sched, w0, v0, w_domain, v_domain);
  optim::SaddleTrajectory run_n =
      optim::mc_sgda(fam, neighbor, path, sched, w0, v0, w_domain, v_domain);

  SaddleTwinResult out;
  out.distance = std::sqrt(kernels::dist2(run_s.averaged_w, run_n.averaged_w)) +
                 std::sqrt(kernels::dist2(run_s.averaged_v, run_n.averaged_v));
  out.w_s = std::move(run_s.averaged_w);
  out.v_s = std::move(run_s.averaged_v);
  out.w_neighbor = std::move(run_n.averaged_w);
  out.v_neighbor = std::move(run_n.averaged_v);
  return out;
}

StabilityEstimate estimate_stability_sgd(const losses::LossFamily& fam,
                                         const losses::Generator& gen,
                                         const ReplicateConfig& cfg,
                                         const optim::DomainSpec& domain) {
  if (cfg.replicates < 2)
    throw std::invalid_argument("estimate_stability_sgd: replicates >= 2 required");
  chain::TransitionMatrix p = chain::build(cfg.chain_cfg);
  if (p.n != cfg.n) throw std::invalid_argument("estimate_stability_sgd: chain size != n");

  std::vector<double> w0 = zeros(fam.d);
  std::vector<double> distances(cfg.replicates, 0.0);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    std::uint64_t base = derive_seed(cfg.master_seed, r);
    losses::Dataset s = losses::generate_dataset(gen, cfg.n, derive_seed(base, 1));
    losses::Dataset twin = losses::generate_dataset(gen, cfg.n, derive_seed(base, 2));
    chain::ChainPath path = chain::sample_path_uniform_start(p, cfg.t_steps, derive_seed(base, 3));
    Rng idx_rng(derive_seed(base, 4));
    std::size_t i = static_cast<std::size_t>(idx_rng.uniform_index(cfg.n)) + 1;
    NeighborSpec nb{i, twin.examples[i - 1]};
    distances[r] = twin_sgd(fam, s, nb, path, cfg.sched, w0, domain).distance;
  });

  stats::MeanSe agg = stats::mean_se(distances);
  return {agg.mean, agg.se, cfg.replicates, "erm", std::move(distances)};
}

StabilityEstimate estimate_stability_sgda(const losses::MinimaxFamily& fam,
                                          const losses::SaddleGenerator& gen,
                                          const ReplicateConfig& cfg,
                                          const optim::DomainSpec& w_domain,
                                          const optim::DomainSpec& v_domain) {
  if (cfg.replicates < 2)
    throw std::invalid_argument("estimate_stability_sgda: replicates >= 2 required");
  chain::TransitionMatrix p = chain::build(cfg.chain_cfg);
  if (p.n != cfg.n) throw std::invalid_argument("estimate_stability_sgda: chain size != n");

  std::vector<double> w0 = zeros(fam.d_w);
  std::vector<double> v0 = zeros(fam.d_v);
  std::vector<double> distances(cfg.replicates, 0.0);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    std::uint64_t base = derive_seed(cfg.master_seed, r);
    losses::SaddleDataset s = losses::generate_saddle_dataset(gen, cfg.n, derive_seed(base, 1));
    losses::SaddleDataset twin =
        losses::generate_saddle_dataset(gen, cfg.n, derive_seed(base, 2));
    chain::ChainPath path = chain::sample_path_uniform_start(p, cfg.t_steps, derive_seed(base, 3));
    Rng idx_rng(derive_seed(base, 4));
    std::size_t i = static_cast<std::size_t>(idx_rng.uniform_index(cfg.n)) + 1;
    SaddleNeighborSpec nb{i, twin.examples[i - 1]};
    distances[r] =
        twin_sgda(fam, s, nb, path, cfg.sched, w0, v0, w_domain, v_domain).distance;
  });

  stats::MeanSe agg = stats::mean_se(distances);
  return {agg.mean, agg.se, cfg.replicates, "minimax", std::move(distances)};
}

RiskReport generalization_report_sgd(const losses::LossFamily& fam,
                                     const losses::Generator& gen, const ReplicateConfig& cfg,
                                     const optim::DomainSpec& domain, std::size_t n_test) {
  if (cfg.replicates < 2)
    throw std::invalid_argument("generalization_report_sgd: replicates >= 2 required");
  chain::TransitionMatrix p = chain::build(cfg.chain_cfg);
  if (p.n != cfg.n) throw std::invalid_argument("generalization_report_sgd: chain size != n");

  // Plug-in comparator: ERM on an independent large dataset.
  std::size_t plug_n = 10 * std::max<std::size_t>(cfg.n, 1000);
  losses::Dataset plug =
      losses::generate_dataset(gen, plug_n, derive_seed(cfg.master_seed, 0x9001));
  losses::ErmSolution star = losses::erm_oracle(fam, plug, domain);
  auto [star_risk, star_se] = losses::population_risk_mc(
      fam, gen, star.w, std::max<std::size_t>(n_test * 10, 100000),
      derive_seed(cfg.master_seed, 0x9002));

  std::vector<double> w0 = zeros(fam.d);
  std::vector<double> emp(cfg.replicates), pop(cfg.replicates), gap(cfg.replicates);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    std::uint64_t base = derive_seed(cfg.master_seed, r);
    losses::Dataset s = losses::generate_dataset(gen, cfg.n, derive_seed(base, 1));
    chain::ChainPath path = chain::sample_path_uniform_start(p, cfg.t_steps, derive_seed(base, 3));
    optim::Trajectory traj = optim::mc_sgd(fam, s, path, cfg.sched, w0, domain);
    emp[r] = losses::empirical_risk(fam, s, traj.averaged);
    pop[r] = losses::population_risk_mc(fam, gen, traj.averaged, n_test, derive_seed(base, 5))
                 .first;
    gap[r] = pop[r] - emp[r];
  });

  stats::MeanSe emp_agg = stats::mean_se(emp);
  stats::MeanSe pop_agg = stats::mean_se(pop);
  stats::MeanSe gap_agg = stats::mean_se(gap);

  RiskReport report;
  report.replicates = cfg.replicates;
  report.empirical = emp_agg.mean;
  report.empirical_se = emp_agg.se;
  report.population = pop_agg.mean;
  report.population_se = pop_agg.se;
  // identity: gen_gap is the difference of the reported means
  report.gen_gap = report.population - report.empirical;
  report.gen_gap_se = gap_agg.se;
  report.excess = report.population - star_risk;
  report.excess_se = std::sqrt(pop_agg.se * pop_agg.se + star_se * star_se);
  return report;
}

RiskReport weak_pd_report(const losses::MinimaxFamily& fam, const losses::SaddleGenerator& gen,
                          const ReplicateConfig& cfg, const optim::DomainSpec& w_domain,
                          const optim::DomainSpec& v_domain, std::size_t n_population) {
  if (cfg.replicates < 2)
    throw std::invalid_argument("weak_pd_report: replicates >= 2 required");
  chain::TransitionMatrix p = chain::build(cfg.chain_cfg);
  if (p.n != cfg.n) throw std::invalid_argument("weak_pd_report: chain size != n");

  const std::size_t d_w = fam.d_w, d_v = fam.d_v;
  std::vector<double> w0 = zeros(d_w), v0 = zeros(d_v);

  struct Slot {
    std::vector<double> w_bar, v_bar;
    std::vector<double> lin_v, lin_w;  // per-replicate empirical profiles
    double const_v = 0.0, const_w = 0.0;
    double emp_value = 0.0;
    double v_bar_sqnorm = 0.0;
  };
  std::vector<Slot> slots(cfg.replicates);

  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    std::uint64_t base = derive_seed(cfg.master_seed, r);
    losses::SaddleDataset s = losses::generate_saddle_dataset(gen, cfg.n, derive_seed(base, 1));
    chain::ChainPath path = chain::sample_path_uniform_start(p, cfg.t_steps, derive_seed(base, 3));
    optim::SaddleTrajectory traj =
        optim::mc_sgda(fam, s, path, cfg.sched, w0, v0, w_domain, v_domain);
    SaddleCoefficients m = losses::mean_coefficients(s, d_w, d_v);
    Slot& slot = slots[r];
    slot.w_bar = traj.averaged_w;
    slot.v_bar = traj.averaged_v;
    slot.lin_v.resize(d_v);
    atw_into(m.a, slot.w_bar, d_w, d_v, slot.lin_v);
    kernels::axpy(-1.0, m.c.data(), slot.lin_v.data(), d_v);
    slot.const_v = kernels::dot(m.b.data(), slot.w_bar.data(), d_w);
    slot.lin_w.resize(d_w);
    av_into(m.a, slot.v_bar, d_w, d_v, slot.lin_w);
    kernels::axpy(1.0, m.b.data(), slot.lin_w.data(), d_w);
    slot.v_bar_sqnorm = kernels::sqnorm(slot.v_bar.data(), d_v);
    slot.const_w = -kernels::dot(m.c.data(), slot.v_bar.data(), d_v) -
                   0.5 * fam.rho * slot.v_bar_sqnorm;
    slot.emp_value = losses::empirical_minimax_risk(fam, s, slot.w_bar, slot.v_bar);
  });

  // Deterministic replicate-order fold into the averaged profiles.
  double inv_r = 1.0 / static_cast<double>(cfg.replicates);
  std::vector<double> lin_v = zeros(d_v), lin_w = zeros(d_w);
  std::vector<double> w_mean = zeros(d_w), v_mean = zeros(d_v);
  double const_v = 0.0, const_w = 0.0, v_sqnorm_mean = 0.0;
  std::vector<double> emp_values(cfg.replicates);
  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    const Slot& slot = slots[r];
    kernels::axpy(inv_r, slot.lin_v.data(), lin_v.data(), d_v);
    kernels::axpy(inv_r, slot.lin_w.data(), lin_w.data(), d_w);
    kernels::axpy(inv_r, slot.w_bar.data(), w_mean.data(), d_w);
    kernels::axpy(inv_r, slot.v_bar.data(), v_mean.data(), d_v);
    const_v += inv_r * slot.const_v;
    const_w += inv_r * slot.const_w;
    v_sqnorm_mean += inv_r * slot.v_bar_sqnorm;
    emp_values[r] = slot.emp_value;
  }

  double weak_pd_emp =
      ball_max(lin_v, const_v, fam.rho, v_domain) - ball_min(lin_w, const_w, w_domain);

  SaddleCoefficients pop = population_coefficients(gen, d_w, d_v, n_population,
                                                   derive_seed(cfg.master_seed, 0xA001));
  std::vector<double> pop_lin_v(d_v), pop_lin_w(d_w);
  atw_into(pop.a, w_mean, d_w, d_v, pop_lin_v);
  kernels::axpy(-1.0, pop.c.data(), pop_lin_v.data(), d_v);
  double pop_const_v = kernels::dot(pop.b.data(), w_mean.data(), d_w);
  av_into(pop.a, v_mean, d_w, d_v, pop_lin_w);
  kernels::axpy(1.0, pop.b.data(), pop_lin_w.data(), d_w);
  double pop_const_w =
      -kernels::dot(pop.c.data(), v_mean.data(), d_v) - 0.5 * fam.rho * v_sqnorm_mean;

  double weak_pd_pop = ball_max(pop_lin_v, pop_const_v, fam.rho, v_domain) -
                       ball_min(pop_lin_w, pop_const_w, w_domain);

  stats::MeanSe emp_agg = stats::mean_se(emp_values);

  RiskReport report;
  report.replicates = cfg.replicates;
  report.empirical = emp_agg.mean;
  report.empirical_se = emp_agg.se;
  report.weak_pd_empirical = weak_pd_emp;
  report.weak_pd_population = weak_pd_pop;
  report.weak_pd_gen = weak_pd_pop - weak_pd_emp;
  return report;
}

RiskReport primal_report(const losses::MinimaxFamily& fam, const losses::SaddleGenerator& gen,
                         const ReplicateConfig& cfg, const optim::DomainSpec& w_domain,
                         const optim::DomainSpec& v_domain, std::size_t n_population) {
  if (fam.rho <= 0.0)
    throw UnsupportedFamilyError("primal_report: requires a strongly-concave family (rho > 0)");
  if (cfg.replicates < 2)
    throw std::invalid_argument("primal_report: replicates >= 2 required");
  chain::TransitionMatrix p = chain::build(cfg.chain_cfg);
  if (p.n != cfg.n) throw std::invalid_argument("primal_report: chain size != n");

  const std::size_t d_w = fam.d_w, d_v = fam.d_v;
  std::vector<double> w0 = zeros(d_w), v0 = zeros(d_v);

  SaddleCoefficients pop = population_coefficients(gen, d_w, d_v, n_population,
                                                   derive_seed(cfg.master_seed, 0xA001));

  auto primal_of = [&](const SaddleCoefficients& m, std::span<const double> w) {
    std::vector<double> g(d_v);
    atw_into(m.a, w, d_w, d_v, g);
    kernels::axpy(-1.0, m.c.data(), g.data(), d_v);
    double c0 = kernels::dot(m.b.data(), w.data(), d_w);
    return ball_max(g, c0, fam.rho, v_domain);
  };

  std::vector<double> primal_pop(cfg.replicates), primal_emp(cfg.replicates);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    std::uint64_t base = derive_seed(cfg.master_seed, r);
    losses::SaddleDataset s = losses::generate_saddle_dataset(gen, cfg.n, derive_seed(base, 1));
    chain::ChainPath path = chain::sample_path_uniform_start(p, cfg.t_steps, derive_seed(base, 3));
    optim::SaddleTrajectory traj =
        optim::mc_sgda(fam, s, path, cfg.sched, w0, v0, w_domain, v_domain);
    SaddleCoefficients m = losses::mean_coefficients(s, d_w, d_v);
    primal_pop[r] = primal_of(pop, traj.averaged_w);
    primal_emp[r] = primal_of(m, traj.averaged_w);
  });

  stats::MeanSe pop_agg = stats::mean_se(primal_pop);
  stats::MeanSe emp_agg = stats::mean_se(primal_emp);
  double primal_star = minimize_primal(pop, fam.rho, w_domain, v_domain);

  RiskReport report;
  report.replicates = cfg.replicates;
  report.primal_population = pop_agg.mean;
  report.primal_population_se = pop_agg.se;
  report.primal_empirical = emp_agg.mean;
  report.primal_empirical_se = emp_agg.se;
  report.primal_gen = pop_agg.mean - emp_agg.mean;
  report.primal_excess = pop_agg.mean - primal_star;
  return report;
}

double opt_gap_sgd(const losses::LossFamily& fam, const losses::Dataset& s,
                   const optim::Trajectory& traj, std::span<const double> comparator) {
  return losses::empirical_risk(fam, s, traj.averaged) -
         losses::empirical_risk(fam, s, comparator);
}

double pd_gap_sgda(const losses::MinimaxFamily& fam, const losses::SaddleDataset& s,
                   const optim::SaddleTrajectory& traj, const optim::DomainSpec& w_domain,
                   const optim::DomainSpec& v_domain) {
  double hi = losses::best_response_v(fam, s, traj.averaged_w, v_domain).value;
  double lo = losses::best_response_w_min(fam, s, traj.averaged_v, w_domain);
  return hi - lo;
}

GradNormTrace grad_norm_trace(const losses::LossFamily& fam, const losses::Dataset& s,
                              const optim::Trajectory& traj) {
  if (!fam.smooth) throw UnsupportedFamilyError("grad_norm_trace: requires a smooth family");
  GradNormTrace trace;
  trace.steps = traj.iterate_steps;
  trace.sq_norms.reserve(traj.iterates.size());
  trace.running_min.reserve(traj.iterates.size());
  std::vector<double> grad(fam.d);
  double best = 0.0;
  for (std::size_t k = 0; k < traj.iterates.size(); ++k) {
    losses::empirical_subgradient_into(fam, s, traj.iterates[k], grad);
    double sq = kernels::sqnorm(grad.data(), fam.d);
    trace.sq_norms.push_back(sq);
    best = k == 0 ? sq : std::min(best, sq);
    trace.running_min.push_back(best);
  }
  return trace;
}

double minimize_primal(const losses::SaddleCoefficients& coeffs, double rho,
                       const optim::DomainSpec& w_domain, const optim::DomainSpec& v_domain) {
  if (rho <= 0.0) throw UnsupportedFamilyError("minimize_primal: rho > 0 required");
  const std::size_t d_w = coeffs.d_w, d_v = coeffs.d_v;

  auto primal_value = [&](std::span<const double> w) {
    std::vector<double> g(d_v);
    atw_into(coeffs.a, w, d_w, d_v, g);
    kernels::axpy(-1.0, coeffs.c.data(), g.data(), d_v);
    double c0 = kernels::dot(coeffs.b.data(), w.data(), d_w);
    return ball_max(g, c0, rho, v_domain);
  };
  // Envelope gradient: grad R(w) = A v+(w) + b with the clipped best response.
  auto primal_grad = [&](std::span<const double> w, std::span<double> out) {
    std::vector<double> g(d_v);
    atw_into(coeffs.a, w, d_w, d_v, g);
    kernels::axpy(-1.0, coeffs.c.data(), g.data(), d_v);
    double gn = kernels::nrm2(g.data(), d_v);
    double len = gn / rho;
    if (v_domain.is_ball()) len = std::min(len, v_domain.radius);
    std::vector<double> v_plus(d_v, 0.0);
    if (gn > 0.0) {
      v_plus = g;
      kernels::scal(len / gn, v_plus.data(), d_v);
    }
    av_into(coeffs.a, v_plus, d_w, d_v, out);
    kernels::axpy(1.0, coeffs.b.data(), out.data(), d_w);
  };

  double a_norm = kernels::nrm2(coeffs.a.data(), coeffs.a.size());
  double lip = a_norm * a_norm / rho + 1e-12;
  double step = 1.0 / lip;

  std::vector<double> w(d_w, 0.0), y(d_w, 0.0), w_prev(d_w), grad(d_w);
  double best = primal_value(w);
  std::vector<double> best_w = w;
  double t_momentum = 1.0;
  for (std::size_t it = 0; it < 50000; ++it) {
    primal_grad(y, grad);
    w_prev = w;
    w = y;
    kernels::axpy(-step, grad.data(), w.data(), d_w);
    optim::project_in_place(w_domain, w);
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    double beta = (t_momentum - 1.0) / t_next;
    for (std::size_t i = 0; i < d_w; ++i) y[i] = w[i] + beta * (w[i] - w_prev[i]);
    t_momentum = t_next;
    double move = kernels::dist2(std::span<const double>(w), std::span<const double>(w_prev));
    if ((it & 63) == 0 || move < 1e-26) {
      double val = primal_value(w);
      if (val < best) {
        best = val;
        best_w = w;
      }
      if (move < 1e-26) break;
    }
  }
  double final_val = primal_value(w);
  if (final_val < best) best = final_val;
  return best;
}

}  // namespace mcsgm::risk_stability
