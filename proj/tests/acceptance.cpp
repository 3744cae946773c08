// Acceptance suite: every checkable claim gets one pass/fail line and the
// binary exits nonzero if anything fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsgm/chain.hpp"
#include "mcsgm/harness.hpp"
#include "mcsgm/kernels.hpp"
#include "mcsgm/losses.hpp"
#include "mcsgm/optim.hpp"
#include "mcsgm/risk_stability.hpp"
#include "mcsgm/rng.hpp"
#include "mcsgm/stats.hpp"
#include "mcsgm/theory_bounds.hpp"

using namespace mcsgm;
using nlohmann::json;
namespace rs = risk_stability;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) {
    detail += (detail.empty() ? "" : "; ") + what;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

harness::RunOutput run(json j) {
  return harness::run_experiment(harness::parse_config(std::move(j)));
}

// ---- criterion 1: spectral exactness ---------------------------------------

Outcome criterion_spectral() {
  Outcome out;
  for (std::size_t n = 2; n <= 64; ++n) {
    chain::ChainSpectrum spec = chain::analyze(chain::build_uniform(n));
    out.require(std::fabs(spec.lambda - 0.5) <= 1e-9,
                "uniform n=" + std::to_string(n) + " lambda=" + fmt(spec.lambda));
  }
  // circulant oracle for the lazy cycle: eigenvalues (1 + 2 cos(2 pi k/4))/3
  double l2 = 0.0, ln = 1.0;
  for (std::size_t k = 1; k < 4; ++k) {
    double ev = (1.0 + 2.0 * std::cos(2.0 * std::numbers::pi * k / 4.0)) / 3.0;
    l2 = std::max(l2, std::fabs(ev));
    ln = std::min(ln, ev);
  }
  double oracle = (std::max(l2, std::fabs(ln)) + 1.0) / 2.0;
  chain::ChainSpectrum cyc = chain::analyze(chain::build_lazy_cycle(4));
  out.require(std::fabs(cyc.lambda - oracle) <= 1e-9, "lazy cycle lambda=" + fmt(cyc.lambda));
  out.require(std::fabs(oracle - 2.0 / 3.0) <= 1e-15, "circulant oracle sanity");
  out.note("lambda(P)=1/2 on 63 uniform chains, 2/3 on the lazy 4-cycle");
  return out;
}

// ---- criterion 2: the mixing inequality ------------------------------------

Outcome criterion_mixing_bound() {
  Outcome out;
  Rng seeder(20240817);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 3 + static_cast<std::size_t>(seeder.uniform_index(14));  // 3..16
    double alpha = (trial % 2 == 0) ? 0.1 : 0.5;
    chain::TransitionMatrix p = chain::build_random_symmetric(n, alpha, seeder.next_u64());
    chain::ChainSpectrum spec = chain::analyze(p);
    double c_eff = std::pow(static_cast<double>(n), 1.5);
    std::vector<double> devs = chain::deviation_scan(p, 200);
    for (std::size_t j = 0; j <= 200; ++j) {
      if (devs[j] > c_eff * std::pow(spec.lambda, static_cast<double>(j)) + 1e-12) {
        out.require(false, "violated at n=" + std::to_string(n) + " j=" + std::to_string(j));
        break;
      }
      ++checked;
    }
  }
  out.note(std::to_string(checked) + " (chain, power) pairs within the bound");
  return out;
}

// ---- criterion 3: non-expansiveness ----------------------------------------

Outcome criterion_nonexpansive() {
  Outcome out;
  Rng rng(99);
  for (losses::LossKind kind : {losses::LossKind::logistic, losses::LossKind::least_squares}) {
    losses::LossFamily fam = losses::make_loss_family(kind, 5, 1.0, 5.0);
    losses::Generator gen = losses::make_classification_generator(5, 1.0, 0.2, 3);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> w = rng.sphere(5, 5.0 * rng.uniform());
      std::vector<double> wp = rng.sphere(5, 5.0 * rng.uniform());
      losses::Example z = losses::draw_example(gen, rng);
      double eta = rng.uniform() * 2.0 / *fam.l;
      auto [lhs, rhs] = optim::nonexpansive_witness(fam, w, wp, z, eta);
      if (lhs > rhs + 1e-12) {
        out.require(false, losses::to_string(kind) + " violated: lhs=" + fmt(lhs) +
                               " rhs=" + fmt(rhs));
        break;
      }
    }
  }
  out.note("2000 random gradient-map pairs contract");
  return out;
}

// ---- criteria 4 & 5: stability and generalization domination ---------------

chain::ChainConfig sym_chain(std::size_t n) {
  chain::ChainConfig cfg;
  cfg.kind = "random_symmetric";
  cfg.n = n;
  cfg.alpha = 0.5;
  cfg.seed = 11;
  return cfg;
}

Outcome criterion_stability_domination() {
  Outcome out;
  losses::LossFamily fam = losses::make_loss_family(losses::LossKind::logistic, 5, 1.0, 5.0);
  losses::Generator gen = losses::make_classification_generator(5, 1.0, 0.1, 21);
  optim::DomainSpec domain = optim::DomainSpec::ball(5.0);
  std::vector<double> means, ses;
  for (std::size_t n : {50u, 100u, 200u}) {
    rs::ReplicateConfig cfg{n, n, optim::StepSchedule::inv_sqrt_tlogt(), sym_chain(n), 200, 7,
                            1};
    rs::StabilityEstimate est = rs::estimate_stability_sgd(fam, gen, cfg, domain);
    double eta = optim::StepSchedule::inv_sqrt_tlogt().resolve(n);
    double bound = 2.0 * fam.g * static_cast<double>(n) * eta / static_cast<double>(n);
    out.require(est.mean_distance <= bound + 3.0 * est.std_error,
                "n=" + std::to_string(n) + " mean=" + fmt(est.mean_distance) +
                    " bound=" + fmt(bound));
    means.push_back(est.mean_distance);
    ses.push_back(est.std_error);
  }
  double ratio = means[2] / means[0];
  double rel_se =
      ratio * std::sqrt(std::pow(ses[2] / means[2], 2) + std::pow(ses[0] / means[0], 2));
  out.require(ratio <= 0.6 + 3.0 * rel_se, "scaling ratio=" + fmt(ratio));
  out.note("means " + fmt(means[0]) + "/" + fmt(means[1]) + "/" + fmt(means[2]) +
           ", ratio " + fmt(ratio));
  return out;
}

Outcome criterion_gen_domination() {
  Outcome out;
  losses::LossFamily fam = losses::make_loss_family(losses::LossKind::logistic, 5, 1.0, 5.0);
  losses::Generator gen = losses::make_classification_generator(5, 1.0, 0.1, 22);
  optim::DomainSpec domain = optim::DomainSpec::ball(5.0);
  for (std::size_t n : {50u, 100u, 200u}) {
    rs::ReplicateConfig cfg{n, n, optim::StepSchedule::inv_sqrt_tlogt(), sym_chain(n), 200, 8,
                            1};
    rs::RiskReport rep = rs::generalization_report_sgd(fam, gen, cfg, domain, 4000);
    double eta = optim::StepSchedule::inv_sqrt_tlogt().resolve(n);
    double bound = 2.0 * fam.g * fam.g * static_cast<double>(n) * eta / static_cast<double>(n);
    out.require(std::fabs(rep.gen_gap) <= bound + 3.0 * rep.gen_gap_se,
                "n=" + std::to_string(n) + " |gap|=" + fmt(std::fabs(rep.gen_gap)) +
                    " bound=" + fmt(bound) + " se=" + fmt(rep.gen_gap_se));
  }
  out.note("|gen gap| within 2G^2 T eta/n + 3 SE on all grid points");
  return out;
}

// ---- criteria 6 & 7: convex optimization rate and bound --------------------

Outcome criterion_sgd_rate(Outcome& domination) {
  Outcome out;
  // unit ball keeps the empirical minimizer projection-active, the regime
  // with the square-root decay of the averaged-output gap
  harness::RunOutput res = run(json{
      {"kind", "sgd-rate"},
      {"family", {{"kind", "logistic"}, {"d", 5}, {"B_x", 1.0}, {"radius", 1.0}}},
      {"generator", {{"p_noise", 0.1}, {"w_true_seed", 31}}},
      {"n", 256},
      {"T_grid", {512, 1024, 2048, 4096, 8192, 16384}},
      {"schedule", "inv_sqrt_tlogt"},
      {"chain", {{"kind", "uniform"}}},
      {"replicates", 20},
      {"master_seed", 1234}});
  double slope = res.summary.at("slope").get<double>();
  double r2 = res.summary.at("r_squared").get<double>();
  out.require(slope >= -0.65 && slope <= -0.35, "slope=" + fmt(slope));
  out.require(r2 >= 0.9, "r^2=" + fmt(r2));
  out.note("slope " + fmt(slope) + ", r^2 " + fmt(r2));

  for (const auto& row : res.results.rows) {
    domination.require(row.back() == "1",
                       "T=" + row[1] + " gap=" + row[4] + " bound=" + row[8]);
  }
  domination.note("mean gap under the convex-case bound at all 6 sweep points");
  return out;
}

// ---- criterion 8: i.i.d. degeneration --------------------------------------

Outcome criterion_iid_degeneration() {
  Outcome out;
  const std::size_t n = 8, len = 100000;
  chain::TransitionMatrix u = chain::build_uniform(n);
  chain::ChainPath path = chain::sample_path_uniform_start(u, len, 271828);

  std::vector<std::size_t> counts(n, 0), pair_counts(n * n, 0);
  for (std::size_t t = 0; t < len; ++t) counts[path.indices[t] - 1]++;
  for (std::size_t t = 0; t + 1 < len; ++t)
    pair_counts[(path.indices[t] - 1) * n + (path.indices[t + 1] - 1)]++;
  double uni_stat = stats::chi_square_uniform_stat(counts);
  double uni_crit = stats::chi_square_quantile(0.999, static_cast<double>(n - 1));
  double pair_stat = stats::chi_square_uniform_stat(pair_counts);
  double pair_crit = stats::chi_square_quantile(0.999, static_cast<double>(n * n - 1));
  out.require(uni_stat < uni_crit,
              "uniformity chi2=" + fmt(uni_stat) + " crit=" + fmt(uni_crit));
  out.require(pair_stat < pair_crit,
              "pair chi2=" + fmt(pair_stat) + " crit=" + fmt(pair_crit));

  // bit-identical reduction to an iid-reference SGD on the same indices
  losses::LossFamily fam = losses::make_loss_family(losses::LossKind::logistic, 5, 1.0, 5.0);
  losses::Generator gen = losses::make_classification_generator(5, 1.0, 0.1, 40);
  losses::Dataset s = losses::generate_dataset(gen, n, 6);
  chain::ChainPath short_path = chain::sample_path_uniform_start(u, 2000, 5150);
  const double eta = 0.03;
  std::vector<double> w(5, 0.0), g(5);
  for (std::size_t t = 0; t < 2000; ++t) {
    losses::subgradient_into(fam, w, s.examples[short_path.indices[t] - 1], g);
    kernels::axpy(-eta, g.data(), w.data(), 5);
    optim::project_in_place(optim::DomainSpec::ball(5.0), w);
  }
  optim::Trajectory traj =
      optim::mc_sgd(fam, s, short_path, optim::StepSchedule::constant(eta),
                    std::vector<double>(5, 0.0), optim::DomainSpec::ball(5.0));
  out.require(traj.iterates.back() == w, "trajectories not bit-identical");
  out.note("chi2 " + fmt(uni_stat) + "/" + fmt(pair_stat) + " under crit, runs bit-equal");
  return out;
}

// ---- criterion 9: saddle rate and recovery ---------------------------------

Outcome criterion_sgda_rate() {
  Outcome out;
  // the diagonal offset keeps the mean game nondegenerate so the empirical
  // saddle is actually reachable at these horizons
  harness::RunOutput res = run(json{
      {"kind", "sgda-rate"},
      {"minimax",
       {{"kind", "bilinear-saddle"}, {"d_w", 2}, {"d_v", 2}, {"G", 1.0}, {"rho", 0.0},
        {"radius_w", 1.0}, {"radius_v", 1.0}}},
      {"saddle_generator", {{"a_offset", 1.0}}},
      {"n", 128},
      {"T_grid", {512, 1024, 2048, 4096, 8192}},
      {"schedule", "inv_sqrt_tlogt"},
      {"chain", {{"kind", "random_symmetric"}, {"alpha", 0.5}, {"seed", 13}}},
      {"replicates", 20},
      {"master_seed", 555}});
  double slope = res.summary.at("slope").get<double>();
  out.require(slope >= -0.65 && slope <= -0.35, "pd-gap slope=" + fmt(slope));

  harness::RunOutput sc = run(json{
      {"kind", "sgda-rate"},
      {"minimax",
       {{"kind", "sc-concave-saddle"}, {"d_w", 2}, {"d_v", 2}, {"G", 2.0}, {"rho", 1.0},
        {"radius_w", 1.0}, {"radius_v", 1.0}}},
      {"saddle_generator", {{"a_offset", 1.0}}},
      {"n", 128},
      {"T_grid", {512, 2048, 8192}},
      {"schedule", "inv_sqrt_tlogt"},
      {"chain", {{"kind", "random_symmetric"}, {"alpha", 0.5}, {"seed", 13}}},
      {"replicates", 20},
      {"master_seed", 556}});
  out.require(sc.summary.contains("saddle_dist_at_largest_T"),
              "analytic saddle was not interior / not computed");
  if (sc.summary.contains("saddle_dist_at_largest_T")) {
    double dist = sc.summary.at("saddle_dist_at_largest_T").get<double>();
    out.require(dist <= 0.1, "saddle distance=" + fmt(dist));
    out.note("slope " + fmt(slope) + ", saddle distance " + fmt(dist));
  }
  return out;
}

// ---- criterion 10: SGDA stability / weak PD domination ---------------------

Outcome criterion_sgda_domination() {
  Outcome out;
  losses::MinimaxFamily fam = losses::make_minimax_family(
      losses::MinimaxKind::bilinear_saddle, 2, 2, 1.0, 0.0, 1.0, 1.0);
  losses::SaddleGenerator gen = losses::make_saddle_generator(fam);
  optim::DomainSpec ball = optim::DomainSpec::ball(1.0);
  const std::size_t n = 64;
  const double eta = optim::StepSchedule::inv_sqrt_tlogt().resolve(n);

  rs::ReplicateConfig cfg{n, n, optim::StepSchedule::inv_sqrt_tlogt(), sym_chain(n), 100, 17,
                          1};
  rs::StabilityEstimate est = rs::estimate_stability_sgda(fam, gen, cfg, ball, ball);

  theory_bounds::BoundInputs in;
  in.g = fam.g;
  in.l = fam.l;
  in.n = n;
  in.t_steps = n;
  in.eta = eta;
  double bound_smooth = theory_bounds::sgda_stability_bound(in, true);
  double bound_nonsmooth = theory_bounds::sgda_stability_bound(in, false);
  out.require(est.mean_distance <= bound_smooth + 3.0 * est.std_error,
              "smooth: mean=" + fmt(est.mean_distance) + " bound=" + fmt(bound_smooth));
  out.require(est.mean_distance <= bound_nonsmooth + 3.0 * est.std_error,
              "non-smooth: mean=" + fmt(est.mean_distance) + " bound=" + fmt(bound_nonsmooth));

  // weak PD generalization gap over independent repetitions of the estimator
  std::vector<double> gaps;
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    rs::ReplicateConfig c2{n, n, optim::StepSchedule::inv_sqrt_tlogt(), sym_chain(n), 50,
                           1000 + rep, 1};
    rs::RiskReport w = rs::weak_pd_report(fam, gen, c2, ball, ball, 20000);
    gaps.push_back(w.weak_pd_gen);
  }
  stats::MeanSe agg = stats::mean_se(gaps);
  out.require(agg.mean <= fam.g * bound_smooth + 3.0 * agg.se,
              "weak PD gen vs smooth bound: " + fmt(agg.mean));
  out.require(agg.mean <= fam.g * bound_nonsmooth + 3.0 * agg.se,
              "weak PD gen vs non-smooth bound: " + fmt(agg.mean));
  out.note("stability " + fmt(est.mean_distance) + " <= {" + fmt(bound_smooth) + ", " +
           fmt(bound_nonsmooth) + "}, weak PD gen " + fmt(agg.mean) + " +/- " + fmt(agg.se));
  return out;
}

// ---- criterion 11: non-convex gradient norm trend --------------------------

Outcome criterion_nonconvex_trend() {
  Outcome out;
  // B_x = 2 both speeds up the iterates and saturates the sigmoids within
  // the sweep, so the full-batch gradient floor keeps falling with T
  harness::RunOutput res = run(json{
      {"kind", "nonconvex-gradnorm"},
      {"family", {{"kind", "sigmoid-sq"}, {"d", 3}, {"B_x", 2.0}, {"radius", 20.0}}},
      {"generator", {{"p_noise", 0.05}, {"w_true_seed", 77}}},
      {"n", 128},
      {"T_grid", {512, 1024, 2048, 4096, 8192}},
      {"chain", {{"kind", "random_symmetric"}, {"alpha", 0.5}, {"seed", 29}}},
      {"replicates", 10},
      {"master_seed", 99}});
  double slope = res.summary.at("slope").get<double>();
  bool nonincreasing = res.summary.at("nonincreasing").get<bool>();
  out.require(nonincreasing, "running-min means increased between sweep points");
  out.require(slope <= -0.3, "slope=" + fmt(slope));
  out.note("slope " + fmt(slope) + ", means nonincreasing in T");
  return out;
}

// ---- criterion 12: high-probability shape ----------------------------------

Outcome criterion_hp_quantiles() {
  Outcome out;
  harness::RunOutput res = run(json{
      {"kind", "hp-quantiles"},
      {"family", {{"kind", "logistic"}, {"d", 5}, {"B_x", 1.0}, {"radius", 1.0}}},
      {"generator", {{"p_noise", 0.1}, {"w_true_seed", 51}}},
      {"n", 128},
      {"T_grid", {512, 1024, 2048, 4096}},
      {"schedule", "inv_sqrt_tlogt"},
      {"chain", {{"kind", "uniform"}}},
      {"gamma", 0.05},
      {"replicates", 200},
      {"master_seed", 777}});
  double slope = res.summary.at("slope").get<double>();
  double ratio = res.summary.at("max_quantile_mean_ratio").get<double>();
  out.require(slope >= -0.7 && slope <= -0.3, "quantile slope=" + fmt(slope));
  out.require(ratio < 5.0, "quantile/mean ratio=" + fmt(ratio));
  out.note("0.95-quantile slope " + fmt(slope) + ", max ratio " + fmt(ratio));
  return out;
}

// ---- criterion 13: gradient correctness ------------------------------------

Outcome criterion_gradients() {
  Outcome out;
  Rng rng(4242);
  const double h = 1e-6;
  for (losses::LossKind kind : {losses::LossKind::logistic, losses::LossKind::least_squares,
                                losses::LossKind::sigmoid_sq}) {
    losses::LossFamily fam = losses::make_loss_family(kind, 5, 1.0, 5.0);
    losses::Generator gen = losses::make_classification_generator(5, 1.0, 0.2, 60);
    int accepted = 0;
    double worst = 0.0;
    while (accepted < 1000) {
      std::vector<double> w =
          rng.sphere(5, 5.0 * std::pow(rng.uniform(), 0.2));
      losses::Example z = losses::draw_example(gen, rng);
      std::vector<double> g = losses::subgradient(fam, w, z);
      double gn = kernels::nrm2(g.data(), g.size());
      if (gn < 1e-4) continue;
      double err_sq = 0.0;
      for (std::size_t i = 0; i < 5; ++i) {
        std::vector<double> wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        double fd =
            (losses::loss_value(fam, wp, z) - losses::loss_value(fam, wm, z)) / (2.0 * h);
        err_sq += (fd - g[i]) * (fd - g[i]);
      }
      worst = std::max(worst, std::sqrt(err_sq) / gn);
      ++accepted;
    }
    out.require(worst <= 1e-5, losses::to_string(kind) + " worst rel err=" + fmt(worst));
  }
  out.note("central differences within 1e-5 at 1000 points per smooth family");
  return out;
}

// ---- criterion 14: lambda monotonicity -------------------------------------

Outcome criterion_lambda_monotone() {
  Outcome out;
  double prev_sgd = 0.0, prev_sgda = 0.0;
  for (double lambda : {0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9}) {
    theory_bounds::BoundInputs in;
    in.g = 1.0;
    in.l = 1.0;
    in.n = 100;
    in.t_steps = 100;
    in.eta = 0.01;
    in.spectrum = theory_bounds::synthetic_symmetric_spectrum(100, lambda);
    in.d0 = 1.0;
    in.f0_sup = std::log(2.0);
    in.d_w = 2.0;
    in.d_v = 2.0;
    double b_sgd = theory_bounds::sgd_opt_bound(in);
    double b_sgda = theory_bounds::sgda_opt_bound(in);
    out.require(b_sgd >= prev_sgd, "sgd bound dipped at lambda=" + fmt(lambda));
    out.require(b_sgda >= prev_sgda, "sgda bound dipped at lambda=" + fmt(lambda));
    prev_sgd = b_sgd;
    prev_sgda = b_sgda;
  }
  out.note("both optimization bounds nondecreasing over lambda in {0.5..0.9}");
  return out;
}

}  // namespace

int main() {
  kernels::set_backend(kernels::avx2_supported() ? kernels::Backend::avx2
                                                 : kernels::Backend::scalar);
  struct Entry {
    int id;
    std::string name;
    std::function<Outcome()> fn;
  };

  Outcome domination7;  // filled by criterion 6's sweep
  std::vector<Entry> entries = {
      {1, "spectral exactness", criterion_spectral},
      {2, "mixing inequality (symmetric chains)", criterion_mixing_bound},
      {3, "gradient-map non-expansiveness", criterion_nonexpansive},
      {4, "stability domination and 1/n scaling", criterion_stability_domination},
      {5, "generalization gap domination", criterion_gen_domination},
      {6, "convex optimization rate", [&] { return criterion_sgd_rate(domination7); }},
      {7, "convex optimization bound domination", [&] { return domination7; }},
      {8, "i.i.d. degeneration of the uniform chain", criterion_iid_degeneration},
      {9, "saddle-point rate and recovery", criterion_sgda_rate},
      {10, "minimax stability and weak PD domination", criterion_sgda_domination},
      {11, "non-convex gradient-norm trend", criterion_nonconvex_trend},
      {12, "high-probability quantile shape", criterion_hp_quantiles},
      {13, "gradient correctness (finite differences)", criterion_gradients},
      {14, "lambda monotonicity of optimization bounds", criterion_lambda_monotone},
  };

  int failures = 0;
  for (auto& entry : entries) {
    auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = entry.fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", out.pass ? "PASS" : "FAIL", entry.id,
                entry.name.c_str(), secs, out.detail.empty() ? "" : " - ",
                out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
