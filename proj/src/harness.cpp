#include "mcsgm/harness.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mcsgm/errors.hpp"
#include "mcsgm/kernels.hpp"
#include "mcsgm/parallel.hpp"
#include "mcsgm/rng.hpp"
#include "mcsgm/stats.hpp"

namespace mcsgm::harness {

namespace fs = std::filesystem;
using nlohmann::json;

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw std::invalid_argument("fit_rate: need >= 2 points");
  std::vector<double> xs, ys;
  xs.reserve(points.size());
  ys.reserve(points.size());
  for (const auto& [t, v] : points) {
    if (!(t > 0.0)) throw std::invalid_argument("fit_rate: T must be positive");
    if (!(v > 0.0)) throw std::invalid_argument("fit_rate: values must be positive");
    xs.push_back(std::log(t));
    ys.push_back(std::log(v));
  }
  double x_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x_mean += xs[i];
    y_mean += ys[i];
  }
  x_mean /= static_cast<double>(xs.size());
  y_mean /= static_cast<double>(ys.size());
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - x_mean, dy = ys[i] - y_mean;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_rate: need >= 2 distinct T");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

double quantile_report(std::vector<double> values, double gamma) {
  if (values.empty()) throw std::invalid_argument("quantile_report: empty values");
  if (!(gamma > 0.0) || gamma > 1.0)
    throw std::invalid_argument("quantile_report: gamma in (0,1] required");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  double pos = (1.0 - gamma) * static_cast<double>(m - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, m - 1);
  double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::uint64_t config_hash(const json& j) {
  // output location and parallelism degree do not change any result byte
  json canon_j = j;
  canon_j.erase("out");
  canon_j.erase("threads");
  std::string canon = canon_j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  cfg.kind = j.at("kind").get<std::string>();
  static const std::vector<std::string> kinds = {
      "chain-info", "sgd-rate",           "sgd-stability", "sgd-gen", "sgda-rate",
      "sgda-risk",  "nonconvex-gradnorm", "hp-quantiles",  "bounds"};
  if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
    throw std::invalid_argument("config: unknown experiment kind '" + cfg.kind + "'");
  cfg.raw = j;
  cfg.master_seed = j.value("master_seed", std::uint64_t{1});
  cfg.replicates = j.value("replicates", std::size_t{1});
  if (cfg.replicates < 1) throw std::invalid_argument("config: replicates >= 1 required");
  cfg.threads = j.value("threads", std::size_t{1});
  cfg.out_dir = j.value("out", std::string("out"));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j = json::parse(in);
  return parse_config(j);
}

// ---- config resolution -----------------------------------------------------

namespace {

losses::LossFamily resolve_family(const json& raw) {
  json f = raw.value("family", json::object());
  return losses::make_loss_family(
      losses::loss_kind_from_string(f.value("kind", std::string("logistic"))),
      f.value("d", std::size_t{5}), f.value("B_x", 1.0), f.value("radius", 5.0),
      f.value("B_y", 1.0));
}

losses::Generator resolve_generator(const json& raw, const losses::LossFamily& fam) {
  json g = raw.value("generator", json::object());
  if (g.value("kind", std::string("classification")) == "fixed") {
    losses::Generator gen;
    from_json(g, gen);
    return gen;
  }
  return losses::make_classification_generator(fam.d, fam.b_x, g.value("p_noise", 0.1),
                                               g.value("w_true_seed", std::uint64_t{11}));
}

losses::MinimaxFamily resolve_minimax(const json& raw) {
  json f = raw.value("minimax", json::object());
  return losses::make_minimax_family(
      losses::minimax_kind_from_string(f.value("kind", std::string("bilinear-saddle"))),
      f.value("d_w", std::size_t{2}), f.value("d_v", std::size_t{2}), f.value("G", 1.0),
      f.value("rho", 0.0), f.value("radius_w", 1.0), f.value("radius_v", 1.0));
}

losses::SaddleGenerator resolve_saddle_generator(const json& raw,
                                                 const losses::MinimaxFamily& fam) {
  json g = raw.value("saddle_generator", json::object());
  if (g.value("kind", std::string("saddle")) == "fixed-saddle") {
    losses::SaddleGenerator gen;
    from_json(g, gen);
    return gen;
  }
  return losses::make_saddle_generator(fam, g.value("a_offset", 0.0));
}

chain::ChainConfig resolve_chain(const json& raw, std::size_t n) {
  chain::ChainConfig cfg;
  if (raw.contains("chain")) from_json(raw.at("chain"), cfg);
  cfg.n = n;
  return cfg;
}

std::vector<std::size_t> resolve_n_grid(const json& raw, std::vector<std::size_t> fallback) {
  if (raw.contains("n_grid")) return raw.at("n_grid").get<std::vector<std::size_t>>();
  if (raw.contains("n")) return {raw.at("n").get<std::size_t>()};
  return fallback;
}

std::vector<std::size_t> resolve_t_grid(const json& raw, std::size_t n,
                                        std::vector<std::size_t> fallback) {
  if (raw.contains("T_grid")) return raw.at("T_grid").get<std::vector<std::size_t>>();
  if (raw.contains("T")) return {raw.at("T").get<std::size_t>()};
  std::string rule = raw.value("T_rule", std::string(""));
  if (rule == "n") return {n};
  if (rule == "n^2") return {n * n};
  return fallback;
}

// schedule spec: "inv_sqrt_tlogt" | "t_pow_neg34" | "inv_sqrt_t_logt_full"
// | {"constant": eta}; the *_full kind resolves eta = 1/(sqrt(T) log T).
optim::StepSchedule resolve_schedule(const json& raw, std::size_t t_steps) {
  json s = raw.value("schedule", json("inv_sqrt_tlogt"));
  if (s.is_object()) return optim::StepSchedule::constant(s.at("constant").get<double>());
  std::string name = s.get<std::string>();
  if (name == "inv_sqrt_tlogt") return optim::StepSchedule::inv_sqrt_tlogt();
  if (name == "t_pow_neg34") return optim::StepSchedule::t_pow_neg34();
  if (name == "inv_sqrt_t_logt_full") {
    if (t_steps < 2) throw InvalidConfigurationError("schedule: 1/(sqrt(T) log T) needs T >= 2");
    double t = static_cast<double>(t_steps);
    return optim::StepSchedule::constant(1.0 / (std::sqrt(t) * std::log(t)));
  }
  throw std::invalid_argument("config: unknown schedule '" + name + "'");
}

optim::DomainSpec resolve_domain(const json& raw, const char* key, double fallback_radius) {
  if (raw.contains(key)) {
    json d = raw.at(key);
    if (d.is_string() && d.get<std::string>() == "unconstrained")
      return optim::DomainSpec::unconstrained();
    return optim::DomainSpec::ball(d.value("radius", fallback_radius));
  }
  return optim::DomainSpec::ball(fallback_radius);
}

std::string fmt_size(std::size_t v) { return std::to_string(v); }

theory_bounds::BoundInputs bound_inputs(const losses::LossFamily& fam,
                                        const chain::ChainSpectrum& spec, std::size_t n,
                                        std::size_t t_steps, double eta, double radius) {
  theory_bounds::BoundInputs in;
  in.g = fam.g;
  in.l = fam.l.value_or(0.0);
  in.n = n;
  in.t_steps = t_steps;
  in.eta = eta;
  in.spectrum = spec;
  in.f0_sup = losses::f_zero_sup(fam);
  in.d_w = 2.0 * radius;
  return in;
}

// ---- experiment runners ----------------------------------------------------

RunOutput run_chain_info(const ExperimentConfig& cfg) {
  RunOutput out;
  out.results.header = {"n",       "kind",   "lambda",     "k_p",
                        "c_p",     "symmetric", "mixing_time@eps", "eps"};
  double eps = cfg.raw.value("eps", 0.01);
  std::size_t scan_len = cfg.raw.value("deviation_scan", std::size_t{200});
  for (std::size_t n : resolve_n_grid(cfg.raw, {4})) {
    chain::ChainConfig ccfg = resolve_chain(cfg.raw, n);
    chain::TransitionMatrix p = chain::build(ccfg);
    chain::ChainSpectrum spec = chain::analyze(p);
    std::size_t mix = chain::mixing_time_to(spec, eps);
    out.results.rows.push_back({fmt_size(n), ccfg.kind, format_double(spec.lambda),
                                fmt_size(spec.k_p),
                                spec.c_p ? format_double(*spec.c_p) : "absent",
                                spec.symmetric ? "1" : "0", fmt_size(mix),
                                format_double(eps)});
    std::vector<double> devs = chain::deviation_scan(p, scan_len);
    std::vector<std::pair<double, double>> curve;
    for (std::size_t j = 0; j <= scan_len; ++j)
      curve.emplace_back(static_cast<double>(j), devs[j]);
    out.curves.emplace_back("deviation_n" + fmt_size(n), std::move(curve));
    out.summary["lambda_n" + fmt_size(n)] = spec.lambda;
  }
  return out;
}

RunOutput run_sgd_stability(const ExperimentConfig& cfg) {
  RunOutput out;
  out.results.header = {"n",  "T",     "eta",   "lambda", "mean_stability",
                        "se", "bound", "dominated"};
  losses::LossFamily fam = resolve_family(cfg.raw);
  losses::Generator gen = resolve_generator(cfg.raw, fam);
  optim::DomainSpec domain = resolve_domain(cfg.raw, "domain", fam.radius);
  bool smooth = fam.smooth && fam.l.has_value();
  std::vector<std::pair<double, double>> curve;
  std::vector<double> means;
  for (std::size_t n : resolve_n_grid(cfg.raw, {50, 100, 200})) {
    for (std::size_t t_steps : resolve_t_grid(cfg.raw, n, {n})) {
      try {
        optim::StepSchedule sched = resolve_schedule(cfg.raw, t_steps);
        double eta = sched.resolve(t_steps);
        risk_stability::ReplicateConfig rc{n, t_steps, sched, resolve_chain(cfg.raw, n),
                                           cfg.replicates, cfg.master_seed, cfg.threads};
        chain::ChainSpectrum spec = chain::analyze(chain::build(rc.chain_cfg));
        risk_stability::StabilityEstimate est =
            risk_stability::estimate_stability_sgd(fam, gen, rc, domain);
        theory_bounds::BoundInputs in = bound_inputs(fam, spec, n, t_steps, eta, fam.radius);
        double bound = theory_bounds::sgd_stability_bound(in, smooth);
        bool dominated = est.mean_distance <= bound + 3.0 * est.std_error;
        out.results.rows.push_back({fmt_size(n), fmt_size(t_steps), format_double(eta),
                                    format_double(spec.lambda),
                                    format_double(est.mean_distance),
                                    format_double(est.std_error), format_double(bound),
                                    dominated ? "1" : "0"});
        curve.emplace_back(static_cast<double>(n), est.mean_distance);
        means.push_back(est.mean_distance);
      } catch (const std::exception& e) {
        out.results.rows.push_back({fmt_size(n), fmt_size(t_steps), "", "", "", "", "",
                                    std::string("ERROR:") + e.what()});
        out.summary["failed"] = true;
      }
    }
  }
  if (means.size() >= 2 && means.front() > 0.0)
    out.summary["mean_ratio_last_over_first"] = means.back() / means.front();
  out.curves.emplace_back("stability_vs_n", std::move(curve));
  return out;
}

RunOutput run_sgd_gen(const ExperimentConfig& cfg) {
  RunOutput out;
  out.results.header = {"n",   "T",        "eta",    "gen_gap", "gen_gap_se",
                        "emp", "pop",      "excess", "bound",   "dominated"};
  losses::LossFamily fam = resolve_family(cfg.raw);
  losses::Generator gen = resolve_generator(cfg.raw, fam);
  optim::DomainSpec domain = resolve_domain(cfg.raw, "domain", fam.radius);
  std::size_t n_test = cfg.raw.value("n_test", std::size_t{4000});
  bool smooth = fam.smooth && fam.l.has_value();
  std::vector<std::pair<double, double>> curve;
  for (std::size_t n : resolve_n_grid(cfg.raw, {50, 100, 200})) {
    for (std::size_t t_steps : resolve_t_grid(cfg.raw, n, {n})) {
      try {
        optim::StepSchedule sched = resolve_schedule(cfg.raw, t_steps);
        double eta = sched.resolve(t_steps);
        risk_stability::ReplicateConfig rc{n, t_steps, sched, resolve_chain(cfg.raw, n),
                                           cfg.replicates, cfg.master_seed, cfg.threads};
        chain::ChainSpectrum spec = chain::analyze(chain::build(rc.chain_cfg));
        risk_stability::RiskReport report =
            risk_stability::generalization_report_sgd(fam, gen, rc, domain, n_test);
        theory_bounds::BoundInputs in = bound_inputs(fam, spec, n, t_steps, eta, fam.radius);
        double bound = theory_bounds::sgd_gen_bound(in, smooth);
        bool dominated = std::fabs(report.gen_gap) <= bound + 3.0 * report.gen_gap_se;
        out.results.rows.push_back(
            {fmt_size(n), fmt_size(t_steps), format_double(eta), format_double(report.gen_gap),
             format_double(report.gen_gap_se), format_double(report.empirical),
             format_double(report.population), format_double(report.excess),
             format_double(bound), dominated ? "1" : "0"});
        curve.emplace_back(static_cast<double>(n), std::fabs(report.gen_gap));
      } catch (const std::exception& e) {
        out.results.rows.push_back({fmt_size(n), fmt_size(t_steps), "", "", "", "", "", "", "",
                                    std::string("ERROR:") + e.what()});
        out.summary["failed"] = true;
      }
    }
  }
  out.curves.emplace_back("gen_gap_vs_n", std::move(curve));
  return out;
}

RunOutput run_sgd_rate(const ExperimentConfig& cfg) {
  RunOutput out;
  out.results.header = {"n",        "T",           "eta",           "lambda",
                        "mean_gap_erm", "se_erm",  "mean_gap_plug", "se_plug",
                        "bound",    "dominated"};
  losses::LossFamily fam = resolve_family(cfg.raw);
  losses::Generator gen = resolve_generator(cfg.raw, fam);
  optim::DomainSpec domain = resolve_domain(cfg.raw, "domain", fam.radius);
  std::size_t n = resolve_n_grid(cfg.raw, {256}).front();
  std::vector<std::size_t> t_grid =
      resolve_t_grid(cfg.raw, n, {512, 1024, 2048, 4096, 8192, 16384});

  losses::Dataset s = losses::generate_dataset(gen, n, derive_seed(cfg.master_seed, 0xD5));
  losses::ErmSolution erm = losses::erm_oracle(fam, s, domain);
  std::size_t plug_n = 10 * std::max<std::size_t>(n, 1000);
  losses::Dataset plug =
      losses::generate_dataset(gen, plug_n, derive_seed(cfg.master_seed, 0x9001));
  losses::ErmSolution plug_star = losses::erm_oracle(fam, plug, domain);

  chain::ChainConfig ccfg = resolve_chain(cfg.raw, n);
  chain::TransitionMatrix p = chain::build(ccfg);
  chain::ChainSpectrum spec = chain::analyze(p);

  std::vector<double> w0(fam.d, 0.0);
  std::vector<std::pair<double, double>> curve;
  for (std::size_t t_steps : t_grid) {
    optim::StepSchedule sched = resolve_schedule(cfg.raw, t_steps);
    double eta = sched.resolve(t_steps);
    std::vector<double> gaps_erm(cfg.replicates), gaps_plug(cfg.replicates);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
      std::uint64_t seed = derive_seed(cfg.master_seed, t_steps, r);
      chain::ChainPath path = chain::sample_path_uniform_start(p, t_steps, seed);
      optim::Trajectory traj = optim::mc_sgd(fam, s, path, sched, w0, domain);
      gaps_erm[r] = risk_stability::opt_gap_sgd(fam, s, traj, erm.w);
      gaps_plug[r] = risk_stability::opt_gap_sgd(fam, s, traj, plug_star.w);
    });
    stats::MeanSe erm_agg = stats::mean_se(gaps_erm);
    stats::MeanSe plug_agg = stats::mean_se(gaps_plug);
    theory_bounds::BoundInputs in = bound_inputs(fam, spec, n, t_steps, eta, fam.radius);
    in.d0 = kernels::nrm2(erm.w.data(), erm.w.size());
    double bound = theory_bounds::sgd_opt_bound(in);
    bool dominated = erm_agg.mean <= bound;
    out.results.rows.push_back({fmt_size(n), fmt_size(t_steps), format_double(eta),
                                format_double(spec.lambda), format_double(erm_agg.mean),
                                format_double(erm_agg.se), format_double(plug_agg.mean),
                                format_double(plug_agg.se), format_double(bound),
                                dominated ? "1" : "0"});
    curve.emplace_back(static_cast<double>(t_steps), erm_agg.mean);
  }
  RateFit fit = fit_rate(curve);
  out.summary["slope"] = fit.slope;
  out.summary["r_squared"] = fit.r_squared;
  out.curves.emplace_back("opt_gap_vs_T", std::move(curve));
  return out;
}

RunOutput run_sgda_rate(const ExperimentConfig& cfg) {
  RunOutput out;
  out.results.header = {"n",  "T",     "eta",       "lambda",     "mean_pd_gap",
                        "se", "bound", "dominated", "saddle_dist"};
  losses::MinimaxFamily fam = resolve_minimax(cfg.raw);
  losses::SaddleGenerator gen = resolve_saddle_generator(cfg.raw, fam);
  optim::DomainSpec w_domain = resolve_domain(cfg.raw, "w_domain", fam.radius_w);
  optim::DomainSpec v_domain = resolve_domain(cfg.raw, "v_domain", fam.radius_v);
  std::size_t n = resolve_n_grid(cfg.raw, {128}).front();
  std::vector<std::size_t> t_grid = resolve_t_grid(cfg.raw, n, {512, 1024, 2048, 4096, 8192});

  losses::SaddleDataset s =
      losses::generate_saddle_dataset(gen, n, derive_seed(cfg.master_seed, 0xD5));
  chain::ChainConfig ccfg = resolve_chain(cfg.raw, n);
  chain::TransitionMatrix p = chain::build(ccfg);
  chain::ChainSpectrum spec = chain::analyze(p);

  // Interior empirical saddle by linear solve, available when the mean A
  // block is square and well conditioned (the sc-concave acceptance setup).
  std::vector<double> saddle_w, saddle_v;
  if (fam.rho > 0.0 && fam.d_w == fam.d_v) {
    losses::SaddleCoefficients m = losses::mean_coefficients(s, fam.d_w, fam.d_v);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(fam.d_w), static_cast<Eigen::Index>(fam.d_v));
    for (std::size_t i = 0; i < fam.d_w; ++i)
      for (std::size_t j = 0; j < fam.d_v; ++j)
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.a[i * fam.d_v + j];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.isInvertible()) {
      Eigen::VectorXd b(static_cast<Eigen::Index>(fam.d_w));
      Eigen::VectorXd c(static_cast<Eigen::Index>(fam.d_v));
      for (std::size_t i = 0; i < fam.d_w; ++i) b(static_cast<Eigen::Index>(i)) = m.b[i];
      for (std::size_t j = 0; j < fam.d_v; ++j) c(static_cast<Eigen::Index>(j)) = m.c[j];
      Eigen::VectorXd v_star = -lu.solve(b);
      Eigen::VectorXd w_star = a.transpose().fullPivLu().solve(c + fam.rho * v_star);
      bool interior = w_star.norm() <= fam.radius_w && v_star.norm() <= fam.radius_v;
      if (interior) {
        saddle_w.assign(w_star.data(), w_star.data() + w_star.size());
        saddle_v.assign(v_star.data(), v_star.data() + v_star.size());
      }
    }
  }

  std::vector<double> w0(fam.d_w, 0.0), v0(fam.d_v, 0.0);
  std::vector<std::pair<double, double>> curve;
  double last_saddle_dist = -1.0;
  for (std::size_t t_steps : t_grid) {
    optim::StepSchedule sched = resolve_schedule(cfg.raw, t_steps);
    double eta = sched.resolve(t_steps);
    std::vector<double> gaps(cfg.replicates), dists(cfg.replicates, -1.0);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
      std::uint64_t seed = derive_seed(cfg.master_seed, t_steps, r);
      chain::ChainPath path = chain::sample_path_uniform_start(p, t_steps, seed);
      optim::SaddleTrajectory traj =
          optim::mc_sgda(fam, s, path, sched, w0, v0, w_domain, v_domain);
      gaps[r] = risk_stability::pd_gap_sgda(fam, s, traj, w_domain, v_domain);
      if (!saddle_w.empty()) {
        double dw = kernels::dist2(traj.averaged_w, saddle_w);
        double dv = kernels::dist2(traj.averaged_v, saddle_v);
        dists[r] = std::sqrt(dw + dv);
      }
    });
    stats::MeanSe agg = stats::mean_se(gaps);
    theory_bounds::BoundInputs in;
    in.g = fam.g;
    in.l = fam.l;
    in.rho = fam.rho;
    in.n = n;
    in.t_steps = t_steps;
    in.eta = eta;
    in.spectrum = spec;
    in.d_w = w_domain.diameter();
    in.d_v = v_domain.diameter();
    double bound = theory_bounds::sgda_opt_bound(in);
    double mean_dist = -1.0;
    if (!saddle_w.empty()) mean_dist = stats::mean_se(dists).mean;
    out.results.rows.push_back({fmt_size(n), fmt_size(t_steps), format_double(eta),
                                format_double(spec.lambda), format_double(agg.mean),
                                format_double(agg.se), format_double(bound),
                                agg.mean <= bound ? "1" : "0", format_double(mean_dist)});
    curve.emplace_back(static_cast<double>(t_steps), agg.mean);
    last_saddle_dist = mean_dist;
  }
  RateFit fit = fit_rate(curve);
  out.summary["slope"] = fit.slope;
  out.summary["r_squared"] = fit.r_squared;
  if (last_saddle_dist >= 0.0) out.summary["saddle_dist_at_largest_T"] = last_saddle_dist;
  out.curves.emplace_back("pd_gap_vs_T", std::move(curve));
  return out;
}

RunOutput run_sgda_risk(const ExperimentConfig& cfg) {
  RunOutput out;
  out.results.header = {"n",         "T",          "eta",          "stab_mean",
                        "stab_se",   "bound_smooth", "bound_nonsmooth", "weak_pd_gen",
                        "weak_pd_bound", "primal_gen", "primal_bound", "dominated"};
  losses::MinimaxFamily fam = resolve_minimax(cfg.raw);
  losses::SaddleGenerator gen = resolve_saddle_generator(cfg.raw, fam);
  optim::DomainSpec w_domain = resolve_domain(cfg.raw, "w_domain", fam.radius_w);
  optim::DomainSpec v_domain = resolve_domain(cfg.raw, "v_domain", fam.radius_v);
  std::size_t n_pop = cfg.raw.value("n_population", std::size_t{20000});
  for (std::size_t n : resolve_n_grid(cfg.raw, {64})) {
    for (std::size_t t_steps : resolve_t_grid(cfg.raw, n, {n})) {
      optim::StepSchedule sched = resolve_schedule(cfg.raw, t_steps);
      double eta = sched.resolve(t_steps);
      risk_stability::ReplicateConfig rc{n, t_steps, sched, resolve_chain(cfg.raw, n),
                                         cfg.replicates, cfg.master_seed, cfg.threads};
      risk_stability::StabilityEstimate est =
          risk_stability::estimate_stability_sgda(fam, gen, rc, w_domain, v_domain);
      risk_stability::RiskReport weak =
          risk_stability::weak_pd_report(fam, gen, rc, w_domain, v_domain, n_pop);
      theory_bounds::BoundInputs in;
      in.g = fam.g;
      in.l = fam.l;
      in.rho = fam.rho;
      in.n = n;
      in.t_steps = t_steps;
      in.eta = eta;
      in.d_w = w_domain.diameter();
      in.d_v = v_domain.diameter();
      double sum_eta_sq = static_cast<double>(t_steps) * eta * eta;
      bool smooth_ok = sum_eta_sq <= 1.0 / (2.0 * fam.l * fam.l) + 1e-15;
      double bound_smooth =
          smooth_ok ? theory_bounds::sgda_stability_bound(in, true) : -1.0;
      double bound_nonsmooth = theory_bounds::sgda_stability_bound(in, false);
      double weak_bound = fam.g * (smooth_ok ? bound_smooth : bound_nonsmooth);
      double primal_gen = 0.0, primal_bound = -1.0;
      if (fam.rho > 0.0) {
        risk_stability::RiskReport primal =
            risk_stability::primal_report(fam, gen, rc, w_domain, v_domain, n_pop);
        primal_gen = primal.primal_gen;
        primal_bound = (1.0 + fam.l / fam.rho) * weak_bound;
        out.summary["primal_excess"] = primal.primal_excess;
      }
      bool dominated = (bound_smooth < 0.0 ||
                        est.mean_distance <= bound_smooth + 3.0 * est.std_error) &&
                       est.mean_distance <= bound_nonsmooth + 3.0 * est.std_error;
      out.results.rows.push_back(
          {fmt_size(n), fmt_size(t_steps), format_double(eta),
           format_double(est.mean_distance), format_double(est.std_error),
           format_double(bound_smooth), format_double(bound_nonsmooth),
           format_double(weak.weak_pd_gen), format_double(weak_bound),
           format_double(primal_gen), format_double(primal_bound), dominated ? "1" : "0"});
    }
  }
  return out;
}

RunOutput run_nonconvex_gradnorm(const ExperimentConfig& cfg) {
  RunOutput out;
  out.results.header = {"n", "T", "eta", "mean_min_grad_sq", "se", "bound"};
  json raw = cfg.raw;
  if (!raw.contains("family")) raw["family"] = {{"kind", "sigmoid-sq"}};
  if (!raw.contains("schedule")) raw["schedule"] = "inv_sqrt_t_logt_full";
  losses::LossFamily fam = resolve_family(raw);
  losses::Generator gen = resolve_generator(raw, fam);
  optim::DomainSpec domain = resolve_domain(raw, "domain", fam.radius);
  std::size_t n = resolve_n_grid(raw, {128}).front();
  std::vector<std::size_t> t_grid = resolve_t_grid(raw, n, {512, 1024, 2048, 4096, 8192});

  losses::Dataset s = losses::generate_dataset(gen, n, derive_seed(cfg.master_seed, 0xD5));
  chain::ChainConfig ccfg = resolve_chain(raw, n);
  chain::TransitionMatrix p = chain::build(ccfg);
  chain::ChainSpectrum spec = chain::analyze(p);
  std::vector<double> w0(fam.d, 0.0);
  double fs_w0 = losses::empirical_risk(fam, s, w0);

  std::vector<std::pair<double, double>> curve;
  for (std::size_t t_steps : t_grid) {
    optim::StepSchedule sched = resolve_schedule(raw, t_steps);
    double eta = sched.resolve(t_steps);
    std::vector<double> mins(cfg.replicates);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
      std::uint64_t seed = derive_seed(cfg.master_seed, t_steps, r);
      chain::ChainPath path = chain::sample_path_uniform_start(p, t_steps, seed);
      optim::Trajectory traj = optim::mc_sgd(fam, s, path, sched, w0, domain);
      risk_stability::GradNormTrace trace = risk_stability::grad_norm_trace(fam, s, traj);
      mins[r] = trace.running_min.back();
    });
    stats::MeanSe agg = stats::mean_se(mins);
    theory_bounds::BoundInputs in = bound_inputs(fam, spec, n, t_steps, eta, fam.radius);
    double bound = theory_bounds::nonconvex_opt_bound(in, fs_w0);
    out.results.rows.push_back({fmt_size(n), fmt_size(t_steps), format_double(eta),
                                format_double(agg.mean), format_double(agg.se),
                                format_double(bound)});
    curve.emplace_back(static_cast<double>(t_steps), agg.mean);
  }
  RateFit fit = fit_rate(curve);
  out.summary["slope"] = fit.slope;
  out.summary["r_squared"] = fit.r_squared;
  bool nonincreasing = true;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].second > curve[i - 1].second) nonincreasing = false;
  out.summary["nonincreasing"] = nonincreasing;
  out.curves.emplace_back("min_grad_sq_vs_T", std::move(curve));
  return out;
}

RunOutput run_hp_quantiles(const ExperimentConfig& cfg) {
  RunOutput out;
  out.results.header = {"n", "T", "eta", "quantile", "mean", "ratio", "gamma"};
  losses::LossFamily fam = resolve_family(cfg.raw);
  losses::Generator gen = resolve_generator(cfg.raw, fam);
  optim::DomainSpec domain = resolve_domain(cfg.raw, "domain", fam.radius);
  double gamma = cfg.raw.value("gamma", 0.05);
  std::size_t n = resolve_n_grid(cfg.raw, {128}).front();
  std::vector<std::size_t> t_grid = resolve_t_grid(cfg.raw, n, {512, 1024, 2048, 4096});

  losses::Dataset s = losses::generate_dataset(gen, n, derive_seed(cfg.master_seed, 0xD5));
  losses::ErmSolution erm = losses::erm_oracle(fam, s, domain);
  chain::ChainConfig ccfg = resolve_chain(cfg.raw, n);
  chain::TransitionMatrix p = chain::build(ccfg);
  std::vector<double> w0(fam.d, 0.0);

  std::vector<std::pair<double, double>> q_curve;
  double max_ratio = 0.0;
  for (std::size_t t_steps : t_grid) {
    optim::StepSchedule sched = resolve_schedule(cfg.raw, t_steps);
    double eta = sched.resolve(t_steps);
    std::vector<double> gaps(cfg.replicates);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
      std::uint64_t seed = derive_seed(cfg.master_seed, t_steps, r);
      chain::ChainPath path = chain::sample_path_uniform_start(p, t_steps, seed);
      optim::Trajectory traj = optim::mc_sgd(fam, s, path, sched, w0, domain);
      gaps[r] = risk_stability::opt_gap_sgd(fam, s, traj, erm.w);
    });
    double q = quantile_report(gaps, gamma);
    double mean = stats::mean_se(gaps).mean;
    double ratio = mean > 0.0 ? q / mean : 0.0;
    max_ratio = std::max(max_ratio, ratio);
    out.results.rows.push_back({fmt_size(n), fmt_size(t_steps), format_double(eta),
                                format_double(q), format_double(mean), format_double(ratio),
                                format_double(gamma)});
    q_curve.emplace_back(static_cast<double>(t_steps), q);
  }
  RateFit fit = fit_rate(q_curve);
  out.summary["slope"] = fit.slope;
  out.summary["r_squared"] = fit.r_squared;
  out.summary["max_quantile_mean_ratio"] = max_ratio;
  out.curves.emplace_back("quantile_vs_T", std::move(q_curve));
  return out;
}

RunOutput run_bounds(const ExperimentConfig& cfg) {
  RunOutput out;
  out.results.header = {"theorem_id", "G",   "L",      "rho", "n",     "T",
                        "eta",        "lambda", "extra", "bound_value"};
  json raw = cfg.raw;
  double g = raw.value("G", 1.0);
  double l = raw.value("L", 0.25);
  double rho = raw.value("rho", 1.0);
  std::size_t n = raw.value("n", std::size_t{100});
  std::size_t t_steps = raw.value("T", std::size_t{100});
  double eta = raw.value("eta", 0.01);
  double d0 = raw.value("D0", 1.0);
  double f0 = raw.value("f0_sup", std::log(2.0));
  double d_w = raw.value("D_w", 2.0);
  double d_v = raw.value("D_v", 2.0);
  double fs_w0 = raw.value("Fs_w0", f0);
  std::vector<double> lambdas = raw.value("lambda_grid", std::vector<double>{0.5});

  for (double lambda : lambdas) {
    theory_bounds::BoundInputs in;
    in.g = g;
    in.l = l;
    in.rho = rho;
    in.n = n;
    in.t_steps = t_steps;
    in.eta = eta;
    in.spectrum = theory_bounds::synthetic_symmetric_spectrum(n, lambda);
    in.d0 = d0;
    in.f0_sup = f0;
    in.d_w = d_w;
    in.d_v = d_v;
    // Each calculator row stands alone: a precondition failure becomes a
    // failure marker in that row, the rest of the grid still flushes.
    auto emit = [&](const std::string& id, auto&& fn, const std::string& extra = "") {
      std::string cell;
      try {
        cell = format_double(fn());
      } catch (const std::exception& e) {
        cell = std::string("ERROR:") + e.what();
        out.summary["failed"] = true;
      }
      out.results.rows.push_back({id, format_double(g), format_double(l), format_double(rho),
                                  fmt_size(n), fmt_size(t_steps), format_double(eta),
                                  format_double(lambda), extra, cell});
    };
    emit("stability_sgd_smooth", [&] { return theory_bounds::sgd_stability_bound(in, true); });
    emit("stability_sgd_nonsmooth",
         [&] { return theory_bounds::sgd_stability_bound(in, false); });
    emit("gen_sgd_smooth", [&] { return theory_bounds::sgd_gen_bound(in, true); });
    emit("gen_sgd_nonsmooth", [&] { return theory_bounds::sgd_gen_bound(in, false); });
    emit("stability_sgda_smooth",
         [&] { return theory_bounds::sgda_stability_bound(in, true); });
    emit("stability_sgda_nonsmooth",
         [&] { return theory_bounds::sgda_stability_bound(in, false); });
    if (rho > 0.0) {
      emit("gen_sgda_weak_pd_smooth",
           [&] { return theory_bounds::sgda_gen_bounds(in, true).weak_pd; });
      emit("gen_sgda_primal_smooth",
           [&] { return theory_bounds::sgda_gen_bounds(in, true).primal; });
      emit("gen_sgda_weak_pd_nonsmooth",
           [&] { return theory_bounds::sgda_gen_bounds(in, false).weak_pd; });
      emit("gen_sgda_primal_nonsmooth",
           [&] { return theory_bounds::sgda_gen_bounds(in, false).primal; });
    } else {
      emit("gen_sgda_weak_pd_smooth",
           [&] { return g * theory_bounds::sgda_stability_bound(in, true); });
      emit("gen_sgda_weak_pd_nonsmooth",
           [&] { return g * theory_bounds::sgda_stability_bound(in, false); });
    }
    emit("opt_sgd_convex", [&] { return theory_bounds::sgd_opt_bound(in); },
         "D0=" + format_double(d0));
    emit("opt_sgda", [&] { return theory_bounds::sgda_opt_bound(in); },
         "D=" + format_double(d_w + d_v));
    emit("opt_nonconvex", [&] { return theory_bounds::nonconvex_opt_bound(in, fs_w0); },
         "Fs_w0=" + format_double(fs_w0));
  }
  return out;
}

}  // namespace

RunOutput run_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind == "chain-info") return run_chain_info(cfg);
  if (cfg.kind == "sgd-rate") return run_sgd_rate(cfg);
  if (cfg.kind == "sgd-stability") return run_sgd_stability(cfg);
  if (cfg.kind == "sgd-gen") return run_sgd_gen(cfg);
  if (cfg.kind == "sgda-rate") return run_sgda_rate(cfg);
  if (cfg.kind == "sgda-risk") return run_sgda_risk(cfg);
  if (cfg.kind == "nonconvex-gradnorm") return run_nonconvex_gradnorm(cfg);
  if (cfg.kind == "hp-quantiles") return run_hp_quantiles(cfg);
  if (cfg.kind == "bounds") return run_bounds(cfg);
  throw std::invalid_argument("run_experiment: unknown kind '" + cfg.kind + "'");
}

std::string write_outputs(const ExperimentConfig& cfg, const RunOutput& out) {
  fs::create_directories(cfg.out_dir);
  std::uint64_t hash = config_hash(cfg.raw);
  char hash_hex[24];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(hash));

  fs::path results_path = fs::path(cfg.out_dir) / "results.csv";
  {
    std::ofstream f(results_path);
    if (!f) throw std::runtime_error("cannot write " + results_path.string());
    f << "# " << kToolVersion << " config_hash=" << hash_hex << "\n";
    for (std::size_t i = 0; i < out.results.header.size(); ++i)
      f << out.results.header[i] << (i + 1 < out.results.header.size() ? "," : "\n");
    for (const auto& row : out.results.rows)
      for (std::size_t i = 0; i < row.size(); ++i)
        f << row[i] << (i + 1 < row.size() ? "," : "\n");
  }

  {
    std::ofstream f(fs::path(cfg.out_dir) / "manifest.txt");
    f << "tool = " << kToolVersion << "\n";
    f << "config_hash = " << hash_hex << "\n";
    f << "kind = " << cfg.kind << "\n";
    f << "master_seed = " << cfg.master_seed << "\n";
    f << "replicates = " << cfg.replicates << "\n";
    f << "threads = " << cfg.threads << "\n";
    f << "config = " << cfg.raw.dump() << "\n";
    for (auto it = out.summary.begin(); it != out.summary.end(); ++it)
      f << "summary." << it.key() << " = " << it.value().dump() << "\n";
  }

  for (const auto& [name, points] : out.curves) {
    std::ofstream f(fs::path(cfg.out_dir) / ("plot_" + name + ".dat"));
    f << "# " << kToolVersion << " config_hash=" << hash_hex << "\n";
    for (const auto& [x, y] : points)
      f << format_double(x) << " " << format_double(y) << "\n";
  }
  return results_path.string();
}

}  // namespace mcsgm::harness
