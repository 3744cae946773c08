#include "mcsgm/chain.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mcsgm/errors.hpp"
#include "mcsgm/kernels.hpp"
#include "mcsgm/rng.hpp"

namespace mcsgm::chain {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kMixTol = 1e-12;
constexpr double kDefectiveCond = 1e10;

void renormalize_rows(TransitionMatrix& p) {
  for (std::size_t i = 0; i < p.n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.n; ++j) s += p.rows[i * p.n + j];
    if (s <= 0.0) throw std::invalid_argument("transition matrix: zero row sum");
    kernels::scal(1.0 / s, p.rows.data() + i * p.n, p.n);
  }
}

Eigen::MatrixXd to_eigen(const TransitionMatrix& p) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(p.n), static_cast<Eigen::Index>(p.n));
  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t j = 0; j < p.n; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p.at(i, j);
  return m;
}

// Paper ordering for lambda_i: descending real part, magnitude tie-break.
std::vector<std::complex<double>> sort_paper_order(std::vector<std::complex<double>> ev) {
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return std::abs(a) > std::abs(b);
  });
  return ev;
}

std::vector<std::complex<double>> sort_by_magnitude(std::vector<std::complex<double>> ev) {
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma > mb;
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return ev;
}

double lambda_from(const std::vector<std::complex<double>>& paper_sorted) {
  std::size_t n = paper_sorted.size();
  double second = n >= 2 ? std::abs(paper_sorted[1]) : 0.0;
  double last = n >= 2 ? std::abs(paper_sorted[n - 1]) : 0.0;
  return (std::max(second, last) + 1.0) / 2.0;
}

}  // namespace

void TransitionMatrix::validate() const {
  if (n == 0 || rows.size() != n * n)
    throw std::invalid_argument("transition matrix: bad dimensions");
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double v = rows[i * n + j];
      if (v < 0.0 || !std::isfinite(v))
        throw std::invalid_argument("transition matrix: negative or non-finite entry");
      s += v;
    }
    if (std::fabs(s - 1.0) > kRowSumTol)
      throw std::invalid_argument("transition matrix: row does not sum to 1");
  }
}

bool TransitionMatrix::is_symmetric(double tol) const {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::fabs(at(i, j) - at(j, i)) > tol) return false;
  return true;
}

TransitionMatrix build_uniform(std::size_t n) {
  if (n == 0) throw std::invalid_argument("build_uniform: n must be positive");
  TransitionMatrix p{n, std::vector<double>(n * n, 1.0 / static_cast<double>(n))};
  renormalize_rows(p);
  p.validate();
  return p;
}

TransitionMatrix build_lazy_cycle(std::size_t n) {
  if (n < 3) throw std::invalid_argument("build_lazy_cycle: n >= 3 required");
  TransitionMatrix p{n, std::vector<double>(n * n, 0.0)};
  const double third = 1.0 / 3.0;
  for (std::size_t i = 0; i < n; ++i) {
    p.rows[i * n + i] += third;
    p.rows[i * n + (i + 1) % n] += third;
    p.rows[i * n + (i + n - 1) % n] += third;
  }
  renormalize_rows(p);
  p.validate();
  return p;
}

TransitionMatrix build_random_symmetric(std::size_t n, double alpha, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("build_random_symmetric: n >= 2 required");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("build_random_symmetric: alpha in (0,1] required");
  Rng rng(seed);
  std::vector<std::uint32_t> perm = rng.permutation(n);
  TransitionMatrix p{n, std::vector<double>(n * n, alpha / static_cast<double>(n))};
  const double half = 0.5 * (1.0 - alpha);
  for (std::size_t i = 0; i < n; ++i) {
    p.rows[i * n + perm[i]] += half;
    p.rows[static_cast<std::size_t>(perm[i]) * n + i] += half;
  }
  renormalize_rows(p);
  // Restore exact entrywise symmetry lost to the per-row renormalization.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (p.rows[i * n + j] + p.rows[j * n + i]);
      p.rows[i * n + j] = v;
      p.rows[j * n + i] = v;
    }
  p.validate();
  return p;
}

ChainSpectrum analyze(const TransitionMatrix& p) {
  p.validate();
  ChainSpectrum spec;
  spec.n = p.n;

  if (p.n == 1) {
    spec.eigenvalues = {std::complex<double>(1.0, 0.0)};
    spec.lambda = 0.5;
    spec.stationary = {1.0};
    spec.symmetric = true;
    spec.c_p = 1.0;
    spec.k_p = 0;
    return spec;
  }

  spec.symmetric = p.is_symmetric();
  std::vector<std::complex<double>> eigenvalues(p.n);

  if (spec.symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(p));
    if (solver.info() != Eigen::Success)
      throw UnsupportedMatrixError("analyze: symmetric eigensolver failed");
    for (std::size_t i = 0; i < p.n; ++i)
      eigenvalues[i] = {solver.eigenvalues()(static_cast<Eigen::Index>(i)), 0.0};
    spec.lambda = lambda_from(sort_paper_order(eigenvalues));
    if (spec.lambda >= 1.0 - kMixTol)
      throw ChainNotMixingError("analyze: chain is reducible or periodic (lambda ~ 1)");
    spec.stationary.assign(p.n, 1.0 / static_cast<double>(p.n));
    spec.c_p = std::pow(static_cast<double>(p.n), 1.5);
    spec.k_p = 0;
    spec.eigenvalues = sort_by_magnitude(std::move(eigenvalues));
    return spec;
  }

  Eigen::EigenSolver<Eigen::MatrixXd> solver(to_eigen(p));
  if (solver.info() != Eigen::Success)
    throw UnsupportedMatrixError("analyze: eigensolver failed");
  for (std::size_t i = 0; i < p.n; ++i)
    eigenvalues[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
  spec.lambda = lambda_from(sort_paper_order(eigenvalues));
  if (spec.lambda >= 1.0 - kMixTol)
    throw ChainNotMixingError("analyze: chain is reducible or periodic (lambda ~ 1)");

  // Eigenvector conditioning decides whether P is numerically diagonalizable.
  Eigen::MatrixXcd u = solver.eigenvectors();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(u);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  double smax = svd.singularValues()(0);
  if (smin <= 0.0 || smax / smin > kDefectiveCond)
    throw UnsupportedMatrixError("analyze: transition matrix is numerically defective");
  Eigen::MatrixXcd uinv = u.inverse();
  spec.c_p = std::sqrt(static_cast<double>(p.n - 1)) * u.norm() * uinv.norm();
  spec.k_p = 0;

  // Left Perron vector of P from the transpose's eigenvector at 1.
  Eigen::EigenSolver<Eigen::MatrixXd> tsolver(to_eigen(p).transpose());
  if (tsolver.info() != Eigen::Success)
    throw UnsupportedMatrixError("analyze: eigensolver failed on transpose");
  Eigen::Index best = 0;
  double best_dist = std::abs(tsolver.eigenvalues()(0) - std::complex<double>(1.0, 0.0));
  for (Eigen::Index i = 1; i < tsolver.eigenvalues().size(); ++i) {
    double d = std::abs(tsolver.eigenvalues()(i) - std::complex<double>(1.0, 0.0));
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  Eigen::VectorXcd pi = tsolver.eigenvectors().col(best);
  spec.stationary.resize(p.n);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.n; ++i) sum += pi(static_cast<Eigen::Index>(i)).real();
  if (sum == 0.0) throw ChainNotMixingError("analyze: degenerate stationary vector");
  for (std::size_t i = 0; i < p.n; ++i) {
    double v = pi(static_cast<Eigen::Index>(i)).real() / sum;
    spec.stationary[i] = std::max(v, 0.0);
  }
  double renorm = 0.0;
  for (double v : spec.stationary) renorm += v;
  for (double& v : spec.stationary) v /= renorm;

  spec.eigenvalues = sort_by_magnitude(std::move(eigenvalues));
  return spec;
}

namespace {

double entrywise_dev(const std::vector<double>& m, std::size_t n) {
  return kernels::max_abs_dev(m.data(), 1.0 / static_cast<double>(n), n * n);
}

double opnorm_dev(const std::vector<double>& m, std::size_t n) {
  double target = 1.0 / static_cast<double>(n);
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::fabs(target - m[i * n + j]);
    best = std::max(best, s);
  }
  return best;
}

std::vector<double> matrix_power(const TransitionMatrix& p, std::size_t j) {
  std::size_t n = p.n;
  std::vector<double> result(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) result[i * n + i] = 1.0;  // P^0 = I
  std::vector<double> base = p.rows;
  std::vector<double> tmp(n * n);
  while (j > 0) {
    if (j & 1) {
      kernels::matmul(result.data(), base.data(), tmp.data(), n);
      result.swap(tmp);
    }
    j >>= 1;
    if (j > 0) {
      kernels::matmul(base.data(), base.data(), tmp.data(), n);
      base.swap(tmp);
    }
  }
  return result;
}

}  // namespace

double deviation(const TransitionMatrix& p, std::size_t j) {
  p.validate();
  return entrywise_dev(matrix_power(p, j), p.n);
}

double deviation_opnorm(const TransitionMatrix& p, std::size_t j) {
  p.validate();
  return opnorm_dev(matrix_power(p, j), p.n);
}

std::vector<double> deviation_scan(const TransitionMatrix& p, std::size_t j_max) {
  p.validate();
  std::size_t n = p.n;
  std::vector<double> out;
  out.reserve(j_max + 1);
  std::vector<double> power(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) power[i * n + i] = 1.0;
  std::vector<double> tmp(n * n);
  out.push_back(entrywise_dev(power, n));
  for (std::size_t j = 1; j <= j_max; ++j) {
    kernels::matmul(power.data(), p.rows.data(), tmp.data(), n);
    power.swap(tmp);
    out.push_back(entrywise_dev(power, n));
  }
  return out;
}

double effective_constant(const ChainSpectrum& spec) {
  if (spec.symmetric) return std::pow(static_cast<double>(spec.n), 1.5);
  if (spec.c_p) return *spec.c_p;
  throw UnsupportedMatrixError("effective_constant: C_P unavailable for this matrix");
}

std::size_t mixing_time_to(const ChainSpectrum& spec, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("mixing_time_to: eps must be positive");
  if (spec.lambda >= 1.0) throw ChainNotMixingError("mixing_time_to: lambda >= 1");
  double c = effective_constant(spec);
  if (c <= eps) return 0;
  double raw = (std::log(c) - std::log(eps)) / std::log(1.0 / spec.lambda);
  auto j = static_cast<std::size_t>(std::max(0.0, std::ceil(raw)));
  while (j > 0 && c * std::pow(spec.lambda, static_cast<double>(j - 1)) <= eps) --j;
  while (c * std::pow(spec.lambda, static_cast<double>(j)) > eps) ++j;
  return j;
}

namespace {

std::vector<std::size_t> k_schedule_impl(const ChainSpectrum& spec, double d_const,
                                         std::size_t n, std::size_t t_steps, bool squared) {
  if (!(d_const > 0.0)) throw std::invalid_argument("k_schedule: D must be positive");
  if (spec.lambda >= 1.0) throw ChainNotMixingError("k_schedule: lambda >= 1");
  double c = effective_constant(spec);
  double log_inv_lambda = std::log(1.0 / spec.lambda);
  std::vector<std::size_t> ks(t_steps);
  for (std::size_t j = 1; j <= t_steps; ++j) {
    double jj = static_cast<double>(j);
    double arg = 2.0 * c * d_const * static_cast<double>(n) * (squared ? jj * jj : jj);
    long k = arg > 0.0 ? static_cast<long>(std::ceil(std::log(arg) / log_inv_lambda)) : 0;
    k = std::max(k, static_cast<long>(spec.k_p));
    k = std::max(k, 0L);
    k = std::min(k, static_cast<long>(j));
    ks[j - 1] = static_cast<std::size_t>(k);
  }
  return ks;
}

}  // namespace

std::vector<std::size_t> k_schedule(const ChainSpectrum& spec, double d_const,
                                    std::size_t n, std::size_t t_steps) {
  return k_schedule_impl(spec, d_const, n, t_steps, false);
}

std::vector<std::size_t> k_schedule_squared(const ChainSpectrum& spec, double d_const,
                                            std::size_t n, std::size_t t_steps) {
  return k_schedule_impl(spec, d_const, n, t_steps, true);
}

namespace {

std::uint32_t draw_from(std::span<const double> dist, double u) {
  double cum = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    cum += dist[k];
    if (u < cum) return static_cast<std::uint32_t>(k);
  }
  return static_cast<std::uint32_t>(dist.size() - 1);
}

}  // namespace

ChainPath sample_path(const TransitionMatrix& p, std::size_t t_steps,
                      std::span<const double> initial, std::uint64_t seed) {
  p.validate();
  if (initial.size() != p.n)
    throw std::invalid_argument("sample_path: initial distribution has wrong length");
  double sum = 0.0;
  for (double v : initial) {
    if (v < 0.0 || !std::isfinite(v))
      throw std::invalid_argument("sample_path: initial distribution has bad entry");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > kRowSumTol)
    throw std::invalid_argument("sample_path: initial distribution does not sum to 1");

  ChainPath path;
  path.seed = seed;
  path.initial_distribution.assign(initial.begin(), initial.end());
  path.indices.resize(t_steps);
  if (t_steps == 0) return path;

  Rng rng(seed);
  std::uint32_t state = draw_from(initial, rng.uniform());
  path.indices[0] = state + 1;
  for (std::size_t t = 1; t < t_steps; ++t) {
    state = draw_from(p.row(state), rng.uniform());
    path.indices[t] = state + 1;
  }
  return path;
}

ChainPath sample_path_uniform_start(const TransitionMatrix& p, std::size_t t_steps,
                                    std::uint64_t seed) {
  std::vector<double> uniform(p.n, 1.0 / static_cast<double>(p.n));
  return sample_path(p, t_steps, uniform, seed);
}

TransitionMatrix build(const ChainConfig& cfg) {
  if (cfg.kind == "uniform") return build_uniform(cfg.n);
  if (cfg.kind == "lazy_cycle") return build_lazy_cycle(cfg.n);
  if (cfg.kind == "random_symmetric") return build_random_symmetric(cfg.n, cfg.alpha, cfg.seed);
  if (cfg.kind == "explicit") {
    if (cfg.matrix.size() != cfg.n * cfg.n)
      throw std::invalid_argument("chain config: explicit matrix has wrong size");
    TransitionMatrix p{cfg.n, cfg.matrix};
    p.validate();
    renormalize_rows(p);
    return p;
  }
  throw std::invalid_argument("chain config: unknown kind '" + cfg.kind + "'");
}

void to_json(nlohmann::json& j, const ChainConfig& cfg) {
  j = nlohmann::json{{"kind", cfg.kind}, {"n", cfg.n}, {"alpha", cfg.alpha}, {"seed", cfg.seed}};
  if (cfg.kind == "explicit") j["matrix"] = cfg.matrix;
}

void from_json(const nlohmann::json& j, ChainConfig& cfg) {
  cfg.kind = j.value("kind", "uniform");
  cfg.n = j.value("n", std::size_t{0});
  cfg.alpha = j.value("alpha", 1.0);
  cfg.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("matrix")) cfg.matrix = j.at("matrix").get<std::vector<double>>();
}

nlohmann::json spectrum_record(const ChainSpectrum& spec) {
  nlohmann::json j;
  j["lambda"] = spec.lambda;
  j["k_p"] = spec.k_p;
  if (spec.c_p) j["c_p"] = *spec.c_p;
  j["symmetric"] = spec.symmetric;
  j["stationary"] = spec.stationary;
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : spec.eigenvalues) ev.push_back({e.real(), e.imag()});
  j["eigenvalues"] = ev;
  return j;
}

}  // namespace mcsgm::chain
