#include "mcsgm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mcsgm/errors.hpp"
#include "mcsgm/kernels.hpp"

namespace mcsgm::losses {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow
double log1pexp(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

void check_dim(const LossFamily& fam, std::span<const double> w, const Example& z) {
  if (w.size() != fam.d || z.x.size() != fam.d)
    throw std::invalid_argument("loss: dimension mismatch");
}

void check_dims(const MinimaxFamily& fam, std::span<const double> w, std::span<const double> v,
                const SaddleExample& z) {
  if (w.size() != fam.d_w || v.size() != fam.d_v || z.a.size() != fam.d_w * fam.d_v ||
      z.b.size() != fam.d_w || z.c.size() != fam.d_v)
    throw std::invalid_argument("minimax: dimension mismatch");
}

// out = A v, A row-major d_w x d_v
void av_into(std::span<const double> a, std::span<const double> v, std::size_t d_w,
             std::size_t d_v, std::span<double> out) {
  for (std::size_t i = 0; i < d_w; ++i) out[i] = kernels::dot(a.data() + i * d_v, v.data(), d_v);
}

// out = A^T w
void atw_into(std::span<const double> a, std::span<const double> w, std::size_t d_w,
              std::size_t d_v, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < d_w; ++i) kernels::axpy(w[i], a.data() + i * d_v, out.data(), d_v);
}

}  // namespace

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::logistic: return "logistic";
    case LossKind::hinge: return "hinge";
    case LossKind::absolute: return "absolute";
    case LossKind::least_squares: return "least-squares";
    case LossKind::sigmoid_sq: return "sigmoid-sq";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "logistic") return LossKind::logistic;
  if (s == "hinge") return LossKind::hinge;
  if (s == "absolute") return LossKind::absolute;
  if (s == "least-squares") return LossKind::least_squares;
  if (s == "sigmoid-sq") return LossKind::sigmoid_sq;
  throw std::invalid_argument("unknown loss kind '" + s + "'");
}

std::string to_string(MinimaxKind k) {
  return k == MinimaxKind::bilinear_saddle ? "bilinear-saddle" : "sc-concave-saddle";
}

MinimaxKind minimax_kind_from_string(const std::string& s) {
  if (s == "bilinear-saddle") return MinimaxKind::bilinear_saddle;
  if (s == "sc-concave-saddle") return MinimaxKind::sc_concave_saddle;
  throw std::invalid_argument("unknown minimax kind '" + s + "'");
}

LossFamily make_loss_family(LossKind kind, std::size_t d, double b_x, double radius, double b_y) {
  if (d == 0 || !(b_x > 0.0) || !(radius > 0.0))
    throw std::invalid_argument("make_loss_family: d, b_x, radius must be positive");
  LossFamily fam;
  fam.kind = kind;
  fam.d = d;
  fam.b_x = b_x;
  fam.b_y = b_y;
  fam.radius = radius;
  switch (kind) {
    case LossKind::logistic:
      fam.g = b_x;
      fam.l = b_x * b_x / 4.0;
      fam.convex = true;
      fam.smooth = true;
      break;
    case LossKind::hinge:
      fam.g = b_x;
      fam.l = std::nullopt;
      fam.convex = true;
      fam.smooth = false;
      break;
    case LossKind::absolute:
      fam.g = b_x;
      fam.l = std::nullopt;
      fam.convex = true;
      fam.smooth = false;
      break;
    case LossKind::least_squares:
      fam.g = b_x * (b_x * radius + b_y);
      fam.l = b_x * b_x;
      fam.convex = true;
      fam.smooth = true;
      break;
    case LossKind::sigmoid_sq:
      // |d/dt (sigma(t)-p)^2| <= 1/2 and |d^2/dt^2| <= 2(1/16 + sqrt(3)/18).
      fam.g = b_x / 2.0;
      fam.l = b_x * b_x * 2.0 * (1.0 / 16.0 + std::sqrt(3.0) / 18.0);
      fam.convex = false;
      fam.smooth = true;
      break;
  }
  return fam;
}

double loss_value(const LossFamily& fam, std::span<const double> w, const Example& z) {
  check_dim(fam, w, z);
  double t = kernels::dot(w.data(), z.x.data(), fam.d);
  switch (fam.kind) {
    case LossKind::logistic: return log1pexp(-z.y * t);
    case LossKind::hinge: return std::max(0.0, 1.0 - z.y * t);
    case LossKind::absolute: return std::fabs(t - z.y);
    case LossKind::least_squares: {
      double r = t - z.y;
      return 0.5 * r * r;
    }
    case LossKind::sigmoid_sq: {
      double p = (z.y + 1.0) / 2.0;
      double r = sigmoid(t) - p;
      return r * r;
    }
  }
  return 0.0;
}

void subgradient_into(const LossFamily& fam, std::span<const double> w, const Example& z,
                      std::span<double> out) {
  check_dim(fam, w, z);
  double t = kernels::dot(w.data(), z.x.data(), fam.d);
  double scale = 0.0;
  switch (fam.kind) {
    case LossKind::logistic:
      scale = -z.y * sigmoid(-z.y * t);
      break;
    case LossKind::hinge:
      // subgradient 0 at the kink y<w,x> = 1 keeps runs reproducible
      scale = (z.y * t < 1.0) ? -z.y : 0.0;
      break;
    case LossKind::absolute:
      scale = (t > z.y) ? 1.0 : (t < z.y ? -1.0 : 0.0);
      break;
    case LossKind::least_squares:
      scale = t - z.y;
      break;
    case LossKind::sigmoid_sq: {
      double p = (z.y + 1.0) / 2.0;
      double s = sigmoid(t);
      scale = 2.0 * (s - p) * s * (1.0 - s);
      break;
    }
  }
  for (std::size_t i = 0; i < fam.d; ++i) out[i] = scale * z.x[i];
}

std::vector<double> subgradient(const LossFamily& fam, std::span<const double> w,
                                const Example& z) {
  std::vector<double> out(fam.d);
  subgradient_into(fam, w, z, out);
  return out;
}

double f_zero_sup(const LossFamily& fam) {
  switch (fam.kind) {
    case LossKind::logistic: return std::log(2.0);
    case LossKind::hinge: return 1.0;  // max(0, 1 - 0)
    case LossKind::absolute: return fam.b_y;
    case LossKind::least_squares: return 0.5 * fam.b_y * fam.b_y;
    case LossKind::sigmoid_sq: return 0.25;  // (sigma(0) - p)^2, p in {0,1}
  }
  return 0.0;
}

double empirical_risk(const LossFamily& fam, const Dataset& s, std::span<const double> w) {
  if (s.n() == 0) throw std::invalid_argument("empirical_risk: empty dataset");
  double sum = 0.0;
  for (const Example& z : s.examples) sum += loss_value(fam, w, z);
  return sum / static_cast<double>(s.n());
}

void empirical_subgradient_into(const LossFamily& fam, const Dataset& s,
                                std::span<const double> w, std::span<double> out) {
  if (s.n() == 0) throw std::invalid_argument("empirical_subgradient: empty dataset");
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> g(fam.d);
  for (const Example& z : s.examples) {
    subgradient_into(fam, w, z, g);
    kernels::axpy(1.0 / static_cast<double>(s.n()), g.data(), out.data(), fam.d);
  }
}

MinimaxFamily make_minimax_family(MinimaxKind kind, std::size_t d_w, std::size_t d_v, double g,
                                  double rho, double radius_w, double radius_v) {
  if (d_w == 0 || d_v == 0 || !(g > 0.0) || !(radius_w > 0.0) || !(radius_v > 0.0))
    throw std::invalid_argument("make_minimax_family: positive dims, G and radii required");
  if (kind == MinimaxKind::bilinear_saddle && rho != 0.0)
    throw std::invalid_argument("make_minimax_family: bilinear family has rho = 0");
  if (kind == MinimaxKind::sc_concave_saddle && !(rho > 0.0))
    throw std::invalid_argument("make_minimax_family: sc-concave family needs rho > 0");
  if (!(g > rho * radius_v))
    throw std::invalid_argument("make_minimax_family: need G > rho * radius_v");
  MinimaxFamily fam;
  fam.kind = kind;
  fam.d_w = d_w;
  fam.d_v = d_v;
  fam.g = g;
  fam.rho = rho;
  fam.radius_w = radius_w;
  fam.radius_v = radius_v;
  // ||A(z)||_2 <= (G - rho r_v)/min(r_w, r_v) under the generator scaling.
  fam.l = (g - rho * radius_v) / std::min(radius_w, radius_v) + rho;
  return fam;
}

double minimax_value(const MinimaxFamily& fam, std::span<const double> w,
                     std::span<const double> v, const SaddleExample& z) {
  check_dims(fam, w, v, z);
  std::vector<double> av(fam.d_w);
  av_into(z.a, v, fam.d_w, fam.d_v, av);
  double value = kernels::dot(w.data(), av.data(), fam.d_w) +
                 kernels::dot(z.b.data(), w.data(), fam.d_w) -
                 kernels::dot(z.c.data(), v.data(), fam.d_v);
  if (fam.rho > 0.0) value -= 0.5 * fam.rho * kernels::sqnorm(v.data(), fam.d_v);
  return value;
}

void minimax_subgrad_w_into(const MinimaxFamily& fam, std::span<const double> w,
                            std::span<const double> v, const SaddleExample& z,
                            std::span<double> out) {
  check_dims(fam, w, v, z);
  av_into(z.a, v, fam.d_w, fam.d_v, out);
  kernels::axpy(1.0, z.b.data(), out.data(), fam.d_w);
}

void minimax_subgrad_v_into(const MinimaxFamily& fam, std::span<const double> w,
                            std::span<const double> v, const SaddleExample& z,
                            std::span<double> out) {
  check_dims(fam, w, v, z);
  atw_into(z.a, w, fam.d_w, fam.d_v, out);
  kernels::axpy(-1.0, z.c.data(), out.data(), fam.d_v);
  if (fam.rho > 0.0) kernels::axpy(-fam.rho, v.data(), out.data(), fam.d_v);
}

std::vector<double> minimax_subgrad_w(const MinimaxFamily& fam, std::span<const double> w,
                                      std::span<const double> v, const SaddleExample& z) {
  std::vector<double> out(fam.d_w);
  minimax_subgrad_w_into(fam, w, v, z, out);
  return out;
}

std::vector<double> minimax_subgrad_v(const MinimaxFamily& fam, std::span<const double> w,
                                      std::span<const double> v, const SaddleExample& z) {
  std::vector<double> out(fam.d_v);
  minimax_subgrad_v_into(fam, w, v, z, out);
  return out;
}

double empirical_minimax_risk(const MinimaxFamily& fam, const SaddleDataset& s,
                              std::span<const double> w, std::span<const double> v) {
  if (s.n() == 0) throw std::invalid_argument("empirical_minimax_risk: empty dataset");
  double sum = 0.0;
  for (const SaddleExample& z : s.examples) sum += minimax_value(fam, w, v, z);
  return sum / static_cast<double>(s.n());
}

SaddleCoefficients mean_coefficients(const SaddleDataset& s, std::size_t d_w, std::size_t d_v) {
  if (s.n() == 0) throw std::invalid_argument("mean_coefficients: empty dataset");
  SaddleCoefficients m;
  m.d_w = d_w;
  m.d_v = d_v;
  m.a.assign(d_w * d_v, 0.0);
  m.b.assign(d_w, 0.0);
  m.c.assign(d_v, 0.0);
  double inv = 1.0 / static_cast<double>(s.n());
  for (const SaddleExample& z : s.examples) {
    kernels::axpy(inv, z.a.data(), m.a.data(), d_w * d_v);
    kernels::axpy(inv, z.b.data(), m.b.data(), d_w);
    kernels::axpy(inv, z.c.data(), m.c.data(), d_v);
  }
  return m;
}

double coeff_value(const SaddleCoefficients& m, double rho, std::span<const double> w,
                   std::span<const double> v) {
  std::vector<double> av(m.d_w);
  av_into(m.a, v, m.d_w, m.d_v, av);
  double value = kernels::dot(w.data(), av.data(), m.d_w) +
                 kernels::dot(m.b.data(), w.data(), m.d_w) -
                 kernels::dot(m.c.data(), v.data(), m.d_v);
  if (rho > 0.0) value -= 0.5 * rho * kernels::sqnorm(v.data(), m.d_v);
  return value;
}

// ---- Generators -----------------------------------------------------------

Generator make_classification_generator(std::size_t d, double b_x, double p_noise,
                                        std::uint64_t w_true_seed) {
  if (d == 0 || !(b_x > 0.0) || p_noise < 0.0 || p_noise > 1.0)
    throw std::invalid_argument("make_classification_generator: bad parameters");
  Generator gen;
  gen.kind = "classification";
  gen.d = d;
  gen.b_x = b_x;
  gen.p_noise = p_noise;
  gen.w_true_seed = w_true_seed;
  Rng rng(w_true_seed);
  gen.w_true = rng.sphere(d, 1.0);
  return gen;
}

Generator make_fixed_generator(Example z) {
  Generator gen;
  gen.kind = "fixed";
  gen.d = z.x.size();
  gen.b_x = kernels::nrm2(z.x.data(), z.x.size());
  gen.fixed = std::move(z);
  return gen;
}

Example draw_example(const Generator& gen, Rng& rng) {
  if (gen.kind == "fixed") return gen.fixed;
  Example z;
  z.x = rng.sphere(gen.d, gen.b_x);
  double margin = kernels::dot(gen.w_true.data(), z.x.data(), gen.d);
  z.y = margin >= 0.0 ? 1.0 : -1.0;
  if (gen.p_noise > 0.0 && rng.uniform() < gen.p_noise) z.y = -z.y;
  return z;
}

Dataset generate_dataset(const Generator& gen, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("generate_dataset: n must be positive");
  Dataset s;
  s.generator_id = gen.kind;
  s.seed = seed;
  s.examples.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) s.examples.push_back(draw_example(gen, rng));
  return s;
}

SaddleGenerator make_saddle_generator(const MinimaxFamily& fam, double a_offset) {
  SaddleGenerator gen;
  gen.d_w = fam.d_w;
  gen.d_v = fam.d_v;
  gen.g = fam.g;
  gen.rho = fam.rho;
  gen.radius_w = fam.radius_w;
  gen.radius_v = fam.radius_v;
  gen.a_offset = a_offset;
  return gen;
}

SaddleGenerator make_fixed_saddle_generator(SaddleExample z) {
  SaddleGenerator gen;
  gen.fixed = true;
  gen.fixed_z = std::move(z);
  return gen;
}

SaddleExample draw_saddle_example(const SaddleGenerator& gen, Rng& rng) {
  if (gen.fixed) return gen.fixed_z;
  SaddleExample z;
  z.a.resize(gen.d_w * gen.d_v);
  z.b.resize(gen.d_w);
  z.c.resize(gen.d_v);
  for (double& e : z.a) e = rng.uniform(-1.0, 1.0);
  for (double& e : z.b) e = rng.uniform(-1.0, 1.0);
  for (double& e : z.c) e = rng.uniform(-1.0, 1.0);
  if (gen.a_offset != 0.0)
    for (std::size_t i = 0; i < std::min(gen.d_w, gen.d_v); ++i)
      z.a[i * gen.d_v + i] += gen.a_offset;
  // Scale so the per-sample gradients respect the family G on W x V.
  double fa = kernels::nrm2(z.a.data(), z.a.size());
  double nb = kernels::nrm2(z.b.data(), z.b.size());
  double nc = kernels::nrm2(z.c.data(), z.c.size());
  double denom = std::max(fa * gen.radius_v + nb, fa * gen.radius_w + nc);
  double budget = gen.g - gen.rho * gen.radius_v;
  double s = denom > 0.0 ? budget / denom : 0.0;
  kernels::scal(s, z.a.data(), z.a.size());
  kernels::scal(s, z.b.data(), z.b.size());
  kernels::scal(s, z.c.data(), z.c.size());
  return z;
}

SaddleDataset generate_saddle_dataset(const SaddleGenerator& gen, std::size_t n,
                                      std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("generate_saddle_dataset: n must be positive");
  SaddleDataset s;
  s.generator_id = gen.fixed ? "fixed-saddle" : "saddle";
  s.seed = seed;
  s.examples.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) s.examples.push_back(draw_saddle_example(gen, rng));
  return s;
}

std::pair<double, double> population_risk_mc(const LossFamily& fam, const Generator& gen,
                                             std::span<const double> w, std::size_t n_draws,
                                             std::uint64_t seed) {
  if (n_draws < 2) throw std::invalid_argument("population_risk_mc: N >= 2 required");
  Rng rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    double v = loss_value(fam, w, draw_example(gen, rng));
    sum += v;
    sum_sq += v * v;
  }
  double mean = sum / static_cast<double>(n_draws);
  double var = std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(n_draws - 1));
  return {mean, std::sqrt(var / static_cast<double>(n_draws))};
}

std::pair<double, double> population_minimax_risk_mc(const MinimaxFamily& fam,
                                                     const SaddleGenerator& gen,
                                                     std::span<const double> w,
                                                     std::span<const double> v,
                                                     std::size_t n_draws, std::uint64_t seed) {
  if (n_draws < 2) throw std::invalid_argument("population_minimax_risk_mc: N >= 2 required");
  Rng rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    double val = minimax_value(fam, w, v, draw_saddle_example(gen, rng));
    sum += val;
    sum_sq += val * val;
  }
  double mean = sum / static_cast<double>(n_draws);
  double var = std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(n_draws - 1));
  return {mean, std::sqrt(var / static_cast<double>(n_draws))};
}

// ---- Reference solvers ----------------------------------------------------

namespace {

ErmSolution erm_oracle_smooth(const LossFamily& fam, const Dataset& s,
                              const optim::DomainSpec& domain, std::size_t budget) {
  const std::size_t d = fam.d;
  const double step = 1.0 / *fam.l;
  std::vector<double> w(d, 0.0), y(d, 0.0), w_prev(d, 0.0), grad(d);
  std::vector<double> best_w(d, 0.0);
  double best_val = empirical_risk(fam, s, w);
  double t_momentum = 1.0;
  for (std::size_t it = 0; it < budget; ++it) {
    empirical_subgradient_into(fam, s, y, grad);
    w_prev = w;
    w = y;
    kernels::axpy(-step, grad.data(), w.data(), d);
    optim::project_in_place(domain, w);
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    double beta = (t_momentum - 1.0) / t_next;
    for (std::size_t i = 0; i < d; ++i) y[i] = w[i] + beta * (w[i] - w_prev[i]);
    t_momentum = t_next;
    double move = kernels::dist2(std::span<const double>(w), std::span<const double>(w_prev));
    if ((it & 63) == 0 || move < 1e-28) {
      double val = empirical_risk(fam, s, w);
      if (val < best_val) {
        best_val = val;
        best_w = w;
      }
      if (move < 1e-28) break;
    }
  }
  double final_val = empirical_risk(fam, s, w);
  if (final_val < best_val) {
    best_val = final_val;
    best_w = w;
  }
  return {std::move(best_w), best_val};
}

ErmSolution erm_oracle_subgradient(const LossFamily& fam, const Dataset& s,
                                   const optim::DomainSpec& domain, std::size_t budget) {
  const std::size_t d = fam.d;
  double scale = domain.is_ball() ? domain.radius : 1.0;
  const double c = scale / std::max(fam.g, 1e-12);
  std::vector<double> w(d, 0.0), grad(d);

  struct Window {
    std::vector<double> sum;
    std::size_t count = 0;
  };
  std::vector<Window> windows;
  windows.push_back({std::vector<double>(d, 0.0), 0});

  std::vector<double> best_w = w;
  double best_val = empirical_risk(fam, s, w);

  for (std::size_t t = 1; t <= budget; ++t) {
    empirical_subgradient_into(fam, s, w, grad);
    kernels::axpy(-c / std::sqrt(static_cast<double>(t)), grad.data(), w.data(), d);
    optim::project_in_place(domain, w);
    if ((t & (t - 1)) == 0) windows.push_back({std::vector<double>(d, 0.0), 0});
    for (Window& win : windows) {
      kernels::axpy(1.0, w.data(), win.sum.data(), d);
      win.count++;
    }
    double val = empirical_risk(fam, s, w);
    if (val < best_val) {
      best_val = val;
      best_w = w;
    }
  }
  // Suffix averages are the main candidates; the kink tie-break makes exact
  // minimizers absorbing, so the best visited iterate is kept as well.
  std::vector<double> avg(d);
  for (const Window& win : windows) {
    if (win.count == 0) continue;
    avg = win.sum;
    kernels::scal(1.0 / static_cast<double>(win.count), avg.data(), d);
    double val = empirical_risk(fam, s, avg);
    if (val < best_val) {
      best_val = val;
      best_w = avg;
    }
  }
  return {std::move(best_w), best_val};
}

}  // namespace

ErmSolution erm_oracle(const LossFamily& fam, const Dataset& s, const optim::DomainSpec& domain,
                       std::size_t budget) {
  if (!fam.convex) throw UnsupportedFamilyError("erm_oracle: requires a convex family");
  if (s.n() == 0) throw std::invalid_argument("erm_oracle: empty dataset");
  if (fam.smooth && fam.l) return erm_oracle_smooth(fam, s, domain, budget);
  return erm_oracle_subgradient(fam, s, domain, budget);
}

SaddleSolution saddle_oracle(const MinimaxFamily& fam, const SaddleDataset& s,
                             const optim::DomainSpec& w_domain,
                             const optim::DomainSpec& v_domain, std::size_t budget) {
  if (s.n() == 0) throw std::invalid_argument("saddle_oracle: empty dataset");
  const std::size_t d_w = fam.d_w, d_v = fam.d_v;
  SaddleCoefficients m = mean_coefficients(s, d_w, d_v);
  double l_emp = kernels::nrm2(m.a.data(), m.a.size()) + fam.rho;
  double step = 0.4 / std::max(l_emp, 1e-9);

  std::vector<double> w(d_w, 0.0), v(d_v, 0.0);
  std::vector<double> wh(d_w), vh(d_v), gw(d_w), gv(d_v);
  std::vector<double> w_sum(d_w, 0.0), v_sum(d_v, 0.0);
  std::vector<double> w_avg(d_w, 0.0), v_avg(d_v, 0.0);
  const double tol = 1e-4;

  auto grad_w = [&](std::span<const double> vv, std::span<double> out) {
    av_into(m.a, vv, d_w, d_v, out);
    kernels::axpy(1.0, m.b.data(), out.data(), d_w);
  };
  auto grad_v = [&](std::span<const double> ww, std::span<const double> vv,
                    std::span<double> out) {
    atw_into(m.a, ww, d_w, d_v, out);
    kernels::axpy(-1.0, m.c.data(), out.data(), d_v);
    if (fam.rho > 0.0) kernels::axpy(-fam.rho, vv.data(), out.data(), d_v);
  };

  double gap = 0.0;
  std::size_t steps = 0;
  for (std::size_t it = 1; it <= budget; ++it) {
    // extragradient: probe step, then update from the probe's gradients
    grad_w(v, gw);
    grad_v(w, v, gv);
    wh = w;
    vh = v;
    kernels::axpy(-step, gw.data(), wh.data(), d_w);
    kernels::axpy(step, gv.data(), vh.data(), d_v);
    optim::project_in_place(w_domain, wh);
    optim::project_in_place(v_domain, vh);
    grad_w(vh, gw);
    grad_v(wh, vh, gv);
    kernels::axpy(-step, gw.data(), w.data(), d_w);
    kernels::axpy(step, gv.data(), v.data(), d_v);
    optim::project_in_place(w_domain, w);
    optim::project_in_place(v_domain, v);
    kernels::axpy(1.0, w.data(), w_sum.data(), d_w);
    kernels::axpy(1.0, v.data(), v_sum.data(), d_v);
    ++steps;
    if ((it & 255) == 0 || it == budget) {
      w_avg = w_sum;
      v_avg = v_sum;
      kernels::scal(1.0 / static_cast<double>(steps), w_avg.data(), d_w);
      kernels::scal(1.0 / static_cast<double>(steps), v_avg.data(), d_v);
      double hi = best_response_v(fam, s, w_avg, v_domain).value;
      double lo = best_response_w_min(fam, s, v_avg, w_domain);
      gap = hi - lo;
      if (gap <= 0.5 * tol) break;
    }
  }
  if (gap > tol)
    throw OracleNotConvergedError("saddle_oracle: pd gap " + std::to_string(gap) +
                                  " above tolerance after budget");
  return {std::move(w_avg), std::move(v_avg), gap};
}

BestResponse best_response_v(const MinimaxFamily& fam, const SaddleDataset& s,
                             std::span<const double> w, const optim::DomainSpec& v_domain) {
  SaddleCoefficients m = mean_coefficients(s, fam.d_w, fam.d_v);
  std::vector<double> g(fam.d_v);
  atw_into(m.a, w, fam.d_w, fam.d_v, g);
  kernels::axpy(-1.0, m.c.data(), g.data(), fam.d_v);
  double gn = kernels::nrm2(g.data(), fam.d_v);

  BestResponse out;
  out.v.assign(fam.d_v, 0.0);
  if (fam.rho > 0.0) {
    double len = gn / fam.rho;
    if (v_domain.is_ball()) len = std::min(len, v_domain.radius);
    if (gn > 0.0) {
      out.v = {g.begin(), g.end()};
      kernels::scal(len / gn, out.v.data(), fam.d_v);
    }
  } else {
    if (!v_domain.is_ball())
      throw std::invalid_argument("best_response_v: bilinear needs a bounded V");
    if (gn > 0.0) {
      out.v = {g.begin(), g.end()};
      kernels::scal(v_domain.radius / gn, out.v.data(), fam.d_v);
    }
  }
  out.value = coeff_value(m, fam.rho, w, out.v);
  return out;
}

double best_response_w_min(const MinimaxFamily& fam, const SaddleDataset& s,
                           std::span<const double> v, const optim::DomainSpec& w_domain) {
  SaddleCoefficients m = mean_coefficients(s, fam.d_w, fam.d_v);
  std::vector<double> h(fam.d_w);
  av_into(m.a, v, fam.d_w, fam.d_v, h);
  kernels::axpy(1.0, m.b.data(), h.data(), fam.d_w);
  double hn = kernels::nrm2(h.data(), fam.d_w);
  std::vector<double> w(fam.d_w, 0.0);
  if (hn > 0.0) {
    if (!w_domain.is_ball())
      throw std::invalid_argument("best_response_w_min: needs a bounded W");
    w = {h.begin(), h.end()};
    kernels::scal(-w_domain.radius / hn, w.data(), fam.d_w);
  }
  return coeff_value(m, fam.rho, w, v);
}

// ---- Serialization --------------------------------------------------------

void to_json(nlohmann::json& j, const Generator& gen) {
  j = nlohmann::json{{"kind", gen.kind},
                     {"d", gen.d},
                     {"B_x", gen.b_x},
                     {"p_noise", gen.p_noise},
                     {"w_true_seed", gen.w_true_seed}};
  if (gen.kind == "fixed") {
    j["x"] = gen.fixed.x;
    j["y"] = gen.fixed.y;
  }
}

void from_json(const nlohmann::json& j, Generator& gen) {
  std::string kind = j.value("kind", "classification");
  if (kind == "fixed") {
    Example z;
    z.x = j.at("x").get<std::vector<double>>();
    z.y = j.at("y").get<double>();
    gen = make_fixed_generator(std::move(z));
    return;
  }
  gen = make_classification_generator(j.value("d", std::size_t{1}), j.value("B_x", 1.0),
                                      j.value("p_noise", 0.0),
                                      j.value("w_true_seed", std::uint64_t{0}));
}

void to_json(nlohmann::json& j, const SaddleGenerator& gen) {
  j = nlohmann::json{{"kind", gen.fixed ? "fixed-saddle" : "saddle"},
                     {"d_w", gen.d_w},
                     {"d_v", gen.d_v},
                     {"G", gen.g},
                     {"rho", gen.rho},
                     {"radius_w", gen.radius_w},
                     {"radius_v", gen.radius_v},
                     {"a_offset", gen.a_offset}};
  if (gen.fixed) {
    j["A"] = gen.fixed_z.a;
    j["b"] = gen.fixed_z.b;
    j["c"] = gen.fixed_z.c;
  }
}

void from_json(const nlohmann::json& j, SaddleGenerator& gen) {
  if (j.value("kind", "saddle") == "fixed-saddle") {
    SaddleExample z;
    z.a = j.at("A").get<std::vector<double>>();
    z.b = j.at("b").get<std::vector<double>>();
    z.c = j.at("c").get<std::vector<double>>();
    gen = make_fixed_saddle_generator(std::move(z));
    gen.d_w = j.value("d_w", z.b.size());
    gen.d_v = j.value("d_v", z.c.size());
    return;
  }
  gen = SaddleGenerator{};
  gen.d_w = j.value("d_w", std::size_t{1});
  gen.d_v = j.value("d_v", std::size_t{1});
  gen.g = j.value("G", 1.0);
  gen.rho = j.value("rho", 0.0);
  gen.radius_w = j.value("radius_w", 1.0);
  gen.radius_v = j.value("radius_v", 1.0);
  gen.a_offset = j.value("a_offset", 0.0);
}

void write_dataset_delimited(const Dataset& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_delimited: cannot open " + path);
  out.precision(17);
  for (const Example& z : s.examples) {
    for (double xi : z.x) out << xi << ',';
    out << z.y << '\n';
  }
}

}  // namespace mcsgm::losses
