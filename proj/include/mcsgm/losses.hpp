#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mcsgm/domain.hpp"
#include "mcsgm/rng.hpp"

namespace mcsgm::losses {

struct Example {
  std::vector<double> x;
  double y = 0.0;
};

struct Dataset {
  std::vector<Example> examples;
  std::string generator_id;
  std::uint64_t seed = 0;

  std::size_t n() const { return examples.size(); }
};

enum class LossKind { logistic, hinge, absolute, least_squares, sigmoid_sq };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

// Loss family with its validity constants on the configured domain ball:
// G and L are certified for ||x|| <= b_x, |y| <= b_y, ||w|| <= radius.
struct LossFamily {
  LossKind kind = LossKind::logistic;
  std::size_t d = 1;
  double g = 0.0;
  std::optional<double> l;  // absent for non-smooth families
  bool convex = true;
  bool smooth = true;
  double b_x = 1.0;
  double b_y = 1.0;
  double radius = 1.0;
};

LossFamily make_loss_family(LossKind kind, std::size_t d, double b_x, double radius,
                            double b_y = 1.0);

double loss_value(const LossFamily& fam, std::span<const double> w, const Example& z);
void subgradient_into(const LossFamily& fam, std::span<const double> w, const Example& z,
                      std::span<double> out);
std::vector<double> subgradient(const LossFamily& fam, std::span<const double> w,
                                const Example& z);

// sup_z f(0; z) over the family's label/feature bounds.
double f_zero_sup(const LossFamily& fam);

double empirical_risk(const LossFamily& fam, const Dataset& s, std::span<const double> w);
// Full-batch subgradient of the empirical risk.
void empirical_subgradient_into(const LossFamily& fam, const Dataset& s,
                                std::span<const double> w, std::span<double> out);

// ---- Minimax families -----------------------------------------------------

// One saddle sample: f(w,v;z) = <w, A v> + <b, w> - <c, v> (- rho/2 ||v||^2).
struct SaddleExample {
  std::vector<double> a;  // row-major d_w x d_v
  std::vector<double> b;
  std::vector<double> c;
};

struct SaddleDataset {
  std::vector<SaddleExample> examples;
  std::string generator_id;
  std::uint64_t seed = 0;

  std::size_t n() const { return examples.size(); }
};

enum class MinimaxKind { bilinear_saddle, sc_concave_saddle };

std::string to_string(MinimaxKind k);
MinimaxKind minimax_kind_from_string(const std::string& s);

struct MinimaxFamily {
  MinimaxKind kind = MinimaxKind::bilinear_saddle;
  std::size_t d_w = 1;
  std::size_t d_v = 1;
  double g = 1.0;
  double l = 1.0;
  double rho = 0.0;  // strong concavity of v -> F(w, v); 0 for bilinear
  double radius_w = 1.0;
  double radius_v = 1.0;
};

MinimaxFamily make_minimax_family(MinimaxKind kind, std::size_t d_w, std::size_t d_v,
                                  double g, double rho, double radius_w, double radius_v);

double minimax_value(const MinimaxFamily& fam, std::span<const double> w,
                     std::span<const double> v, const SaddleExample& z);
void minimax_subgrad_w_into(const MinimaxFamily& fam, std::span<const double> w,
                            std::span<const double> v, const SaddleExample& z,
                            std::span<double> out);
void minimax_subgrad_v_into(const MinimaxFamily& fam, std::span<const double> w,
                            std::span<const double> v, const SaddleExample& z,
                            std::span<double> out);
std::vector<double> minimax_subgrad_w(const MinimaxFamily& fam, std::span<const double> w,
                                      std::span<const double> v, const SaddleExample& z);
std::vector<double> minimax_subgrad_v(const MinimaxFamily& fam, std::span<const double> w,
                                      std::span<const double> v, const SaddleExample& z);

double empirical_minimax_risk(const MinimaxFamily& fam, const SaddleDataset& s,
                              std::span<const double> w, std::span<const double> v);

// Mean saddle coefficients of a dataset; F_S(w,v) = <w, A v> + <b, w> - <c, v>
// - rho/2 ||v||^2 with these means, since f is affine in (A, b, c).
struct SaddleCoefficients {
  std::size_t d_w = 0;
  std::size_t d_v = 0;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;
};

SaddleCoefficients mean_coefficients(const SaddleDataset& s, std::size_t d_w, std::size_t d_v);
double coeff_value(const SaddleCoefficients& m, double rho, std::span<const double> w,
                   std::span<const double> v);

// ---- Generators -----------------------------------------------------------

// ERM example generator: x uniform on the radius-b_x sphere, y the sign of
// <w_true, x> flipped with probability p_noise. kind == "fixed" always emits
// the stored example.
struct Generator {
  std::string kind = "classification";  // classification | fixed
  std::size_t d = 1;
  double b_x = 1.0;
  double p_noise = 0.0;
  std::uint64_t w_true_seed = 0;
  std::vector<double> w_true;  // resolved unit direction
  Example fixed;
};

Generator make_classification_generator(std::size_t d, double b_x, double p_noise,
                                        std::uint64_t w_true_seed);
Generator make_fixed_generator(Example z);

Example draw_example(const Generator& gen, Rng& rng);
Dataset generate_dataset(const Generator& gen, std::size_t n, std::uint64_t seed);

// Saddle data generator: entries of A(z), b(z), c(z) uniform in [-1,1]
// (A shifted by a_offset on the diagonal), then the whole example scaled so
// the family G holds on the configured W x V.
struct SaddleGenerator {
  std::size_t d_w = 1;
  std::size_t d_v = 1;
  double g = 1.0;
  double rho = 0.0;
  double radius_w = 1.0;
  double radius_v = 1.0;
  double a_offset = 0.0;
  bool fixed = false;
  SaddleExample fixed_z;
};

SaddleGenerator make_saddle_generator(const MinimaxFamily& fam, double a_offset = 0.0);
SaddleGenerator make_fixed_saddle_generator(SaddleExample z);

SaddleExample draw_saddle_example(const SaddleGenerator& gen, Rng& rng);
SaddleDataset generate_saddle_dataset(const SaddleGenerator& gen, std::size_t n,
                                      std::uint64_t seed);

// Monte-Carlo population risk over fresh draws: (estimate, standard error).
std::pair<double, double> population_risk_mc(const LossFamily& fam, const Generator& gen,
                                             std::span<const double> w, std::size_t n_draws,
                                             std::uint64_t seed);
std::pair<double, double> population_minimax_risk_mc(const MinimaxFamily& fam,
                                                     const SaddleGenerator& gen,
                                                     std::span<const double> w,
                                                     std::span<const double> v,
                                                     std::size_t n_draws, std::uint64_t seed);

// ---- Reference solvers ----------------------------------------------------

struct ErmSolution {
  std::vector<double> w;
  double value = 0.0;
};

// Full-batch reference minimizer of F_S over the domain. Smooth families run
// accelerated projected gradient descent; non-smooth ones run projected
// subgradient steps c/sqrt(t) and return the best candidate among suffix
// averages and evaluated iterates.
ErmSolution erm_oracle(const LossFamily& fam, const Dataset& s, const optim::DomainSpec& domain,
                       std::size_t budget = 100000);

struct SaddleSolution {
  std::vector<double> w;
  std::vector<double> v;
  double pd_gap = 0.0;
};

// Full-batch extragradient with averaging; requires the returned pair's
// empirical primal-dual gap to reach 1e-4, else OracleNotConvergedError.
SaddleSolution saddle_oracle(const MinimaxFamily& fam, const SaddleDataset& s,
                             const optim::DomainSpec& w_domain,
                             const optim::DomainSpec& v_domain, std::size_t budget = 200000);

struct BestResponse {
  std::vector<double> v;
  double value = 0.0;
};

// Closed-form max_v F_S(w, v) over the centered ball V (exact: the objective
// is linear plus an isotropic quadratic in v).
BestResponse best_response_v(const MinimaxFamily& fam, const SaddleDataset& s,
                             std::span<const double> w, const optim::DomainSpec& v_domain);

// Closed-form min_w F_S(w, v) over the centered ball W (linear in w).
double best_response_w_min(const MinimaxFamily& fam, const SaddleDataset& s,
                           std::span<const double> v, const optim::DomainSpec& w_domain);

// ---- Serialization --------------------------------------------------------

void to_json(nlohmann::json& j, const Generator& gen);
void from_json(const nlohmann::json& j, Generator& gen);
void to_json(nlohmann::json& j, const SaddleGenerator& gen);
void from_json(const nlohmann::json& j, SaddleGenerator& gen);
// One example per line, features then label.
void write_dataset_delimited(const Dataset& s, const std::string& path);

}  // namespace mcsgm::losses
