#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace mcsgm::chain {

// Row-stochastic matrix over states {1..n}; row i is the distribution of the
// next state given the current state i.
struct TransitionMatrix {
  std::size_t n = 0;
  std::vector<double> rows;  // row-major, n*n

  double at(std::size_t i, std::size_t j) const { return rows[i * n + j]; }
  std::span<const double> row(std::size_t i) const { return {rows.data() + i * n, n}; }

  // Entries nonnegative, every row sums to 1 within 1e-12.
  void validate() const;
  bool is_symmetric(double tol = 1e-12) const;
};

struct ChainSpectrum {
  std::size_t n = 0;
  std::vector<std::complex<double>> eigenvalues;  // descending magnitude
  double lambda = 0.0;                            // (max{|l2|,|ln|}+1)/2
  std::vector<double> stationary;
  bool symmetric = false;
  std::optional<double> c_p;  // absent when not computable
  std::size_t k_p = 0;        // 0 whenever P is diagonalizable
};

struct ChainPath {
  std::vector<std::uint32_t> indices;  // 1-based states in [1, n]
  std::uint64_t seed = 0;
  std::vector<double> initial_distribution;
};

TransitionMatrix build_uniform(std::size_t n);
TransitionMatrix build_lazy_cycle(std::size_t n);
// alpha * uniform + (1-alpha) * (Pi + Pi^T)/2 for a seeded random
// permutation Pi; symmetric, doubly stochastic, ergodic for alpha in (0,1].
TransitionMatrix build_random_symmetric(std::size_t n, double alpha, std::uint64_t seed);

// Full eigendecomposition plus the mixing constants. Throws
// ChainNotMixingError when lambda >= 1 - 1e-12 and UnsupportedMatrixError
// when P is numerically defective (eigenvector condition number > 1e10).
ChainSpectrum analyze(const TransitionMatrix& p);

// max_{i,i'} |1/n - [P^j]_{i,i'}| (entrywise reading of the mixing bound).
double deviation(const TransitionMatrix& p, std::size_t j);
// Secondary diagnostic: max-row-sum (operator infinity) norm of 1/n - P^j.
double deviation_opnorm(const TransitionMatrix& p, std::size_t j);
// deviation(p, j) for all j in 0..j_max via incremental powers.
std::vector<double> deviation_scan(const TransitionMatrix& p, std::size_t j_max);

// n^{3/2} for symmetric chains, else C_P; throws UnsupportedMatrixError when
// neither is available.
double effective_constant(const ChainSpectrum& spec);

// Smallest j >= 0 with c_eff * lambda^j <= eps.
std::size_t mixing_time_to(const ChainSpectrum& spec, double eps);

// Per-step look-back horizons k_1..k_T:
//   k_j = min{ max{ ceil(log(2 c_eff D n j) / log(1/lambda)), K_P }, j }.
std::vector<std::size_t> k_schedule(const ChainSpectrum& spec, double d_const,
                                    std::size_t n, std::size_t t_steps);
// Same with j^2 inside the log, the horizon used by the saddle-point bound.
std::vector<std::size_t> k_schedule_squared(const ChainSpectrum& spec, double d_const,
                                            std::size_t n, std::size_t t_steps);

// i_1 ~ initial, i_{t+1} ~ row i_t, one uniform draw per step through the
// row's inverse CDF; identical (P, T, initial, seed) give identical paths.
ChainPath sample_path(const TransitionMatrix& p, std::size_t t_steps,
                      std::span<const double> initial, std::uint64_t seed);

// Convenience: uniform initial distribution.
ChainPath sample_path_uniform_start(const TransitionMatrix& p, std::size_t t_steps,
                                    std::uint64_t seed);

// Serializable chain description: {kind, n, alpha, seed} or an explicit
// row-major matrix.
struct ChainConfig {
  std::string kind = "uniform";  // uniform | lazy_cycle | random_symmetric | explicit
  std::size_t n = 0;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> matrix;  // used by kind == "explicit"
};

TransitionMatrix build(const ChainConfig& cfg);
void to_json(nlohmann::json& j, const ChainConfig& cfg);
void from_json(const nlohmann::json& j, ChainConfig& cfg);
nlohmann::json spectrum_record(const ChainSpectrum& spec);

}  // namespace mcsgm::chain
