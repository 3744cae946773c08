#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Double-precision kernels behind every arithmetic inner loop in the
// library: iterate updates, risk sums, matrix powers. Each kernel has a
// scalar reference implementation and an AVX2+FMA variant; the active
// variant is picked once at runtime from cpuid and can be overridden
// (the equivalence tests pin both and compare).

namespace mcsgm::kernels {

enum class Backend { scalar, avx2 };

bool avx2_supported();
Backend active_backend();
// Throws std::invalid_argument if the requested backend is unavailable.
void set_backend(Backend b);

double dot(const double* a, const double* b, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scal(double alpha, double* x, std::size_t n);
double sqnorm(const double* x, std::size_t n);
double nrm2(const double* x, std::size_t n);
// max_i |c - a[i]|
double max_abs_dev(const double* a, double c, std::size_t n);
// C = A * B, square row-major n x n
void matmul(const double* a, const double* b, double* c, std::size_t n);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  axpy(alpha, x.data(), y.data(), x.size());
}
inline void scal(double alpha, std::span<double> x) { scal(alpha, x.data(), x.size()); }
inline double sqnorm(std::span<const double> x) { return sqnorm(x.data(), x.size()); }
inline double nrm2(std::span<const double> x) { return nrm2(x.data(), x.size()); }

inline double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace detail {
double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void scal_scalar(double alpha, double* x, std::size_t n);
double sqnorm_scalar(const double* x, std::size_t n);
double max_abs_dev_scalar(const double* a, double c, std::size_t n);
void matmul_scalar(const double* a, const double* b, double* c, std::size_t n);

#if defined(MCSGM_HAVE_AVX2_TU)
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void scal_avx2(double alpha, double* x, std::size_t n);
double sqnorm_avx2(const double* x, std::size_t n);
double max_abs_dev_avx2(const double* a, double c, std::size_t n);
void matmul_avx2(const double* a, const double* b, double* c, std::size_t n);
#endif
}  // namespace detail

}  // namespace mcsgm::kernels
