#include "mcsgm/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace mcsgm::kernels {

namespace detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scal_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sqnorm_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

double max_abs_dev_scalar(const double* a, double c, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = std::fabs(c - a[i]);
    if (d > m) m = d;
  }
  return m;
}

void matmul_scalar(const double* a, const double* b, double* c, std::size_t n) {
  std::memset(c, 0, n * n * sizeof(double));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double aik = a[i * n + k];
      const double* brow = b + k * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

}  // namespace detail

namespace {

struct Vtable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scal)(double, double*, std::size_t);
  double (*sqnorm)(const double*, std::size_t);
  double (*max_abs_dev)(const double*, double, std::size_t);
  void (*matmul)(const double*, const double*, double*, std::size_t);
};

constexpr Vtable kScalar{detail::dot_scalar,    detail::axpy_scalar,
                         detail::scal_scalar,   detail::sqnorm_scalar,
                         detail::max_abs_dev_scalar, detail::matmul_scalar};

#if defined(MCSGM_HAVE_AVX2_TU)
constexpr Vtable kAvx2{detail::dot_avx2,    detail::axpy_avx2,
                       detail::scal_avx2,   detail::sqnorm_avx2,
                       detail::max_abs_dev_avx2, detail::matmul_avx2};
#endif

std::atomic<const Vtable*> g_vtable{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const Vtable* init_vtable() {
#if defined(MCSGM_HAVE_AVX2_TU)
  if (avx2_supported()) {
    g_backend.store(Backend::avx2, std::memory_order_relaxed);
    return &kAvx2;
  }
#endif
  g_backend.store(Backend::scalar, std::memory_order_relaxed);
  return &kScalar;
}

inline const Vtable* vt() {
  const Vtable* v = g_vtable.load(std::memory_order_acquire);
  if (!v) {
    v = init_vtable();
    g_vtable.store(v, std::memory_order_release);
  }
  return v;
}

}  // namespace

bool avx2_supported() {
#if defined(MCSGM_HAVE_AVX2_TU) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() {
  vt();
  return g_backend.load(std::memory_order_relaxed);
}

void set_backend(Backend b) {
  if (b == Backend::scalar) {
    g_vtable.store(&kScalar, std::memory_order_release);
    g_backend.store(Backend::scalar, std::memory_order_relaxed);
    return;
  }
#if defined(MCSGM_HAVE_AVX2_TU)
  if (avx2_supported()) {
    g_vtable.store(&kAvx2, std::memory_order_release);
    g_backend.store(Backend::avx2, std::memory_order_relaxed);
    return;
  }
#endif
  throw std::invalid_argument("kernels: avx2 backend not available on this machine");
}

double dot(const double* a, const double* b, std::size_t n) { return vt()->dot(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { vt()->axpy(alpha, x, y, n); }
void scal(double alpha, double* x, std::size_t n) { vt()->scal(alpha, x, n); }
double sqnorm(const double* x, std::size_t n) { return vt()->sqnorm(x, n); }
double nrm2(const double* x, std::size_t n) { return std::sqrt(vt()->sqnorm(x, n)); }
double max_abs_dev(const double* a, double c, std::size_t n) { return vt()->max_abs_dev(a, c, n); }
void matmul(const double* a, const double* b, double* c, std::size_t n) { vt()->matmul(a, b, c, n); }

}  // namespace mcsgm::kernels
