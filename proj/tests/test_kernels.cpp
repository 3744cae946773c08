#include <doctest.h>

#include <cmath>
#include <vector>

#include "mcsgm/kernels.hpp"
#include "mcsgm/rng.hpp"

using namespace mcsgm;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("scalar reference kernels") {
  kernels::set_backend(kernels::Backend::scalar);
  std::vector<double> a{1.0, 2.0, 3.0}, b{4.0, -5.0, 6.0};
  CHECK(kernels::dot(a.data(), b.data(), 3) == doctest::Approx(1 * 4 - 2 * 5 + 3 * 6));
  CHECK(kernels::sqnorm(a.data(), 3) == doctest::Approx(14.0));
  CHECK(kernels::nrm2(a.data(), 3) == doctest::Approx(std::sqrt(14.0)));
  kernels::axpy(2.0, a.data(), b.data(), 3);
  CHECK(b[0] == doctest::Approx(6.0));
  CHECK(b[2] == doctest::Approx(12.0));
  kernels::scal(0.5, b.data(), 3);
  CHECK(b[0] == doctest::Approx(3.0));
  CHECK(kernels::max_abs_dev(a.data(), 2.0, 3) == doctest::Approx(1.0));
}

TEST_CASE("matmul matches hand product") {
  kernels::set_backend(kernels::Backend::scalar);
  // [[1,2],[3,4]] * [[0,1],[1,0]] = [[2,1],[4,3]]
  std::vector<double> a{1, 2, 3, 4}, b{0, 1, 1, 0}, c(4);
  kernels::matmul(a.data(), b.data(), c.data(), 2);
  CHECK(c == std::vector<double>{2, 1, 4, 3});
}

TEST_CASE("simd variants agree with scalar references") {
  if (!kernels::avx2_supported()) {
    MESSAGE("avx2 unavailable; skipping equivalence checks");
    return;
  }
  Rng rng(7);
  // deliberately awkward lengths to exercise the remainder loops
  for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 17u, 63u, 64u, 129u}) {
    std::vector<double> a = random_vec(rng, n), b = random_vec(rng, n);
    double alpha = rng.uniform(-1.5, 1.5);

    kernels::set_backend(kernels::Backend::scalar);
    double dot_s = kernels::dot(a.data(), b.data(), n);
    double sq_s = kernels::sqnorm(a.data(), n);
    double dev_s = kernels::max_abs_dev(a.data(), 0.25, n);
    std::vector<double> y_s = b;
    kernels::axpy(alpha, a.data(), y_s.data(), n);

    kernels::set_backend(kernels::Backend::avx2);
    double dot_v = kernels::dot(a.data(), b.data(), n);
    double sq_v = kernels::sqnorm(a.data(), n);
    double dev_v = kernels::max_abs_dev(a.data(), 0.25, n);
    std::vector<double> y_v = b;
    kernels::axpy(alpha, a.data(), y_v.data(), n);

    CHECK(dot_v == doctest::Approx(dot_s).epsilon(1e-13));
    CHECK(sq_v == doctest::Approx(sq_s).epsilon(1e-13));
    CHECK(dev_v == dev_s);  // sub/abs/max round identically in both variants
    for (std::size_t i = 0; i < n; ++i) CHECK(y_v[i] == doctest::Approx(y_s[i]).epsilon(1e-13));
  }

  for (std::size_t n : {1u, 2u, 5u, 8u, 13u}) {
    std::vector<double> a = random_vec(rng, n * n), b = random_vec(rng, n * n);
    std::vector<double> c_s(n * n), c_v(n * n);
    kernels::set_backend(kernels::Backend::scalar);
    kernels::matmul(a.data(), b.data(), c_s.data(), n);
    kernels::set_backend(kernels::Backend::avx2);
    kernels::matmul(a.data(), b.data(), c_v.data(), n);
    for (std::size_t i = 0; i < n * n; ++i)
      CHECK(c_v[i] == doctest::Approx(c_s[i]).epsilon(1e-12));
  }
  kernels::set_backend(kernels::avx2_supported() ? kernels::Backend::avx2
                                                 : kernels::Backend::scalar);
}

TEST_CASE("rng streams are deterministic") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng c(42);
  auto p1 = c.permutation(10);
  Rng d(42);
  auto p2 = d.permutation(10);
  CHECK(p1 == p2);
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
}

TEST_CASE("sphere points have the requested norm") {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    auto x = rng.sphere(5, 2.5);
    CHECK(kernels::nrm2(x.data(), x.size()) == doctest::Approx(2.5).epsilon(1e-12));
  }
}
