#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mcsgm/kernels.hpp"

namespace mcsgm::optim {

// Feasible set: a centered Euclidean ball or all of R^d.
struct DomainSpec {
  enum class Kind { ball, unconstrained };
  Kind kind = Kind::unconstrained;
  double radius = 0.0;

  static DomainSpec ball(double r) { return {Kind::ball, r}; }
  static DomainSpec unconstrained() { return {Kind::unconstrained, 0.0}; }

  double diameter() const { return kind == Kind::ball ? 2.0 * radius : 0.0; }
  bool is_ball() const { return kind == Kind::ball; }
};

// Radial projection; identity for the unconstrained domain.
inline void project_in_place(const DomainSpec& domain, std::span<double> w) {
  if (domain.kind != DomainSpec::Kind::ball) return;
  double norm = kernels::nrm2(w);
  if (norm > domain.radius) kernels::scal(domain.radius / norm, w);
}

inline std::vector<double> project(const DomainSpec& domain, std::span<const double> w) {
  std::vector<double> out(w.begin(), w.end());
  project_in_place(domain, out);
  return out;
}

}  // namespace mcsgm::optim
