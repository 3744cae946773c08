#include <doctest.h>

#include <cmath>
#include <vector>

#include "mcsgm/chain.hpp"
#include "mcsgm/errors.hpp"
#include "mcsgm/kernels.hpp"
#include "mcsgm/losses.hpp"
#include "mcsgm/optim.hpp"
#include "mcsgm/risk_stability.hpp"
#include "mcsgm/rng.hpp"
#include "mcsgm/theory_bounds.hpp"

using namespace mcsgm;
using losses::Example;
using losses::LossKind;
using losses::MinimaxKind;
using optim::DomainSpec;
using optim::StepSchedule;
namespace rs = risk_stability;

namespace {

chain::ChainPath path_of(std::vector<std::uint32_t> indices) {
  chain::ChainPath p;
  p.indices = std::move(indices);
  return p;
}

chain::ChainConfig sym_chain(std::size_t n, std::uint64_t seed = 7) {
  chain::ChainConfig cfg;
  cfg.kind = "random_symmetric";
  cfg.n = n;
  cfg.alpha = 0.5;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("twin runs with an identical replacement coincide bit for bit") {
  losses::LossFamily logi = losses::make_loss_family(LossKind::logistic, 3, 1.0, 5.0);
  losses::Generator gen = losses::make_classification_generator(3, 1.0, 0.2, 5);
  losses::Dataset s = losses::generate_dataset(gen, 10, 3);
  chain::TransitionMatrix p = chain::build_random_symmetric(10, 0.5, 2);
  chain::ChainPath path = chain::sample_path_uniform_start(p, 300, 11);
  std::vector<double> w0(3, 0.0);
  rs::NeighborSpec nb{4, s.examples[3]};
  rs::TwinResult tw = rs::twin_sgd(logi, s, nb, path, StepSchedule::constant(0.05), w0,
                                   DomainSpec::ball(5.0));
  CHECK(tw.distance == 0.0);
  CHECK(tw.averaged_s == tw.averaged_neighbor);
}

TEST_CASE("twin run hand simulation on the absolute loss") {
  losses::LossFamily abs = losses::make_loss_family(LossKind::absolute, 1, 1.0, 5.0);
  losses::Dataset s;
  s.examples = {Example{{1.0}, 0.0}};
  rs::NeighborSpec nb{1, Example{{1.0}, 2.0}};
  chain::ChainPath path = path_of({1});
  std::vector<double> w0{1.0};
  rs::TwinResult tw = rs::twin_sgd(abs, s, nb, path, StepSchedule::constant(0.5), w0,
                                   DomainSpec::unconstrained());
  CHECK(tw.averaged_s[0] == doctest::Approx(0.5));
  CHECK(tw.averaged_neighbor[0] == doctest::Approx(1.5));
  CHECK(tw.distance == doctest::Approx(1.0));

  // zero step: no divergence regardless of the replacement
  rs::TwinResult frozen = rs::twin_sgd(abs, s, nb, path, StepSchedule::constant(0.0), w0,
                                       DomainSpec::unconstrained());
  CHECK(frozen.distance == 0.0);
}

TEST_CASE("sgd stability estimate: degenerate and scaling behavior") {
  losses::LossFamily logi = losses::make_loss_family(LossKind::logistic, 3, 1.0, 5.0);
  losses::Generator fixed = losses::make_fixed_generator(Example{{1.0, 0.0, 0.0}, 1.0});
  rs::ReplicateConfig cfg{16, 16, StepSchedule::inv_sqrt_tlogt(), sym_chain(16), 8, 42, 1};
  rs::StabilityEstimate est =
      rs::estimate_stability_sgd(logi, fixed, cfg, DomainSpec::ball(5.0));
  CHECK(est.mean_distance == 0.0);
  CHECK(est.std_error == 0.0);
  CHECK(est.kind == "erm");

  losses::Generator gen = losses::make_classification_generator(3, 1.0, 0.2, 9);
  rs::ReplicateConfig small{32, 32, StepSchedule::inv_sqrt_tlogt(), sym_chain(32), 60, 1, 1};
  rs::ReplicateConfig big{64, 64, StepSchedule::inv_sqrt_tlogt(), sym_chain(64), 60, 1, 1};
  rs::StabilityEstimate e_small =
      rs::estimate_stability_sgd(logi, gen, small, DomainSpec::ball(5.0));
  rs::StabilityEstimate e_big =
      rs::estimate_stability_sgd(logi, gen, big, DomainSpec::ball(5.0));
  for (double d : e_small.distances) CHECK(d >= 0.0);
  // doubling n does not increase the stability estimate (up to noise)
  CHECK(e_small.mean_distance >= e_big.mean_distance - 2.0 * (e_small.std_error + e_big.std_error));

  // Thm 1(a) domination at this configuration
  double eta = StepSchedule::inv_sqrt_tlogt().resolve(32);
  double bound = 2.0 * logi.g * 32.0 * eta / 32.0;
  CHECK(e_small.mean_distance <= bound + 3.0 * e_small.std_error);
}

TEST_CASE("aggregation is independent of the thread count") {
  losses::LossFamily logi = losses::make_loss_family(LossKind::logistic, 3, 1.0, 5.0);
  losses::Generator gen = losses::make_classification_generator(3, 1.0, 0.2, 9);
  rs::ReplicateConfig seq{24, 24, StepSchedule::inv_sqrt_tlogt(), sym_chain(24), 16, 5, 1};
  rs::ReplicateConfig par = seq;
  par.threads = 4;
  rs::StabilityEstimate a = rs::estimate_stability_sgd(logi, gen, seq, DomainSpec::ball(5.0));
  rs::StabilityEstimate b = rs::estimate_stability_sgd(logi, gen, par, DomainSpec::ball(5.0));
  CHECK(a.mean_distance == b.mean_distance);
  CHECK(a.std_error == b.std_error);
  CHECK(a.distances == b.distances);
}

TEST_CASE("sgda stability estimate") {
  losses::MinimaxFamily bi =
      losses::make_minimax_family(MinimaxKind::bilinear_saddle, 2, 2, 1.0, 0.0, 1.0, 1.0);
  losses::SaddleGenerator fixed = losses::make_fixed_saddle_generator(
      losses::SaddleExample{{0.1, 0, 0, 0.1}, {0.2, 0.0}, {0.0, 0.1}});
  fixed.d_w = fixed.d_v = 2;
  rs::ReplicateConfig cfg{16, 16, StepSchedule::inv_sqrt_tlogt(), sym_chain(16), 6, 3, 1};
  rs::StabilityEstimate est = rs::estimate_stability_sgda(bi, fixed, cfg, DomainSpec::ball(1.0),
                                                          DomainSpec::ball(1.0));
  CHECK(est.mean_distance == 0.0);
  CHECK(est.kind == "minimax");

  // when the v-gradient vanishes identically the distance is the w-distance
  losses::SaddleDataset s;
  Rng rng(14);
  for (int i = 0; i < 6; ++i)
    s.examples.push_back(losses::SaddleExample{{0, 0, 0, 0}, {rng.uniform(-1, 1), rng.uniform(-1, 1)}, {0, 0}});
  rs::SaddleNeighborSpec nb{2, losses::SaddleExample{{0, 0, 0, 0}, {1.0, -1.0}, {0, 0}}};
  chain::TransitionMatrix p = chain::build_random_symmetric(6, 0.5, 4);
  chain::ChainPath path = chain::sample_path_uniform_start(p, 50, 8);
  std::vector<double> z2(2, 0.0);
  rs::SaddleTwinResult tw = rs::twin_sgda(bi, s, nb, path, StepSchedule::constant(0.05), z2,
                                          z2, DomainSpec::ball(1.0), DomainSpec::ball(1.0));
  CHECK(tw.v_s == tw.v_neighbor);
  double w_dist = std::sqrt(kernels::dist2(tw.w_s, tw.w_neighbor));
  CHECK(tw.distance == doctest::Approx(w_dist));
}

TEST_CASE("generalization report identities and degenerate cases") {
  losses::LossFamily logi = losses::make_loss_family(LossKind::logistic, 3, 1.0, 5.0);
  losses::Generator gen = losses::make_classification_generator(3, 1.0, 0.2, 10);

  // T = 0: the output never sees the data, so the gap collapses
  rs::ReplicateConfig cfg0{16, 0, StepSchedule::constant(0.1), sym_chain(16), 4, 21, 1};
  rs::RiskReport rep0 =
      rs::generalization_report_sgd(logi, gen, cfg0, DomainSpec::ball(5.0), 200);
  CHECK(rep0.gen_gap == doctest::Approx(0.0));
  CHECK(rep0.gen_gap == rep0.population - rep0.empirical);

  // degenerate generator: population and empirical coincide sample by sample
  losses::Generator fixed = losses::make_fixed_generator(Example{{0.6, 0.0, 0.8}, 1.0});
  rs::ReplicateConfig cfg{8, 8, StepSchedule::inv_sqrt_tlogt(), sym_chain(8), 4, 22, 1};
  rs::RiskReport rep =
      rs::generalization_report_sgd(logi, fixed, cfg, DomainSpec::ball(5.0), 100);
  CHECK(rep.gen_gap == doctest::Approx(0.0));
  CHECK(rep.gen_gap_se == doctest::Approx(0.0));
  CHECK(rep.gen_gap == rep.population - rep.empirical);
}

TEST_CASE("opt gap") {
  losses::LossFamily ls = losses::make_loss_family(LossKind::least_squares, 1, 1.0, 5.0);
  losses::Dataset s;
  s.examples = {Example{{1.0}, 1.0}};
  optim::Trajectory traj;
  traj.averaged = {0.0};
  std::vector<double> comparator{1.0};
  CHECK(rs::opt_gap_sgd(ls, s, traj, comparator) == doctest::Approx(0.5));
  CHECK(rs::opt_gap_sgd(ls, s, traj, traj.averaged) == doctest::Approx(0.0));

  losses::ErmSolution sol = losses::erm_oracle(ls, s, DomainSpec::ball(5.0));
  CHECK(rs::opt_gap_sgd(ls, s, traj, sol.w) >= -1e-6);
}

TEST_CASE("pd gap on hand-evaluated outputs") {
  losses::MinimaxFamily bi =
      losses::make_minimax_family(MinimaxKind::bilinear_saddle, 1, 1, 2.0, 0.0, 1.0, 1.0);
  losses::SaddleDataset s;
  s.examples = {losses::SaddleExample{{1.0}, {0.0}, {0.0}}};  // f = w v
  optim::SaddleTrajectory traj;
  traj.averaged_w = {0.5};
  traj.averaged_v = {-0.5};
  double gap = rs::pd_gap_sgda(bi, s, traj, DomainSpec::ball(1.0), DomainSpec::ball(1.0));
  CHECK(gap == doctest::Approx(1.0));

  traj.averaged_w = {0.0};
  traj.averaged_v = {0.0};
  CHECK(rs::pd_gap_sgda(bi, s, traj, DomainSpec::ball(1.0), DomainSpec::ball(1.0)) ==
        doctest::Approx(0.0));

  // an oracle-grade saddle leaves at most the oracle tolerance
  losses::SaddleSolution sol =
      losses::saddle_oracle(bi, s, DomainSpec::ball(1.0), DomainSpec::ball(1.0));
  traj.averaged_w = sol.w;
  traj.averaged_v = sol.v;
  double g2 = rs::pd_gap_sgda(bi, s, traj, DomainSpec::ball(1.0), DomainSpec::ball(1.0));
  CHECK(g2 >= 0.0);
  CHECK(g2 <= 1e-4);
}

TEST_CASE("weak pd report on the bilinear family") {
  losses::MinimaxFamily bi =
      losses::make_minimax_family(MinimaxKind::bilinear_saddle, 2, 2, 1.0, 0.0, 1.0, 1.0);
  losses::SaddleGenerator gen = losses::make_saddle_generator(bi);
  rs::ReplicateConfig cfg{32, 32, StepSchedule::inv_sqrt_tlogt(), sym_chain(32), 16, 31, 1};
  rs::RiskReport rep = rs::weak_pd_report(bi, gen, cfg, DomainSpec::ball(1.0),
                                          DomainSpec::ball(1.0), 4000);
  // max/min through a common point: both weak PD risks are nonnegative
  CHECK(rep.weak_pd_population >= -1e-12);
  CHECK(rep.weak_pd_empirical >= -1e-12);
  CHECK(rep.weak_pd_gen == doctest::Approx(rep.weak_pd_population - rep.weak_pd_empirical));
}

TEST_CASE("primal report") {
  // zero data: R is identically zero, so every risk and the excess vanish
  losses::MinimaxFamily sc =
      losses::make_minimax_family(MinimaxKind::sc_concave_saddle, 2, 2, 2.0, 1.0, 1.0, 1.0);
  losses::SaddleGenerator zero_gen = losses::make_fixed_saddle_generator(
      losses::SaddleExample{{0, 0, 0, 0}, {0, 0}, {0, 0}});
  zero_gen.d_w = zero_gen.d_v = 2;
  rs::ReplicateConfig cfg{8, 8, StepSchedule::constant(0.05), sym_chain(8), 4, 17, 1};
  rs::RiskReport rep = rs::primal_report(sc, zero_gen, cfg, DomainSpec::ball(1.0),
                                         DomainSpec::ball(1.0), 100);
  CHECK(rep.primal_population == doctest::Approx(0.0));
  CHECK(rep.primal_empirical == doctest::Approx(0.0));
  CHECK(std::fabs(rep.primal_excess) <= 1e-9);

  losses::MinimaxFamily bi =
      losses::make_minimax_family(MinimaxKind::bilinear_saddle, 2, 2, 1.0, 0.0, 1.0, 1.0);
  losses::SaddleGenerator bgen = losses::make_saddle_generator(bi);
  CHECK_THROWS_AS(rs::primal_report(bi, bgen, cfg, DomainSpec::ball(1.0),
                                    DomainSpec::ball(1.0), 100),
                  UnsupportedFamilyError);
}

TEST_CASE("primal value matches a grid search over the dual ball") {
  losses::MinimaxFamily sc =
      losses::make_minimax_family(MinimaxKind::sc_concave_saddle, 2, 1, 2.0, 1.0, 1.0, 1.0);
  losses::SaddleGenerator gen = losses::make_saddle_generator(sc);
  Rng rng(6);
  for (int inst = 0; inst < 20; ++inst) {
    losses::SaddleDataset s = losses::generate_saddle_dataset(gen, 6, rng.next_u64());
    std::vector<double> w = rng.sphere(2, 0.7);
    losses::BestResponse br = losses::best_response_v(sc, s, w, DomainSpec::ball(1.0));
    double best = -1e300;
    for (double v = -1.0; v <= 1.0; v += 2e-6) {
      std::vector<double> vv{v};
      best = std::max(best, losses::empirical_minimax_risk(sc, s, w, vv));
    }
    CHECK(br.value == doctest::Approx(best).epsilon(1e-6));
    // the maximum dominates every sampled dual point
    for (int k = 0; k < 20; ++k) {
      std::vector<double> vv{rng.uniform(-1.0, 1.0)};
      CHECK(br.value >= losses::empirical_minimax_risk(sc, s, w, vv) - 1e-12);
    }
  }
}

TEST_CASE("gradient norm trace") {
  losses::LossFamily ls = losses::make_loss_family(LossKind::least_squares, 1, 1.0, 5.0);
  losses::Dataset s;
  s.examples = {Example{{1.0}, 0.0}};
  chain::ChainPath path = path_of({1, 1, 1});

  // eta = 0 from w0 = 2: F_S(w) = w^2/2 so the squared gradient norm is 4
  optim::Trajectory frozen = optim::mc_sgd(ls, s, path, StepSchedule::constant(0.0),
                                           std::vector<double>{2.0}, DomainSpec::ball(5.0));
  rs::GradNormTrace trace = rs::grad_norm_trace(ls, s, frozen);
  for (double v : trace.sq_norms) CHECK(v == doctest::Approx(4.0));

  // at the stationary point the entry is 0
  optim::Trajectory at_min = optim::mc_sgd(ls, s, path, StepSchedule::constant(0.0),
                                           std::vector<double>{0.0}, DomainSpec::ball(5.0));
  rs::GradNormTrace trace0 = rs::grad_norm_trace(ls, s, at_min);
  for (double v : trace0.sq_norms) CHECK(v == doctest::Approx(0.0));

  // running minimum is nonincreasing on a real run
  losses::LossFamily sq = losses::make_loss_family(LossKind::sigmoid_sq, 3, 1.0, 5.0);
  losses::Generator gen = losses::make_classification_generator(3, 1.0, 0.1, 12);
  losses::Dataset data = losses::generate_dataset(gen, 16, 5);
  chain::TransitionMatrix p = chain::build_random_symmetric(16, 0.5, 3);
  chain::ChainPath long_path = chain::sample_path_uniform_start(p, 800, 2);
  optim::Trajectory traj = optim::mc_sgd(sq, data, long_path, StepSchedule::constant(0.1),
                                         std::vector<double>(3, 0.0), DomainSpec::ball(5.0));
  rs::GradNormTrace t2 = rs::grad_norm_trace(sq, data, traj);
  for (std::size_t k = 1; k < t2.running_min.size(); ++k)
    CHECK(t2.running_min[k] <= t2.running_min[k - 1]);

  losses::LossFamily hinge = losses::make_loss_family(LossKind::hinge, 1, 1.0, 5.0);
  CHECK_THROWS_AS(rs::grad_norm_trace(hinge, s, frozen), UnsupportedFamilyError);
}

TEST_CASE("generalization gap is dominated by G times the stability bound") {
  // Lemma A.4 composition at one desk-scale configuration
  losses::LossFamily logi = losses::make_loss_family(LossKind::logistic, 3, 1.0, 5.0);
  losses::Generator gen = losses::make_classification_generator(3, 1.0, 0.2, 10);
  const std::size_t n = 32;
  rs::ReplicateConfig cfg{n, n, StepSchedule::inv_sqrt_tlogt(), sym_chain(n), 40, 77, 1};
  rs::RiskReport rep = rs::generalization_report_sgd(logi, gen, cfg, DomainSpec::ball(5.0), 2000);
  double eta = StepSchedule::inv_sqrt_tlogt().resolve(n);
  double stab_bound = 2.0 * logi.g * static_cast<double>(n) * eta / static_cast<double>(n);
  CHECK(std::fabs(rep.gen_gap) <= logi.g * stab_bound + 3.0 * rep.gen_gap_se);
}
