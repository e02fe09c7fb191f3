#include "doctest.h"

#include <cmath>

#include "liftlab/error.hpp"
#include "liftlab/gibbs.hpp"
#include "liftlab/mathutil.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace liftlab;

namespace {

EstimatorConfig make_config(std::vector<std::uint64_t> samples, std::uint64_t seed) {
  EstimatorConfig cfg;
  cfg.samples_per_level = std::move(samples);
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("softmax of (0, log 3) is (0.25, 0.75)") {
  std::vector<double> a{0.0, std::log(3.0)};
  softmax_inplace(a);
  CHECK(a[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(a[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("phi weights are uniform at beta=0 and normalized in general") {
  const auto sched = validate_schedule({1, 0.7, 0.4, 0}, {1, 0.8, 0.3, 0}, {1, 0.6, 0.3, 0});
  const auto sets = testutil::random_unit_sets(2, 2, 3, 3, 5);
  const auto cfg = make_config({4, 6, 8}, 17);
  const auto tree = SampleTree::from_config(cfg, 2);

  SUBCASE("uniform at beta=0") {
    NodeAddress node;
    node.outer = 0;
    node.path = {3};
    const auto w = phi_weight(sched, sets, 0.0, -1.0, 0.5, tree, 1, node);
    REQUIRE(w.size() == 8);
    for (double v : w) CHECK(v == doctest::Approx(1.0 / 8.0).epsilon(1e-13));
  }
  SUBCASE("normalized within 1e-12 at beta>0, every level") {
    for (int k = 1; k <= 2; ++k) {
      for (std::uint64_t outer = 0; outer < 3; ++outer) {
        NodeAddress node;
        node.outer = outer;
        node.path.assign(static_cast<std::size_t>(2 - k), 2);
        const auto w = phi_weight(sched, sets, 1.4, -1.0, 0.5, tree, k, node);
        double total = 0.0;
        for (double v : w) {
          CHECK(v >= 0.0);
          total += v;
        }
        CHECK(std::fabs(total - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("beta=0 averages match exact uniform enumeration to 1e-10") {
  const auto sched = validate_schedule({1, 0.7, 0.4, 0}, {1, 0.8, 0.3, 0}, {1, 0.6, 0.3, 0});
  const auto sets = testutil::random_unit_sets(3, 3, 3, 3, 23);
  const auto cfg = make_config({8, 4, 4}, 9);

  for (int k1 = 1; k1 <= 3; ++k1) {
    const double p_ref = sched.p_vec[static_cast<std::size_t>(k1 - 1)];
    const double q_ref = sched.q_vec[static_cast<std::size_t>(k1 - 1)];
    const auto est = gibbs_average(ObservableKind::bracket(k1, p_ref, q_ref), k1, sched, sets,
                                   0.0, -1.0, 0.5, cfg, 2);
    const double exact = oracles::uniform_bracket_average(sets, p_ref, q_ref);
    CHECK(std::fabs(est.value - exact) <= 1e-10);
  }
  const auto exy2 = gibbs_average(ObservableKind::xy2(), 1, sched, sets, 0.0, -1.0, 0.5, cfg, 2);
  CHECK(std::fabs(exy2.value - oracles::uniform_xy2_average(sets)) <= 1e-10);
  const auto ecross = gibbs_average(ObservableKind::xy2_cross(sched.q_vec[0]), 1, sched, sets,
                                    0.0, -1.0, 0.5, cfg, 2);
  CHECK(std::fabs(ecross.value - oracles::uniform_xy2_cross_average(sets, sched.q_vec[0])) <=
        1e-10);
}

TEST_CASE("single index pair makes every gamma weight 1") {
  const auto sched = validate_schedule({1, 0.6, 0}, {1, 0.7, 0}, {1, 0.5, 0});
  const auto sets = IndexedSets::from_vectors({{0.8, 0.6}}, {{0.6, 0.8}});
  const auto cfg = make_config({16, 8}, 3);
  // BRACKET(k1) = (p_ref|x|^2 - |x|^2)(q_ref|y|^2 - |y|^2) exactly.
  for (int k1 = 1; k1 <= 2; ++k1) {
    const double p_ref = sched.p_vec[static_cast<std::size_t>(k1 - 1)];
    const double q_ref = sched.q_vec[static_cast<std::size_t>(k1 - 1)];
    const auto est = gibbs_average(ObservableKind::bracket(k1, p_ref, q_ref), k1, sched, sets,
                                   1.3, -1.0, 0.4, cfg, 1);
    const double expect = (p_ref - 1.0) * (q_ref - 1.0);  // unit norms
    CHECK(est.value == doctest::Approx(expect).epsilon(1e-12));
    CHECK(est.std_error <= 1e-12);
  }
}

TEST_CASE("constant-norm sets make XY2 exactly a^2 b^2") {
  const auto sched = validate_schedule({1, 0.6, 0}, {1, 0.7, 0}, {1, 0.5, 0});
  // Norms: all x members norm 0.5, all y members norm 2.
  const auto sets = IndexedSets::from_vectors({{0.5, 0.0}, {0.0, 0.5}, {0.3, 0.4}},
                                              {{2.0, 0.0}, {0.0, 2.0}});
  const auto cfg = make_config({32, 16}, 21);
  const auto est = gibbs_average(ObservableKind::xy2(), 1, sched, sets, 1.1, 2.0, 0.6, cfg, 2);
  CHECK(est.value == doctest::Approx(0.25 * 4.0).epsilon(1e-12));
  CHECK(est.std_error <= 1e-12);
}

TEST_CASE("constant observable totals 1 under every gamma measure") {
  const auto sched = validate_schedule({1, 0.7, 0.4, 0}, {1, 0.8, 0.3, 0}, {1, 0.6, 0.3, 0});
  const auto sets = testutil::random_unit_sets(3, 2, 3, 4, 37);
  const auto cfg = make_config({24, 6, 6}, 12);
  for (int k1 = 1; k1 <= 3; ++k1) {
    const auto est = gibbs_average(ObservableKind::const_one(k1), k1, sched, sets, 1.8, -1.0,
                                   0.45, cfg, 2);
    CHECK(std::fabs(est.value - 1.0) <= 1e-10);
  }
}

TEST_CASE("bracket samples are pointwise nonnegative at p_ref=q_ref=1") {
  const auto sched = validate_schedule({1, 0.6, 0}, {1, 0.7, 0}, {1, 0.5, 0});
  const auto sets = testutil::random_unit_sets(3, 3, 4, 4, 43);
  const auto cfg = make_config({64, 32}, 15);
  for (int k1 = 1; k1 <= 2; ++k1) {
    const auto out = detail_gibbs::gibbs_outer_values(ObservableKind::bracket(k1, 1.0, 1.0), k1,
                                                      sched, sets, 1.5, -1.0, 0.5, cfg, 2);
    CHECK(out.bracket_samples > 0);
    CHECK(out.bracket_violations == 0);
    for (double v : out.values) CHECK(v >= 0.0);
  }
}

TEST_CASE("replica swap changes a symmetric bracket only at reduction noise") {
  const auto sched = validate_schedule({1, 0.7, 0.4, 0}, {1, 0.8, 0.3, 0}, {1, 0.6, 0.3, 0});
  const auto sets = testutil::random_unit_sets(3, 2, 3, 3, 47);
  const auto cfg = make_config({32, 8, 8}, 29);
  for (int k1 = 2; k1 <= 3; ++k1) {
    detail_gibbs::GibbsOptions swap;
    swap.swap_replica_tags = true;
    const auto kind = ObservableKind::bracket(k1, sched.p_vec[static_cast<std::size_t>(k1 - 1)],
                                              sched.q_vec[static_cast<std::size_t>(k1 - 1)]);
    const auto a =
        detail_gibbs::gibbs_outer_values(kind, k1, sched, sets, 1.2, -1.0, 0.5, cfg, 2);
    const auto b =
        detail_gibbs::gibbs_outer_values(kind, k1, sched, sets, 1.2, -1.0, 0.5, cfg, 2, swap);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("shared replica streams produce identical replica measures") {
  const auto sched = validate_schedule({1, 0.6, 0}, {1, 0.7, 0}, {1, 0.5, 0});
  const auto sets = testutil::random_unit_sets(2, 2, 2, 2, 51);
  auto cfg = make_config({16, 16}, 77);
  cfg.replica_streams_independent = false;
  // With shared streams the product measure factors through one chain; the
  // bracket estimate must be deterministic under the swap hook.
  detail_gibbs::GibbsOptions swap;
  swap.swap_replica_tags = true;
  const auto kind = ObservableKind::bracket(2, sched.p_vec[1], sched.q_vec[1]);
  const auto a = detail_gibbs::gibbs_outer_values(kind, 2, sched, sets, 1.0, -1.0, 0.5, cfg, 1);
  const auto b =
      detail_gibbs::gibbs_outer_values(kind, 2, sched, sets, 1.0, -1.0, 0.5, cfg, 1, swap);
  CHECK(a.values == b.values);
}

TEST_CASE("beta>0 averages match exact quadrature at r=1, scalar dimensions") {
  // Independent oracle for the reweighted measures themselves: tensorized
  // Gauss-Hermite over all seven field axes at n = m_dim = 1, l = 2, with
  // interior p0, q0 so the shared-row cross observable is active.
  const auto sched = validate_schedule({0.9, 0.5, 0}, {0.8, 0.4, 0}, {1, 0.6, 0});
  const auto sets = IndexedSets::from_vectors({{0.9}, {-0.7}}, {{1.0}, {0.4}});
  const double beta = 1.1, sval = -1.0, t = 0.45;
  const auto exact = oracles::quadrature_gibbs_r1(sched, sets, beta, sval, t, 12, 8);

  EstimatorConfig cfg;
  cfg.samples_per_level = {2048, 512};
  cfg.seed = 2024;

  const auto xy2 = gibbs_average(ObservableKind::xy2(), 1, sched, sets, beta, sval, t, cfg, 2);
  CHECK(std::fabs(xy2.value - exact.xy2) <= 3.0 * xy2.std_error + 1e-6);

  const auto cross = gibbs_average(ObservableKind::xy2_cross(sched.q_vec[0]), 1, sched, sets,
                                   beta, sval, t, cfg, 2);
  CHECK(std::fabs(cross.value - exact.xy2_cross) <= 3.0 * cross.std_error + 1e-6);

  const auto b1 = gibbs_average(ObservableKind::bracket(1, sched.p_vec[0], sched.q_vec[0]), 1,
                                sched, sets, beta, sval, t, cfg, 2);
  CHECK(std::fabs(b1.value - exact.bracket1) <= 3.0 * b1.std_error + 1e-6);

  // The product-of-marginals measure carries O(1/N_1) self-normalization
  // bias; 512 inner draws keep it far below the 3 sigma band.
  const auto b2 = gibbs_average(ObservableKind::bracket(2, sched.p_vec[1], sched.q_vec[1]), 2,
                                sched, sets, beta, sval, t, cfg, 2);
  CHECK(std::fabs(b2.value - exact.bracket2) <= 3.0 * b2.std_error + 1e-4);
}

TEST_CASE("gibbs_average validates the coupling level") {
  const auto sched = validate_schedule({1, 0.6, 0}, {1, 0.7, 0}, {1, 0.5, 0});
  const auto sets = testutil::random_unit_sets(2, 2, 2, 2, 53);
  const auto cfg = make_config({8, 8}, 1);
  CHECK_THROWS_AS(gibbs_average(ObservableKind::bracket(3, 1.0, 1.0), 3, sched, sets, 1.0, -1.0,
                                0.5, cfg),
                  Error);
  CHECK_THROWS_AS(gibbs_average(ObservableKind::bracket(0, 1.0, 1.0), 0, sched, sets, 1.0, -1.0,
                                0.5, cfg),
                  Error);
}
