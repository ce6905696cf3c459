#include <gtest/gtest.h>

#include <complex>

#include "opgeo/harness.hpp"

namespace {

using namespace opgeo::harness;
using opgeo::classify::is_partial_isometry_algebraic;
using opgeo::classify::is_unitary_algebraic;

double max_entry_diff(const Element& a, const Element& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.block_count(); ++k)
    for (std::size_t i = 0; i < a.block(k).rows(); ++i)
      for (std::size_t j = 0; j < a.block(k).cols(); ++j) d = std::max(d, std::abs(a.block(k)(i, j) - b.block(k)(i, j)));
  return d;
}

// |det| via the product of singular values.
double abs_det(const ComplexMatrix& m) {
  double p = 1.0;
  for (double s : opgeo::linalg::singular_values(m)) p *= s;
  return p;
}

const AlgebraShape kSum({2, 3});

TEST(Generators, GinibreStatistics) {
  Rng rng(42);
  double sum = 0.0, sq = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const Complex z = gen_ginibre(AlgebraShape({1}), rng).block(0)(0, 0);
    sum += std::abs(z);
    sq += std::norm(z);
  }
  // |z| with Re, Im ~ N(0,1) is Rayleigh: mean sqrt(pi/2), E|z|^2 = 2
  EXPECT_NEAR(sum / n, std::sqrt(std::numbers::pi / 2), 0.03);
  EXPECT_NEAR(sq / n, 2.0, 0.08);
}

TEST(Generators, SeedDeterminism) {
  Rng a(42), b(42), c(43);
  const Element x = gen_ginibre(kSum, a);
  EXPECT_EQ(x, gen_ginibre(kSum, b));
  EXPECT_NE(x, gen_ginibre(kSum, c));
}

TEST(Generators, UnitaryAudit) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const Element u = gen_unitary(AlgebraShape({6}), rng);
    EXPECT_TRUE(is_unitary_algebraic(u));
    EXPECT_LE(max_entry_diff(u.adjoint() * u, Element::unit(u.shape())), 1e-10);
    EXPECT_NEAR(abs_det(u.block(0)), 1.0, 1e-9);
  }
  const Element s = gen_unitary(AlgebraShape({1}), rng);
  EXPECT_NEAR(std::abs(s.block(0)(0, 0)), 1.0, 1e-15);
}

TEST(Generators, PartialIsometryRanks) {
  Rng rng(2);
  const AlgebraShape shape({4});
  EXPECT_TRUE(is_unitary_algebraic(gen_partial_isometry(shape, {4}, rng)));
  EXPECT_EQ(opgeo::algebra::element_norm(gen_partial_isometry(shape, {0}, rng)), 0.0);
  for (int t = 0; t < 30; ++t) {
    const auto ranks = random_ranks(kSum, true, rng);
    EXPECT_TRUE(ranks[0] < 2 || ranks[1] < 3);
    EXPECT_GT(ranks[0] + ranks[1], 0u);
    const Element x = gen_partial_isometry(kSum, ranks, rng);
    EXPECT_LE(max_entry_diff(x * x.adjoint() * x, x), 1e-9);
    for (std::size_t b = 0; b < 2; ++b) {
      const auto sv = opgeo::linalg::singular_values(x.block(b));
      std::size_t rank = 0;
      for (double s : sv) rank += s > 0.5;
      EXPECT_EQ(rank, ranks[b]);
    }
  }
  EXPECT_THROW(gen_partial_isometry(shape, {5}, rng), opgeo::Error);
}

TEST(Generators, NormOneNonPartialIsometry) {
  Rng rng(3);
  for (const auto& shape : default_shapes()) {
    for (int t = 0; t < 20; ++t) {
      const Element x = gen_norm_one_non_pi(shape, rng);
      EXPECT_NEAR(opgeo::algebra::element_norm(x), 1.0, 1e-10);
      EXPECT_FALSE(is_partial_isometry_algebraic(x));
      bool inner = false;
      for (const auto& b : x.blocks())
        for (double s : opgeo::linalg::singular_values(b)) inner = inner || (s >= 0.2 - 1e-12 && s <= 0.8 + 1e-12);
      EXPECT_TRUE(inner);
      EXPECT_TRUE(opgeo::classify::construct_witness(x).has_value());
    }
  }
  Rng r(0);
  EXPECT_THROW(gen_norm_one_non_pi(AlgebraShape({1}), r), opgeo::Error);
}

TEST(Generators, PositiveInvertibleHermitianSingular) {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const Element p = gen_positive(kSum, rng);
    for (const auto& b : p.blocks()) EXPECT_GE(opgeo::linalg::min_eigenvalue_hermitian_part(b), -1e-12);
    EXPECT_NEAR(opgeo::algebra::element_norm(p), 1.0, 1e-12);
    EXPECT_GE(opgeo::classify::min_singular_value(gen_invertible(kSum, rng)), 0.1);
    const Element h = gen_hermitian(kSum, rng);
    EXPECT_EQ(h, h.adjoint());
    EXPECT_LE(opgeo::classify::min_singular_value(gen_singular(kSum, rng)), 1e-12);
  }
}

TEST(TrialSeeds, DistinctAndStable) {
  EXPECT_EQ(trial_seed(1, Suite::T2, 0), trial_seed(1, Suite::T2, 0));
  EXPECT_NE(trial_seed(1, Suite::T2, 0), trial_seed(1, Suite::T2, 1));
  EXPECT_NE(trial_seed(1, Suite::T2, 0), trial_seed(1, Suite::T4, 0));
  EXPECT_NE(trial_seed(1, Suite::T2, 0), trial_seed(2, Suite::T2, 0));
}

TEST(Suites, ParseNames) {
  for (Suite s : kAllSuites) EXPECT_EQ(parse_suite(to_string(s)), s);
  EXPECT_THROW(parse_suite("T3"), opgeo::Error);
}

TEST(Suites, SingleUnitaryTrial) {
  TrialConfig cfg;
  cfg.seed = 1;
  cfg.trials = 1;
  cfg.shapes = {AlgebraShape({2})};
  cfg.suites = {Suite::T2};
  const auto r = run_suite(cfg);
  ASSERT_EQ(r.suites.size(), 1u);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.suites[0].passed, 1);
  EXPECT_EQ(r.suites[0].max_deviation, 0.0);
  EXPECT_EQ(r.suites[0].metrics.at("span_dim").max, 4.0);
}

TEST(Suites, WitnessMarginRecorded) {
  TrialConfig cfg;
  cfg.trials = 8;
  cfg.suites = {Suite::T1B};
  const auto r = run_suite(cfg);
  EXPECT_TRUE(r.ok());
  EXPECT_GE(r.suites[0].metrics.at("margin").min, 0.05);
}

TEST(Suites, EverySuitePassesSmallRun) {
  TrialConfig cfg;
  cfg.seed = 11;
  cfg.trials = 8;
  cfg.corner_directions = 4;
  const auto r = run_suite(cfg);
  ASSERT_EQ(r.suites.size(), 10u);
  for (const auto& s : r.suites) {
    EXPECT_TRUE(s.ok()) << to_string(s.suite) << (s.failures.empty() ? "" : ": " + s.failures[0].note);
    EXPECT_EQ(s.trials, 8);
  }
}

TEST(Suites, ParallelMatchesSerial) {
  TrialConfig cfg;
  cfg.seed = 5;
  cfg.trials = 6;
  cfg.corner_directions = 3;
  cfg.suites = {Suite::T1F, Suite::T2, Suite::P6};
  const auto serial = run_suite(cfg);
  cfg.threads = 3;
  const auto parallel = run_suite(cfg);
  for (std::size_t k = 0; k < serial.suites.size(); ++k) {
    EXPECT_EQ(serial.suites[k].passed, parallel.suites[k].passed);
    EXPECT_EQ(serial.suites[k].max_deviation, parallel.suites[k].max_deviation);
    ASSERT_EQ(serial.suites[k].metrics.size(), parallel.suites[k].metrics.size());
    for (const auto& [name, range] : serial.suites[k].metrics) {
      EXPECT_EQ(range.min, parallel.suites[k].metrics.at(name).min);
      EXPECT_EQ(range.max, parallel.suites[k].metrics.at(name).max);
    }
  }
}

TEST(Suites, ConfigValidated) {
  TrialConfig cfg;
  cfg.trials = 0;
  EXPECT_THROW(run_suite(cfg), opgeo::Error);
  cfg.trials = 1;
  cfg.shapes.clear();
  EXPECT_THROW(run_suite(cfg), opgeo::Error);
}

TEST(Suites, FailureRecordedWithSeed) {
  // A classification cut above every sigma_min makes each invertible look
  // singular, so every invertible trial fails at both tolerances.
  TrialConfig cfg;
  cfg.trials = 2;
  cfg.suites = {Suite::T4};
  cfg.tolerances.classification = 10.0;  // every operator looks singular
  const auto r = run_suite(cfg);
  EXPECT_FALSE(r.ok());
  ASSERT_FALSE(r.suites[0].failures.empty());
  const auto& f = r.suites[0].failures[0];
  EXPECT_EQ(f.seed, trial_seed(cfg.seed, Suite::T4, f.trial));
  EXPECT_FALSE(f.rerun_passed);
  EXPECT_FALSE(f.note.empty());
  EXPECT_EQ(r.suites[0].passed + static_cast<int>(r.suites[0].failures.size()), r.suites[0].trials);
}

}  // namespace
