#include <gtest/gtest.h>

#include <random>

#include "opgeo/algebra.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace {

using namespace opgeo::algebra;
using opgeo::linalg::operator_norm;
using opgeo::linalg::qr_unitary;
using opgeo::testing::M2DualSearch;
using opgeo::testing::norming_membership_deviation;
using opgeo::testing::random_matrix;

Element random_element(const AlgebraShape& shape, std::mt19937_64& rng) {
  std::vector<ComplexMatrix> b;
  for (std::size_t n : shape.block_dims()) b.push_back(random_matrix(n, n, rng));
  return {shape, b};
}

Element random_unitary(const AlgebraShape& shape, std::mt19937_64& rng) {
  std::vector<ComplexMatrix> b;
  for (std::size_t n : shape.block_dims()) b.push_back(qr_unitary(random_matrix(n, n, rng)));
  return {shape, b};
}

Element normalized(const Element& x) { return (1.0 / element_norm(x)) * x; }

TEST(AlgebraShape, DualDimensionAndValidation) {
  EXPECT_EQ(AlgebraShape({2, 3}).dual_dimension(), 13u);
  EXPECT_EQ(AlgebraShape({2, 3}).to_string(), "M2+M3");
  EXPECT_THROW(AlgebraShape(std::vector<std::size_t>{}), opgeo::Error);
  EXPECT_THROW(AlgebraShape({2, 0}), opgeo::Error);
}

TEST(Element, BlockSizesChecked) {
  EXPECT_THROW(Element(AlgebraShape({2}), {ComplexMatrix(3, 3)}), opgeo::Error);
  EXPECT_THROW(Element(AlgebraShape({2, 2}), {ComplexMatrix(2, 2)}), opgeo::Error);
}

TEST(Evaluate, NormalizedTraceOfUnit) {
  const AlgebraShape m3({3});
  const Functional f(m3, {ComplexMatrix::identity(3) * Complex(1.0 / 3.0)});
  EXPECT_NEAR(std::abs(evaluate(f, Element::unit(m3)) - 1.0), 0.0, 1e-15);
  EXPECT_EQ(evaluate(Functional::zero(m3), Element::unit(m3)), Complex(0.0));
}

TEST(Evaluate, DualityInequality) {
  std::mt19937_64 rng(1);
  const AlgebraShape shape({2, 3});
  for (int trial = 0; trial < 100; ++trial) {
    const Element x = random_element(shape, rng);
    const Functional f(shape, {random_matrix(2, 2, rng), random_matrix(3, 3, rng)});
    EXPECT_LE(std::abs(evaluate(f, x)), functional_norm(f) * element_norm(x) + 1e-9);
  }
}

TEST(Evaluate, ShapeMismatch) {
  EXPECT_THROW(evaluate(Functional::zero(AlgebraShape({2})), Element::unit(AlgebraShape({3}))), opgeo::Error);
}

TEST(ElementNorm, Basics) {
  EXPECT_NEAR(element_norm(Element::unit(AlgebraShape({2, 3}))), 1.0, 1e-15);
  const Element x(AlgebraShape({1, 1}), {ComplexMatrix::diagonal({1.0}), ComplexMatrix::diagonal({0.5})});
  EXPECT_NEAR(element_norm(x), 1.0, 1e-15);
}

TEST(ElementNorm, MatchesBlockDiagonalAssembly) {
  std::mt19937_64 rng(2);
  const AlgebraShape shape({2, 3, 1});
  for (int trial = 0; trial < 20; ++trial) {
    const Element x = random_element(shape, rng);
    ComplexMatrix full(6, 6);
    std::size_t off = 0;
    for (const auto& b : x.blocks()) {
      for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) full(off + i, off + j) = b(i, j);
      off += b.rows();
    }
    EXPECT_NEAR(element_norm(x), operator_norm(full), 1e-12 * operator_norm(full));
  }
}

TEST(NormingSet, IdentityIsFullyActive) {
  for (std::size_t n : {1u, 2u, 4u}) {
    const auto d = norming_set(Element::unit(AlgebraShape({n})));
    EXPECT_TRUE(d.blocks[0].active);
    EXPECT_EQ(d.blocks[0].support, n);
    EXPECT_EQ(d.span_dim, n * n);
  }
}

TEST(NormingSet, DiagonalHalf) {
  const auto d = norming_set(Element(ComplexMatrix::diagonal({1.0, 0.5})));
  EXPECT_EQ(d.blocks[0].support, 1u);
  EXPECT_EQ(d.span_dim, 1u);
  EXPECT_FALSE(d.borderline);
}

TEST(NormingSet, InactiveBlockDropsOut) {
  std::mt19937_64 rng(3);
  const AlgebraShape shape({2, 3});
  const Element u1 = random_unitary(AlgebraShape({2}), rng);
  const Element u2 = random_unitary(AlgebraShape({3}), rng);
  const Element x(shape, {u1.block(0), u2.block(0) * Complex(0.5)});
  const auto d = norming_set(x);
  EXPECT_FALSE(d.blocks[1].active);
  EXPECT_EQ(d.span_dim, 4u);
  std::vector<Functional> fs;
  for (int k = 0; k < 12; ++k) fs.push_back(sample_norming_functional(d, rng));
  EXPECT_EQ(numeric_span_rank(fs, 1e-7), 4u);
}

TEST(NormingSet, Preconditions) {
  try {
    norming_set(Element::zero(AlgebraShape({2})));
    FAIL();
  } catch (const opgeo::Error& e) {
    EXPECT_EQ(e.kind(), opgeo::ErrorKind::zero_norm);
  }
  try {
    norming_set(2.0 * Element::unit(AlgebraShape({2})));
    FAIL();
  } catch (const opgeo::Error& e) {
    EXPECT_EQ(e.kind(), opgeo::ErrorKind::precondition);
  }
}

TEST(NormingSet, BorderlineSpectrumWarns) {
  const auto d = norming_set(Element(ComplexMatrix::diagonal({1.0, 1.0 - 1e-5})));
  EXPECT_TRUE(d.borderline);
  EXPECT_EQ(d.span_dim, 1u);
  EXPECT_FALSE(d.warnings.empty());
}

TEST(SampleNorming, PureStateOfIdentity) {
  const auto d = norming_set(Element::unit(AlgebraShape({2})));
  const Functional f = norming_functional_from(d, {ComplexMatrix::diagonal({1.0, 0.0})});
  EXPECT_NEAR(std::abs(f.density(0)(0, 0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(f.density(0)(1, 1)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(f.density(0)(0, 1)), 0.0, 1e-15);
}

TEST(SampleNorming, UniqueMemberForDiagonalHalf) {
  std::mt19937_64 rng(4);
  const auto d = norming_set(Element(ComplexMatrix::diagonal({1.0, 0.5})));
  for (int k = 0; k < 5; ++k) {
    const Functional f = sample_norming_functional(d, rng);
    EXPECT_NEAR(std::abs(f.density(0)(0, 0) - 1.0), 0.0, 1e-14);
    EXPECT_NEAR(f.density(0).frobenius_norm(), 1.0, 1e-14);
  }
}

TEST(SampleNorming, AuditOnRandomUnitaries) {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const AlgebraShape shape = k % 2 ? AlgebraShape({4}) : AlgebraShape({2, 3});
    const auto d = norming_set(random_unitary(shape, rng));
    const Functional f = sample_norming_functional(d, rng);
    worst = std::max({worst, std::abs(evaluate(f, d.base) - 1.0), std::abs(functional_norm(f) - 1.0)});
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(SampleNorming, MembersOfNonUnitaryBase) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 200; ++k) {
    const AlgebraShape shape({2, 3});
    const Element x = normalized(random_element(shape, rng));
    const auto d = norming_set(x);
    const Functional f = sample_norming_functional(d, rng);
    EXPECT_LE(std::abs(evaluate(f, x) - 1.0), 1e-8);
    EXPECT_LE(std::abs(functional_norm(f) - 1.0), 1e-8);
    EXPECT_LE(norming_membership_deviation(d, f), 1e-10);
  }
}

TEST(NumericSpanRank, Basics) {
  std::mt19937_64 rng(7);
  const AlgebraShape shape({2});
  const Functional f(shape, {random_matrix(2, 2, rng)});
  EXPECT_EQ(numeric_span_rank({f}, 1e-7), 1u);
  EXPECT_EQ(numeric_span_rank({f, f}, 1e-7), 1u);
  EXPECT_EQ(numeric_span_rank({}, 1e-7), 0u);
}

TEST(NumericSpanRank, MatchesExactSpanDim) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    const AlgebraShape shape = k % 2 ? AlgebraShape({4}) : AlgebraShape({2, 3});
    Element x = random_unitary(shape, rng);
    if (k % 3 == 0) x = normalized(random_element(shape, rng));
    const auto d = norming_set(x);
    std::vector<Functional> fs;
    for (std::size_t s = 0; s < 3 * d.span_dim; ++s) fs.push_back(sample_norming_functional(d, rng));
    EXPECT_EQ(numeric_span_rank(fs, 1e-7), d.span_dim);
  }
}

TEST(NormingSet, FullSpanExactlyForUnitaries) {
  std::mt19937_64 rng(9);
  const AlgebraShape shape({2, 3});
  for (int k = 0; k < 50; ++k) {
    const Element u = random_unitary(shape, rng);
    EXPECT_EQ(norming_set(u).span_dim, shape.dual_dimension());
    Element x = normalized(random_element(shape, rng));
    EXPECT_LT(norming_set(x).span_dim, shape.dual_dimension());
    // unitary in one block only
    const Element mixed(shape, {u.block(0), u.block(1) * ComplexMatrix::diagonal({1.0, 1.0, 0.0})});
    EXPECT_LT(norming_set(mixed).span_dim, shape.dual_dimension());
  }
}

TEST(MinRealOverNorming, Examples) {
  const AlgebraShape m2({2});
  const auto r = min_real_over_norming(Element::unit(m2), Element(ComplexMatrix::diagonal({2.0, 1.0})));
  EXPECT_NEAR(r.value, 1.0, 1e-15);
  EXPECT_NEAR(min_real_over_norming(Element::unit(m2), Element::unit(m2)).value, 1.0, 1e-15);
  EXPECT_THROW(min_real_over_norming(Element(ComplexMatrix::diagonal({1.0, 0.5})), Element::unit(m2)),
               opgeo::Error);
}

TEST(MinRealOverNorming, EqualsSmallestSingularValueForPolarUnitary) {
  std::mt19937_64 rng(10);
  const AlgebraShape shape({2, 3});
  for (int k = 0; k < 50; ++k) {
    const Element x = random_element(shape, rng);
    const Element u = x.map_blocks([](const ComplexMatrix& b, std::size_t) {
      return opgeo::linalg::polar(b, opgeo::linalg::PolarSide::left).isometry;
    });
    double smin = 1e300;
    for (const auto& b : x.blocks()) smin = std::min(smin, opgeo::linalg::min_singular_value(b));
    const auto r = min_real_over_norming(u, x);
    EXPECT_NEAR(r.value, smin, 1e-9);
    EXPECT_LE(r.hermitian_residual, 1e-9);
  }
}

TEST(MinRealOverNorming, LowerBoundsSampledMembers) {
  std::mt19937_64 rng(11);
  const AlgebraShape shape({2, 3});
  for (int k = 0; k < 50; ++k) {
    const Element u = random_unitary(shape, rng);
    const Element x = random_element(shape, rng);
    const double inf = min_real_over_norming(u, x).value;
    const auto d = norming_set(u);
    for (int s = 0; s < 20; ++s)
      EXPECT_LE(inf, evaluate(sample_norming_functional(d, rng), x).real() + 1e-8);
  }
}

// The parameterization of S_x against a search over the whole dual sphere.
TEST(NormingOracle, BruteForceMaximizersOnM2) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 8; ++trial) {
    const Element x = normalized(random_element(AlgebraShape({2}), rng));
    const M2DualSearch search(x.block(0));
    const auto best = search.maximize(rng, 20000);
    EXPECT_NEAR(search.objective(best), 1.0, 1e-10);
    const Functional f(x.shape(), {M2DualSearch::assemble(best)});
    EXPECT_LE(norming_membership_deviation(norming_set(x), f), 1e-6);
  }
}

TEST(NormingOracle, ProjectionSearchLandsInFaceForUnitary) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Element u = random_unitary(AlgebraShape({2}), rng);
  const auto desc = norming_set(u);
  const M2DualSearch search(u.block(0));
  int checked = 0;
  for (int start = 0; start < 200; ++start) {
    M2DualSearch::Params p{};
    p[0] = unit(rng);
    for (int k = 1; k < 9; ++k) p[k] = 6.283185307179586 * unit(rng);
    p = search.refine(p);
    if (search.objective(p) < 1.0 - 1e-12) continue;
    ++checked;
    const Functional f(u.shape(), {M2DualSearch::assemble(p)});
    EXPECT_LE(norming_membership_deviation(desc, f), 1e-6);
  }
  EXPECT_GT(checked, 100);
}

}  // namespace
