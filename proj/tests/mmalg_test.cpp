#include "test_support.hpp"

namespace fdvn {
namespace {

using testing::diag_element;

TEST(Algebra, RejectsBadDims) {
  EXPECT_THROW(Algebra(std::vector<int>{}), ShapeError);
  EXPECT_THROW(Algebra({2, 0}), ShapeError);
}

TEST(Algebra, LinearDimensionIsSumOfSquares) {
  Algebra a({1, 2, 3});
  EXPECT_EQ(a.lin_dim(), 1 + 4 + 9);
  EXPECT_EQ(a.mat_dim(), 6);
  EXPECT_EQ(a.vec_offset(2), 5);
}

TEST(Element, BlockShapesAreChecked) {
  Algebra a({2, 1});
  EXPECT_THROW(Element(a, {Mat::Zero(2, 2)}), ShapeError);
  EXPECT_THROW(Element(a, {Mat::Zero(2, 2), Mat::Zero(2, 2)}), ShapeError);
  EXPECT_THROW(Element::zero(a) + Element::zero(Algebra({3})), ShapeError);
}

TEST(Element, VecIsColumnMajorPerBlock) {
  Algebra a({1, 2});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Vec v = Element::unit(a, 1, i, j).vec();
      EXPECT_EQ(v(1 + j * 2 + i), cd(1));
      EXPECT_NEAR(v.norm(), 1.0, 1e-15);
    }
  Element x = random_element(3, a);
  EXPECT_LT((Element::from_vec(a, x.vec()) - x).max_abs(), 1e-15);
  EXPECT_LT((Element::from_dense(a, x.dense()) - x).max_abs(), 1e-15);
}

TEST(Element, ClosedUnderStarOperations) {
  Algebra a({2, 3});
  Element x = random_element(1, a), y = random_element(2, a);
  Element p = x * y;
  EXPECT_LT(max_abs(p.dense() - x.dense() * y.dense()), 1e-12);
  EXPECT_LT(max_abs((x + y).dense() - (x.dense() + y.dense())), 1e-12);
  EXPECT_LT(max_abs(x.adjoint().dense() - x.dense().adjoint()), 1e-15);
  EXPECT_EQ(p.algebra(), a);
}

TEST(MultiplicationMatrices, MatchProducts) {
  Algebra a({2, 1});
  Element x = random_element(4, a), y = random_element(5, a);
  EXPECT_LT(max_abs(lmul_matrix(x) * y.vec() - (x * y).vec()), 1e-12);
  EXPECT_LT(max_abs(rmul_matrix(x) * y.vec() - (y * x).vec()), 1e-12);
}

TEST(Trace, NormalizedIdentity) {
  Algebra m2({2});
  TraceWeights w({0.5});
  EXPECT_NEAR(trace(w, Element::identity(m2)).real(), 1.0, 1e-15);
  EXPECT_NEAR(trace(w, diag_element(m2, {{1, 0}})).real(), 0.5, 1e-15);
}

TEST(Trace, WeightedSumOverBlocks) {
  Algebra a({2, 1});
  TraceWeights w({0.25, 0.25});
  Element x = diag_element(a, {{1, 2}, {3}});
  double oracle = 0.25 * (1 + 2) + 0.25 * 3;
  EXPECT_NEAR(trace(w, x).real(), oracle, 1e-15);
  EXPECT_NEAR(trace(w, x).real(), 1.5, 1e-15);
}

TEST(Trace, WeightsMustBePositive) {
  EXPECT_THROW(TraceWeights({0.5, 0.0}), Error);
  EXPECT_TRUE(TraceWeights::for_algebra(Algebra({1, 1}), {0.5, 0.5}).normalized);
  EXPECT_FALSE(TraceWeights::for_algebra(Algebra({1, 1}), {0.5, 0.6}).normalized);
  EXPECT_THROW(TraceWeights::for_algebra(Algebra({1, 1}), {1.0}), ShapeError);
}

TEST(Positivity, Tolerances) {
  Algebra m2({2});
  EXPECT_TRUE(is_positive(Element::zero(m2), 1e-12));
  EXPECT_TRUE(is_positive(diag_element(m2, {{1, -1e-15}}), 1e-12));
  EXPECT_FALSE(is_positive(diag_element(m2, {{1, -0.5}}), 1e-12));
  EXPECT_TRUE(is_positive(random_positive(9, Algebra({3, 2}))));
}

TEST(FunctionalCalculus, Examples) {
  Algebra m2({2});
  Element r = fn_calculus(diag_element(m2, {{4, 9}}), fn::sqrt());
  EXPECT_LT((r - diag_element(m2, {{2, 3}})).max_abs(), 1e-14);
  Element l = fn_calculus(diag_element(m2, {{std::exp(1.0), 0}}), fn::log_on_support());
  EXPECT_LT((l - diag_element(m2, {{1, 0}})).max_abs(), 1e-14);
  Element p = fn_calculus(diag_element(m2, {{4, 0}}), fn::power(-0.5));
  EXPECT_LT((p - diag_element(m2, {{0.5, 0}})).max_abs(), 1e-14);
}

TEST(FunctionalCalculus, AgreesWithEigenOracle) {
  Algebra a({3});
  Element x = random_positive(17, a);
  Eigen::ComplexEigenSolver<Mat> ces(x.block(0));
  Mat v = ces.eigenvectors();
  Mat d = ces.eigenvalues().array().sqrt().matrix().asDiagonal();
  Mat oracle = v * d * v.inverse();
  EXPECT_LT(max_abs(fn_calculus(x, fn::sqrt()).block(0) - oracle), 1e-10);
  Element s = fn_calculus(x, fn::sqrt());
  EXPECT_LT((s * s - x).max_abs(), 1e-10);
}

TEST(FunctionalCalculus, RejectsNegativeSpectrum) {
  Algebra m2({2});
  EXPECT_THROW(fn_calculus(diag_element(m2, {{1, -0.5}}), fn::sqrt()), NumericalError);
}

TEST(SupportProjection, Examples) {
  Algebra m2({2});
  EXPECT_LT((support_projection(diag_element(m2, {{3, 0}})) - diag_element(m2, {{1, 0}})).max_abs(), 1e-15);
  Element full = random_positive(2, m2) + Element::identity(m2);
  EXPECT_LT((support_projection(full) - Element::identity(m2)).max_abs(), 1e-12);
  EXPECT_LT((support_projection(diag_element(m2, {{1, 1e-15}}), 1e-9) - diag_element(m2, {{1, 0}})).max_abs(),
            1e-15);
}

TEST(GramQuotient, RankOfGram) {
  Mat g(2, 2);
  g << 1, 1, 1, 1;
  GramModel m = gram_quotient(g);
  EXPECT_EQ(m.dim(), 1);
  EXPECT_LT(m.form_residual(), 1e-12);
  GramModel id = gram_quotient(Mat::Identity(3, 3));
  EXPECT_EQ(id.dim(), 3);
  Mat c = id.coords();
  EXPECT_LT(max_abs(c.adjoint() * c - Mat::Identity(3, 3)), 1e-12);
}

TEST(GramQuotient, FormEvaluatorConvention) {
  // <g_a, g_b> for g_0 = e_0, g_1 = i e_0 + e_1.
  Vec g0 = Vec::Unit(2, 0), g1(2);
  g1 << cd(0, 1), 1;
  std::vector<Vec> g{g0, g1};
  // <g_a, g_b> is linear in g_a; Eigen dot conjugates its left operand.
  GramModel m = gram_quotient(2, [&](int a, int b) { return g[b].dot(g[a]); });
  EXPECT_EQ(m.dim(), 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      EXPECT_LT(std::abs(m.coords().col(a).dot(m.coords().col(b)) - g[a].dot(g[b])), 1e-12);
}

TEST(GramQuotient, RejectsIndefiniteForm) {
  Mat g(2, 2);
  g << 1, 0, 0, -1;
  EXPECT_THROW(gram_quotient(g), NumericalError);
}

TEST(GramQuotient, TensorGramForCInM2HasDimension16) {
  // Gram of {x Omega (x) y Omega} over matrix-unit pairs, relative to C:
  // <x Omega (x) y Omega, x' Omega (x) y' Omega> = tau(x'^* x) tau(y'^* y).
  Algebra m2({2});
  TraceWeights tr({0.5});
  std::vector<Element> u = matrix_units(m2);
  int n = static_cast<int>(u.size());
  auto form = [&](int a, int b) {
    const Element &x = u[a / n], &y = u[a % n], &xp = u[b / n], &yp = u[b % n];
    return trace(tr, x.adjoint() * xp) * trace(tr, y.adjoint() * yp);
  };
  EXPECT_EQ(gram_quotient(n * n, form).dim(), 16);
}

TEST(Gns, Dimensions) {
  Algebra c({1});
  EXPECT_EQ(gns_space(c, TraceWeights({1.0}), Element::identity(c)).dim(), 1);
  Algebra m2({2});
  GnsSpace s = gns_space(m2, TraceWeights({0.5}), Element::identity(m2));
  EXPECT_EQ(s.dim(), 4);
  Element x = random_element(3, m2), y = random_element(4, m2);
  EXPECT_LT(max_abs(s.left(x) * s.vector_of(y) - s.vector_of(x * y)), 1e-12);
}

TEST(Gns, InnerProductIsTheState) {
  Algebra c2({1, 1});
  TraceWeights w({1.0 / 3, 2.0 / 3});
  GnsSpace s = gns_space(c2, w, Element::identity(c2));
  EXPECT_EQ(s.dim(), 2);
  Vec e1 = s.vector_of(Element::unit(c2, 0, 0, 0));
  EXPECT_NEAR(e1.squaredNorm(), 1.0 / 3, 1e-14);
}

TEST(Gns, NonTracialStateMatchesForm) {
  Algebra a({2, 1});
  TraceWeights w = TraceWeights::normalized_trace(a);
  Element d = random_state(6, a, w);
  GnsSpace s = gns_space(a, w, d);
  EXPECT_EQ(s.dim(), a.lin_dim());
  for (int t = 0; t < 5; ++t) {
    Element x = random_element(100 + t, a), y = random_element(200 + t, a);
    cd lhs = s.vector_of(x).dot(s.vector_of(y));
    cd rhs = trace(w, d * x.adjoint() * y);
    EXPECT_LT(std::abs(lhs - rhs), 1e-10);
  }
  EXPECT_LT((s.element_of(s.vector_of(random_element(7, a))) - random_element(7, a)).max_abs(), 1e-10);
}

TEST(Antilinear, ConjugateLinear) {
  Rng rng(3);
  Mat m = random_unitary_matrix(rng, 3);
  Antilinear j{m};
  Vec v = Vec::Random(3);
  cd lam(0.3, -1.2);
  EXPECT_LT(max_abs(j.apply(lam * v) - std::conj(lam) * j.apply(v)), 1e-14);
}

TEST(Random, DeterministicForSeed) {
  Algebra a({2, 3});
  EXPECT_EQ((random_element(42, a) - random_element(42, a)).max_abs(), 0.0);
  EXPECT_GT((random_element(42, a) - random_element(43, a)).max_abs(), 0.0);
}

TEST(Random, UnitaryAndState) {
  Algebra a({1, 2, 3});
  Element u = random_unitary(8, a);
  EXPECT_LT((u.adjoint() * u - Element::identity(a)).max_abs(), 1e-12);
  TraceWeights w = TraceWeights::normalized_trace(a);
  Element s = random_state(8, a, w);
  EXPECT_NEAR(trace(w, s).real(), 1.0, 1e-12);
  EXPECT_TRUE(is_positive(s));
}

TEST(Commutant, RangeOfLeftMultiplicationCommutant) {
  // The commutant of M_2 acting on the left of L^2(M_2) has dimension 4.
  Algebra m2({2});
  UnitSystem left = unit_system(m2, [](const Element& x) { return lmul_matrix(x); });
  std::vector<Mat> b = range_basis(commutant_projector({left}), 4);
  EXPECT_EQ(b.size(), 4u);
  Element x = random_element(1, m2);
  for (const Mat& m : b) EXPECT_LT(max_abs(m * lmul_matrix(x) - lmul_matrix(x) * m), 1e-10);
}

}  // namespace
}  // namespace fdvn
