#include "test_support.hpp"

namespace fdvn {
namespace {

using testing::c2_in_m2;
using testing::c_in_c2;
using testing::c_in_m2;

// Inclusions with connected Bratteli diagrams, used for the generic checks.
std::vector<Inclusion> zoo() {
  return {c_in_m2(),
          c2_in_m2(),
          c_in_c2(),
          build_inclusion({1, 2}, {{1, 0}, {1, 1}}, TraceSpec::markov_trace()),
          build_inclusion({2}, {{1, 2}}, TraceSpec::explicit_weights({0.1, 0.2})),
          build_inclusion({1, 1}, {{1, 1, 0}, {0, 1, 1}}, TraceSpec::markov_trace()),
          build_inclusion({1, 2}, {{2}, {1}}, TraceSpec::explicit_weights({0.25}))};
}

TEST(BuildInclusion, CInM2) {
  Inclusion inc = c_in_m2();
  EXPECT_EQ(inc.big.dims, std::vector<int>{2});
  EXPECT_NEAR(inc.trace_small.weights[0], 1.0, 1e-15);
  Element lam = cd(0.7, 0.2) * Element::identity(inc.small);
  EXPECT_LT((inc.embed(lam) - cd(0.7, 0.2) * Element::identity(inc.big)).max_abs(), 1e-15);
}

TEST(BuildInclusion, DiagonalSubalgebra) {
  Inclusion inc = c2_in_m2();
  EXPECT_EQ(inc.big.dims, std::vector<int>{2});
  Element y = testing::diag_element(inc.small, {{2}, {-3}});
  EXPECT_LT((inc.embed(y) - testing::diag_element(inc.big, {{2, -3}})).max_abs(), 1e-15);
}

TEST(BuildInclusion, CInC2) {
  Inclusion inc = c_in_c2();
  EXPECT_EQ(inc.big.dims, (std::vector<int>{1, 1}));
  EXPECT_NEAR(inc.trace_small.weights[0], 1.0, 1e-15);
  EXPECT_LT((inc.embed(Element::identity(inc.small)) - Element::identity(inc.big)).max_abs(), 1e-15);
}

TEST(BuildInclusion, RejectsMalformedData) {
  EXPECT_THROW(build_inclusion({1}, {{2}, {1}}, TraceSpec::explicit_weights({0.5})), ShapeError);
  EXPECT_THROW(build_inclusion({1}, {{0}}, TraceSpec::explicit_weights({0.5})), ShapeError);
  EXPECT_THROW(build_inclusion({1, 1}, {{1, 0}, {1, 0}}, TraceSpec::explicit_weights({0.5, 0.5})), ShapeError);
  EXPECT_THROW(build_inclusion({1}, {{2}}, TraceSpec::explicit_weights({0.5, 0.5})), ShapeError);
  EXPECT_THROW(build_inclusion({1}, {{2}}, TraceSpec::explicit_weights({-0.5})), Error);
  // Two disconnected components have no faithful Markov trace.
  EXPECT_THROW(build_inclusion({1, 1}, {{1, 1, 0}, {0, 0, 1}}, TraceSpec::markov_trace()), Error);
}

TEST(BuildInclusion, DimensionAndTraceCompatibility) {
  for (const Inclusion& inc : zoo()) {
    for (int l = 0; l < inc.L(); ++l) {
      int m = 0;
      for (int k = 0; k < inc.K(); ++k) m += inc.small.dims[k] * inc.a(k, l);
      EXPECT_EQ(m, inc.big.dims[l]);
    }
    for (int k = 0; k < inc.K(); ++k) {
      double s = 0;
      for (int l = 0; l < inc.L(); ++l) s += inc.a(k, l) * inc.trace_big.weights[l];
      EXPECT_NEAR(s, inc.trace_small.weights[k], 1e-12);
    }
  }
}

TEST(Embedding, UnitalStarHomomorphism) {
  for (const Inclusion& inc : zoo()) {
    EXPECT_LT((inc.embed(Element::identity(inc.small)) - Element::identity(inc.big)).max_abs(), 1e-12);
    std::vector<Element> u = matrix_units(inc.small);
    for (const Element& a : u) {
      EXPECT_LT((inc.embed(a.adjoint()) - inc.embed(a).adjoint()).max_abs(), 1e-12);
      EXPECT_NEAR(inc.tau(inc.embed(a)).real(), inc.tau_small(a).real(), 1e-12);
      for (const Element& b : u) EXPECT_LT((inc.embed(a * b) - inc.embed(a) * inc.embed(b)).max_abs(), 1e-12);
    }
  }
}

TEST(ConditionalExpectation, IdempotentOnSubalgebra) {
  for (const Inclusion& inc : zoo()) {
    Element y = random_element(5, inc.small);
    EXPECT_LT((inc.cond_exp(inc.embed(y)) - y).max_abs(), 1e-12);
  }
}

TEST(ConditionalExpectation, CInM2IsTheTrace) {
  Inclusion inc = c_in_m2();
  Element x = random_element(11, inc.big);
  cd oracle = 0.5 * x.block(0).trace();
  EXPECT_LT(std::abs(inc.cond_exp(x).block(0)(0, 0) - oracle), 1e-14);
}

TEST(ConditionalExpectation, DiagonalIsPinching) {
  Inclusion inc = c2_in_m2();
  Element x = random_element(12, inc.big);
  Element e = inc.cond_exp(x);
  EXPECT_LT(std::abs(e.block(0)(0, 0) - x.block(0)(0, 0)), 1e-14);
  EXPECT_LT(std::abs(e.block(1)(0, 0) - x.block(0)(1, 1)), 1e-14);
}

TEST(ConditionalExpectation, BimodularAndTracePreserving) {
  for (const Inclusion& inc : zoo()) {
    Element x = random_element(13, inc.big);
    Element a = random_element(14, inc.small), b = random_element(15, inc.small);
    Element lhs = inc.cond_exp(inc.embed(a) * x * inc.embed(b));
    EXPECT_LT((lhs - a * inc.cond_exp(x) * b).max_abs(), 1e-12);
    EXPECT_NEAR(std::abs(inc.tau_small(inc.cond_exp(x)) - inc.tau(x)), 0.0, 1e-12);
    EXPECT_TRUE(is_positive(inc.cond_exp(random_positive(16, inc.big))));
  }
}

TEST(PimsnerPopa, ExplicitBasisForCInM2) {
  Inclusion inc = c_in_m2();
  std::vector<Element> basis;
  for (const Element& u : matrix_units(inc.big)) basis.push_back(std::sqrt(2.0) * u);
  EXPECT_LT(pp_reconstruction_residual(inc, basis), 1e-12);
  EXPECT_NEAR(index_from_basis(inc, basis), 4.0, 1e-12);
}

TEST(PimsnerPopa, ExplicitBasisForDiagonal) {
  Inclusion inc = c2_in_m2();
  // Each e_ij with tau(e_ij^* e_ij) = 1/2 and s = (1/2, 1/2).
  std::vector<Element> basis = matrix_units(inc.big);
  EXPECT_LT(pp_reconstruction_residual(inc, basis), 1e-12);
  EXPECT_NEAR(index_from_basis(inc, basis), 2.0, 1e-12);
}

TEST(PimsnerPopa, ExplicitBasisForCInC2) {
  double t1 = 1.0 / 3, t2 = 2.0 / 3;
  Inclusion inc = c_in_c2(t1);
  std::vector<Element> basis{(1 / std::sqrt(t1)) * Element::unit(inc.big, 0, 0, 0),
                             (1 / std::sqrt(t2)) * Element::unit(inc.big, 1, 0, 0)};
  EXPECT_LT(pp_reconstruction_residual(inc, basis), 1e-12);
  EXPECT_NEAR(index_from_basis(inc, basis), 2.0, 1e-12);
}

TEST(PimsnerPopa, LibraryBasisReconstructs) {
  for (const Inclusion& inc : zoo()) EXPECT_LT(pp_reconstruction_residual(inc, pp_basis(inc)), 1e-9);
}

TEST(JonesIndex, WorkedInstances) {
  EXPECT_NEAR(jones_index(c_in_m2()), 4.0, 1e-12);
  EXPECT_NEAR(jones_index(c2_in_m2()), 2.0, 1e-12);
  for (double t1 : {0.1, 1.0 / 3, 0.5, 0.9}) EXPECT_NEAR(jones_index(c_in_c2(t1)), 2.0, 1e-12);
}

TEST(JonesIndex, MarkovTraceGivesSquaredNormOfAdjacency) {
  for (auto [n, a] : std::vector<std::pair<std::vector<int>, Adjacency>>{
           {{1, 2}, {{1, 0}, {1, 1}}}, {{1, 1}, {{1, 1, 0}, {0, 1, 1}}}, {{2, 1}, {{1, 2}, {3, 0}}}}) {
    Inclusion inc = build_inclusion(n, a, TraceSpec::markov_trace());
    Eigen::MatrixXd A(a.size(), a[0].size());
    for (size_t k = 0; k < a.size(); ++k)
      for (size_t l = 0; l < a[0].size(); ++l) A(k, l) = a[k][l];
    double norm = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
    EXPECT_NEAR(inc.index, norm * norm, 1e-10);
    EXPECT_NEAR(inc.trace_big.total(inc.big), 1.0, 1e-12);
  }
}

TEST(RelativeCommutant, Dimensions) {
  EXPECT_EQ(relative_commutant(c_in_m2()).basis.size(), 4u);
  EXPECT_EQ(relative_commutant(c2_in_m2()).basis.size(), 2u);
  // dim N' cap M = sum_kl a_kl^2.
  Inclusion inc = build_inclusion({1, 2}, {{2}, {1}}, TraceSpec::explicit_weights({0.25}));
  EXPECT_EQ(relative_commutant(inc).basis.size(), 5u);
}

TEST(RelativeCommutant, DiagonalCommutantIsDiagonal) {
  Inclusion inc = c2_in_m2();
  for (const Element& b : relative_commutant(inc).basis) {
    EXPECT_LT(std::abs(b.block(0)(0, 1)), 1e-12);
    EXPECT_LT(std::abs(b.block(0)(1, 0)), 1e-12);
  }
}

TEST(RelativeCommutant, BasisCommutesAndIsOrthonormal) {
  for (const Inclusion& inc : zoo()) {
    RelativeCommutant rc = relative_commutant(inc);
    for (const Element& b : rc.basis)
      for (const Element& y : matrix_units(inc.small)) {
        Element e = inc.embed(y);
        EXPECT_LT((b * e - e * b).max_abs(), 1e-10);
      }
    for (size_t i = 0; i < rc.basis.size(); ++i)
      for (size_t j = 0; j < rc.basis.size(); ++j)
        EXPECT_NEAR(std::abs(inc.tau(rc.basis[j].adjoint() * rc.basis[i]) - (i == j ? 1.0 : 0.0)), 0.0, 1e-10);
  }
}

TEST(RelativeCommutant, CentralProjectionTrace) {
  Inclusion inc = c_in_m2();
  RelativeCommutant rc = relative_commutant(inc);
  ASSERT_EQ(rc.central.size(), 1u);
  EXPECT_NEAR(rc.central[0].trace, 1.0, 1e-15);
  EXPECT_NEAR(inc.tau(rc.central[0].projection).real(), 1.0, 1e-15);
  for (const Inclusion& i2 : zoo())
    for (const auto& c : relative_commutant(i2).central)
      EXPECT_NEAR(i2.tau(c.projection).real(), c.trace, 1e-12);
}

TEST(RelativeCommutant, ConditionalExpectationOntoIt) {
  Inclusion inc = c2_in_m2();
  Element x = random_element(21, inc.big);
  Element e = cond_exp_relative_commutant(inc, x);
  EXPECT_LT(std::abs(e.block(0)(0, 1)), 1e-12);
  EXPECT_LT(std::abs(e.block(0)(0, 0) - x.block(0)(0, 0)), 1e-12);
}

}  // namespace
}  // namespace fdvn
