#pragma once

// Jones tower for a finite inclusion N in M: standard form L^2(M), basic
// construction M_1, the relative tensor product model of L^2(M_1), the
// algebra M' cap M_2 with its trace, the operators Delta and Delta_0, and one
// downward floor.

#include "fdvn/inclusion.hpp"

#include <optional>

namespace fdvn {

// L^2(M, tau) in the orthonormal basis e_ij / sqrt(t_l), ordered like vec().
struct StandardForm {
  Inclusion inc;
  int D = 0;
  RVec scale;  // sqrt(t_l) per coordinate
  Vec omega;
  Antilinear J;
  Mat eN;
  UnitSystem left_units;    // M acting on the left
  UnitSystem right_units;   // N acting on the right

  Vec vector_of(const Element& x) const { return scale.cast<cd>().asDiagonal() * x.vec(); }
  Element element_of(const Vec& v) const {
    return Element::from_vec(inc.big, scale.cwiseInverse().cast<cd>().asDiagonal() * v);
  }
  // Block-constant scaling commutes with left and right multiplication.
  Mat left(const Element& x) const { return lmul_matrix(x); }
  Mat right(const Element& x) const { return rmul_matrix(x); }
  Mat right_small(const Element& y) const { return rmul_matrix(inc.embed(y)); }
  // Vector state of Omega; equals tau_M on left multiplications.
  cd omega_state(const Mat& t) const { return omega.dot(t * omega); }
  // Element x of M with left(x) = t, read off from t Omega.
  Element left_element(const Mat& t) const { return element_of(t * omega); }
};

inline StandardForm standard_form(const Inclusion& inc) {
  StandardForm sf;
  sf.inc = inc;
  sf.D = inc.big.lin_dim();
  sf.scale = inc.trace_big.vec_weights(inc.big).cwiseSqrt();
  sf.omega = sf.vector_of(Element::identity(inc.big));
  Mat P = Mat::Zero(sf.D, sf.D);
  for (int l = 0; l < inc.L(); ++l) {
    int m = inc.big.dims[l], off = inc.big.vec_offset(l);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) P(off + i * m + j, off + j * m + i) = 1.0;
  }
  sf.J = Antilinear{P};
  Mat S = sf.scale.cast<cd>().asDiagonal();
  Mat Sinv = sf.scale.cwiseInverse().cast<cd>().asDiagonal();
  sf.eN = S * inc.embed_mat * inc.cond_exp_mat * Sinv;
  sf.left_units = unit_system(inc.big, [](const Element& x) { return lmul_matrix(x); });
  sf.right_units = unit_system(inc.small, [&](const Element& y) { return rmul_matrix(inc.embed(y)); });
  return sf;
}

struct BasicConstruction {
  double delta = 0;
  Mat Q;                 // tau_M1(z) = Tr(Q z)
  Projector to_M1;       // conditional expectation onto M_1 = (right N)'
  Element h;             // h_{M1,M} in Z(M)
  double h_residual = 0;

  double tau_M1(const Mat& z) const { return (Q * z).trace().real(); }
  cd tau_M1_c(const Mat& z) const { return (Q * z).trace(); }
};

inline BasicConstruction basic_construction(const StandardForm& sf) {
  const Inclusion& inc = sf.inc;
  BasicConstruction bc;
  bc.delta = inc.delta;
  bc.Q = Mat::Zero(sf.D, sf.D);
  for (const Element& eta : inc.pp) {
    Vec v = sf.vector_of(eta);
    bc.Q += v * v.adjoint();
  }
  bc.Q /= inc.index;
  bc.to_M1 = commutant_projector({sf.right_units});
  // tau_M(h x) = tau_M1(x) for x in M, h central.
  std::vector<Element> units = matrix_units(inc.big);
  Mat A(units.size(), inc.L());
  Vec b(units.size());
  for (size_t u = 0; u < units.size(); ++u) {
    for (int l = 0; l < inc.L(); ++l) A(u, l) = inc.tau(Element::central(inc.big, l) * units[u]);
    b(u) = bc.tau_M1_c(sf.left(units[u]));
  }
  Vec h = A.colPivHouseholderQr().solve(b);
  bc.h_residual = (A * h - b).cwiseAbs().maxCoeff();
  Element hz = Element::zero(inc.big);
  for (int l = 0; l < inc.L(); ++l) hz = hz + h(l) * Element::central(inc.big, l);
  bc.h = hz;
  return bc;
}

// Conditional expectation M_1 -> M for tau_M1, with z an operator on L^2(M).
inline Element cond_exp_M1_to_M(const StandardForm& sf, const BasicConstruction& bc, const Mat& z) {
  std::vector<Element> units = matrix_units(sf.inc.big);
  int n = static_cast<int>(units.size());
  Mat G(n, n);
  Vec r(n);
  std::vector<Mat> L;
  for (const Element& u : units) L.push_back(sf.left(u));
  for (int a = 0; a < n; ++a) {
    r(a) = bc.tau_M1_c(L[a].adjoint() * z);
    for (int c = 0; c < n; ++c) G(a, c) = bc.tau_M1_c(L[a].adjoint() * L[c]);
  }
  return Element::from_vec(sf.inc.big, G.colPivHouseholderQr().solve(r));
}

// L^2(M) (x)_N L^2(M), generated by e_a Omega (x) e_b Omega over matrix units.
struct RelTensorSpace {
  int D = 0;
  int G = 0;
  GramModel model;
  Mat vN;      // yOmega |-> Omega (x) yOmega
  Mat uN;      // xi |-> xi (x) Omega
  Vec omega2;  // Omega (x) Omega
  Mat eN;      // e_N acting on the first factor
  UnitSystem left_units, right_units;
  double ident_residual = 0;

  int dim() const { return model.dim(); }
  Mat lift_op(const Mat& lift) const { return model.op_from_lift(lift); }
  Mat left(const Element& x) const {
    return model.op_from_lift(kron(lmul_matrix(x), Mat::Identity(D, D)));
  }
  Mat right(const Element& x) const {
    return model.op_from_lift(kron(Mat::Identity(D, D), rmul_matrix(x)));
  }
  Vec vector_of(const Element& x, const Element& y) const { return model.coords_of(kron_vec(x.vec(), y.vec())); }
};

inline RelTensorSpace rel_tensor(const StandardForm& sf, const BasicConstruction& bc,
                                 double tol = kDefaultTol) {
  const Inclusion& inc = sf.inc;
  const Algebra& M = inc.big;
  RelTensorSpace rt;
  rt.D = sf.D;
  rt.G = sf.D * sf.D;
  int D = sf.D;
  // G(a, b) = <g_b, g_a> = tau(y_a^* E(x_a^* x_b) y_b).
  std::vector<std::vector<Element>> Y(inc.L());
  for (int l = 0; l < inc.L(); ++l)
    for (int j = 0; j < M.dims[l]; ++j)
      for (int jp = 0; jp < M.dims[l]; ++jp)
        Y[l].push_back(inc.embed(inc.cond_exp(Element::unit(M, l, j, jp))));
  Mat gram = Mat::Zero(rt.G, rt.G);
  for (int l = 0; l < inc.L(); ++l) {
    int m = M.dims[l], ol = M.vec_offset(l);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int jp = 0; jp < m; ++jp) {
          int aa = ol + j * m + i, ab = ol + jp * m + i;
          const Element& y = Y[l][j * m + jp];
          for (int p = 0; p < inc.L(); ++p) {
            int mp = M.dims[p], op = M.vec_offset(p);
            double tp = inc.trace_big.weights[p];
            for (int s = 0; s < mp; ++s)
              for (int r = 0; r < mp; ++r)
                for (int rp = 0; rp < mp; ++rp) {
                  cd v = tp * y.block(p)(r, rp);
                  if (v == cd(0)) continue;
                  gram(aa * D + op + s * mp + r, ab * D + op + s * mp + rp) = v;
                }
          }
        }
  }
  rt.model = GramModel(gram, tol);

  Element one = Element::identity(M);
  rt.omega2 = rt.vector_of(one, one);
  rt.vN.resize(rt.dim(), D);
  rt.uN.resize(rt.dim(), D);
  std::vector<Element> units = matrix_units(M);
  for (int b = 0; b < D; ++b) {
    rt.vN.col(b) = rt.vector_of(one, units[b]) / sf.scale(b);
    rt.uN.col(b) = rt.vector_of(units[b], one) / sf.scale(b);
  }
  rt.eN = rt.model.op_from_lift(kron(inc.embed_mat * inc.cond_exp_mat, Mat::Identity(D, D)));
  rt.left_units = unit_system(M, [&](const Element& x) { return rt.left(x); });
  rt.right_units = unit_system(M, [&](const Element& x) { return rt.right(x); });

  // delta x e_N y Omega_{M1} |-> x Omega (x) y Omega must preserve inner products.
  Mat R = mat_fn(bc.Q, fn::sqrt());
  Mat V(D * D, rt.G);
  for (int a = 0; a < D; ++a) {
    Mat La = sf.left(units[a]) * sf.eN;
    for (int b = 0; b < D; ++b) {
      Mat z = La * sf.left(units[b]) * R;
      V.col(a * D + b) = Eigen::Map<const Vec>(z.data(), z.size());
    }
  }
  rt.ident_residual = max_abs(inc.index * (V.adjoint() * V) - gram);
  return rt;
}

struct TowerOperators {
  Mat Q2;               // tau_M2(z) = Tr(Q2 z)
  Projector to_end;     // conditional expectation onto M' cap M_2
  Mat eM;               // Jones projection of M in M_1, on H
  Mat eM_embed;         // columns: ident(x Omega_{M1}) for matrix units x
  Mat Delta;            // on L^2(M)
  Mat Delta_H;          // Delta (x) 1 on H
  Element Delta0;       // by the defining trace identity
  Element Delta0_closed;
  double delta_lift_residual = 0;
  double delta_solve_residual = 0;
  double delta0_solve_residual = 0;
  std::vector<Mat> MprimeM1;  // basis of M' cap M_1 on L^2(M)

  double tau_M2(const Mat& z) const { return (Q2 * z).trace().real(); }
  cd tau_M2_c(const Mat& z) const { return (Q2 * z).trace(); }
};

// tau_{N'}(z') = tau_M1(J z' J) for z' in N' cap M acting on the left.
inline double tau_Nprime(const StandardForm& sf, const BasicConstruction& bc, const Element& x) {
  return bc.tau_M1(sf.J.conjugate_op(sf.left(x)));
}

inline Element delta0_closed_form(const Inclusion& inc) {
  Element d = Element::zero(inc.big);
  for (int k = 0; k < inc.K(); ++k)
    for (int l = 0; l < inc.L(); ++l)
      if (inc.a(k, l) > 0) {
        double c = inc.trace_small.weights[k] * inc.big.dims[l] /
                   (inc.index * inc.small.dims[k] * inc.trace_big.weights[l]);
        d = d + c * inc.central_projection(k, l);
      }
  return d;
}

inline TowerOperators end_MM_and_tau_M2(const StandardForm& sf, const RelTensorSpace& rt) {
  const Inclusion& inc = sf.inc;
  TowerOperators ops;
  int d = rt.dim();
  ops.Q2 = Mat::Zero(d, d);
  Element one = Element::identity(inc.big);
  for (const Element& eta : inc.pp) {
    Vec v = rt.vector_of(eta, one);
    ops.Q2 += v * v.adjoint();
  }
  ops.Q2 /= inc.index;
  ops.to_end = commutant_projector({rt.left_units, rt.right_units});

  // Range of e_M: ident(x Omega_{M1}) = delta^{-1} sum_j x eta_j (x) eta_j^*.
  std::vector<Element> units = matrix_units(inc.big);
  ops.eM_embed.resize(d, units.size());
  for (size_t u = 0; u < units.size(); ++u) {
    Vec w = Vec::Zero(rt.G);
    for (const Element& eta : inc.pp) w += kron_vec((units[u] * eta).vec(), eta.adjoint().vec());
    ops.eM_embed.col(u) = rt.model.coords_of(w) / inc.delta;
  }
  Eigen::HouseholderQR<Mat> qr(ops.eM_embed);
  Mat q = qr.householderQ() * Mat::Identity(d, units.size());
  ops.eM = q * q.adjoint();
  return ops;
}

inline void delta_and_delta0(const StandardForm& sf, const BasicConstruction& bc,
                             const RelTensorSpace& rt, TowerOperators& ops,
                             double tol = kDefaultTol) {
  const Inclusion& inc = sf.inc;
  int D = sf.D;
  // Delta in M' cap M_1: tau_M1(Delta z) = tau_M(J z^* J).
  Projector p = commutant_projector({sf.left_units, sf.right_units});
  ops.MprimeM1 = range_basis(p, D, 11);
  int n = static_cast<int>(ops.MprimeM1.size());
  Mat A(n, n);
  Vec b(n);
  for (int k = 0; k < n; ++k) {
    const Mat& z = ops.MprimeM1[k];
    b(k) = sf.omega_state(sf.J.conjugate_op(z.adjoint()));
    for (int i = 0; i < n; ++i) A(k, i) = bc.tau_M1_c(ops.MprimeM1[i] * z);
  }
  Vec c = A.colPivHouseholderQr().solve(b);
  ops.delta_solve_residual = (A * c - b).cwiseAbs().maxCoeff();
  ops.Delta = Mat::Zero(D, D);
  for (int i = 0; i < n; ++i) ops.Delta += c(i) * ops.MprimeM1[i];
  ops.Delta = hermitian_part(ops.Delta);
  if (!mat_is_positive(ops.Delta, tol)) throw NumericalError("Delta is not positive");

  Mat Sinv = sf.scale.cwiseInverse().cast<cd>().asDiagonal();
  Mat S = sf.scale.cast<cd>().asDiagonal();
  Mat lift = kron(Sinv * ops.Delta * S, Mat::Identity(D, D));
  ops.delta_lift_residual = rt.model.lift_residual(lift);
  ops.Delta_H = hermitian_part(rt.model.op_from_lift(lift));

  // Delta_0 in N' cap M: tau_M(Delta_0 x) = tau_{N'}(x).
  RelativeCommutant rc = relative_commutant(inc, tol);
  int r = static_cast<int>(rc.basis.size());
  Mat B(r, r);
  Vec rhs(r);
  for (int k = 0; k < r; ++k) {
    rhs(k) = bc.tau_M1_c(sf.J.conjugate_op(sf.left(rc.basis[k])));
    for (int i = 0; i < r; ++i) B(k, i) = inc.tau(rc.basis[i] * rc.basis[k]);
  }
  Vec e = B.colPivHouseholderQr().solve(rhs);
  ops.delta0_solve_residual = (B * e - rhs).cwiseAbs().maxCoeff();
  Element d0 = Element::zero(inc.big);
  for (int i = 0; i < r; ++i) d0 = d0 + e(i) * rc.basis[i];
  ops.Delta0 = 0.5 * (d0 + d0.adjoint());
  ops.Delta0_closed = delta0_closed_form(inc);
}

// ---------------------------------------------------------------------------
// Aggregate

struct Tower {
  StandardForm sf;
  BasicConstruction bc;
  RelTensorSpace rt;
  TowerOperators ops;

  const Inclusion& inc() const { return sf.inc; }
  double delta() const { return sf.inc.delta; }
  // z (x) 1 on H for an operator z on L^2(M) commuting with the right N-action.
  Mat lift_M1(const Mat& z) const {
    Mat Sinv = sf.scale.cwiseInverse().cast<cd>().asDiagonal();
    Mat S = sf.scale.cast<cd>().asDiagonal();
    return rt.model.op_from_lift(kron(Sinv * z * S, Mat::Identity(sf.D, sf.D)));
  }
  Mat Delta_H_pow(double p) const { return mat_fn(ops.Delta_H, fn::power(p)); }
};

inline Tower build_tower(const Inclusion& inc, double tol = kDefaultTol) {
  Tower t;
  t.sf = standard_form(inc);
  t.bc = basic_construction(t.sf);
  t.rt = rel_tensor(t.sf, t.bc, tol);
  t.ops = end_MM_and_tau_M2(t.sf, t.rt);
  delta_and_delta0(t.sf, t.bc, t.rt, t.ops, tol);
  return t;
}

// ---------------------------------------------------------------------------
// Downward basic construction

struct DownwardCriterion {
  bool holds = true;
  std::vector<std::pair<int, int>> witness;  // violating (k, l)
};

inline DownwardCriterion downward_criterion(const Inclusion& inc) {
  DownwardCriterion c;
  for (int k = 0; k < inc.K(); ++k)
    for (int l = 0; l < inc.L(); ++l)
      if (inc.a(k, l) > inc.small.dims[k]) {
        c.holds = false;
        c.witness.push_back({k, l});
      }
  return c;
}

// N_{-1} in N in M with M the basic construction of N_{-1} in N.
struct Downward {
  Inclusion base;   // N_{-1} in N
  Inclusion inc;    // N in M
  Element e_minus1; // Jones projection of N_{-1}, as an element of M
  StandardForm base_sf;
  std::vector<double> closed_weights;  // delta_{-1}^{-2} s_k
  double embed_residual = 0;           // iota(embed(y)) against left(y) on L^2(N)

  // iota: M -> operators on L^2(N).
  Mat iota(const Element& X) const {
    const Algebra& Nalg = base.big;
    int D = Nalg.lin_dim();
    Mat T = Mat::Zero(D, D);
    for (int k = 0; k < base.K(); ++k) {
      int nk = base.small.dims[k];
      for (int l = 0; l < base.L(); ++l)
        for (int c = 0; c < base.a(k, l); ++c)
          for (int i = 0; i < Nalg.dims[l]; ++i)
            for (int lp = 0; lp < base.L(); ++lp)
              for (int cp = 0; cp < base.a(k, lp); ++cp)
                for (int ip = 0; ip < Nalg.dims[lp]; ++ip) {
                  cd v = X.block(k)(row(k, l, c, i), row(k, lp, cp, ip));
                  if (v == cd(0)) continue;
                  for (int j = 0; j < nk; ++j)
                    T(coord(l, i, base.segment_offset(l, k, c) + j),
                      coord(lp, ip, base.segment_offset(lp, k, cp) + j)) = v;
                }
    }
    return T;
  }
  // Inverse of iota on operators commuting with the right N_{-1}-action.
  Element iota_inverse(const Mat& T) const {
    std::vector<Mat> blocks;
    const Algebra& Nalg = base.big;
    for (int k = 0; k < base.K(); ++k) {
      int Mk = inc.big.dims[k];
      Mat X = Mat::Zero(Mk, Mk);
      for (int l = 0; l < base.L(); ++l)
        for (int c = 0; c < base.a(k, l); ++c)
          for (int i = 0; i < Nalg.dims[l]; ++i)
            for (int lp = 0; lp < base.L(); ++lp)
              for (int cp = 0; cp < base.a(k, lp); ++cp)
                for (int ip = 0; ip < Nalg.dims[lp]; ++ip)
                  X(row(k, l, c, i), row(k, lp, cp, ip)) =
                      T(coord(l, i, base.segment_offset(l, k, c)),
                        coord(lp, ip, base.segment_offset(lp, k, cp)));
      blocks.push_back(X);
    }
    return Element(inc.big, std::move(blocks));
  }
  // Composite embedding N_{-1} -> M.
  Element embed_bottom(const Element& z) const { return inc.embed(base.embed(z)); }

 private:
  int row(int k, int l, int c, int i) const { return inc.segment_offset(k, l, c) + i; }
  int coord(int l, int i, int q) const {
    int n = base.big.dims[l];
    return base.big.vec_offset(l) + q * n + i;
  }
};

inline Downward extend_upward(const Inclusion& base) {
  Downward dw;
  dw.base = base;
  dw.base_sf = standard_form(base);
  BasicConstruction bc0 = basic_construction(dw.base_sf);
  int K0 = base.K(), L0 = base.L();
  Adjacency up(L0, std::vector<int>(K0));
  for (int k = 0; k < K0; ++k)
    for (int l = 0; l < L0; ++l) up[l][k] = base.a(k, l);
  // Provisional inclusion fixes the layout; weights come from tau_{N_1}.
  std::vector<double> ones(K0, 1.0);
  dw.inc = build_inclusion(base.big.dims, up, TraceSpec::explicit_weights(ones));
  std::vector<double> t(K0);
  for (int k = 0; k < K0; ++k) {
    t[k] = bc0.tau_M1(dw.iota(Element::unit(dw.inc.big, k, 0, 0)));
    dw.closed_weights.push_back(base.trace_small.weights[k] / base.index);
  }
  dw.inc = build_inclusion(base.big.dims, up, TraceSpec::explicit_weights(t));
  dw.e_minus1 = dw.iota_inverse(dw.base_sf.eN);
  for (const Element& y : matrix_units(base.big))
    dw.embed_residual = std::max(dw.embed_residual,
                                 max_abs(dw.iota(dw.inc.embed(y)) - dw.base_sf.left(y)));
  return dw;
}

// Temperley-Lieb residuals: e_{-1} e_N e_{-1} - delta^{-2} e_{-1} on L^2(M) and
// e_N e_M e_N - delta^{-2} e_N on H.
struct TemperleyLieb {
  double lower = 0;
  double upper = 0;
};

inline TemperleyLieb temperley_lieb(const Tower& t, const Element& e_minus1) {
  double d2 = t.inc().index;
  Mat e = t.sf.left(e_minus1);
  Mat eN = t.sf.eN;
  TemperleyLieb r;
  r.lower = max_abs(e * eN * e - e / d2);
  r.upper = max_abs(t.rt.eN * t.ops.eM * t.rt.eN - t.rt.eN / d2);
  return r;
}

struct ShiftInverse {
  Element y;
  double residual = 0;       // || RHS - y e_M ||
  double membership = 0;     // commutation with N_{-1}
};

// gamma^{-1}(x) for x in M' cap M_2, from y e_M = delta^4 e_M e_N e_{-1} x e_{-1} e_N e_M.
inline ShiftInverse shift_inverse(const Tower& t, const Downward& dw, const Mat& x) {
  double d = t.delta();
  Mat eM = t.ops.eM, eN = t.rt.eN, em1 = t.rt.left(dw.e_minus1);
  Mat rhs = std::pow(d, 4) * eM * eN * em1 * x * em1 * eN * eM;
  Vec w1 = t.ops.eM_embed * Element::identity(t.inc().big).vec();
  Vec target = rhs * w1;
  Vec c = t.ops.eM_embed.colPivHouseholderQr().solve(target);
  ShiftInverse s;
  s.y = Element::from_vec(t.inc().big, c);
  s.residual = max_abs(rhs - t.rt.left(s.y) * eM);
  for (const Element& z : matrix_units(dw.base.small)) {
    Element ez = dw.embed_bottom(z);
    s.membership = std::max(s.membership, (s.y * ez - ez * s.y).max_abs());
  }
  return s;
}

// Trace-preserving conditional expectation of M onto N' cap M.
inline Element cond_exp_relative_commutant(const Inclusion& inc, const Element& x) {
  RelativeCommutant rc = relative_commutant(inc);
  Element out = Element::zero(inc.big);
  for (const Element& b : rc.basis) out = out + inc.tau(b.adjoint() * x) * b;
  return out;
}

}  // namespace fdvn
