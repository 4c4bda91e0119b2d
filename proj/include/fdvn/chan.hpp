#pragma once

// Completely positive maps between multi-matrix algebras: Choi test, Fourier
// multipliers of bimodule maps, majorization, lambda, GNS correspondences,
// derivatives and the convolution isometry.

#include "fdvn/tower.hpp"

namespace fdvn {

// Linear map A -> B stored as a matrix on vec() coordinates.
struct LinearMap {
  Algebra src, dst;
  Mat mat;

  Element operator()(const Element& x) const {
    if (x.algebra() != src) throw ShapeError("map applied outside its source algebra");
    return Element::from_vec(dst, mat * x.vec());
  }

  static LinearMap identity(const Algebra& a) {
    return {a, a, Mat::Identity(a.lin_dim(), a.lin_dim())};
  }
  template <class F>
  static LinearMap from_function(const Algebra& src, const Algebra& dst, F f) {
    LinearMap m{src, dst, Mat(dst.lin_dim(), src.lin_dim())};
    std::vector<Element> units = matrix_units(src);
    for (size_t u = 0; u < units.size(); ++u) m.mat.col(u) = f(units[u]).vec();
    return m;
  }

  friend LinearMap operator+(const LinearMap& a, const LinearMap& b) {
    if (a.src != b.src || a.dst != b.dst) throw ShapeError("adding maps with different shapes");
    return {a.src, a.dst, a.mat + b.mat};
  }
  friend LinearMap operator*(double c, const LinearMap& a) { return {a.src, a.dst, c * a.mat}; }
};

// outer o inner.
inline LinearMap compose(const LinearMap& outer, const LinearMap& inner) {
  if (inner.dst != outer.src) throw ShapeError("composition of incompatible maps");
  return {inner.src, outer.dst, outer.mat * inner.mat};
}

inline LinearMap cond_exp_map(const Inclusion& inc) {
  return {inc.big, inc.big, inc.embed_mat * inc.cond_exp_mat};
}

inline LinearMap transpose_map(const Algebra& a) {
  return LinearMap::from_function(a, a, [](const Element& x) {
    std::vector<Mat> b;
    for (const Mat& m : x.blocks()) b.push_back(m.transpose());
    return Element(x.algebra(), std::move(b));
  });
}

// x |-> c Phi(x) c^*.
inline LinearMap sandwich(const Element& c, const LinearMap& phi) {
  return {phi.src, phi.dst, lmul_matrix(c) * rmul_matrix(c.adjoint()) * phi.mat};
}

// x |-> P(sum_i K_i x K_i^*) with dense Kraus operators and P the pinching onto B.
inline LinearMap kraus_map(const Algebra& src, const Algebra& dst, const std::vector<Mat>& kraus) {
  return LinearMap::from_function(src, dst, [&](const Element& x) {
    Mat xd = x.dense();
    Mat y = Mat::Zero(dst.mat_dim(), dst.mat_dim());
    for (const Mat& k : kraus) y += k * xd * k.adjoint();
    return Element::from_dense(dst, y);
  });
}

inline bool is_unital(const LinearMap& f, double tol = 1e-10) {
  return (f(Element::identity(f.src)) - Element::identity(f.dst)).max_abs() <= tol;
}

inline bool is_trace_preserving(const LinearMap& f, const TraceWeights& ts, const TraceWeights& td,
                                double tol = 1e-10) {
  for (const Element& u : matrix_units(f.src))
    if (std::abs(trace(td, f(u)) - trace(ts, u)) > tol) return false;
  return true;
}

// max |Phi(a x b) - a Phi(x) b| over matrix units a, b of N and x of M.
inline double bimodule_residual(const LinearMap& f, const Inclusion& inc) {
  if (f.src != inc.big || f.dst != inc.big) throw ShapeError("bimodule test needs a map M -> M");
  std::vector<Element> ys, xs = matrix_units(inc.big);
  ys.push_back(Element::identity(inc.big));
  for (const Element& y : matrix_units(inc.small)) ys.push_back(inc.embed(y));
  double r = 0;
  for (const Element& x : xs) {
    Element fx = f(x);
    for (const Element& y : ys) {
      r = std::max(r, (f(y * x) - y * fx).max_abs());
      r = std::max(r, (f(x * y) - fx * y).max_abs());
    }
  }
  return r;
}

// Choi matrix [Phi(e_ij)]_{ij} for source block k, as a dense matrix.
inline Mat choi_block(const LinearMap& f, int k) {
  int n = f.src.dims[k], m = f.dst.mat_dim();
  Mat c(n * m, n * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.block(i * m, j * m, m, m) = f(Element::unit(f.src, k, i, j)).dense();
  return c;
}

inline bool choi_cp_test(const LinearMap& f, double tol = kDefaultTol) {
  for (int k = 0; k < f.src.blocks(); ++k)
    if (!mat_is_positive(choi_block(f, k), tol)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Fourier multipliers on H = L^2(M) (x)_N L^2(M)

inline double end_residual(const Tower& t, const Mat& x) {
  return max_abs(x - t.ops.to_end(x)) / std::max(1.0, max_abs(x));
}

// Phi(x) Omega = delta v_N^* (x (x) 1) P Omega (x) Omega.
inline LinearMap from_multiplier(const Mat& P, const Tower& t, double tol = 1e-8) {
  if (P.rows() != t.rt.dim() || P.cols() != t.rt.dim()) throw ShapeError("multiplier has the wrong size");
  if (end_residual(t, P) > tol) throw Error("multiplier is not in M' cap M_2");
  const Algebra& M = t.inc().big;
  Vec w = P * t.rt.omega2;
  return LinearMap::from_function(M, M, [&](const Element& x) {
    return t.sf.element_of(t.delta() * (t.rt.vN.adjoint() * (t.rt.left(x) * w)));
  });
}

inline Mat fourier_multiplier(const LinearMap& phi, const Tower& t, double tol = 1e-8) {
  const Inclusion& inc = t.inc();
  double scale = std::max(1.0, phi.mat.cwiseAbs().maxCoeff());
  if (bimodule_residual(phi, inc) > tol * scale) throw Error("map is not N-bimodular");
  int D = t.sf.D;
  Mat lift = Mat::Zero(D * D, D * D);
  for (const Element& eta : inc.pp) lift += kron(rmul_matrix(eta), lmul_matrix(phi(eta.adjoint())));
  lift /= t.delta();
  Mat X = t.rt.model.op_from_lift(lift);
  if (end_residual(t, X) > tol) throw NumericalError("Fourier multiplier left M' cap M_2");
  LinearMap back = from_multiplier(X, t, 1.0);
  if (max_abs(back.mat - phi.mat) > tol * scale)
    throw NumericalError("Fourier multiplier round trip failed");
  return X;
}

// omega_N(P) = <P Omega (x) Omega, Omega (x) Omega>.
inline double omega_N(const Tower& t, const Mat& P) {
  return t.rt.omega2.dot(P * t.rt.omega2).real();
}

// Random positive element of M' cap M_2 and the CP bimodule map it defines,
// scaled so that tau(Phi(1)) = 1.
inline Mat random_multiplier(Rng& rng, const Tower& t, int rank = -1) {
  int d = t.rt.dim();
  Mat g = random_ginibre(rng, d, rank > 0 ? rank : d);
  Mat p = hermitian_part(t.ops.to_end(g * g.adjoint()));
  return p / (t.delta() * omega_N(t, p));
}

inline LinearMap random_bimodule_channel(Rng& rng, const Tower& t, bool unital = false) {
  LinearMap phi = from_multiplier(random_multiplier(rng, t), t);
  if (!unital) return phi;
  Element c = fn_calculus(phi(Element::identity(phi.src)), fn::power(-0.5));
  return sandwich(c, phi);
}

// ---------------------------------------------------------------------------
// Majorization and lambda

// supp(a) <= supp(b) for positive matrices.
inline bool support_leq(const Mat& a, const Mat& b, double tol = 1e-6) {
  Mat pa = mat_support(a), pb = mat_support(b);
  int n = static_cast<int>(a.rows());
  return op_norm((Mat::Identity(n, n) - pb) * pa) <= tol;
}

inline bool majorizes_multiplier(const Mat& phi_hat, const Mat& psi_hat, double tol = 1e-6) {
  return support_leq(phi_hat, psi_hat, tol);
}

struct LambdaResult {
  double value = 0;
  bool infinite_by_convention = false;  // supp Phi not under supp Psi
};

// Largest lambda with psi - lambda phi >= 0.
inline LambdaResult lambda_psd(const Mat& phi, const Mat& psi, double tol = 1e-6) {
  if (!support_leq(phi, psi, tol)) return {0.0, true};
  Mat r = mat_fn(psi, fn::power(-0.5));
  double m = eigh(r * phi * r).values.maxCoeff();
  if (m <= 1e-14) return {kInf, false};
  return {1.0 / m, false};
}

inline LambdaResult lambda_multiplier(const Mat& phi_hat, const Mat& psi_hat) {
  return lambda_psd(phi_hat, psi_hat);
}

// General CP maps, blockwise on Choi matrices.
inline LambdaResult lambda_choi(const LinearMap& phi, const LinearMap& psi) {
  LambdaResult out{kInf, false};
  for (int k = 0; k < phi.src.blocks(); ++k) {
    LambdaResult r = lambda_psd(choi_block(phi, k), choi_block(psi, k));
    if (r.infinite_by_convention) return r;
    out.value = std::min(out.value, r.value);
  }
  return out;
}

struct JonesBound {
  double direct = 0;          // delta^2 |Phi(e_{-1})|
  double via_multiplier = 0;  // inf{c : c E_N-hat - Phi-hat >= 0}
};

inline JonesBound jones_norm_bound(const LinearMap& phi, const Tower& t, const Element& e_minus1) {
  JonesBound b;
  b.direct = t.inc().index * op_norm(phi(e_minus1).dense());
  Mat phat = fourier_multiplier(phi, t);
  Mat ehat = fourier_multiplier(cond_exp_map(t.inc()), t);
  LambdaResult l = lambda_psd(phat, ehat);
  b.via_multiplier = l.infinite_by_convention ? kInf : 1.0 / l.value;
  return b;
}

// ---------------------------------------------------------------------------
// GNS correspondences

// H^Psi for Psi: A -> B and phi = tau_B(d .): the Gram quotient of A (x) L^2(B, phi),
// generated by e_a (x) e_b Omega_phi over matrix units.
struct Correspondence {
  LinearMap psi;
  GnsSpace target;  // L^2(B, phi)
  GnsSpace source;  // L^2(A, phi o Psi)
  GramModel model;
  Element d_half, d_inv_half;
  Mat v;       // xi |-> [1 (x) xi]
  Mat u;       // a Omega_{phi Psi} |-> [a (x) Omega_phi]
  Vec omega;   // [1 (x) Omega_phi]
  UnitSystem left_units, right_units;

  int dim() const { return model.dim(); }
  int dA() const { return psi.src.lin_dim(); }
  int dB() const { return psi.dst.lin_dim(); }
  Vec vector_of(const Element& a, const Element& b) const { return model.coords_of(kron_vec(a.vec(), b.vec())); }
  Mat left(const Element& a) const {
    return model.op_from_lift(kron(lmul_matrix(a), Mat::Identity(dB(), dB())));
  }
  // Right action xi . b, which on L^2(B, phi) is x Omega |-> x d^{1/2} b d^{-1/2} Omega.
  Mat right(const Element& b) const {
    return model.op_from_lift(kron(Mat::Identity(dA(), dA()), rmul_matrix(d_half * b * d_inv_half)));
  }
  // Conditional expectation onto End = (pi(A) cup pi'(B))'.
  Mat to_end(const Mat& x) const { return commutant_projector({left_units, right_units})(x); }
  // max |v^* pi(a) v - pi_phi(Psi(a))| over matrix units.
  double dilation_residual() const {
    double r = 0;
    for (const Element& a : matrix_units(psi.src))
      r = std::max(r, max_abs(v.adjoint() * left(a) * v - target.left(psi(a))));
    return r;
  }
};

// Density of phi o Psi with respect to the trace tr_A.
inline Element pullback_density(const LinearMap& psi, const Element& d, const TraceWeights& tr_B,
                                const TraceWeights& tr_A) {
  std::vector<Mat> blocks;
  for (int k = 0; k < psi.src.blocks(); ++k) {
    int n = psi.src.dims[k];
    Mat z(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        z(j, i) = trace(tr_B, d * psi(Element::unit(psi.src, k, i, j))) / tr_A.weights[k];
    blocks.push_back(z);
  }
  Element r(psi.src, std::move(blocks));
  return 0.5 * (r + r.adjoint());
}

inline Correspondence correspondence(const LinearMap& psi, const TraceWeights& tr_B, const Element& d,
                                     const TraceWeights& tr_A, double tol = kDefaultTol) {
  const Algebra& A = psi.src;
  const Algebra& B = psi.dst;
  Correspondence c;
  c.psi = psi;
  c.target = gns_space(B, tr_B, d, tol);
  if (c.target.dim() != B.lin_dim()) throw Error("correspondence needs a faithful state on the target");
  c.source = gns_space(A, tr_A, pullback_density(psi, d, tr_B, tr_A), tol);
  c.d_half = fn_calculus(d, fn::sqrt());
  c.d_inv_half = fn_calculus(d, fn::power(-0.5));

  int dA = A.lin_dim(), dB = B.lin_dim();
  // G(g, g') = <g', g> = t_l Psi(e_a^* e_a')^l(r, r') d^l(s', s) for
  // g = e_a (x) e^l_{rs}, g' = e_a' (x) e^l_{r's'}, with e_a^* e_a' = e_{j j'}.
  Mat gram = Mat::Zero(dA * dB, dA * dB);
  for (int k = 0; k < A.blocks(); ++k) {
    int n = A.dims[k], ok = A.vec_offset(k);
    for (int j = 0; j < n; ++j)
      for (int jp = 0; jp < n; ++jp) {
        Element y = psi(Element::unit(A, k, j, jp));
        for (int i = 0; i < n; ++i) {
          int aa = ok + j * n + i, ab = ok + jp * n + i;
          for (int l = 0; l < B.blocks(); ++l) {
            int m = B.dims[l], ol = B.vec_offset(l);
            double tl = tr_B.weights[l];
            const Mat& yl = y.block(l);
            const Mat& dl = d.block(l);
            for (int s = 0; s < m; ++s)
              for (int sp = 0; sp < m; ++sp)
                for (int r = 0; r < m; ++r)
                  for (int rp = 0; rp < m; ++rp)
                    gram(aa * dB + ol + s * m + r, ab * dB + ol + sp * m + rp) = tl * yl(r, rp) * dl(sp, s);
          }
        }
      }
  }
  Spectrum gs = eigh(gram);
  if (gs.values.size() && gs.values.minCoeff() < -1e-8 * std::max(1.0, gs.values.cwiseAbs().maxCoeff()))
    throw Error("correspondence Gram matrix is not positive: map is not completely positive");
  c.model = GramModel(gram, tol);

  Element oneA = Element::identity(A), oneB = Element::identity(B);
  c.omega = c.vector_of(oneA, oneB);
  std::vector<Element> ub = matrix_units(B), ua = matrix_units(A);
  Mat vim(c.dim(), dB), uim(c.dim(), dA);
  for (int b = 0; b < dB; ++b) vim.col(b) = c.vector_of(oneA, ub[b]);
  for (int a = 0; a < dA; ++a) uim.col(a) = c.vector_of(ua[a], oneB);
  c.v = vim * c.target.model.pinv();
  c.u = uim * c.source.model.pinv();
  c.left_units = unit_system(A, [&](const Element& a) { return c.left(a); });
  c.right_units = unit_system(B, [&](const Element& b) { return c.right(b); });
  return c;
}

struct Derivative {
  Mat h;
  double residual = 0;
  bool unique = false;
  double min_eig = 0;
};

// h in End with Phi(a) = v^* pi(a) h v for all a.
inline Derivative derivative(const LinearMap& phi, const Correspondence& c, double tol = 1e-8) {
  if (phi.src != c.psi.src || phi.dst != c.psi.dst) throw ShapeError("derivative of maps with different shapes");
  std::vector<Mat> basis = range_basis([&](const Mat& x) { return c.to_end(x); }, c.dim(), 5);
  std::vector<Element> ua = matrix_units(phi.src);
  int g = c.target.dim(), n = static_cast<int>(basis.size());
  int rows = static_cast<int>(ua.size()) * g * g;
  Mat sys(rows, n);
  Vec rhs(rows);
  std::vector<Mat> va;
  for (const Element& a : ua) va.push_back(c.v.adjoint() * c.left(a));
  for (size_t a = 0; a < ua.size(); ++a) {
    Mat t = c.target.left(phi(ua[a]));
    rhs.segment(a * g * g, g * g) = Eigen::Map<const Vec>(t.data(), t.size());
    for (int i = 0; i < n; ++i) {
      Mat z = va[a] * basis[i] * c.v;
      sys.block(a * g * g, i, g * g, 1) = Eigen::Map<const Vec>(z.data(), z.size());
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(sys);
  Vec x = cod.solve(rhs);
  Derivative d;
  d.residual = max_abs(sys * x - rhs);
  d.unique = cod.rank() == n;
  double scale = std::max(1.0, max_abs(rhs));
  if (d.residual > tol * scale) throw NumericalError("no derivative: map is not majorized");
  d.h = Mat::Zero(c.dim(), c.dim());
  for (int i = 0; i < n; ++i) d.h += x(i) * basis[i];
  d.h = hermitian_part(d.h);
  d.min_eig = eigh(d.h).values.minCoeff();
  if (d.min_eig < -tol * std::max(1.0, op_norm(d.h))) throw NumericalError("derivative is not positive");
  return d;
}

// H^{Psi2} (x)_phi H^{Psi1}, with Psi2: A -> B carrying phi and Psi1: B -> C.
struct Convolution {
  GramModel model;  // generators: orthonormal basis of H2 times that of H1
  int d2 = 0, d1 = 0;
  Mat Y;            // H^{Psi1 Psi2} -> H2 (x)_phi H1
  double isometry_residual = 0;
  double v_residual = 0;  // Y v_{12} against (v_2 (x) id) v_1

  Mat tensor(const Mat& h2, const Mat& h1) const { return model.op_from_lift(kron(h2, h1)); }
  Vec vector_of(const Vec& xi2, const Vec& xi1) const { return model.coords_of(kron_vec(xi2, xi1)); }
};

// c2 = H^{Psi2} over phi on B, c1 = H^{Psi1} and c12 = H^{Psi1 Psi2} over the same state on C.
inline Convolution convolution_isometry(const Correspondence& c2, const Correspondence& c1,
                                        const Correspondence& c12, double tol = kDefaultTol) {
  const Algebra& B = c2.psi.dst;
  if (c1.psi.src != B || c12.psi.src != c2.psi.src || c12.psi.dst != c1.psi.dst)
    throw ShapeError("convolution of incompatible correspondences");
  Convolution cv;
  cv.d2 = c2.dim();
  cv.d1 = c1.dim();
  int dB = B.lin_dim(), g = c2.target.dim();
  std::vector<Element> ub = matrix_units(B);
  // L(xi): Omega_phi . b |-> xi . b. On generators e_b Omega_phi this is
  // right multiplication by e_b on the second factor of H2.
  std::vector<Mat> rights;
  Mat IA = Mat::Identity(c2.dA(), c2.dA());
  for (const Element& b : ub) rights.push_back(c2.model.op_from_lift(kron(IA, rmul_matrix(b))));
  std::vector<Mat> L(cv.d2, Mat(cv.d2, g));
  for (int i = 0; i < cv.d2; ++i) {
    Mat cols(cv.d2, dB);
    for (int b = 0; b < dB; ++b) cols.col(b) = rights[b].col(i);
    L[i] = cols * c2.target.model.pinv();
  }
  std::vector<Mat> piK;
  for (const Element& b : ub) piK.push_back(c1.left(b));
  int n = cv.d2 * cv.d1;
  Mat gram = Mat::Zero(n, n);
  for (int ia = 0; ia < cv.d2; ++ia)
    for (int ib = 0; ib < cv.d2; ++ib) {
      Vec bv = c2.target.model.pinv() * (L[ia].adjoint() * L[ib] * c2.target.omega);
      Mat blk = Mat::Zero(cv.d1, cv.d1);
      for (int b = 0; b < dB; ++b)
        if (bv(b) != cd(0)) blk += bv(b) * piK[b];
      gram.block(ia * cv.d1, ib * cv.d1, cv.d1, cv.d1) = blk;
    }
  cv.model = GramModel(gram, tol);

  const Algebra& A = c2.psi.src;
  const Algebra& C = c1.psi.dst;
  std::vector<Element> ua = matrix_units(A), uc = matrix_units(C);
  Element oneB = Element::identity(B);
  Mat im(cv.model.dim(), ua.size() * uc.size());
  for (size_t a = 0; a < ua.size(); ++a) {
    Vec x2 = c2.vector_of(ua[a], oneB);
    for (size_t cc = 0; cc < uc.size(); ++cc)
      im.col(a * uc.size() + cc) = cv.vector_of(x2, c1.vector_of(oneB, uc[cc]));
  }
  cv.Y = c12.model.op_from_images(im);
  cv.isometry_residual = max_abs(cv.Y.adjoint() * cv.Y - Mat::Identity(c12.dim(), c12.dim()));
  Mat rhs = cv.model.coords() * kron(Mat(c2.omega), c1.v);
  cv.v_residual = max_abs(cv.Y * c12.v - rhs);
  return cv;
}

}  // namespace fdvn
