#pragma once

// Unital inclusions N in M of multi-matrix algebras from Bratteli data.

#include "fdvn/mmalg.hpp"

namespace fdvn {

using Adjacency = std::vector<std::vector<int>>;

struct TraceSpec {
  std::vector<double> t;
  bool markov = false;
  bool normalize = false;

  static TraceSpec explicit_weights(std::vector<double> w, bool normalize = false) {
    return {std::move(w), false, normalize};
  }
  static TraceSpec markov_trace() { return {{}, true, true}; }
};

struct Inclusion {
  Algebra small;
  Algebra big;
  Adjacency adjacency;  // a[k][l]
  TraceWeights trace_big;
  TraceWeights trace_small;
  Mat embed_mat;      // big.lin_dim() x small.lin_dim()
  Mat cond_exp_mat;   // small.lin_dim() x big.lin_dim()
  std::vector<Element> pp;
  double index = 0;
  double delta = 0;

  int K() const { return small.blocks(); }
  int L() const { return big.blocks(); }
  int a(int k, int l) const { return adjacency[k][l]; }

  // Row offset of copy c of block k inside block l of M.
  int segment_offset(int l, int k, int c) const {
    int off = 0;
    for (int kk = 0; kk < k; ++kk) off += adjacency[kk][l] * small.dims[kk];
    return off + c * small.dims[k];
  }

  Element embed(const Element& y) const {
    if (y.algebra() != small) throw ShapeError("embed: element not in the small algebra");
    return Element::from_vec(big, embed_mat * y.vec());
  }
  Element cond_exp(const Element& x) const {
    if (x.algebra() != big) throw ShapeError("conditional expectation: element not in the big algebra");
    return Element::from_vec(small, cond_exp_mat * x.vec());
  }
  cd tau(const Element& x) const { return trace(trace_big, x); }
  cd tau_small(const Element& y) const { return trace(trace_small, y); }

  // Minimal central projection e_k f_l of N' cap M, as an element of M.
  Element central_projection(int k, int l) const {
    Element p = Element::zero(big);
    std::vector<Mat> b = p.blocks();
    for (int c = 0; c < adjacency[k][l]; ++c) {
      int o = segment_offset(l, k, c);
      b[l].block(o, o, small.dims[k], small.dims[k]).setIdentity();
    }
    return Element(big, std::move(b));
  }
};

inline std::vector<double> markov_weights(const std::vector<int>& m, const Adjacency& a) {
  int K = static_cast<int>(a.size()), L = static_cast<int>(m.size());
  Eigen::MatrixXd A(K, L);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) A(k, l) = a[k][l];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.transpose() * A);
  Eigen::VectorXd v = es.eigenvectors().col(L - 1);
  if (v.sum() < 0) v = -v;
  double s = 0;
  for (int l = 0; l < L; ++l) s += m[l] * v(l);
  std::vector<double> t(L);
  for (int l = 0; l < L; ++l) {
    t[l] = v(l) / s;
    if (!(t[l] > 1e-14)) throw Error("markov trace is not faithful (disconnected Bratteli diagram)");
  }
  return t;
}

inline Inclusion build_inclusion(const std::vector<int>& dims_small, const Adjacency& adj,
                                 const TraceSpec& spec) {
  int K = static_cast<int>(dims_small.size());
  if (K == 0) throw ShapeError("dims_small is empty");
  if (static_cast<int>(adj.size()) != K) throw ShapeError("adjacency needs one row per block of N");
  int L = static_cast<int>(adj[0].size());
  if (L == 0) throw ShapeError("adjacency has no columns");
  for (const auto& row : adj) {
    if (static_cast<int>(row.size()) != L) throw ShapeError("adjacency rows have unequal length");
    for (int x : row)
      if (x < 0) throw ShapeError("adjacency entries must be non-negative");
  }
  std::vector<int> m(L, 0);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) m[l] += dims_small[k] * adj[k][l];
    if (m[l] == 0) throw ShapeError("block " + std::to_string(l) + " of M receives nothing");
  }
  for (int k = 0; k < K; ++k) {
    int s = 0;
    for (int l = 0; l < L; ++l) s += adj[k][l];
    if (s == 0) throw ShapeError("block " + std::to_string(k) + " of N embeds nowhere");
  }

  Inclusion inc;
  inc.small = Algebra(dims_small);
  inc.big = Algebra(m);
  inc.adjacency = adj;

  std::vector<double> t = spec.markov ? markov_weights(m, adj) : spec.t;
  if (static_cast<int>(t.size()) != L) throw ShapeError("trace needs one weight per block of M");
  for (double x : t)
    if (!(x > 0)) throw Error("trace weights must be positive");
  if (spec.normalize) {
    double s = 0;
    for (int l = 0; l < L; ++l) s += m[l] * t[l];
    for (double& x : t) x /= s;
  }
  inc.trace_big = TraceWeights::for_algebra(inc.big, t);
  std::vector<double> s(K, 0.0);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) s[k] += adj[k][l] * t[l];
  inc.trace_small = TraceWeights::for_algebra(inc.small, s);

  // Embedding: a_kl consecutive copies of y_k inside block l.
  inc.embed_mat = Mat::Zero(inc.big.lin_dim(), inc.small.lin_dim());
  for (int k = 0; k < K; ++k) {
    int n = dims_small[k];
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        int src = inc.small.vec_offset(k) + j * n + i;
        for (int l = 0; l < L; ++l)
          for (int c = 0; c < adj[k][l]; ++c) {
            int o = inc.segment_offset(l, k, c);
            int dst = inc.big.vec_offset(l) + (o + j) * m[l] + (o + i);
            inc.embed_mat(dst, src) = 1.0;
          }
      }
  }
  // E_N solves tau_N(z^* E(x)) = tau_M(embed(z)^* x) for all z.
  RVec wt = inc.trace_big.vec_weights(inc.big);
  RVec ws = inc.trace_small.vec_weights(inc.small);
  inc.cond_exp_mat = ws.cwiseInverse().cast<cd>().asDiagonal() * inc.embed_mat.adjoint() *
                     wt.cast<cd>().asDiagonal();

  // Pimsner-Popa basis: sqrt(s_k / t_l) e_{r, (k, c, 0)} in block l.
  for (int l = 0; l < L; ++l)
    for (int r = 0; r < m[l]; ++r)
      for (int k = 0; k < K; ++k)
        for (int c = 0; c < adj[k][l]; ++c) {
          Element e = Element::unit(inc.big, l, r, inc.segment_offset(l, k, c));
          inc.pp.push_back(std::sqrt(s[k] / t[l]) * e);
        }
  double idx = 0;
  for (const Element& eta : inc.pp) idx += inc.tau(eta.adjoint() * eta).real();
  inc.index = idx;
  inc.delta = std::sqrt(idx);
  return inc;
}

inline Element conditional_expectation(const Inclusion& inc, const Element& x) {
  return inc.cond_exp(x);
}

inline const std::vector<Element>& pp_basis(const Inclusion& inc) { return inc.pp; }

inline double jones_index(const Inclusion& inc) { return inc.index; }

// Index computed from an arbitrary family {eta_j}, for basis-independence checks.
inline double index_from_basis(const Inclusion& inc, const std::vector<Element>& basis) {
  double s = 0;
  for (const Element& eta : basis) s += inc.tau(eta.adjoint() * eta).real();
  return s;
}

// Largest deviation of sum_j eta_j E(eta_j^* x) from x over the matrix units of M.
inline double pp_reconstruction_residual(const Inclusion& inc, const std::vector<Element>& basis) {
  double r = 0;
  for (const Element& x : matrix_units(inc.big)) {
    Element s = Element::zero(inc.big);
    for (const Element& eta : basis) s = s + eta * inc.embed(inc.cond_exp(eta.adjoint() * x));
    r = std::max(r, (s - x).max_abs());
  }
  return r;
}

struct RelativeCommutant {
  std::vector<Element> basis;  // orthonormal for <x, y> = tau(y^* x)
  struct Central {
    int k, l;
    Element projection;
    double trace;
  };
  std::vector<Central> central;
};

inline RelativeCommutant relative_commutant(const Inclusion& inc, double tol = kDefaultTol) {
  int D = inc.big.lin_dim();
  std::vector<Element> gens = matrix_units(inc.small);
  Mat sys(D * static_cast<int>(gens.size()), D);
  for (size_t g = 0; g < gens.size(); ++g) {
    Element y = inc.embed(gens[g]);
    sys.block(g * D, 0, D, D) = lmul_matrix(y) - rmul_matrix(y);
  }
  Mat ns = null_space(sys, tol);
  RVec w = inc.trace_big.vec_weights(inc.big);
  Mat G = ns.adjoint() * w.cast<cd>().asDiagonal() * ns;
  Mat orth = ns * mat_fn(G, fn::power(-0.5));
  RelativeCommutant rc;
  for (Eigen::Index i = 0; i < orth.cols(); ++i) rc.basis.push_back(Element::from_vec(inc.big, orth.col(i)));
  for (int k = 0; k < inc.K(); ++k)
    for (int l = 0; l < inc.L(); ++l)
      if (inc.a(k, l) > 0)
        rc.central.push_back({k, l, inc.central_projection(k, l),
                              inc.small.dims[k] * inc.a(k, l) * inc.trace_big.weights[l]});
  return rc;
}

}  // namespace fdvn
