#pragma once

// Multi-matrix algebras, elements, weighted traces, functional calculus,
// Gram quotients and GNS spaces.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fdvn {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline constexpr double kDefaultTol = 1e-9;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Dense helpers

template <typename A, typename B>
inline Mat kron(const Eigen::MatrixBase<A>& a_in, const Eigen::MatrixBase<B>& b_in) {
  Mat a = a_in, b = b_in;
  Mat r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

inline Vec kron_vec(const Vec& a, const Vec& b) {
  Vec r(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    r.segment(i * b.size(), b.size()) = a(i) * b;
  return r;
}

inline Mat hermitian_part(const Mat& a) { return 0.5 * (a + a.adjoint()); }

inline double op_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

inline double max_abs(const Mat& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

struct Spectrum {
  RVec values;  // ascending
  Mat vectors;
};

inline Spectrum eigh(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(a));
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

// Scalar function with a declared value on the kernel (eigenvalues below the
// support threshold are treated as exact zeros).
struct ScalarFn {
  std::function<double(double)> f;
  double at_zero = 0.0;
};

namespace fn {
inline ScalarFn identity() { return {[](double t) { return t; }, 0.0}; }
inline ScalarFn sqrt() { return {[](double t) { return std::sqrt(t); }, 0.0}; }
inline ScalarFn log_on_support() { return {[](double t) { return std::log(t); }, 0.0}; }
inline ScalarFn exp() { return {[](double t) { return std::exp(t); }, 1.0}; }
inline ScalarFn eta() { return {[](double t) { return -t * std::log(t); }, 0.0}; }
// t^p on the support, 0 on the kernel (also for negative p).
inline ScalarFn power(double p) {
  return {[p](double t) { return std::pow(t, p); }, 0.0};
}
}  // namespace fn

// Functional calculus for a Hermitian matrix. `scale` is the reference
// magnitude for the relative threshold; pass <= 0 to use max |eigenvalue|.
inline Mat mat_fn(const Mat& a, const ScalarFn& f, double tol = kDefaultTol,
                  double scale = -1.0) {
  if (a.size() == 0) return a;
  Spectrum s = eigh(a);
  double ref = scale > 0 ? scale : s.values.cwiseAbs().maxCoeff();
  double cut = tol * (ref > 0 ? ref : 1.0);
  RVec out(s.values.size());
  for (Eigen::Index i = 0; i < s.values.size(); ++i) {
    double v = s.values(i);
    if (v < -cut) throw NumericalError("functional calculus: negative eigenvalue");
    out(i) = v > cut ? f.f(v) : f.at_zero;
  }
  return s.vectors * out.cast<cd>().asDiagonal() * s.vectors.adjoint();
}

inline Mat mat_support(const Mat& a, double tol = kDefaultTol, double scale = -1.0) {
  return mat_fn(a, {[](double) { return 1.0; }, 0.0}, tol, scale);
}

inline bool mat_is_positive(const Mat& a, double tol = kDefaultTol) {
  if (a.size() == 0) return true;
  RVec v = eigh(a).values;
  double ref = v.cwiseAbs().maxCoeff();
  return v.minCoeff() >= -tol * (ref > 0 ? ref : 1.0);
}

// Orthonormal basis of the kernel of `a` (columns).
inline Mat null_space(const Mat& a, double tol = kDefaultTol) {
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeFullV);
  const RVec& sv = svd.singularValues();
  double ref = sv.size() ? sv(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * (ref > 0 ? ref : 1.0)) ++rank;
  return svd.matrixV().rightCols(a.cols() - rank);
}

// ---------------------------------------------------------------------------
// Algebras and elements

struct Algebra {
  std::vector<int> dims;
  std::vector<std::string> labels;

  Algebra() = default;
  explicit Algebra(std::vector<int> d, std::vector<std::string> l = {})
      : dims(std::move(d)), labels(std::move(l)) {
    if (dims.empty()) throw ShapeError("algebra needs at least one block");
    for (int n : dims)
      if (n < 1) throw ShapeError("block sizes must be positive");
    if (!labels.empty() && labels.size() != dims.size())
      throw ShapeError("label count must match block count");
  }

  int blocks() const { return static_cast<int>(dims.size()); }
  int lin_dim() const {
    int s = 0;
    for (int n : dims) s += n * n;
    return s;
  }
  int mat_dim() const { return std::accumulate(dims.begin(), dims.end(), 0); }
  // Offset of block k inside the concatenated column-major vectorization.
  int vec_offset(int k) const {
    int s = 0;
    for (int i = 0; i < k; ++i) s += dims[i] * dims[i];
    return s;
  }
  bool operator==(const Algebra& o) const { return dims == o.dims; }
  bool operator!=(const Algebra& o) const { return !(*this == o); }
};

class Element {
 public:
  Element() = default;
  Element(Algebra alg, std::vector<Mat> blocks)
      : alg_(std::move(alg)), blocks_(std::move(blocks)) {
    if (static_cast<int>(blocks_.size()) != alg_.blocks())
      throw ShapeError("block count mismatch");
    for (int k = 0; k < alg_.blocks(); ++k)
      if (blocks_[k].rows() != alg_.dims[k] || blocks_[k].cols() != alg_.dims[k])
        throw ShapeError("block shape mismatch");
  }

  static Element zero(const Algebra& a) {
    std::vector<Mat> b;
    for (int n : a.dims) b.push_back(Mat::Zero(n, n));
    return Element(a, std::move(b));
  }
  static Element identity(const Algebra& a) {
    std::vector<Mat> b;
    for (int n : a.dims) b.push_back(Mat::Identity(n, n));
    return Element(a, std::move(b));
  }
  static Element unit(const Algebra& a, int k, int i, int j) {
    Element e = zero(a);
    e.blocks_[k](i, j) = 1.0;
    return e;
  }
  static Element central(const Algebra& a, int k) {
    Element e = zero(a);
    e.blocks_[k].setIdentity();
    return e;
  }
  static Element from_vec(const Algebra& a, const Vec& v) {
    if (v.size() != a.lin_dim()) throw ShapeError("vector length mismatch");
    std::vector<Mat> b;
    int off = 0;
    for (int n : a.dims) {
      b.push_back(Eigen::Map<const Mat>(v.data() + off, n, n));
      off += n * n;
    }
    return Element(a, std::move(b));
  }
  static Element from_dense(const Algebra& a, const Mat& m) {
    if (m.rows() != a.mat_dim() || m.cols() != a.mat_dim())
      throw ShapeError("dense shape mismatch");
    std::vector<Mat> b;
    int off = 0;
    for (int n : a.dims) {
      b.push_back(m.block(off, off, n, n));
      off += n;
    }
    return Element(a, std::move(b));
  }

  const Algebra& algebra() const { return alg_; }
  const std::vector<Mat>& blocks() const { return blocks_; }
  const Mat& block(int k) const { return blocks_[k]; }

  Vec vec() const {
    Vec v(alg_.lin_dim());
    int off = 0;
    for (const Mat& b : blocks_) {
      v.segment(off, b.size()) = Eigen::Map<const Vec>(b.data(), b.size());
      off += static_cast<int>(b.size());
    }
    return v;
  }
  Mat dense() const {
    int d = alg_.mat_dim();
    Mat m = Mat::Zero(d, d);
    int off = 0;
    for (const Mat& b : blocks_) {
      m.block(off, off, b.rows(), b.cols()) = b;
      off += static_cast<int>(b.rows());
    }
    return m;
  }

  Element adjoint() const {
    std::vector<Mat> b;
    for (const Mat& m : blocks_) b.push_back(m.adjoint());
    return Element(alg_, std::move(b));
  }
  double norm() const {
    double s = 0;
    for (const Mat& m : blocks_) s = std::max(s, op_norm(m));
    return s;
  }
  double max_abs() const {
    double s = 0;
    for (const Mat& m : blocks_) s = std::max(s, fdvn::max_abs(m));
    return s;
  }
  bool is_self_adjoint(double tol = kDefaultTol) const {
    for (const Mat& m : blocks_)
      if (fdvn::max_abs(m - m.adjoint()) > tol * std::max(1.0, fdvn::max_abs(m)))
        return false;
    return true;
  }

  friend Element operator+(const Element& a, const Element& b) {
    return zip(a, b, [](const Mat& x, const Mat& y) -> Mat { return x + y; });
  }
  friend Element operator-(const Element& a, const Element& b) {
    return zip(a, b, [](const Mat& x, const Mat& y) -> Mat { return x - y; });
  }
  friend Element operator*(const Element& a, const Element& b) {
    return zip(a, b, [](const Mat& x, const Mat& y) -> Mat { return x * y; });
  }
  friend Element operator*(cd c, const Element& a) {
    std::vector<Mat> b;
    for (const Mat& m : a.blocks_) b.push_back(c * m);
    return Element(a.alg_, std::move(b));
  }
  friend Element operator*(double c, const Element& a) { return cd(c) * a; }

 private:
  template <class F>
  static Element zip(const Element& a, const Element& b, F f) {
    if (a.alg_ != b.alg_) throw ShapeError("elements from different algebras");
    std::vector<Mat> out;
    for (size_t k = 0; k < a.blocks_.size(); ++k) out.push_back(f(a.blocks_[k], b.blocks_[k]));
    return Element(a.alg_, std::move(out));
  }

  Algebra alg_;
  std::vector<Mat> blocks_;
};

// All matrix units of an algebra in vectorization order (block, then column,
// then row), so that unit i has vec() equal to the i-th standard basis vector.
inline std::vector<Element> matrix_units(const Algebra& a) {
  std::vector<Element> out;
  for (int k = 0; k < a.blocks(); ++k)
    for (int j = 0; j < a.dims[k]; ++j)
      for (int i = 0; i < a.dims[k]; ++i) out.push_back(Element::unit(a, k, i, j));
  return out;
}

// Matrices of x |-> a x and x |-> x b on vec() coordinates.
inline Mat lmul_matrix(const Element& a) {
  int d = a.algebra().lin_dim();
  Mat r = Mat::Zero(d, d);
  int off = 0;
  for (const Mat& b : a.blocks()) {
    int n = static_cast<int>(b.rows());
    r.block(off, off, n * n, n * n) = kron(Mat::Identity(n, n), b);
    off += n * n;
  }
  return r;
}

inline Mat rmul_matrix(const Element& a) {
  int d = a.algebra().lin_dim();
  Mat r = Mat::Zero(d, d);
  int off = 0;
  for (const Mat& b : a.blocks()) {
    int n = static_cast<int>(b.rows());
    r.block(off, off, n * n, n * n) = kron(b.transpose(), Mat::Identity(n, n));
    off += n * n;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Traces

struct TraceWeights {
  std::vector<double> weights;
  bool normalized = false;

  TraceWeights() = default;
  explicit TraceWeights(std::vector<double> w, bool norm = false)
      : weights(std::move(w)), normalized(norm) {
    for (double x : weights)
      if (!(x > 0)) throw Error("trace weights must be positive");
  }
  static TraceWeights for_algebra(const Algebra& a, std::vector<double> w) {
    if (static_cast<int>(w.size()) != a.blocks()) throw ShapeError("trace weight count mismatch");
    double s = 0;
    for (int k = 0; k < a.blocks(); ++k) s += a.dims[k] * w[k];
    return TraceWeights(std::move(w), std::abs(s - 1.0) < 1e-12);
  }
  static TraceWeights normalized_trace(const Algebra& a) {
    std::vector<double> w(a.blocks(), 1.0 / a.mat_dim());
    return TraceWeights(std::move(w), true);
  }
  double total(const Algebra& a) const {
    double s = 0;
    for (int k = 0; k < a.blocks(); ++k) s += a.dims[k] * weights[k];
    return s;
  }
  // Per-coordinate weight on vec() coordinates.
  RVec vec_weights(const Algebra& a) const {
    check(a);
    RVec w(a.lin_dim());
    for (int k = 0; k < a.blocks(); ++k)
      w.segment(a.vec_offset(k), a.dims[k] * a.dims[k]).setConstant(weights[k]);
    return w;
  }
  // Dense diagonal Q with trace(x) = Tr(Q x.dense()).
  Mat dense_weight(const Algebra& a) const {
    check(a);
    RVec w(a.mat_dim());
    int off = 0;
    for (int k = 0; k < a.blocks(); ++k) {
      w.segment(off, a.dims[k]).setConstant(weights[k]);
      off += a.dims[k];
    }
    return w.cast<cd>().asDiagonal();
  }
  void check(const Algebra& a) const {
    if (static_cast<int>(weights.size()) != a.blocks()) throw ShapeError("trace weight count mismatch");
  }
};

inline cd trace(const TraceWeights& w, const Element& x) {
  w.check(x.algebra());
  cd s = 0;
  for (int k = 0; k < x.algebra().blocks(); ++k) s += w.weights[k] * x.block(k).trace();
  return s;
}

// ---------------------------------------------------------------------------
// Positivity and functional calculus on elements

inline double spectral_scale(const Element& x) {
  double s = 0;
  for (const Mat& b : x.blocks())
    if (b.size()) s = std::max(s, eigh(b).values.cwiseAbs().maxCoeff());
  return s;
}

inline bool is_positive(const Element& x, double tol = kDefaultTol) {
  if (!x.is_self_adjoint(std::max(tol, 1e-12))) throw Error("is_positive: input is not self-adjoint");
  double ref = spectral_scale(x);
  double cut = tol * (ref > 0 ? ref : 1.0);
  for (const Mat& b : x.blocks())
    if (eigh(b).values.minCoeff() < -cut) return false;
  return true;
}

inline Element fn_calculus(const Element& x, const ScalarFn& f, double tol = kDefaultTol) {
  double ref = spectral_scale(x);
  std::vector<Mat> out;
  for (const Mat& b : x.blocks()) out.push_back(mat_fn(b, f, tol, ref > 0 ? ref : 1.0));
  return Element(x.algebra(), std::move(out));
}

inline Element support_projection(const Element& x, double tol = kDefaultTol) {
  return fn_calculus(x, {[](double) { return 1.0; }, 0.0}, tol);
}

// ---------------------------------------------------------------------------
// Hilbert space models

// Antilinear map v |-> m * conj(v).
struct Antilinear {
  Mat m;
  Vec apply(const Vec& v) const { return m * v.conjugate(); }
  // Matrix of the linear operator J T J.
  Mat conjugate_op(const Mat& t) const { return m * t.conjugate() * m.conjugate(); }
};

// Orthonormal coordinate model of span(generators)/kernel for a positive
// semidefinite Gram matrix G(a, b) = <g_b, g_a>. Column a of coords() holds the
// coordinates of generator a; coords()^* coords() reproduces G.
class GramModel {
 public:
  GramModel() = default;
  GramModel(const Mat& gram, double tol = kDefaultTol) {
    if (gram.rows() != gram.cols()) throw ShapeError("Gram matrix must be square");
    Spectrum s = eigh(gram);
    double ref = s.values.size() ? s.values.cwiseAbs().maxCoeff() : 0.0;
    double cut = tol * (ref > 0 ? ref : 1.0);
    if (s.values.size() && s.values.minCoeff() < -std::max(100 * tol, 1e-8) * (ref > 0 ? ref : 1.0))
      throw NumericalError("Gram matrix is not positive semidefinite");
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = s.values.size() - 1; i >= 0; --i)
      if (s.values(i) > cut) keep.push_back(i);
    int d = static_cast<int>(keep.size());
    coords_.resize(d, gram.cols());
    pinv_.resize(gram.cols(), d);
    for (int r = 0; r < d; ++r) {
      double lam = s.values(keep[r]);
      coords_.row(r) = std::sqrt(lam) * s.vectors.col(keep[r]).adjoint();
      pinv_.col(r) = s.vectors.col(keep[r]) / std::sqrt(lam);
    }
    form_residual_ = gram.size() ? max_abs(coords_.adjoint() * coords_ - hermitian_part(gram)) : 0.0;
  }

  int dim() const { return static_cast<int>(coords_.rows()); }
  int generators() const { return static_cast<int>(coords_.cols()); }
  const Mat& coords() const { return coords_; }
  const Mat& pinv() const { return pinv_; }
  double form_residual() const { return form_residual_; }

  // Coordinates of the vector sum_a c_a g_a.
  Vec coords_of(const Vec& coeffs) const { return coords_ * coeffs; }
  // Operator T with T g_a = sum_b K(b, a) g_b.
  Mat op_from_lift(const Mat& lift) const { return coords_ * lift * pinv_; }
  // Failure of a lift to respect the kernel of the form.
  double lift_residual(const Mat& lift) const {
    Mat p = Mat::Identity(generators(), generators()) - pinv_ * coords_;
    return max_abs(coords_ * lift * p);
  }
  // Operator from generator images given directly in target coordinates.
  Mat op_from_images(const Mat& images) const { return images * pinv_; }

 private:
  Mat coords_;
  Mat pinv_;
  double form_residual_ = 0.0;
};

using HilbertSpaceModel = GramModel;

inline GramModel gram_quotient(const Mat& gram, double tol = kDefaultTol) { return GramModel(gram, tol); }

// Gram quotient with the form supplied as an evaluator form(a, b) = <g_a, g_b>.
inline GramModel gram_quotient(int n, const std::function<cd(int, int)>& form,
                               double tol = kDefaultTol) {
  Mat g(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) g(a, b) = form(b, a);
  return GramModel(g, tol);
}

// L^2(B, phi) for phi(x) = tau(d x), generated by the matrix units of B.
struct GnsSpace {
  Algebra alg;
  TraceWeights tr;
  Element density;
  GramModel model;
  Vec omega;

  int dim() const { return model.dim(); }
  Mat left(const Element& b) const { return model.op_from_lift(lmul_matrix(b)); }
  Vec vector_of(const Element& x) const { return model.coords_of(x.vec()); }
  // Element x with x Omega equal to the given vector (faithful states only).
  Element element_of(const Vec& v) const { return Element::from_vec(alg, model.pinv() * v); }
};

inline GnsSpace gns_space(const Algebra& b, const TraceWeights& tr, const Element& density,
                          double tol = kDefaultTol) {
  if (density.algebra() != b) throw ShapeError("density lives in another algebra");
  if (!is_positive(density, tol)) throw Error("GNS density is not positive");
  int n = b.lin_dim();
  Mat g = Mat::Zero(n, n);
  int off = 0;
  for (int k = 0; k < b.blocks(); ++k) {
    int d = b.dims[k];
    const Mat& rho = density.block(k);
    // <e_ij, e_i'j'> = phi(e_j'i' e_ij) = t_k delta_ii' rho(j, j').
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i)
        for (int jp = 0; jp < d; ++jp) {
          int a = off + j * d + i, c = off + jp * d + i;
          g(c, a) = tr.weights[k] * rho(j, jp);
        }
    off += d * d;
  }
  GnsSpace s{b, tr, density, GramModel(g, tol), Vec()};
  s.omega = s.model.coords_of(Element::identity(b).vec());
  return s;
}

// ---------------------------------------------------------------------------
// Commutants by averaging over matrix units

// Images U_ij of the matrix units of each block under a *-representation or
// *-anti-representation on a Hilbert space.
struct UnitSystem {
  std::vector<int> dims;
  std::vector<std::vector<Mat>> units;  // units[k][i * n + j]
};

template <class F>
UnitSystem unit_system(const Algebra& a, F rep) {
  UnitSystem s{a.dims, {}};
  for (int k = 0; k < a.blocks(); ++k) {
    int n = a.dims[k];
    std::vector<Mat> u;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) u.push_back(rep(Element::unit(a, k, i, j)));
    s.units.push_back(std::move(u));
  }
  return s;
}

// Trace-preserving conditional expectation onto the commutant of the image.
inline Mat commutant_average(const UnitSystem& s, const Mat& t) {
  Mat out = Mat::Zero(t.rows(), t.cols());
  for (size_t k = 0; k < s.units.size(); ++k) {
    int n = s.dims[k];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Mat& u = s.units[k][i * n + j];
        out.noalias() += (u * t) * u.adjoint() / double(n);
      }
  }
  return out;
}

using Projector = std::function<Mat(const Mat&)>;

inline Projector commutant_projector(std::vector<UnitSystem> systems) {
  return [systems = std::move(systems)](const Mat& t) {
    Mat r = t;
    for (const UnitSystem& s : systems) r = commutant_average(s, r);
    return r;
  };
}

// Orthonormal (Hilbert-Schmidt) self-adjoint basis of the range of a
// *-preserving projection on operators, found by projecting random
// self-adjoint matrices until the span stops growing.
inline std::vector<Mat> range_basis(const Projector& p, int dim, std::uint64_t seed = 7,
                                    int max_dim = -1, double tol = 1e-8) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  std::vector<Mat> basis;
  int misses = 0;
  int cap = max_dim > 0 ? max_dim : dim * dim;
  while (misses < 2 && static_cast<int>(basis.size()) < cap) {
    Mat g(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) g(i, j) = cd(nd(rng), nd(rng));
    Mat x = p(hermitian_part(g));
    double n0 = x.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (const Mat& b : basis) x -= (b.adjoint() * x).trace().real() * b;
    double n1 = x.norm();
    if (n1 < tol * std::max(1.0, n0)) {
      ++misses;
      continue;
    }
    basis.push_back(hermitian_part(x / n1));
  }
  return basis;
}

// ---------------------------------------------------------------------------
// Random generators (deterministic for a fixed seed)

inline Mat random_ginibre(Rng& rng, int r, int c) {
  std::normal_distribution<double> nd;
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = cd(nd(rng), nd(rng)) / std::sqrt(2.0);
  return m;
}

inline Element random_element(Rng& rng, const Algebra& a) {
  std::vector<Mat> b;
  for (int n : a.dims) b.push_back(random_ginibre(rng, n, n));
  return Element(a, std::move(b));
}

inline Element random_positive(Rng& rng, const Algebra& a) {
  Element g = random_element(rng, a);
  return g.adjoint() * g;
}

inline Element random_self_adjoint(Rng& rng, const Algebra& a) {
  Element g = random_element(rng, a);
  return 0.5 * (g + g.adjoint());
}

inline Mat random_unitary_matrix(Rng& rng, int n) {
  Mat g = random_ginibre(rng, n, n);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR();
  for (int i = 0; i < n; ++i) {
    cd d = r(i, i);
    if (std::abs(d) > 0) q.col(i) *= d / std::abs(d);
  }
  return q;
}

inline Element random_unitary(Rng& rng, const Algebra& a) {
  std::vector<Mat> b;
  for (int n : a.dims) b.push_back(random_unitary_matrix(rng, n));
  return Element(a, std::move(b));
}

inline Element random_state(Rng& rng, const Algebra& a, const TraceWeights& w) {
  Element p = random_positive(rng, a);
  return (1.0 / trace(w, p).real()) * p;
}

inline Element random_element(std::uint64_t seed, const Algebra& a) {
  Rng r(seed);
  return random_element(r, a);
}
inline Element random_positive(std::uint64_t seed, const Algebra& a) {
  Rng r(seed);
  return random_positive(r, a);
}
inline Element random_unitary(std::uint64_t seed, const Algebra& a) {
  Rng r(seed);
  return random_unitary(r, a);
}
inline Element random_state(std::uint64_t seed, const Algebra& a, const TraceWeights& w) {
  Rng r(seed);
  return random_state(r, a, w);
}

}  // namespace fdvn
