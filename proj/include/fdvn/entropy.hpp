#pragma once

// Relative entropies with respect to a trace, entropies of bimodule channels
// through their Fourier multipliers, the Pimsner-Popa entropy H (closed forms
// and partition search) and the Araki entropy of general CP maps.

#include "fdvn/chan.hpp"

#include <atomic>
#include <map>
#include <thread>

namespace fdvn {

// Test hook: flips the sign of every Umegaki value. Used only to check that the
// harness detects a broken divergence.
inline std::atomic<bool>& umegaki_sign_fault() {
  static std::atomic<bool> flag{false};
  return flag;
}

struct DivergenceResult {
  double value = 0;
  bool support_ok = true;
  double mass_rho = 0, mass_sigma = 0;
  int rank_rho = 0, rank_sigma = 0;

  bool finite() const { return support_ok; }
};

namespace detail {

inline int rank_of(const Mat& a, double tol = kDefaultTol) {
  Spectrum s = eigh(a);
  double ref = s.values.cwiseAbs().maxCoeff();
  int r = 0;
  for (Eigen::Index i = 0; i < s.values.size(); ++i)
    if (s.values(i) > tol * (ref > 0 ? ref : 1.0)) ++r;
  return r;
}

inline void require_positive(const Mat& a, const char* what) {
  if (max_abs(a - a.adjoint()) > 1e-8 * std::max(1.0, max_abs(a)))
    throw Error(std::string(what) + " is not self-adjoint");
  if (!mat_is_positive(a, 1e-8)) throw Error(std::string(what) + " is not positive");
}

inline DivergenceResult prepare(const Mat& rho, const Mat& sigma, const Mat& Q) {
  if (rho.rows() != sigma.rows() || rho.rows() != Q.rows()) throw ShapeError("divergence arguments differ in size");
  require_positive(rho, "first argument");
  require_positive(sigma, "second argument");
  DivergenceResult r;
  r.mass_rho = (Q * rho).trace().real();
  r.mass_sigma = (Q * sigma).trace().real();
  r.rank_rho = rank_of(rho);
  r.rank_sigma = rank_of(sigma);
  return r;
}

}  // namespace detail

// tr(X) = Tr(Q X). Q must commute with the algebra holding rho and sigma.
inline DivergenceResult umegaki(const Mat& rho, const Mat& sigma, const Mat& Q) {
  DivergenceResult r = detail::prepare(rho, sigma, Q);
  if (!support_leq(hermitian_part(rho), hermitian_part(sigma))) {
    r.support_ok = false;
    r.value = kInf;
    return r;
  }
  Mat lr = mat_fn(rho, fn::log_on_support()), ls = mat_fn(sigma, fn::log_on_support());
  r.value = (Q * rho * (lr - ls)).trace().real();
  if (umegaki_sign_fault()) r.value = -r.value;
  return r;
}

inline DivergenceResult umegaki(const Mat& rho, const Mat& sigma) {
  return umegaki(rho, sigma, Mat::Identity(rho.rows(), rho.cols()));
}

inline DivergenceResult umegaki(const Element& rho, const Element& sigma, const TraceWeights& w) {
  return umegaki(rho.dense(), sigma.dense(), w.dense_weight(rho.algebra()));
}

// Sandwiched Renyi divergence (1/(p-1)) log tr(|sigma^{-1/2p'} rho sigma^{-1/2p'}|^p).
inline DivergenceResult renyi(const Mat& rho, const Mat& sigma, const Mat& Q, double p) {
  if (!(p >= 0.5)) throw Error("Renyi order must lie in [1/2, inf]");
  if (p == 1.0) return umegaki(rho, sigma, Q);
  DivergenceResult r = detail::prepare(rho, sigma, Q);
  Mat R = hermitian_part(rho), S = hermitian_part(sigma);
  if (p > 1.0 && !support_leq(R, S)) {
    r.support_ok = false;
    r.value = kInf;
    return r;
  }
  if (std::isinf(p)) {
    Mat s = mat_fn(S, fn::power(-0.5));
    r.value = std::log(eigh(s * R * s).values.maxCoeff());
    return r;
  }
  // sigma^{-1/(2p')} = sigma^{(1-p)/(2p)}, taken on the support of sigma.
  Mat s = mat_fn(S, fn::power((1.0 - p) / (2.0 * p)));
  // Scale by the top eigenvalue so that large p does not overflow.
  Mat y = s * R * s;
  double top = eigh(y).values.maxCoeff();
  double q = top > 0 ? (Q * mat_fn(y / top, fn::power(p))).trace().real() : 0.0;
  if (!(q > 0)) {
    r.support_ok = false;
    r.value = kInf;
    return r;
  }
  r.value = (p * std::log(top) + std::log(q)) / (p - 1.0);
  return r;
}

inline DivergenceResult renyi(const Mat& rho, const Mat& sigma, double p) {
  return renyi(rho, sigma, Mat::Identity(rho.rows(), rho.cols()), p);
}

// ---------------------------------------------------------------------------
// Multiplier entropies on a tower

struct MultiplierPair {
  Mat phi_hat, psi_hat;
  Mat rho, sigma;  // Delta^{1/2} X Delta^{1/2}
};

inline MultiplierPair multiplier_pair(const LinearMap& phi, const LinearMap& psi, const Tower& t) {
  MultiplierPair m;
  m.phi_hat = fourier_multiplier(phi, t);
  m.psi_hat = fourier_multiplier(psi, t);
  Mat d = t.Delta_H_pow(0.5);
  m.rho = hermitian_part(d * m.phi_hat * d);
  m.sigma = hermitian_part(d * m.psi_hat * d);
  return m;
}

// delta D_{tau_M2}(Delta^{1/2} Phi-hat Delta^{1/2} || Delta^{1/2} Psi-hat Delta^{1/2}).
inline DivergenceResult s_tau(const MultiplierPair& m, const Tower& t) {
  DivergenceResult r = umegaki(m.rho, m.sigma, t.ops.Q2);
  if (r.support_ok) r.value *= t.delta();
  return r;
}

inline DivergenceResult s_tau(const LinearMap& phi, const LinearMap& psi, const Tower& t) {
  return s_tau(multiplier_pair(phi, psi, t), t);
}

struct RenyiVariants {
  DivergenceResult raw;             // D_{p, tau_M2}
  DivergenceResult delta_prefixed;  // delta D_{p, tau_M2}
  DivergenceResult trace_scaled;    // D_{p, delta tau_M2}
};

inline RenyiVariants s_p(const MultiplierPair& m, const Tower& t, double p) {
  RenyiVariants v;
  v.raw = renyi(m.rho, m.sigma, t.ops.Q2, p);
  v.delta_prefixed = v.raw;
  if (v.raw.support_ok) v.delta_prefixed.value *= t.delta();
  v.trace_scaled = renyi(m.rho, m.sigma, t.delta() * t.ops.Q2, p);
  return v;
}

inline RenyiVariants s_p(const LinearMap& phi, const LinearMap& psi, const Tower& t, double p) {
  return s_p(multiplier_pair(phi, psi, t), t, p);
}

// ---------------------------------------------------------------------------
// Closed forms for H(M|N)

inline double h_closed_form_subalgebra(const Inclusion& inc) {
  double h = 0;
  for (int l = 0; l < inc.L(); ++l) {
    double m = inc.big.dims[l], t = inc.trace_big.weights[l];
    h += m * t * std::log(m / t);
  }
  for (int k = 0; k < inc.K(); ++k) {
    double n = inc.small.dims[k], s = inc.trace_small.weights[k];
    h += n * s * std::log(s / n);
  }
  for (int k = 0; k < inc.K(); ++k)
    for (int l = 0; l < inc.L(); ++l)
      if (inc.a(k, l) > 0) {
        double n = inc.small.dims[k], a = inc.a(k, l), t = inc.trace_big.weights[l];
        h += n * a * t * std::log(std::min(n / a, 1.0));
      }
  return h;
}

// 2 log delta + tau(log Delta_0).
inline double upper_bound_value(const Tower& t) {
  Element lg = fn_calculus(t.ops.Delta0, fn::log_on_support());
  return 2.0 * std::log(t.delta()) + t.inc().tau(lg).real();
}

inline double gap_formula(const Inclusion& inc) {
  double g = 0;
  for (int k = 0; k < inc.K(); ++k)
    for (int l = 0; l < inc.L(); ++l)
      if (inc.a(k, l) > 0) {
        double n = inc.small.dims[k], a = inc.a(k, l), t = inc.trace_big.weights[l];
        g += n * a * t * std::log(std::max(a / n, 1.0));
      }
  return g;
}

// delta^2 D_tau(Phi(x) || Psi(x)) with x = Delta_0^{-1/2} e_{-1} Delta_0^{-1/2}.
inline DivergenceResult h_downward(const LinearMap& phi, const LinearMap& psi, const Tower& t,
                                   const Element& e_minus1) {
  Element r = fn_calculus(t.ops.Delta0, fn::power(-0.5));
  Element x = r * e_minus1 * r;
  DivergenceResult d = umegaki(phi(x), psi(x), t.inc().trace_big);
  if (d.support_ok) d.value *= t.inc().index;
  return d;
}

// ---------------------------------------------------------------------------
// Partition search for H(Phi|Psi)

struct PartitionOfUnity {
  std::vector<Element> elements;

  double sum_residual() const {
    if (elements.empty()) return kInf;
    Element s = Element::zero(elements[0].algebra());
    for (const Element& x : elements) s = s + x;
    return (s - Element::identity(s.algebra())).max_abs();
  }
  bool valid(double tol = 1e-10) const {
    for (const Element& x : elements)
      if (!is_positive(0.5 * (x + x.adjoint()), tol)) return false;
    return sum_residual() <= tol;
  }
};

// sum_i D_tau(Phi(x_i) || Psi(x_i)).
inline double partition_value(const LinearMap& phi, const LinearMap& psi, const TraceWeights& tr,
                              const PartitionOfUnity& part) {
  double s = 0;
  for (const Element& x : part.elements) {
    if (x.max_abs() < 1e-14) continue;
    DivergenceResult d = umegaki(phi(x), psi(x), tr);
    if (!d.support_ok) return kInf;
    s += d.value;
  }
  return s;
}

enum SearchStrategy : unsigned {
  kJonesAverage = 1,   // (a) averaged Jones projections, needs e_{-1}
  kSpectral = 2,       // (b) spectral partitions with re-weighting
  kHillClimb = 4,      // (c) unitary hill-climbing
  kAllStrategies = 7,
};

struct SearchResult {
  double best = -kInf;
  PartitionOfUnity partition;
  std::string strategy;
  int evaluations = 0;
  std::vector<double> trace;  // best value after each evaluation
};

struct DownwardData {
  Element e_minus1;
  Element Delta0;
  Inclusion inc;  // N in M, with N carrying the unitaries
};

namespace detail {

// Weyl clock-and-shift unitaries of every block of N together with block phases;
// averaging u x u^* over this family is the conditional expectation onto N' cap M.
inline std::vector<Element> unitary_design(const Algebra& N) {
  std::vector<std::vector<Mat>> per_block;
  for (int n : N.dims) {
    std::vector<Mat> ws;
    Mat X = Mat::Zero(n, n), Z = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      X((i + 1) % n, i) = 1.0;
      Z(i, i) = std::polar(1.0, 2 * M_PI * i / n);
    }
    Mat xa = Mat::Identity(n, n);
    for (int a = 0; a < n; ++a) {
      Mat zb = Mat::Identity(n, n);
      for (int b = 0; b < n; ++b) {
        ws.push_back(xa * zb);
        zb = zb * Z;
      }
      xa = xa * X;
    }
    per_block.push_back(std::move(ws));
  }
  int K = N.blocks();
  std::vector<Element> out;
  std::vector<size_t> idx(K, 0);
  while (true) {
    for (int j = 0; j < K; ++j) {
      std::vector<Mat> b;
      for (int k = 0; k < K; ++k) b.push_back(std::polar(1.0, 2 * M_PI * k * j / K) * per_block[k][idx[k]]);
      out.push_back(Element(N, std::move(b)));
    }
    int k = 0;
    while (k < K && ++idx[k] == per_block[k].size()) idx[k++] = 0;
    if (k == K) break;
  }
  return out;
}

// Eigenprojections of a random self-adjoint element, one per eigenvector.
inline std::vector<Element> spectral_family(Rng& rng, const Algebra& M) {
  Element h = random_self_adjoint(rng, M);
  std::vector<Element> out;
  for (int k = 0; k < M.blocks(); ++k) {
    Spectrum s = eigh(h.block(k));
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
      Element p = Element::zero(M);
      std::vector<Mat> b = p.blocks();
      b[k] = s.vectors.col(i) * s.vectors.col(i).adjoint();
      out.push_back(Element(M, std::move(b)));
    }
  }
  return out;
}

inline Element exp_i(const Element& h, double s) {
  std::vector<Mat> b;
  for (const Mat& m : h.blocks()) {
    Spectrum sp = eigh(m);
    Vec ph(sp.values.size());
    for (Eigen::Index i = 0; i < ph.size(); ++i) ph(i) = std::polar(1.0, s * sp.values(i));
    b.push_back(sp.vectors * ph.asDiagonal() * sp.vectors.adjoint());
  }
  return Element(h.algebra(), std::move(b));
}

}  // namespace detail

class PartitionSearch {
 public:
  PartitionSearch(const LinearMap& phi, const LinearMap& psi, const TraceWeights& tr, int budget)
      : phi_(phi), psi_(psi), tr_(tr), budget_(budget) {}

  bool exhausted() const { return res_.evaluations >= budget_; }

  void consider(PartitionOfUnity part, const char* strategy) {
    if (exhausted()) return;
    double v = partition_value(phi_, psi_, tr_, part);
    ++res_.evaluations;
    if (std::isfinite(v) && v > res_.best) {
      res_.best = v;
      res_.partition = std::move(part);
      res_.strategy = strategy;
    }
    res_.trace.push_back(res_.best);
  }

  void jones_average(const DownwardData& dw, Rng& rng) {
    const Inclusion& inc = dw.inc;
    double d2 = inc.index;
    Element r = fn_calculus(dw.Delta0, fn::power(-0.5));
    Element X = r * dw.e_minus1 * r;
    std::vector<std::vector<Element>> families;
    std::vector<Element> design = detail::unitary_design(inc.small);
    if (design.size() <= 4096) families.push_back(design);
    for (int n = 2; n <= 64 && !exhausted(); n *= 2) {
      std::vector<Element> us;
      for (int k = 0; k < n; ++k) us.push_back(random_unitary(rng, inc.small));
      families.push_back(std::move(us));
    }
    for (const std::vector<Element>& us : families) {
      int n = static_cast<int>(us.size());
      std::vector<Element> xs;
      Element avg = Element::zero(inc.big);
      for (const Element& u : us) {
        Element ue = inc.embed(u);
        xs.push_back((d2 / n) * (ue * X * ue.adjoint()));
        avg = avg + xs.back();
      }
      double lmax = 0;
      for (const Mat& b : avg.blocks()) lmax = std::max(lmax, eigh(b).values.maxCoeff());
      for (double eps0 : {1e-2, 1e-4, 1e-6, 1e-9}) {
        double eps = std::max(lmax - 1.0, 0.0) + eps0;
        PartitionOfUnity part;
        Element rest = Element::identity(inc.big);
        for (const Element& x : xs) {
          part.elements.push_back((1.0 / (1.0 + eps)) * x);
          rest = rest - part.elements.back();
        }
        part.elements.push_back(0.5 * (rest + rest.adjoint()));
        consider(std::move(part), "jones-average");
      }
    }
  }

  void spectral(Rng& rng, int rounds) {
    const Algebra& M = phi_.src;
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < rounds && !exhausted(); ++i) {
      PartitionOfUnity part;
      if (i % 2 == 0) {
        part.elements = detail::spectral_family(rng, M);
      } else {
        double w = U(rng);
        for (const Element& p : detail::spectral_family(rng, M)) part.elements.push_back(w * p);
        for (const Element& p : detail::spectral_family(rng, M)) part.elements.push_back((1 - w) * p);
      }
      consider(std::move(part), "spectral");
    }
  }

  // Moves that keep positivity and the sum: rotate every element by a unitary
  // near 1, transfer part of one element to another, or split one element.
  void hill_climb(Rng& rng) {
    const Algebra& M = phi_.src;
    Element one = Element::identity(M);
    double step = 0.3;
    std::uniform_real_distribution<double> U(0.0, 1.0);
    while (!exhausted() && !res_.partition.elements.empty()) {
      const std::vector<Element>& cur = res_.partition.elements;
      std::uniform_int_distribution<size_t> pick(0, cur.size() - 1);
      int move = std::uniform_int_distribution<int>(0, 2)(rng);
      PartitionOfUnity trial;
      const char* tag = "hill-climb";
      if (move == 0) {
        Element u = detail::exp_i(random_self_adjoint(rng, M), step);
        for (const Element& x : cur) trial.elements.push_back(u * x * u.adjoint());
      } else if (move == 1 && cur.size() > 1) {
        size_t i = pick(rng), j = pick(rng);
        if (i == j) j = (j + 1) % cur.size();
        Element c = random_positive(rng, M);
        c = (U(rng) / spectral_scale(c)) * c;
        Element s = fn_calculus(cur[i], fn::sqrt());
        Element moved = s * c * s;
        trial.elements = cur;
        trial.elements[i] = cur[i] - moved;
        trial.elements[j] = cur[j] + moved;
      } else {
        size_t j = pick(rng);
        std::vector<Element> fam = detail::spectral_family(rng, M);
        Element q = Element::zero(M);
        for (size_t i = 0; i < fam.size(); i += 2) q = q + fam[i];
        Element s = fn_calculus(cur[j], fn::sqrt());
        for (size_t i = 0; i < cur.size(); ++i)
          if (i != j) trial.elements.push_back(cur[i]);
        trial.elements.push_back(s * q * s);
        trial.elements.push_back(s * (one - q) * s);
        tag = "refine";
      }
      double before = res_.best;
      consider(std::move(trial), tag);
      if (res_.best <= before) step = std::max(step * 0.95, 1e-3);
    }
  }

  SearchResult result() const { return res_; }

 private:
  LinearMap phi_, psi_;
  TraceWeights tr_;
  int budget_;
  SearchResult res_;
};

inline SearchResult h_partition_search(const LinearMap& phi, const LinearMap& psi, const TraceWeights& tr,
                                       int budget, std::uint64_t seed, unsigned strategies = kAllStrategies,
                                       const DownwardData* dw = nullptr) {
  Rng rng(seed);
  PartitionSearch s(phi, psi, tr, budget);
  s.consider(PartitionOfUnity{{Element::identity(phi.src)}}, "trivial");
  if ((strategies & kJonesAverage) && dw) s.jones_average(*dw, rng);
  if (strategies & kSpectral) s.spectral(rng, (strategies & kHillClimb) ? std::max(1, budget / 4) : budget);
  if (strategies & kHillClimb) s.hill_climb(rng);
  return s.result();
}

// ---------------------------------------------------------------------------
// Araki relative entropy of CP maps

// Trace-preserving conditional expectation onto the algebra generated by
// pi(A) and pi'(B), the commutant of End.
inline Mat end_commutant_projection(const Correspondence& c, const Mat& x) {
  std::vector<Mat> L, R;
  for (const Element& a : matrix_units(c.psi.src)) L.push_back(c.left(a));
  for (const Element& b : matrix_units(c.psi.dst)) R.push_back(c.right(b));
  int d = c.dim();
  Mat span(d * d, L.size() * R.size());
  for (size_t i = 0; i < L.size(); ++i)
    for (size_t j = 0; j < R.size(); ++j) {
      Mat p = L[i] * R[j];
      span.col(i * R.size() + j) = Eigen::Map<const Vec>(p.data(), p.size());
    }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(span);
  Vec coef = cod.solve(Eigen::Map<const Vec>(x.data(), x.size()));
  Vec proj = span * coef;
  return Eigen::Map<const Mat>(proj.data(), d, d);
}

struct ArakiResult {
  DivergenceResult divergence;
  double derivative_residual = 0;
};

// S_phi(Phi, Psi) computed inside the correspondence of `ref` (Psi when null).
// The states are the vector states of h^{1/2} Omega on the commutant of End.
inline ArakiResult araki(const LinearMap& phi, const LinearMap& psi, const TraceWeights& tr_B, const Element& d,
                         const LinearMap* ref = nullptr) {
  const LinearMap& e = ref ? *ref : psi;
  Correspondence c = correspondence(e, tr_B, d, TraceWeights::normalized_trace(e.src));
  ArakiResult out;
  Derivative hf = derivative(phi, c);
  Mat hp = Mat::Identity(c.dim(), c.dim());
  if (ref) {
    Derivative hs = derivative(psi, c);
    hp = hs.h;
    out.derivative_residual = hs.residual;
  }
  out.derivative_residual = std::max(out.derivative_residual, hf.residual);
  Vec xf = mat_fn(hf.h, fn::sqrt()) * c.omega;
  Vec xp = mat_fn(hp, fn::sqrt()) * c.omega;
  Mat rf = hermitian_part(end_commutant_projection(c, xf * xf.adjoint()));
  Mat rp = hermitian_part(end_commutant_projection(c, xp * xp.adjoint()));
  out.divergence = umegaki(rf, rp);
  return out;
}

}  // namespace fdvn
