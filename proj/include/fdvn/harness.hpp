#pragma once

// Seeded property suites for the entropy inequalities.

#include "fdvn/entropy.hpp"

#include <cstdio>
#include <memory>
#include <sstream>

namespace fdvn {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string describe(const Algebra& a) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < a.dims.size(); ++i) os << (i ? "," : "") << a.dims[i];
  os << "]";
  return os.str();
}

inline std::string instance_digest(const Inclusion& inc) {
  std::ostringstream os;
  os.precision(17);
  os << describe(inc.small) << "A";
  for (const auto& row : inc.adjacency) {
    for (int x : row) os << x << ",";
    os << ";";
  }
  os << "t";
  for (double t : inc.trace_big.weights) os << t << ",";
  return hex64(fnv1a(os.str()));
}

inline std::string instance_digest(const std::string& text) { return hex64(fnv1a(text)); }

struct CheckRecord {
  std::string suite;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string instance;
  double lhs = 0, rhs = 0;
  double margin = 0;  // rhs - lhs; negative beyond slack is a violation
  bool skipped = false;
  bool violated = false;
  std::string note;
};

struct HarnessConfig {
  std::vector<std::string> suites;
  int trials = 200;
  std::uint64_t seed = 1;
  double slack = 1e-8;
  int search_budget = 40;
  int threads = 0;  // 0: hardware concurrency
};

struct HarnessReport {
  std::vector<CheckRecord> records;
  int violations = 0;
  int skipped = 0;
};

inline const std::vector<std::string>& harness_suites() {
  static const std::vector<std::string> s{"search_vs_stau",    "right_monotonicity", "left_monotonicity",
                                          "convexity",         "renyi_monotonicity", "interpolation_chain"};
  return s;
}

namespace detail {

struct BimoduleInstance {
  std::string name;
  Tower tower;
  bool downward = false;
  Element e_minus1;
};

inline std::vector<std::shared_ptr<BimoduleInstance>> harness_instances() {
  std::vector<std::shared_ptr<BimoduleInstance>> out;
  auto plain = [&](std::vector<int> n, Adjacency a, TraceSpec t) {
    auto b = std::make_shared<BimoduleInstance>();
    b->tower = build_tower(build_inclusion(n, a, t));
    b->name = instance_digest(b->tower.inc());
    out.push_back(b);
  };
  auto down = [&](std::vector<int> n, Adjacency a) {
    Downward dw = extend_upward(build_inclusion(n, a, TraceSpec::markov_trace()));
    auto b = std::make_shared<BimoduleInstance>();
    b->tower = build_tower(dw.inc);
    b->downward = true;
    b->e_minus1 = dw.e_minus1;
    b->name = instance_digest(b->tower.inc());
    out.push_back(b);
  };
  plain({1}, {{2}}, TraceSpec::explicit_weights({0.5}));
  plain({1}, {{1, 1}}, TraceSpec::explicit_weights({1.0 / 3, 2.0 / 3}));
  plain({1, 1}, {{1}, {1}}, TraceSpec::explicit_weights({0.5}));
  down({1}, {{1, 1}});
  down({1, 1}, {{1}, {1}});
  return out;
}

inline const std::vector<Algebra>& small_algebras() {
  static const std::vector<Algebra> a{Algebra({1, 1}), Algebra({2}), Algebra({1, 2})};
  return a;
}

inline std::vector<Mat> random_kraus(Rng& rng, const Algebra& src, const Algebra& dst, int r) {
  std::vector<Mat> k;
  for (int i = 0; i < r; ++i) k.push_back(random_ginibre(rng, dst.mat_dim(), src.mat_dim()));
  return k;
}

// Kraus operators in the span of `k`, so the resulting map is majorized.
inline std::vector<Mat> kraus_combination(Rng& rng, const std::vector<Mat>& k, int r) {
  std::normal_distribution<double> nd;
  std::vector<Mat> out;
  for (int i = 0; i < r; ++i) {
    Mat m = Mat::Zero(k[0].rows(), k[0].cols());
    for (const Mat& x : k) m += cd(nd(rng), nd(rng)) * x;
    out.push_back(m);
  }
  return out;
}

// tau(Phi(1)) = 1 for the normalized trace of the target.
inline LinearMap normalize_mass(const LinearMap& f) {
  TraceWeights w = TraceWeights::normalized_trace(f.dst);
  return (1.0 / trace(w, f(Element::identity(f.src))).real()) * f;
}

inline LinearMap make_unital(const LinearMap& f) {
  Element c = fn_calculus(f(Element::identity(f.src)), fn::power(-0.5));
  return sandwich(c, f);
}

struct Pair {
  LinearMap phi, psi;
};

inline Pair random_majorized_pair(Rng& rng, const Algebra& A, const Algebra& B) {
  std::vector<Mat> k = random_kraus(rng, A, B, 3);
  std::vector<Mat> l = kraus_combination(rng, k, 2);
  return {normalize_mass(kraus_map(A, B, l)), normalize_mass(kraus_map(A, B, k))};
}

inline const Algebra& pick(Rng& rng, const std::vector<Algebra>& v) {
  return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
}

inline double araki_value(const LinearMap& phi, const LinearMap& psi, const Element& d) {
  TraceWeights w = TraceWeights::normalized_trace(psi.dst);
  return araki(phi, psi, w, d).divergence.value;
}

inline Element random_faithful_state(Rng& rng, const Algebra& a) {
  TraceWeights w = TraceWeights::normalized_trace(a);
  Element p = random_positive(rng, a) + 0.2 * Element::identity(a);
  return (1.0 / trace(w, p).real()) * p;
}

inline const std::vector<double>& pgrid() {
  static const std::vector<double> g{1.0, 1.5, 2.0, 4.0, kInf};
  return g;
}

inline CheckRecord run_trial(const std::string& suite, int trial, std::uint64_t seed,
                             const std::vector<std::shared_ptr<BimoduleInstance>>& inst, int budget) {
  CheckRecord r;
  r.suite = suite;
  r.trial = trial;
  r.seed = seed;
  Rng rng(seed);
  const BimoduleInstance& bi = *inst[trial % inst.size()];
  const Tower& t = bi.tower;
  auto bimodule_pair = [&]() -> Pair {
    return {random_bimodule_channel(rng, t), random_bimodule_channel(rng, t)};
  };
  const auto& algs = small_algebras();

  if (suite == "search_vs_stau") {
    r.instance = bi.name;
    Pair p = bimodule_pair();
    DownwardData dd{bi.e_minus1, t.ops.Delta0, t.inc()};
    SearchResult s = h_partition_search(p.phi, p.psi, t.inc().trace_big, budget, seed, kAllStrategies,
                                        bi.downward ? &dd : nullptr);
    r.lhs = s.best;
    r.rhs = s_tau(p.phi, p.psi, t).value;
  } else if (suite == "right_monotonicity") {
    const Algebra &A = pick(rng, algs), &B = pick(rng, algs), &C = pick(rng, algs);
    r.instance = instance_digest(describe(A) + describe(B) + describe(C));
    LinearMap psi2 = make_unital(kraus_map(A, B, random_kraus(rng, A, B, 2)));
    Pair p1 = random_majorized_pair(rng, B, C);
    Element d = random_faithful_state(rng, C);
    r.lhs = araki_value(compose(p1.phi, psi2), compose(p1.psi, psi2), d);
    r.rhs = araki_value(p1.phi, p1.psi, d);
  } else if (suite == "left_monotonicity") {
    const Algebra &A = pick(rng, algs), &B = pick(rng, algs), &C = pick(rng, algs);
    r.instance = instance_digest(describe(A) + describe(B) + describe(C));
    LinearMap psi1 = make_unital(kraus_map(B, C, random_kraus(rng, B, C, 2)));
    Pair p2 = random_majorized_pair(rng, A, B);
    Element d = random_faithful_state(rng, C);
    TraceWeights wB = TraceWeights::normalized_trace(B), wC = TraceWeights::normalized_trace(C);
    Element dB = pullback_density(psi1, d, wC, wB);
    r.lhs = araki_value(compose(psi1, p2.phi), compose(psi1, p2.psi), d);
    r.rhs = araki(p2.phi, p2.psi, wB, dB).divergence.value;
  } else if (suite == "convexity") {
    const Algebra &A = pick(rng, algs), &B = pick(rng, algs);
    r.instance = instance_digest(describe(A) + describe(B));
    Element d = random_faithful_state(rng, B);
    std::uniform_real_distribution<double> U(0.1, 1.0);
    double w[3], ws = 0;
    for (double& x : w) ws += (x = U(rng));
    LinearMap mphi{A, B, Mat::Zero(B.lin_dim(), A.lin_dim())}, mpsi = mphi;
    double rhs = 0;
    for (double x : w) {
      Pair p = random_majorized_pair(rng, A, B);
      mphi = mphi + (x / ws) * p.phi;
      mpsi = mpsi + (x / ws) * p.psi;
      rhs += (x / ws) * araki_value(p.phi, p.psi, d);
    }
    r.lhs = araki_value(mphi, mpsi, d);
    r.rhs = rhs;
  } else if (suite == "renyi_monotonicity") {
    r.instance = bi.name;
    Pair p = bimodule_pair();
    MultiplierPair mp = multiplier_pair(p.phi, p.psi, t);
    double worst = kInf, prev = -kInf;
    for (double q : pgrid()) {
      double v = s_p(mp, t, q).trace_scaled.value;
      worst = std::min(worst, v - prev);
      prev = v;
    }
    r.lhs = 0;
    r.rhs = worst;
  } else if (suite == "interpolation_chain") {
    r.instance = bi.name;
    Pair p = bimodule_pair();
    MultiplierPair mp = multiplier_pair(p.phi, p.psi, t);
    LambdaResult lam = lambda_multiplier(mp.phi_hat, mp.psi_hat);
    if (lam.infinite_by_convention) {
      r.skipped = true;
      r.note = "lambda support failure";
      return r;
    }
    double h;
    if (bi.downward) {
      h = h_downward(p.phi, p.psi, t, bi.e_minus1).value;
      r.note = "H exact (downward)";
    } else {
      h = h_partition_search(p.phi, p.psi, t.inc().trace_big, budget, seed).best;
      r.note = "H search lower bound";
    }
    double upper = -std::log(lam.value), worst = kInf;
    for (double q : pgrid()) {
      double v = s_p(mp, t, q).trace_scaled.value;
      worst = std::min({worst, upper - v, v - h});
    }
    r.lhs = 0;
    r.rhs = worst;
  } else {
    throw Error("unknown suite: " + suite);
  }
  r.margin = r.rhs - r.lhs;
  return r;
}

}  // namespace detail

inline HarnessReport theorem_harness(const HarnessConfig& cfg) {
  std::vector<std::string> suites = cfg.suites.empty() ? harness_suites() : cfg.suites;
  for (const std::string& s : suites)
    if (std::find(harness_suites().begin(), harness_suites().end(), s) == harness_suites().end())
      throw Error("unknown suite: " + s);
  auto inst = detail::harness_instances();
  struct Job {
    std::string suite;
    int trial;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (size_t si = 0; si < suites.size(); ++si)
    for (int t = 0; t < cfg.trials; ++t)
      jobs.push_back({suites[si], t, cfg.seed * 1000003ull + si * 7919ull + static_cast<std::uint64_t>(t)});
  std::vector<CheckRecord> out(jobs.size());
  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      const Job& j = jobs[i];
      try {
        out[i] = detail::run_trial(j.suite, j.trial, j.seed, inst, cfg.search_budget);
      } catch (const std::exception& e) {
        out[i].suite = j.suite;
        out[i].trial = j.trial;
        out[i].seed = j.seed;
        out[i].margin = -kInf;
        out[i].note = std::string("error: ") + e.what();
      }
    }
  };
  int nt = cfg.threads > 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (int i = 1; i < nt; ++i) pool.emplace_back(work);
  work();
  for (std::thread& th : pool) th.join();

  HarnessReport rep;
  for (CheckRecord& r : out) {
    if (r.skipped) {
      ++rep.skipped;
    } else if (!(r.margin >= -cfg.slack)) {
      r.violated = true;
      ++rep.violations;
    }
  }
  rep.records = std::move(out);
  return rep;
}

}  // namespace fdvn
