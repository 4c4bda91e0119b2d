#pragma once

// Command-line front end: JSON job configs, command dispatch and CSV/JSON
// report output. Data goes to the output stream, diagnostics to the error
// stream.

#include "fdvn/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

namespace fdvn::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kViolation = 1, kConfigError = 2, kNumericalFailure = 3 };

struct ConfigError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Number parsing and formatting (locale independent)

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n"), e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::optional<double> parse_decimal(const std::string& text) {
  std::string s = trim(text);
  if (s == "inf" || s == "+inf" || s == "infinity") return kInf;
  if (s.empty()) return std::nullopt;
  size_t slash = s.find('/');
  if (slash != std::string::npos) {
    auto a = parse_decimal(s.substr(0, slash)), b = parse_decimal(s.substr(slash + 1));
    if (!a || !b || *b == 0 || std::isinf(*a) || std::isinf(*b)) return std::nullopt;
    return *a / *b;
  }
  const char* first = s.data() + (s[0] == '+' ? 1 : 0);
  double v = 0;
  auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline double parse_real(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string())
    if (auto d = parse_decimal(v.get<std::string>())) return *d;
  throw ConfigError("field '" + field + "': expected a decimal number, got " + v.dump());
}

inline long long parse_integer(const json& v, const std::string& field, long long lo = 0) {
  long long out = 0;
  bool ok = false;
  if (v.is_number_integer()) {
    out = v.get<long long>();
    ok = true;
  } else if (v.is_string()) {
    std::string s = trim(v.get<std::string>());
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    ok = !s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size();
  }
  if (!ok) throw ConfigError("field '" + field + "': expected an integer, got " + v.dump());
  if (out < lo) throw ConfigError("field '" + field + "': must be at least " + std::to_string(lo));
  return out;
}

inline std::vector<double> parse_pgrid(const std::string& text) {
  std::vector<double> g;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    auto v = parse_decimal(tok);
    if (!v) throw ConfigError("pgrid: cannot parse '" + tok + "'");
    g.push_back(*v);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Job configuration

struct JobConfig {
  bool has_inclusion = false;
  std::vector<int> dims_small;
  Adjacency adjacency;
  bool markov = false;
  std::vector<double> trace;
  bool extend_upward = false;
  json phi = "identity";
  json psi = "cond_exp";
  std::vector<double> pgrid{0.5, 1.0, 1.5, 2.0, 4.0, kInf};
  std::uint64_t seed = 1;
  int trials = 100;
  int budget = 200;
  double tol = 1e-8;
  std::vector<std::string> suites;

  json echo() const {
    json j;
    if (has_inclusion) {
      j["dims_small"] = dims_small;
      j["adjacency"] = adjacency;
      if (markov) {
        j["trace"] = "markov";
      } else {
        json t = json::array();
        for (double x : trace) t.push_back(format_number(x));
        j["trace"] = t;
      }
      j["extend_upward"] = extend_upward;
      j["phi"] = phi;
      j["psi"] = psi;
    }
    json g = json::array();
    for (double p : pgrid) g.push_back(format_number(p));
    j["pgrid"] = g;
    j["seed"] = std::to_string(seed);
    j["trials"] = std::to_string(trials);
    j["budget"] = std::to_string(budget);
    j["tol"] = format_number(tol);
    j["suites"] = suites.empty() ? json(harness_suites()) : json(suites);
    return j;
  }
};

inline json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1, col = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON (" +
                      e.what() + ")");
  }
}

inline std::vector<int> parse_int_list(const json& v, const std::string& field, long long lo) {
  if (!v.is_array() || v.empty()) throw ConfigError("field '" + field + "': expected a non-empty list");
  std::vector<int> out;
  for (size_t i = 0; i < v.size(); ++i)
    out.push_back(static_cast<int>(parse_integer(v[i], field + "[" + std::to_string(i) + "]", lo)));
  return out;
}

inline void validate_inclusion(const JobConfig& c) {
  size_t K = c.dims_small.size();
  if (c.adjacency.size() != K)
    throw ConfigError("field 'adjacency': expected " + std::to_string(K) + " rows (one per block of dims_small), got " +
                      std::to_string(c.adjacency.size()));
  size_t L = c.adjacency[0].size();
  for (size_t k = 0; k < K; ++k) {
    if (c.adjacency[k].size() != L)
      throw ConfigError("field 'adjacency[" + std::to_string(k) + "]': rows must all have length " +
                        std::to_string(L));
    if (std::all_of(c.adjacency[k].begin(), c.adjacency[k].end(), [](int x) { return x == 0; }))
      throw ConfigError("field 'adjacency[" + std::to_string(k) + "]': block is not embedded (row is zero)");
  }
  for (size_t l = 0; l < L; ++l) {
    bool any = false;
    for (size_t k = 0; k < K; ++k) any = any || c.adjacency[k][l] > 0;
    if (!any) throw ConfigError("field 'adjacency': column " + std::to_string(l) + " is zero (inclusion not unital)");
  }
  if (!c.markov) {
    if (c.trace.size() != L)
      throw ConfigError("field 'trace': expected " + std::to_string(L) + " weights (one per block of M), got " +
                        std::to_string(c.trace.size()));
    for (size_t l = 0; l < L; ++l)
      if (!(c.trace[l] > 0) || std::isinf(c.trace[l]))
        throw ConfigError("field 'trace[" + std::to_string(l) + "]': weights must be positive and finite");
  }
}

inline JobConfig parse_config(const json& j) {
  static const std::set<std::string> known{"dims_small", "adjacency", "trace", "extend_upward", "phi", "psi",
                                           "pgrid",      "seed",      "trials", "budget",       "tol", "suites"};
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("field '" + it.key() + "': unknown key");

  JobConfig c;
  bool any_inc = j.contains("dims_small") || j.contains("adjacency") || j.contains("trace");
  if (any_inc) {
    for (const char* k : {"dims_small", "adjacency", "trace"})
      if (!j.contains(k)) throw ConfigError(std::string("field '") + k + "': required with the inclusion spec");
    c.has_inclusion = true;
    c.dims_small = parse_int_list(j["dims_small"], "dims_small", 1);
    const json& a = j["adjacency"];
    if (!a.is_array() || a.empty()) throw ConfigError("field 'adjacency': expected a non-empty list of rows");
    for (size_t k = 0; k < a.size(); ++k)
      c.adjacency.push_back(parse_int_list(a[k], "adjacency[" + std::to_string(k) + "]", 0));
    const json& t = j["trace"];
    if (t.is_string() && trim(t.get<std::string>()) == "markov") {
      c.markov = true;
    } else if (t.is_array()) {
      for (size_t l = 0; l < t.size(); ++l) c.trace.push_back(parse_real(t[l], "trace[" + std::to_string(l) + "]"));
    } else {
      throw ConfigError("field 'trace': expected a list of weights or \"markov\"");
    }
    validate_inclusion(c);
  }
  if (j.contains("extend_upward")) {
    if (!j["extend_upward"].is_boolean()) throw ConfigError("field 'extend_upward': expected true or false");
    c.extend_upward = j["extend_upward"].get<bool>();
  }
  if (j.contains("phi")) c.phi = j["phi"];
  if (j.contains("psi")) c.psi = j["psi"];
  if (j.contains("pgrid")) {
    const json& g = j["pgrid"];
    if (!g.is_array() || g.empty()) throw ConfigError("field 'pgrid': expected a non-empty list");
    c.pgrid.clear();
    for (size_t i = 0; i < g.size(); ++i) c.pgrid.push_back(parse_real(g[i], "pgrid[" + std::to_string(i) + "]"));
  }
  if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(parse_integer(j["seed"], "seed"));
  if (j.contains("trials")) c.trials = static_cast<int>(parse_integer(j["trials"], "trials", 1));
  if (j.contains("budget")) c.budget = static_cast<int>(parse_integer(j["budget"], "budget", 1));
  if (j.contains("tol")) {
    c.tol = parse_real(j["tol"], "tol");
    if (!(c.tol > 0)) throw ConfigError("field 'tol': must be positive");
  }
  if (j.contains("suites")) {
    const json& s = j["suites"];
    if (!s.is_array()) throw ConfigError("field 'suites': expected a list of suite names");
    for (size_t i = 0; i < s.size(); ++i) {
      std::string name = s[i].is_string() ? s[i].get<std::string>() : "";
      const auto& all = harness_suites();
      if (std::find(all.begin(), all.end(), name) == all.end())
        throw ConfigError("field 'suites[" + std::to_string(i) + "]': unknown suite " + s[i].dump());
      c.suites.push_back(name);
    }
  }
  return c;
}

inline void validate_pgrid(const std::vector<double>& g) {
  for (double p : g)
    if (!(p >= 0.5)) throw ConfigError("field 'pgrid': p = " + format_number(p) + " is outside [1/2, inf]");
}

// ---------------------------------------------------------------------------
// Instances and channels

struct Instance {
  Inclusion inc;
  Tower tower;
  std::optional<Downward> down;
};

inline Instance build_instance(const JobConfig& c) {
  if (!c.has_inclusion) throw ConfigError("config: this command needs dims_small, adjacency and trace");
  Instance in;
  TraceSpec spec = c.markov ? TraceSpec::markov_trace() : TraceSpec::explicit_weights(c.trace);
  Inclusion base;
  try {
    base = build_inclusion(c.dims_small, c.adjacency, spec);
  } catch (const NumericalError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string(c.markov ? "field 'trace'" : "field 'adjacency'") + ": " + e.what());
  }
  if (c.extend_upward) {
    in.down = extend_upward(base);
    in.inc = in.down->inc;
  } else {
    in.inc = base;
  }
  in.tower = build_tower(in.inc);
  return in;
}

inline LinearMap build_channel(const json& d, const std::string& field, const Instance& in) {
  const Algebra& M = in.inc.big;
  auto random_channel = [&](std::uint64_t seed) {
    Rng rng(seed);
    return random_bimodule_channel(rng, in.tower);
  };
  if (d.is_string()) {
    std::string s = trim(d.get<std::string>());
    if (s == "identity") return LinearMap::identity(M);
    if (s == "cond_exp") return cond_exp_map(in.inc);
    const std::string head = "from_multiplier_random(";
    if (s.rfind(head, 0) == 0 && s.back() == ')') {
      std::string arg = s.substr(head.size(), s.size() - head.size() - 1);
      return random_channel(static_cast<std::uint64_t>(parse_integer(json(arg), field)));
    }
    throw ConfigError("field '" + field + "': unknown channel '" + s + "'");
  }
  if (!d.is_object()) throw ConfigError("field '" + field + "': expected a channel name or constructor object");
  if (d.contains("from_multiplier_random")) {
    if (d.size() != 1) throw ConfigError("field '" + field + "': unexpected keys next to from_multiplier_random");
    return random_channel(
        static_cast<std::uint64_t>(parse_integer(d["from_multiplier_random"], field + ".from_multiplier_random")));
  }
  if (d.contains("compose")) {
    if (d.size() != 1) throw ConfigError("field '" + field + "': unexpected keys next to compose");
    const json& list = d["compose"];
    if (!list.is_array() || list.empty()) throw ConfigError("field '" + field + ".compose': expected a non-empty list");
    // compose([a, b, c]) = a o b o c
    LinearMap out = build_channel(list.back(), field + ".compose[" + std::to_string(list.size() - 1) + "]", in);
    for (size_t i = list.size() - 1; i-- > 0;)
      out = compose(build_channel(list[i], field + ".compose[" + std::to_string(i) + "]", in), out);
    return out;
  }
  if (d.contains("convex")) {
    if (!d.contains("weights") || d.size() != 2)
      throw ConfigError("field '" + field + "': convex needs exactly the keys convex and weights");
    const json &list = d["convex"], &w = d["weights"];
    if (!list.is_array() || list.empty() || !w.is_array() || w.size() != list.size())
      throw ConfigError("field '" + field + ".weights': expected one weight per channel");
    LinearMap out{M, M, Mat::Zero(M.lin_dim(), M.lin_dim())};
    double total = 0;
    for (size_t i = 0; i < list.size(); ++i) {
      std::string wf = field + ".weights[" + std::to_string(i) + "]";
      double x = parse_real(w[i], wf);
      if (!(x >= 0)) throw ConfigError("field '" + wf + "': weights must be nonnegative");
      total += x;
      out = out + x * build_channel(list[i], field + ".convex[" + std::to_string(i) + "]", in);
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("field '" + field + ".weights': weights must sum to 1");
    return out;
  }
  throw ConfigError("field '" + field + "': unknown channel constructor " + d.dump());
}

// ---------------------------------------------------------------------------
// Reports

struct Row {
  std::string instance;
  std::string quantity;
  std::string method;
  std::optional<double> p;
  double value = 0;
  std::optional<double> margin;
  std::optional<std::uint64_t> seed;
};

struct Report {
  std::string command;
  std::string instance;
  json metadata;
  std::vector<Row> rows;
  bool violation = false;
  std::vector<std::string> messages;

  Row& add(std::string quantity, std::string method, double value) {
    rows.push_back({instance, std::move(quantity), std::move(method), std::nullopt, value, std::nullopt, std::nullopt});
    return rows.back();
  }
  // Cross-checked pair; a margin above tol is a violation.
  Row& add_checked(std::string quantity, std::string method, double value, double margin, double tol) {
    Row& r = add(std::move(quantity), std::move(method), value);
    r.margin = margin;
    if (!(margin <= tol)) flag(r.quantity + " (" + r.method + ") margin " + format_number(margin));
    return r;
  }
  void flag(const std::string& why) {
    violation = true;
    messages.push_back("violation: " + why);
  }
};

inline std::string csv_header() { return "schema_version,command,instance_digest,quantity,method,p,value,margin,seed"; }

inline void write_csv(const Report& r, std::ostream& os) {
  os << "# " << json{{"command", r.command}, {"config", r.metadata}}.dump() << "\n";
  os << csv_header() << "\n";
  for (const Row& row : r.rows) {
    os << kSchemaVersion << "," << r.command << "," << row.instance << "," << row.quantity << "," << row.method << ","
       << (row.p ? format_number(*row.p) : "") << "," << format_number(row.value) << ","
       << (row.margin ? format_number(*row.margin) : "") << "," << (row.seed ? std::to_string(*row.seed) : "")
       << "\n";
  }
}

inline void write_json(const Report& r, std::ostream& os) {
  json rows = json::array();
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(format_number(v)); };
  for (const Row& row : r.rows) {
    json o{{"instance_digest", row.instance}, {"quantity", row.quantity}, {"method", row.method},
           {"value", num(row.value)}};
    o["p"] = row.p ? num(*row.p) : json(nullptr);
    o["margin"] = row.margin ? num(*row.margin) : json(nullptr);
    o["seed"] = row.seed ? json(*row.seed) : json(nullptr);
    rows.push_back(o);
  }
  json out{{"schema_version", kSchemaVersion}, {"command", r.command},     {"instance_digest", r.instance},
           {"config", r.metadata},            {"violation", r.violation}, {"rows", rows}};
  os << out.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline bool is_id_pair(const JobConfig& c) {
  return c.phi == json("identity") && c.psi == json("cond_exp");
}

// Best available value of H(Phi|Psi): closed form, downward formula or search.
struct HValue {
  double value;
  std::string method;
  bool exact;
};

inline HValue h_value(const JobConfig& c, const Instance& in, const LinearMap& phi, const LinearMap& psi) {
  if (is_id_pair(c)) return {h_closed_form_subalgebra(in.inc), "closed-form", true};
  if (in.down) return {h_downward(phi, psi, in.tower, in.down->e_minus1).value, "downward", true};
  return {h_partition_search(phi, psi, in.inc.trace_big, c.budget, c.seed).best, "search", false};
}

template <typename F>
auto with_context(const std::string& what, F f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw NumericalError(what + ": " + e.what());
  }
}

}  // namespace detail

inline Report cmd_index(const JobConfig& c) {
  Instance in = build_instance(c);
  Report r;
  r.command = "index";
  r.instance = instance_digest(in.inc);
  const Inclusion& inc = in.inc;
  r.add_checked("delta_squared", "bratteli", inc.index,
                std::abs(index_from_basis(inc, inc.pp) - inc.index), c.tol);
  r.add("delta", "bratteli", inc.delta);
  DownwardCriterion dc = downward_criterion(inc);
  r.add("downward_criterion", "a_kl<=n_k", dc.holds ? 1.0 : 0.0);
  for (auto [k, l] : dc.witness)
    r.add("criterion_witness", "k=" + std::to_string(k) + ";l=" + std::to_string(l), inc.a(k, l));
  return r;
}

inline Report cmd_entropies(const JobConfig& c) {
  Instance in = build_instance(c);
  Report r;
  r.command = "entropies";
  r.instance = instance_digest(in.inc);
  const Tower& t = in.tower;
  LinearMap phi = build_channel(c.phi, "phi", in), psi = build_channel(c.psi, "psi", in);

  double st = detail::with_context("S_tau", [&] { return s_tau(phi, psi, t).value; });
  r.add("S_tau", "multiplier", st);
  if (detail::is_id_pair(c)) {
    double h = h_closed_form_subalgebra(in.inc), ub = upper_bound_value(t), gap = gap_formula(in.inc);
    r.add("H", "closed-form", h);
    r.add_checked("S_tau", "closed-form", ub, std::abs(ub - st), c.tol);
    r.add_checked("gap", "closed-form", gap, std::abs(gap - (ub - h)), c.tol);
  }
  if (in.down) {
    double hd = detail::with_context("H", [&] { return h_downward(phi, psi, t, in.down->e_minus1).value; });
    r.add_checked("H", "downward", hd, std::abs(hd - st), c.tol);
    TemperleyLieb tl = temperley_lieb(t, in.down->e_minus1);
    r.add_checked("temperley_lieb", "residual", std::max(tl.lower, tl.upper), std::max(tl.lower, tl.upper), c.tol);
  }
  DownwardData dd;
  if (in.down) dd = {in.down->e_minus1, t.ops.Delta0, in.inc};
  SearchResult s = detail::with_context("H search", [&] {
    return h_partition_search(phi, psi, in.inc.trace_big, c.budget, c.seed, kAllStrategies, in.down ? &dd : nullptr);
  });
  // Lower bound: only a deficit below S_tau is allowed.
  Row& sr = r.add("H", "search", s.best);
  sr.margin = st - s.best;
  sr.seed = c.seed;
  if (!(s.best <= st + c.tol)) r.flag("H search exceeds S_tau");

  ArakiResult ar = detail::with_context("S_araki", [&] {
    return araki(phi, psi, in.inc.trace_big, Element::identity(in.inc.big));
  });
  r.add_checked("S_araki", "correspondence", ar.divergence.value, std::abs(ar.divergence.value - st), c.tol);
  return r;
}

inline Report cmd_renyi_curve(const JobConfig& c) {
  validate_pgrid(c.pgrid);
  Instance in = build_instance(c);
  Report r;
  r.command = "renyi-curve";
  r.instance = instance_digest(in.inc);
  const Tower& t = in.tower;
  LinearMap phi = build_channel(c.phi, "phi", in), psi = build_channel(c.psi, "psi", in);
  MultiplierPair mp = detail::with_context("S_p", [&] { return multiplier_pair(phi, psi, t); });
  double st = s_tau(mp, t).value;

  std::vector<double> grid = c.pgrid;
  std::sort(grid.begin(), grid.end());
  double prev = -kInf, worst_step = kInf, lo = kInf, hi = -kInf;
  bool monotone = true;
  for (double p : grid) {
    RenyiVariants v = detail::with_context("S_p", [&] { return s_p(mp, t, p); });
    double x = v.trace_scaled.value;
    Row& row = r.add("S_p", "trace_scaled", x);
    row.p = p;
    if (p == 1.0) row.margin = std::abs(x - st);
    r.add("S_p", "raw", v.raw.value).p = p;
    r.add("S_p", "delta_prefixed", v.delta_prefixed.value).p = p;
    if (std::isfinite(prev) || std::isfinite(x)) {
      double step = x - prev;
      worst_step = std::min(worst_step, step);
      if (!(step >= -c.tol)) monotone = false;
    }
    prev = x;
    if (p >= 1.0) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  Row& m = r.add("monotone_in_p", "trace_scaled", monotone ? 1.0 : 0.0);
  m.margin = grid.size() > 1 ? worst_step : 0.0;
  if (!monotone) r.flag("S_p is not monotone in p");
  for (const Row& row : r.rows)
    if (row.p && *row.p == 1.0 && row.method == "trace_scaled" && !(*row.margin <= c.tol))
      r.flag("S_1 differs from S_tau");

  LambdaResult lam = lambda_multiplier(mp.phi_hat, mp.psi_hat);
  double upper = lam.infinite_by_convention ? kInf : -std::log(lam.value);
  Row& ur = r.add("neg_log_lambda", "multiplier", upper);
  if (hi > -kInf) {
    ur.margin = upper - hi;
    if (!(upper - hi >= -c.tol)) r.flag("S_p exceeds -log lambda");
  }
  detail::HValue h = detail::with_context("H", [&] { return detail::h_value(c, in, phi, psi); });
  Row& hr = r.add("H", h.method, h.value);
  if (lo < kInf) {
    hr.margin = lo - h.value;
    if (!(lo - h.value >= -c.tol)) r.flag("S_p below H for p >= 1");
  }
  return r;
}

inline Report cmd_check(const JobConfig& c) {
  HarnessConfig hc;
  hc.suites = c.suites;
  hc.trials = c.trials;
  hc.seed = c.seed;
  hc.slack = c.tol;
  hc.search_budget = c.budget;
  HarnessReport rep = theorem_harness(hc);
  Report r;
  r.command = "check";
  r.instance = "harness";
  for (const CheckRecord& rec : rep.records) {
    Row row{rec.instance, rec.suite, rec.skipped ? "skipped" : "trial", std::nullopt, rec.lhs, rec.margin, rec.seed};
    r.rows.push_back(row);
    if (rec.violated)
      r.messages.push_back("violation: " + rec.suite + " trial " + std::to_string(rec.trial) + " seed " +
                           std::to_string(rec.seed) + " margin " + format_number(rec.margin) +
                           (rec.note.empty() ? "" : " (" + rec.note + ")"));
  }
  r.add("violations", "count", rep.violations);
  r.add("skipped", "count", rep.skipped);
  r.violation = rep.violations > 0;
  return r;
}

inline Report run_command(const std::string& command, const JobConfig& c) {
  Report r;
  if (command == "index") r = cmd_index(c);
  else if (command == "entropies") r = cmd_entropies(c);
  else if (command == "renyi-curve") r = cmd_renyi_curve(c);
  else if (command == "check") r = cmd_check(c);
  else throw ConfigError("unknown command: " + command);
  r.metadata = c.echo();
  return r;
}

// ---------------------------------------------------------------------------
// Entry point

struct FaultGuard {
  explicit FaultGuard(bool on) { umegaki_sign_fault() = on; }
  ~FaultGuard() { umegaki_sign_fault() = false; }
};

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite-dimensional inclusions, towers and CP-map entropies", "fdvn"};
  app.require_subcommand(1);
  std::string config_path, out_path, format = "csv", fault, pgrid;
  std::optional<long long> seed, trials, budget;
  std::optional<double> tol;
  app.add_option("--config", config_path, "JSON job configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed");
  app.add_option("--trials", trials, "trials per property suite");
  app.add_option("--budget", budget, "partition-search evaluation budget");
  app.add_option("--tol", tol, "cross-check tolerance / harness slack");
  app.add_option("--pgrid", pgrid, "comma separated p values, inf allowed");
  app.add_option("--out", out_path, "write data to FILE instead of stdout");
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--inject-fault", fault)->group("")->check(CLI::IsMember({"umegaki-sign"}));
  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (auto [name, help] : {std::pair{"index", "Jones index and downward criterion"},
                            std::pair{"entropies", "H, S_tau, Araki and gap with cross-check margins"},
                            std::pair{"renyi-curve", "sandwiched Renyi curve over the p grid"},
                            std::pair{"check", "seeded property suites"}})
    subs.push_back({name, app.add_subcommand(name, help)->fallthrough()});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  std::string command;
  for (auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  try {
    JobConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      cfg = parse_config(parse_json_text(ss.str(), config_path));
    }
    if (seed) {
      if (*seed < 0) throw ConfigError("--seed: must be nonnegative");
      cfg.seed = static_cast<std::uint64_t>(*seed);
    }
    if (trials) {
      if (*trials < 1) throw ConfigError("--trials: must be at least 1");
      cfg.trials = static_cast<int>(*trials);
    }
    if (budget) {
      if (*budget < 1) throw ConfigError("--budget: must be at least 1");
      cfg.budget = static_cast<int>(*budget);
    }
    if (tol) {
      if (!(*tol > 0)) throw ConfigError("--tol: must be positive");
      cfg.tol = *tol;
    }
    if (!pgrid.empty()) cfg.pgrid = parse_pgrid(pgrid);
    validate_pgrid(cfg.pgrid);

    FaultGuard guard(fault == "umegaki-sign");
    if (!fault.empty()) err << "fdvn: fault injection active: " << fault << "\n";
    Report rep = run_command(command, cfg);
    for (const std::string& m : rep.messages) err << "fdvn: " << m << "\n";

    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path);
      if (!file) throw ConfigError("--out: cannot open " + out_path);
    }
    std::ostream& os = out_path.empty() ? out : file;
    if (format == "json") write_json(rep, os);
    else write_csv(rep, os);
    return rep.violation ? kViolation : kOk;
  } catch (const ConfigError& e) {
    err << "fdvn: config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "fdvn: numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }
}

}  // namespace fdvn::cli
