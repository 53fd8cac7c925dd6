// mixfield: build stationary lattice field models with prescribed dependence
// decay, measure their mixing coefficients, and exercise them empirically.
//
// Exit codes: 0 success (and all checks passed), 1 a requested check failed,
// 2 invalid usage or an execution error (bad parameters, resource caps, ...).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mixfield/coefficients.hpp"
#include "mixfield/errors.hpp"
#include "mixfield/field.hpp"
#include "mixfield/nu.hpp"
#include "mixfield/sampler.hpp"
#include "mixfield/verify.hpp"

namespace {

using namespace mixfield;
using nlohmann::ordered_json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

ordered_json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad " + what + ": " + e.what());
  }
}

FieldModel load_field(const std::string& path) {
  return FieldModel::from_json(parse_json_text(read_text_file(path), "field spec"));
}

// Prints to --out when given, else to stdout.
void emit_json(const std::string& out_path, const ordered_json& j) {
  std::string text = j.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_text_file(out_path, text);
}

std::string set_str(const IndexSet& s) { return s.empty() ? "-" : s.str(); }

// "a..b" or a single "n".
std::pair<int, int> parse_n_range(const std::string& text) {
  auto bad = [&] { return ParseError("bad --n-range '" + text + "', want a..b"); };
  std::size_t dots = text.find("..");
  int a = 0, b = 0;
  try {
    if (dots == std::string::npos) {
      a = b = std::stoi(text);
    } else {
      a = std::stoi(text.substr(0, dots));
      b = std::stoi(text.substr(dots + 2));
    }
  } catch (const std::exception&) {
    throw bad();
  }
  if (a < 1 || b < a) throw bad();
  return {a, b};
}

// ---------------------------------------------------------------------------
// nu

struct NuArgs {
  int m = 3;
  std::string theta;
  bool check = false;
  double rho_tol = 1e-9;
  std::string out;
};

int run_nu(const NuArgs& a) {
  NuSpec spec(a.m, Rational::parse(a.theta));
  ordered_json j;
  j["m"] = spec.m;
  j["theta"] = spec.theta.str();
  FiniteDistribution dist = nu_dist(spec);
  j["support"] = dist.atoms().size();
  if (spec.m <= 6) {
    j["pmf"] = ordered_json::array();
    for (const auto& [x, p] : dist.atoms()) {
      ordered_json atom;
      atom["x"] = x;
      atom["p"] = p.str();
      j["pmf"].push_back(std::move(atom));
    }
  }
  bool ok = true;
  if (a.check) {
    NuCheckReport rep = check_nu_properties(spec, a.rho_tol);
    ok = rep.all_pass();
    j["checks"] = rep.to_json();
  }
  emit_json(a.out, j);
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// build

struct BuildArgs {
  std::string construction;
  int d = 1;
  int N = 2;
  int n = 1;
  std::string theta = "1/2";
  std::string rates;
  int levels = 0;
  std::string out;
};

int run_build(const BuildArgs& a) {
  FieldModel f;
  if (a.construction == "lemma31") {
    f = lemma31_field(a.d, a.N, a.n, Rational::parse(a.theta));
  } else if (a.construction == "lemma41") {
    f = lemma41_field(a.d, a.N, a.n);
  } else if (a.construction == "lemma42") {
    if (a.levels < 1) throw Error("lemma42 requires --levels >= 1");
    f = lemma42_field(a.d, a.N, a.levels);
  } else if (a.construction == "thm14") {
    if (a.rates.empty()) throw Error("thm14 requires --rates");
    f = thm14_field(a.d, a.N, RateSequence::parse(a.rates));
  } else {  // thm15 (membership enforced by the option parser)
    if (a.rates.empty()) throw Error("thm15 requires --rates");
    RateSequence rates = RateSequence::parse(a.rates);
    int L = a.levels > 0 ? a.levels : static_cast<int>(rates.values.size());
    f = thm15_field(a.d, a.N, rates, L);
  }
  write_text_file(a.out, f.to_json().dump(2) + "\n");
  std::cout << "construction: " << f.construction << "\n"
            << "d: " << f.d << "  N: " << f.N << "\n"
            << "levels: " << f.levels.size() << "  value bits: " << f.value_bits()
            << "\n"
            << "alphabet size: "
            << u128_str(static_cast<unsigned __int128>(1) << f.value_bits()) << "\n"
            << "params: " << f.params.dump() << "\n"
            << "wrote: " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// coeffs

struct CoeffsArgs {
  std::string field_path;
  std::string kind;
  std::string n_range;
  std::string window = "auto";
  std::string method = "structural";
  std::string json_out;
  int threads = 0;
};

std::string report_line(const CoefficientReport& rep) {
  std::ostringstream os;
  os << "n=" << rep.n << "  value=" << rep.value;
  if (rep.exact) os << "  exact=" << rep.exact->str();
  if (rep.bracket && !rep.bracket->tight())
    os << "  bracket=[" << rep.bracket->lower.str() << ", "
       << rep.bracket->upper.str() << "]";
  os << "  method=" << method_name(rep.method) << "  S=" << set_str(rep.witness_s)
     << "  T=" << set_str(rep.witness_t);
  if (rep.pairs_skipped > 0) os << "  skipped=" << rep.pairs_skipped;
  return os.str();
}

int run_coeffs(const CoeffsArgs& a) {
  FieldModel f = load_field(a.field_path);
  CoefficientKind kind = kind_from_name(a.kind);
  auto [n_lo, n_hi] = parse_n_range(a.n_range);
  EngineOptions opts;
  opts.threads = a.threads;

  std::cout << "kind=" << kind_name(kind) << "  window=" << a.window
            << "  method=" << a.method << "\n";
  ordered_json rows = ordered_json::array();
  for (int n = n_lo; n <= n_hi; ++n) {
    IndexSet w =
        a.window == "auto" ? auto_window(f, n) : parse_window(a.window, f.d);
    ordered_json row;
    if (a.method == "both") {
      CoefficientReport rs =
          windowed_coefficient(f, kind, n, w, CoefMethod::structural, opts);
      CoefficientReport rn =
          windowed_coefficient(f, kind, n, w, CoefMethod::numeric, opts);
      double delta = std::abs(rs.value - rn.value);
      std::cout << report_line(rs) << "\n";
      std::cout << "n=" << n << "  value=" << rn.value
                << "  method=numeric  S=" << set_str(rn.witness_s)
                << "  T=" << set_str(rn.witness_t) << "  delta=" << delta;
      if (rn.pairs_skipped > 0) std::cout << "  skipped=" << rn.pairs_skipped;
      std::cout << "\n";
      row = rs.to_json();
      row["numeric"] = rn.to_json();
      row["delta"] = delta;
    } else {
      CoefficientReport rep =
          windowed_coefficient(f, kind, n, w, method_from_name(a.method), opts);
      std::cout << report_line(rep) << "\n";
      row = rep.to_json();
    }
    rows.push_back(std::move(row));
  }
  if (!a.json_out.empty()) {
    ordered_json j;
    j["kind"] = std::string(kind_name(kind));
    j["window"] = a.window;
    j["method"] = a.method;
    j["rows"] = std::move(rows);
    emit_json(a.json_out, j);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string field_path;
  std::string plan = "default";
  std::string json_out;
  int threads = 0;
};

int run_verify_cmd(const VerifyArgs& a) {
  FieldModel f = load_field(a.field_path);
  VerifyPlan plan =
      a.plan == "default"
          ? default_plan(f)
          : VerifyPlan::from_json(parse_json_text(read_text_file(a.plan),
                                                  "verification plan"));
  EngineOptions opts;
  opts.threads = a.threads;
  VerifyResult res = run_verify(f, plan, opts);
  std::size_t passed = 0;
  for (const auto& r : res.results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << kind_name(r.claim.kind)
              << " n=" << r.claim.n << " window=" << r.claim.window << ": "
              << r.detail << "\n";
    if (r.pass) ++passed;
  }
  std::cout << "passed " << passed << " of " << res.results.size() << " claims\n";
  if (!a.json_out.empty()) emit_json(a.json_out, res.to_json());
  return res.all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
  std::string field_path;
  std::string window;
  std::size_t count = 0;
  std::uint64_t seed = 1;
  bool do_uniformize = false;
  std::uint64_t useed = 0;  // 0: derived from --seed
  std::string out;
  int threads = 0;
};

constexpr std::size_t kSampleWindowCap = 65536;

int run_sample(const SampleArgs& a) {
  FieldModel f = load_field(a.field_path);
  IndexSet w = parse_window(a.window, f.d);
  if (w.size() > kSampleWindowCap)
    throw WindowTooLarge("sampling window cap (" +
                         std::to_string(kSampleWindowCap) + " points) exceeded: " +
                         std::to_string(w.size()) + " points");
  SampleBatch batch = sample_window(f, w, a.count, a.seed, a.threads);
  if (a.do_uniformize) {
    std::uint64_t s2 = a.useed != 0 ? a.useed : a.seed ^ 0x9E3779B97F4A7C15ULL;
    batch = uniformize(std::move(batch), f, s2);
  }
  std::ostringstream csv;
  write_csv(batch, csv);
  std::ostream& info = a.out.empty() ? std::cerr : std::cout;
  if (a.out.empty())
    std::cout << csv.str();
  else
    write_text_file(a.out, csv.str());

  info << "rows: " << batch.rows.size() << "  sites: " << w.size()
       << "  value bits: " << f.value_bits() << "\n";
  if (f.value_bits() <= 12 && !batch.rows.empty()) {
    std::vector<std::size_t> freq(static_cast<std::size_t>(1) << f.value_bits(), 0);
    for (const auto& row : batch.rows)
      for (const auto& v : row) ++freq[static_cast<std::size_t>(v)];
    std::size_t lo = batch.rows.size() * w.size(), hi = 0;
    for (std::size_t c : freq) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    double tot = static_cast<double>(batch.rows.size() * w.size());
    info << "pooled value frequency range: [" << static_cast<double>(lo) / tot
         << ", " << static_cast<double>(hi) / tot << "]  (uniform "
         << 1.0 / static_cast<double>(freq.size()) << ")\n";
  }
  if (batch.uniformized) {
    double sum = 0.0;
    std::size_t cnt = 0;
    for (const auto& row : *batch.uniformized)
      for (double u : row) {
        sum += u;
        ++cnt;
      }
    info << "uniformized mean: " << (cnt ? sum / static_cast<double>(cnt) : 0.0)
         << "\n";
  }
  if (!a.out.empty()) info << "wrote: " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// independence

struct IndepArgs {
  std::string samples_path;
  int N = 2;
  double level = 1e-3;
  std::uint64_t mc_seed = 1;
  std::size_t max_tuples = 200;
  std::string json_out;
};

int run_independence(const IndepArgs& a) {
  std::ifstream in(a.samples_path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + a.samples_path + "'");
  SampleBatch batch = read_csv(in);
  IndependenceReport rep =
      empirical_independence(batch, a.N, a.level, a.mc_seed, a.max_tuples);
  std::cout << "tested " << rep.tuples_tested << " tuples of size "
            << rep.tuple_size << " over " << batch.rows.size() << " rows\n";
  std::size_t flags = 0;
  for (const auto& t : rep.tests)
    if (t.flagged) {
      ++flags;
      IndexSet sites = IndexSet::of(t.sites);
      std::cout << "FLAG  sites=" << sites.str() << "  p=" << t.p_value
                << "  method=" << t.method << "\n";
    }
  if (flags == 0)
    std::cout << "no dependence flagged at level " << a.level
              << " (Bonferroni over " << rep.tuples_tested << ")\n";
  else
    std::cout << flags << " tuple(s) flagged at level " << a.level << "\n";
  if (!a.json_out.empty()) emit_json(a.json_out, rep.to_json());
  return rep.any_flagged ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "mixfield: stationary lattice fields with prescribed dependence decay"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (default: MIXFIELD_THREADS, else 1)");

  NuArgs nu_args;
  auto* nu = app.add_subcommand(
      "nu", "inspect the parity-biased sign law and check its invariants");
  nu->fallthrough();  // let global options appear after the subcommand
  nu->add_option("--m", nu_args.m, "number of signs (>= 3)")->required();
  nu->add_option("--theta", nu_args.theta, "parity bias p/q in [0,1]")->required();
  nu->add_flag("--check", nu_args.check,
               "verify marginals, subsets and split coefficients");
  nu->add_option("--rho-tol", nu_args.rho_tol, "tolerance for correlation checks");
  nu->add_option("--out", nu_args.out, "write the JSON report to this path");

  BuildArgs build_args;
  auto* build = app.add_subcommand("build", "construct a field model spec");
  build->fallthrough();
  build
      ->add_option("--construction", build_args.construction,
                   "one of lemma31|lemma41|lemma42|thm14|thm15")
      ->required()
      ->check(CLI::IsMember({"lemma31", "lemma41", "lemma42", "thm14", "thm15"}));
  build->add_option("--d", build_args.d, "lattice dimension")->required();
  build->add_option("--N", build_args.N, "independence order")->required();
  build->add_option("--n", build_args.n, "separation parameter (lemma31/lemma41)");
  build->add_option("--theta", build_args.theta, "bias p/q (lemma31)");
  build->add_option("--rates", build_args.rates,
                    "nonincreasing decay targets c1,c2,... (thm14/thm15)");
  build->add_option("--levels", build_args.levels,
                    "stack depth (lemma42/thm15; thm15 defaults to the rate count)");
  build->add_option("--out", build_args.out, "write the field spec JSON here")
      ->required();

  CoeffsArgs coeffs_args;
  auto* coeffs =
      app.add_subcommand("coeffs", "measure windowed dependence coefficients");
  coeffs->fallthrough();
  coeffs->add_option("--field", coeffs_args.field_path, "field spec JSON")
      ->required();
  coeffs
      ->add_option("--kind", coeffs_args.kind,
                   "alpha | rho | rho_prime | rho_star")
      ->required()
      ->check(CLI::IsMember({"alpha", "rho", "rho_prime", "rho_star"}));
  coeffs->add_option("--n-range", coeffs_args.n_range, "separations a..b")
      ->required();
  coeffs->add_option("--window", coeffs_args.window,
                     "auto | \"{a..b}^d\" | \"(p);(q);...\"");
  coeffs
      ->add_option("--method", coeffs_args.method,
                   "structural | numeric | both")
      ->check(CLI::IsMember({"structural", "numeric", "both"}));
  coeffs->add_option("--json", coeffs_args.json_out, "also write a JSON report");

  VerifyArgs verify_args;
  auto* verify =
      app.add_subcommand("verify", "check a field against its decay claims");
  verify->fallthrough();
  verify->add_option("--field", verify_args.field_path, "field spec JSON")
      ->required();
  verify->add_option("--plan", verify_args.plan,
                     "'default' or a claims JSON file");
  verify->add_option("--json", verify_args.json_out, "also write a JSON report");

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "draw seeded field samples as CSV");
  sample->fallthrough();
  sample->add_option("--field", sample_args.field_path, "field spec JSON")
      ->required();
  sample->add_option("--window", sample_args.window, "sites to sample")
      ->required();
  sample->add_option("--count", sample_args.count, "number of replicates")
      ->required();
  sample->add_option("--seed", sample_args.seed, "RNG seed");
  sample->add_flag("--uniformize", sample_args.do_uniformize,
                   "append exactly-uniform transformed columns");
  sample->add_option("--useed", sample_args.useed,
                     "separate seed for the uniformizing noise");
  sample->add_option("--out", sample_args.out, "CSV path (default: stdout)");

  IndepArgs indep_args;
  auto* indep = app.add_subcommand(
      "independence", "screen sampled tuples for empirical dependence");
  indep->fallthrough();
  indep->add_option("--samples", indep_args.samples_path, "CSV from 'sample'")
      ->required();
  indep->add_option("--N", indep_args.N, "tuple size to test")->required();
  indep->add_option("--level", indep_args.level, "family-wise flag level");
  indep->add_option("--mc-seed", indep_args.mc_seed,
                    "seed for the resampling fallback");
  indep->add_option("--max-tuples", indep_args.max_tuples,
                    "cap on tested tuples (seeded subsample beyond)");
  indep->add_option("--json", indep_args.json_out, "also write a JSON report");

  int rc = 0;
  try {
    app.parse(argc, argv);
    coeffs_args.threads = threads;
    verify_args.threads = threads;
    sample_args.threads = threads;
    if (nu->parsed()) rc = run_nu(nu_args);
    if (build->parsed()) rc = run_build(build_args);
    if (coeffs->parsed()) rc = run_coeffs(coeffs_args);
    if (verify->parsed()) rc = run_verify_cmd(verify_args);
    if (sample->parsed()) rc = run_sample(sample_args);
    if (indep->parsed()) rc = run_independence(indep_args);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
