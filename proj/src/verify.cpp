#include "mixfield/verify.hpp"

#include <cmath>

namespace mixfield {

namespace {

std::string compare_name(ClaimCompare c) {
  return c == ClaimCompare::equal ? "equal" : "at_least";
}

ClaimCompare compare_from_name(const std::string& s) {
  if (s == "equal") return ClaimCompare::equal;
  if (s == "at_least") return ClaimCompare::at_least;
  throw ParseError("unknown comparison: '" + s + "'");
}

}  // namespace

nlohmann::ordered_json VerifyPlan::to_json() const {
  nlohmann::ordered_json j;
  j["construction"] = construction;
  j["claims"] = nlohmann::ordered_json::array();
  for (const auto& c : claims) {
    nlohmann::ordered_json jc;
    jc["kind"] = std::string(kind_name(c.kind));
    jc["n"] = c.n;
    jc["expected"] = c.expected.str();
    jc["compare"] = compare_name(c.compare);
    jc["window"] = c.window;
    j["claims"].push_back(std::move(jc));
  }
  return j;
}

VerifyPlan VerifyPlan::from_json(const nlohmann::ordered_json& j) {
  VerifyPlan plan;
  try {
    plan.construction = j.value("construction", std::string("custom"));
    for (const auto& jc : j.at("claims")) {
      Claim c;
      c.kind = kind_from_name(jc.at("kind").get<std::string>());
      c.n = jc.at("n").get<int>();
      if (c.n < 1) throw ParseError("claim gap must be positive");
      c.expected = Rational::parse(jc.at("expected").get<std::string>());
      if (!c.expected.is_probability())
        throw ParseError("claim expectation " + c.expected.str() +
                         " outside [0,1]");
      c.compare = compare_from_name(jc.at("compare").get<std::string>());
      c.window = jc.value("window", std::string("auto"));
      plan.claims.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad verification plan: ") + e.what());
  }
  return plan;
}

VerifyPlan default_plan(const FieldModel& f) {
  VerifyPlan plan;
  plan.construction = f.construction;
  auto add = [&plan](CoefficientKind k, int n, Rational expected) {
    Claim c;
    c.kind = k;
    c.n = n;
    c.expected = expected;
    plan.claims.push_back(std::move(c));
  };
  // Re-validate the recorded rates: a hand-edited spec with a non-monotone
  // sequence has no coherent decay profile to check against.
  auto rates_of = [&f]() {
    std::vector<Rational> vals;
    for (const auto& r : f.params.at("rates"))
      vals.push_back(Rational::parse(r.get<std::string>()));
    return RateSequence::of(std::move(vals));
  };

  if (f.construction == "lemma31") {
    int n = f.params.at("n").get<int>();
    Rational theta = Rational::parse(f.params.at("theta").get<std::string>());
    add(CoefficientKind::rho_star, 1, theta);
    add(CoefficientKind::alpha, n, theta / Rational(4));
    add(CoefficientKind::rho, n, theta);
    add(CoefficientKind::rho_prime, n, theta);
    add(CoefficientKind::rho_star, n, theta);
    add(CoefficientKind::alpha, n + 1, Rational(0));
    add(CoefficientKind::rho, n + 1, Rational(0));
    add(CoefficientKind::rho_prime, n + 1, Rational(0));
    add(CoefficientKind::rho_star, n + 1, Rational(0));
  } else if (f.construction == "lemma41") {
    int n = f.params.at("n").get<int>();
    add(CoefficientKind::rho_star, n, Rational(1));
    add(CoefficientKind::rho, 1, Rational(1));
    add(CoefficientKind::rho, 2, Rational(0));
    add(CoefficientKind::rho_prime, 2, Rational(0));
  } else if (f.construction == "lemma42") {
    int L = f.params.at("L").get<int>();
    for (int n = 1; n <= L; ++n) add(CoefficientKind::rho_star, n, Rational(1));
    add(CoefficientKind::rho, 1, Rational(1));
    add(CoefficientKind::rho, 2, Rational(0));
    add(CoefficientKind::rho_prime, 2, Rational(0));
  } else if (f.construction == "thm14") {
    RateSequence rates = rates_of();
    for (std::size_t i = 0; i < rates.values.size(); ++i) {
      Rational c = rates.values[i];
      int n = static_cast<int>(i) + 1;
      add(CoefficientKind::alpha, n, c / Rational(4));
      add(CoefficientKind::rho, n, c);
      add(CoefficientKind::rho_prime, n, c);
      add(CoefficientKind::rho_star, n, c);
    }
  } else if (f.construction == "thm15") {
    int L = f.params.at("L").get<int>();
    RateSequence rates = rates_of();
    for (int n = 1; n <= L; ++n) add(CoefficientKind::rho_star, n, Rational(1));
    add(CoefficientKind::rho, 1, Rational(1));
    add(CoefficientKind::rho_prime, 1, Rational(1));
    int top = std::min(L, static_cast<int>(rates.values.size()));
    for (int n = 2; n <= top; ++n) {
      add(CoefficientKind::rho, n, rates.values[n - 1]);
      add(CoefficientKind::rho_prime, n, rates.values[n - 1]);
    }
  }
  return plan;
}

VerifyResult run_verify(const FieldModel& f, const VerifyPlan& plan,
                        const EngineOptions& opts) {
  VerifyResult out;
  for (const auto& claim : plan.claims) {
    ClaimResult cr;
    cr.claim = claim;
    IndexSet window = claim.window == "auto" ? auto_window(f, claim.n)
                                             : parse_window(claim.window, f.d);
    cr.report = windowed_coefficient(f, claim.kind, claim.n, window,
                                     CoefMethod::structural, opts);
    if (cr.report.bracket && !cr.report.bracket->tight()) {
      // Not expected from the structural engine, but stay honest if a future
      // path reports a genuine enclosure.
      cr.pass = claim.compare == ClaimCompare::equal
                    ? (cr.report.bracket->lower <= claim.expected &&
                       claim.expected <= cr.report.bracket->upper)
                    : (cr.report.bracket->upper >= claim.expected);
      cr.detail = "bracket [" + cr.report.bracket->lower.str() + ", " +
                  cr.report.bracket->upper.str() + "] vs expected " +
                  claim.expected.str();
    } else if (cr.report.exact) {
      cr.pass = claim.compare == ClaimCompare::equal
                    ? (*cr.report.exact == claim.expected)
                    : (*cr.report.exact >= claim.expected);
      cr.detail = "measured " + cr.report.exact->str() + ", expected " +
                  (claim.compare == ClaimCompare::at_least ? ">= " : "") +
                  claim.expected.str();
    } else {
      const double tol = 1e-8;
      double e = claim.expected.to_double();
      cr.pass = claim.compare == ClaimCompare::equal
                    ? std::abs(cr.report.value - e) <= tol
                    : cr.report.value >= e - tol;
      cr.detail = "measured " + std::to_string(cr.report.value) + ", expected " +
                  claim.expected.str() + " within 1e-8";
    }
    if (!cr.pass) out.all_pass = false;
    out.results.push_back(std::move(cr));
  }
  return out;
}

nlohmann::ordered_json VerifyResult::to_json() const {
  nlohmann::ordered_json j;
  j["all_pass"] = all_pass;
  j["claims"] = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json jr;
    jr["kind"] = std::string(kind_name(r.claim.kind));
    jr["n"] = r.claim.n;
    jr["expected"] = r.claim.expected.str();
    jr["compare"] = compare_name(r.claim.compare);
    jr["window"] = r.claim.window;
    jr["pass"] = r.pass;
    jr["detail"] = r.detail;
    jr["report"] = r.report.to_json();
    j["claims"].push_back(std::move(jr));
  }
  return j;
}

}  // namespace mixfield
