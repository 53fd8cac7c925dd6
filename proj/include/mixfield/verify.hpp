#pragma once

#include <string>
#include <vector>

#include "mixfield/coefficients.hpp"

namespace mixfield {

enum class ClaimCompare { equal, at_least };

// One decay claim: the windowed coefficient of the given kind at gap n
// equals (or dominates) the expected rational value.
struct Claim {
  CoefficientKind kind = CoefficientKind::rho;
  int n = 1;
  Rational expected;
  ClaimCompare compare = ClaimCompare::equal;
  std::string window = "auto";  // "auto" or a window expression
};

struct VerifyPlan {
  std::string construction = "custom";  // tag of the field the plan targets
  std::vector<Claim> claims;

  nlohmann::ordered_json to_json() const;
  static VerifyPlan from_json(const nlohmann::ordered_json& j);
};

// The decay profile each construction is built to satisfy.
VerifyPlan default_plan(const FieldModel& f);

struct ClaimResult {
  Claim claim;
  CoefficientReport report;
  bool pass = false;
  std::string detail;
};

struct VerifyResult {
  std::vector<ClaimResult> results;
  bool all_pass = true;

  nlohmann::ordered_json to_json() const;
};

// Measures every claim with the structural (exact) method and compares
// exactly; numeric double comparisons only back up non-exact reports, within
// tolerance 1e-8.
VerifyResult run_verify(const FieldModel& f, const VerifyPlan& plan,
                        const EngineOptions& opts = {});

}  // namespace mixfield
