#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace formdom {

enum class Verdict { Pass, Fail };

inline const char* to_string(Verdict v) { return v == Verdict::Pass ? "PASS" : "FAIL"; }

/// Structured record of one numerical check. Violations are reported, never
/// thrown: a FAIL verdict is a valid result, an exception means the check
/// could not be run at all.
struct VerificationReport {
  std::string check;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  double max_violation = 0.0;
  nlohmann::json worst_case = nlohmann::json::object();
  Verdict verdict = Verdict::Pass;
  std::vector<std::string> notes;

  bool passed() const { return verdict == Verdict::Pass; }

  /// Track the running worst violation; `detail` describes the offending
  /// sample and is kept only for the maximum.
  void record(double violation, nlohmann::json detail) {
    if (violation > max_violation) {
      max_violation = violation;
      worst_case = std::move(detail);
    }
  }

  void finalize(double tolerance) {
    verdict = max_violation <= tolerance ? Verdict::Pass : Verdict::Fail;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"check", check},
                     {"seed", seed},
                     {"samples", samples},
                     {"max_violation", max_violation},
                     {"worst_case", worst_case},
                     {"verdict", to_string(verdict)}};
    if (!notes.empty()) j["notes"] = notes;
    return j;
  }
};

} // namespace formdom
