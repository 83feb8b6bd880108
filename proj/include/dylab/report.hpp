#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dylab/errors.hpp"

namespace dylab {

enum class Status { pass, warn, fail, skipped_gate };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::warn: return "warn";
    case Status::fail: return "fail";
    case Status::skipped_gate: return "skipped(gate)";
  }
  return "fail";
}

/// Worst of two statuses, with skipped ranked below pass.
inline Status worst(Status a, Status b) {
  auto rank = [](Status s) {
    switch (s) {
      case Status::skipped_gate: return 0;
      case Status::pass: return 1;
      case Status::warn: return 2;
      case Status::fail: return 3;
    }
    return 3;
  };
  return rank(a) >= rank(b) ? a : b;
}

/// A sample point where a check was evaluated.
struct Witness {
  double x = 0;
  std::size_t j = 0;
  double lhs = 0;
  double rhs = 0;
};

/// Outcome of one numerical verification: both sides of the inequality at the
/// worst sample, plus the witnesses that produced them.
struct CheckReport {
  std::string check;
  std::size_t n = 0;
  double lhs_max = 0;
  double rhs = 0;
  double ratio = 0;
  Status status = Status::pass;
  std::vector<Witness> witnesses;
  std::map<std::string, double> extras;
  std::string note;
};

/// A check whose hypotheses were met reported lhs > rhs.
class EstimateViolation : public Error {
 public:
  explicit EstimateViolation(CheckReport report)
      : Error(report.check + " violated: ratio " + std::to_string(report.ratio) + " at level " +
              std::to_string(report.n)),
        report_(std::move(report)) {}
  const CheckReport& report() const { return report_; }

 private:
  CheckReport report_;
};

/// Ratio lhs/rhs with 0/0 read as 0.
inline double safe_ratio(double lhs, double rhs) {
  if (lhs == 0.0) return 0.0;
  if (rhs == 0.0) return lhs > 1e-13 ? std::numeric_limits<double>::infinity() : 0.0;
  return lhs / rhs;
}

}  // namespace dylab
