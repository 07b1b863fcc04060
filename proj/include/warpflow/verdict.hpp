#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace warpflow {

enum class VerdictStatus { passed, failed, not_applicable, inconclusive };

inline std::string to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::passed: return "passed";
    case VerdictStatus::failed: return "failed";
    case VerdictStatus::not_applicable: return "not_applicable";
    case VerdictStatus::inconclusive: return "inconclusive";
  }
  return "?";
}

struct Verdict {
  std::string name;
  VerdictStatus status = VerdictStatus::not_applicable;
  double worst_violation = std::numeric_limits<double>::quiet_NaN();
  double tolerance = 0.0;
  std::string location;  // "t=<time>", "node=<index>", "sample=<index>" or empty
  bool preconditions_held = false;
  std::string note;

  bool passed() const { return status == VerdictStatus::passed; }
  bool failed() const { return status == VerdictStatus::failed; }
};

namespace detail {

inline std::string at_time(double t) {
  std::ostringstream os;
  os.precision(17);
  os << "t=" << t;
  return os.str();
}

}  // namespace detail

/// Pass iff worst <= tol; records both so the invariant holds by construction.
inline Verdict graded(std::string name, double worst, double tol, std::string location) {
  Verdict v;
  v.name = std::move(name);
  v.worst_violation = worst;
  v.tolerance = tol;
  v.location = std::move(location);
  v.preconditions_held = true;
  v.status = (worst <= tol) ? VerdictStatus::passed : VerdictStatus::failed;
  return v;
}

inline Verdict not_applicable(std::string name, std::string why) {
  Verdict v;
  v.name = std::move(name);
  v.status = VerdictStatus::not_applicable;
  v.note = std::move(why);
  return v;
}

}  // namespace warpflow
