#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "symext/errors.hpp"
#include "symext/matrix.hpp"
#include "symext/states.hpp"

namespace symext {

enum class Status { Extendible, NotExtendible, Undecided };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Extendible: return "Extendible";
    case Status::NotExtendible: return "NotExtendible";
    default: return "Undecided";
  }
}

// Closed-form paths return Extendible/NotExtendible only; Undecided is
// reserved for numerical (solver) paths and for necessary-only conditions.
// margin > 0 means strictly inside the decision region of the tested
// inequality; boundary ties resolve toward Extendible.
struct Verdict {
  Status status = Status::Undecided;
  std::string witness;
  double margin = 0.0;
};

// Necessary condition: every coherence must be covered by the diagonal
// weights, |btilde(i, p)| <= sum_k sqrt(lambda(i,k) lambda(p,k)).  A
// violation rules out symmetric extension; passing proves nothing.
inline Verdict necessary_corollary(const U2InvariantState& state, double tol) {
  const int d = state.d();
  double worst = std::numeric_limits<double>::infinity();
  int wi = -1, wp = -1;
  for (int i = 0; i < d; ++i)
    for (int p = i + 1; p < d; ++p) {
      double cover = 0.0;
      for (int k = 0; k < d; ++k)
        cover += std::sqrt(std::max(state.lambda()(i, k), 0.0) *
                           std::max(state.lambda()(p, k), 0.0));
      const double slack = cover - std::abs(state.btilde()(i, p));
      if (slack < worst) {
        worst = slack;
        wi = i;
        wp = p;
      }
    }
  if (worst < -tol)
    return {Status::NotExtendible,
            "coherence (" + std::to_string(wi) + ", " + std::to_string(wp) +
                ") exceeds its diagonal cover by " + std::to_string(-worst),
            worst};
  return {Status::Undecided, "necessary condition holds; not sufficient", worst};
}

// PSD test for the arrowhead family in closed form: corner and diagonal
// nonnegative, coupling within the geometric mean, eta inside its window,
// determinant nonnegative.  Equivalent to the eigenvalue test.
inline bool md_psd_check(const MdParams& p, double tol) {
  if (p.d < 2) throw BadDomain("md_psd_check: d must be >= 2, got " + std::to_string(p.d));
  if (p.alpha < -tol || p.beta < -tol) return false;
  const double gm = std::sqrt(std::max(p.alpha, 0.0) * std::max(p.beta, 0.0));
  if (std::abs(p.xi) > gm + tol) return false;
  if (p.d == 2) return true;  // no eta slots, 2x2 covered by the above
  if (p.eta > p.beta + tol || p.eta < -p.beta / (p.d - 2) - tol) return false;
  return det_md(p) >= -tol;
}

namespace detail {
inline double checked_x(const char* who, int d, double x, int dmin) {
  if (d < dmin)
    throw BadDomain(std::string(who) + ": d must be >= " + std::to_string(dmin) + ", got " +
                    std::to_string(d));
  if (x < -1e-12 || x > 1.0 + 1e-12)
    throw BadDomain(std::string(who) + ": x = " + std::to_string(x) + " outside [0, 1]");
  return std::clamp(x, 0.0, 1.0);
}
}  // namespace detail

// Largest imbalance (a - b) per unit column weight that a single reduced
// block of weight sigma*x can carry: 2 sqrt(sigma(1-sigma)/(d-1)) +
// (d-2) sigma/(d-1).  Increases up to sigma = (d-1)/d where it reaches 1.
inline double imbalance_reach(int d, double sigma) {
  if (d < 2) throw BadDomain("imbalance_reach: d must be >= 2, got " + std::to_string(d));
  if (sigma < -1e-12 || sigma > 1.0 + 1e-12)
    throw BadDomain("imbalance_reach: sigma = " + std::to_string(sigma) + " outside [0, 1]");
  sigma = std::clamp(sigma, 0.0, 1.0);
  return 2.0 * std::sqrt(sigma * (1.0 - sigma) / (d - 1)) + (d - 2) * sigma / (d - 1.0);
}

// Largest extendible imbalance a - b at column weight x.  Below
// x = d/(2d-1) every admissible imbalance is allowed (a - b <= x always);
// above, the cap-constrained block weight sigma = (1-x)/x kicks in.
inline double ab_max(int d, double x) {
  x = detail::checked_x("ab_max", d, x, 2);
  if (x <= static_cast<double>(d) / (2 * d - 1)) return x;
  return 2.0 * std::sqrt((1.0 - x) * (2.0 * x - 1.0) / (d - 1)) +
         (d - 2) * (1.0 - x) / (d - 1.0);
}

// Definitional floor of a - b at column weight x: a = 0 gives -x/(d-1).
inline double ab_min(int d, double x) {
  x = detail::checked_x("ab_min", d, x, 2);
  return -x / (d - 1.0);
}

// Smallest extendible imbalance at column weight x.  The floor above is
// reachable only while the caps leave enough block weight, x <= d/(d+1);
// beyond that the same cap-constrained construction bounds the negative
// side, mirroring ab_max around the linear term.
inline double ab_min_extendible(int d, double x) {
  x = detail::checked_x("ab_min_extendible", d, x, 2);
  if (x <= static_cast<double>(d) / (d + 1)) return -x / (d - 1.0);
  return -2.0 * std::sqrt((1.0 - x) * (2.0 * x - 1.0) / (d - 1)) +
         (d - 2) * (1.0 - x) / (d - 1.0);
}

// Qubit special case: extendible iff x <= 2/3 or |a - b| within the radical
// bound; the region is symmetric in a <-> b.  (At d = 2 both thresholds of
// the general form coincide at 2/3 and the linear term vanishes.)
inline Verdict qubit_verdict(double a, double b) {
  GenIsoParams p(2, a, b);  // validates a, b >= 0 and x <= 1
  const double x = p.x();
  const double t = p.a() - p.b();
  const double hi = ab_max(2, x);
  const double margin = hi - std::abs(t);
  // Boundary points are extendible and exact-arithmetic ties resolve toward
  // Extendible, so the status tolerates double-rounding noise on the margin;
  // the reported margin stays raw.
  if (margin >= -1e-13)
    return {Status::Extendible,
            "|a - b| = " + std::to_string(std::abs(t)) + " within the bound " + std::to_string(hi),
            margin};
  return {Status::NotExtendible,
          "|a - b| = " + std::to_string(std::abs(t)) + " exceeds the bound " + std::to_string(hi) +
              " at x = " + std::to_string(x),
          margin};
}

// Two-sided closed form for the two-parameter family: extendible iff
// ab_min_extendible(d, x) <= a - b <= ab_max(d, x).  The margin is the
// distance to the nearer edge.  d = 2 dispatches to the qubit form.
inline Verdict geniso_verdict(const GenIsoParams& p) {
  if (p.d() == 2) return qubit_verdict(p.a(), p.b());
  const double x = p.x();
  const double t = p.a() - p.b();
  const double hi = ab_max(p.d(), x);
  const double lo = ab_min_extendible(p.d(), x);
  const double margin = std::min(hi - t, t - lo);
  // Same tie handling as the qubit form: a true boundary point may round to
  // a margin of either sign depending on how (a, b) were produced, so the
  // status snaps ties at rounding scale toward Extendible.
  if (margin >= -1e-13)
    return {Status::Extendible,
            "a - b = " + std::to_string(t) + " within [" + std::to_string(lo) + ", " +
                std::to_string(hi) + "]",
            margin};
  const bool high_side = (hi - t) < (t - lo);
  return {Status::NotExtendible,
          "a - b = " + std::to_string(t) + (high_side ? " exceeds " : " falls below ") +
              (high_side ? std::to_string(hi) : std::to_string(lo)) + " at x = " + std::to_string(x),
          margin};
}

// One-parameter subfamily: extendible iff a00 <= (d+1)/(2d), for every
// d >= 2 (3/4 at d = 2, 2/3 at d = 3, ...).
inline Verdict isotropic_verdict(int d, double a00) {
  if (d < 2) throw BadDomain("isotropic_verdict: d must be >= 2, got " + std::to_string(d));
  if (a00 < -1e-12 || a00 > 1.0 + 1e-12)
    throw BadDomain("isotropic_verdict: a00 = " + std::to_string(a00) + " outside [0, 1]");
  a00 = std::clamp(a00, 0.0, 1.0);
  const double threshold = (d + 1.0) / (2.0 * d);
  const double margin = threshold - a00;
  // ties at rounding scale resolve toward Extendible, as in the other forms
  if (margin >= -1e-13)
    return {Status::Extendible,
            "a00 = " + std::to_string(a00) + " within the threshold " + std::to_string(threshold),
            margin};
  return {Status::NotExtendible,
          "a00 = " + std::to_string(a00) + " exceeds the threshold " + std::to_string(threshold),
          margin};
}

}  // namespace symext
