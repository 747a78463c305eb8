#pragma once

#include <stdexcept>

#include "byzsim/algorithms.hpp"
#include "byzsim/objective.hpp"

namespace byzsim {

/// A theoretical condition on (delta, mu, a, ...) does not hold.
class DomainError : public std::domain_error {
 public:
  DomainError(const std::string& what, double max_delta)
      : std::domain_error(what), max_delta_(max_delta) {}
  explicit DomainError(const std::string& what) : DomainError(what, 0.0) {}
  // Largest admissible delta when the failure is a tolerance violation, else 0.
  double max_delta() const { return max_delta_; }

 private:
  double max_delta_;
};

struct StepsizeInputs {
  SmoothnessConstants consts;
  double omega = 0.0;
  double alpha_D = 1.0;
  double alpha_P = 1.0;
  double c = 1.0;
  double delta = 0.0;
  std::size_t G = 1;
  std::size_t b = 1;
  std::size_t m = 1;
  double p = 1.0;
  double a = 1.0;
  double B = 0.0;
};

/// Admissible fraction of Byzantine workers; +inf when B = 0. The baseline's
/// bound also depends on p, which is why the inputs overload exists.
double delta_tolerance(Method method, double c, double B, std::size_t G);
double delta_tolerance(Method method, const StepsizeInputs& in);

double stepsize_marina2(const StepsizeInputs& in);
double stepsize_marina_baseline(const StepsizeInputs& in);
double stepsize_dasha(const StepsizeInputs& in);
// EF21 is the alpha_P = 1 case.
double stepsize_ef21bc(const StepsizeInputs& in);

// Non-convex theoretical stepsize for any method.
double stepsize_theory(Method method, const StepsizeInputs& in);

/// Stepsize under the PL condition with constant in.consts.mu. The baseline
/// has no PL variant here and is rejected.
double stepsize_pl(Method method, const StepsizeInputs& in);

}  // namespace byzsim
