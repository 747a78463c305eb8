#include "byzsim/stepsizes.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace byzsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq(double v) { return v * v; }

void check_common(const StepsizeInputs& in) {
  if (!(in.consts.L > 0.0)) throw ArgumentError("stepsize: L must be positive");
  if (in.G < 1) throw ArgumentError("stepsize: G must be >= 1");
  if (in.b < 1) throw ArgumentError("stepsize: b must be >= 1");
  if (!(in.delta >= 0.0 && in.delta < 0.5)) throw ArgumentError("stepsize: delta must lie in [0, 0.5)");
  if (!(in.c >= 0.0)) throw ArgumentError("stepsize: c must be non-negative");
  if (!(in.omega >= 0.0)) throw ArgumentError("stepsize: omega must be non-negative");
  if (!(in.p > 0.0 && in.p <= 1.0)) throw ArgumentError("stepsize: p must lie in (0, 1]");
  if (!(in.B >= 0.0)) throw ArgumentError("stepsize: B must be non-negative");
}

void check_tolerance(Method method, const StepsizeInputs& in) {
  const double tol = delta_tolerance(method, in);
  if (in.delta > 0.0 && !(in.delta < tol)) {
    std::ostringstream os;
    os << to_string(method) << ": delta = " << in.delta << " exceeds the admissible bound "
       << tol;
    throw DomainError(os.str(), tol);
  }
}

// (sqrt(1/G) + sqrt(8 c delta))^2
double robust_bracket(const StepsizeInputs& in) {
  return sq(std::sqrt(1.0 / static_cast<double>(in.G)) + std::sqrt(8.0 * in.c * in.delta));
}

double eta_marina2(const StepsizeInputs& in) {
  const auto& k = in.consts;
  const double calL2_b = sq(k.calL_pm) / static_cast<double>(in.b);
  return ((1.0 - in.p) / in.p) *
         (in.omega * (calL2_b + sq(k.L_pm) + sq(k.L)) + calL2_b) * robust_bracket(in);
}

double eta_dasha(const StepsizeInputs& in) {
  const auto& k = in.consts;
  const double w = in.omega * (2.0 * in.omega + 1.0);
  return (8.0 * w * (sq(k.L_pm) + sq(k.L)) +
          ((1.0 - in.p) / static_cast<double>(in.b)) * (12.0 * w + 2.0 / in.p) * sq(k.calL_pm)) *
         robust_bracket(in);
}

void check_alphas(const StepsizeInputs& in) {
  if (!(in.alpha_D > 0.0 && in.alpha_D <= 1.0)) throw ArgumentError("stepsize: alpha_D must lie in (0, 1]");
  if (!(in.alpha_P > 0.0 && in.alpha_P <= 1.0)) throw ArgumentError("stepsize: alpha_P must lie in (0, 1]");
}

double eta_ef21bc(const StepsizeInputs& in) {
  const auto& k = in.consts;
  return (32.0 / sq(in.alpha_D)) * (1.0 + 5.0 / sq(in.alpha_P)) *
         sq(1.0 + std::sqrt(8.0 * in.c * in.delta)) * (sq(k.L_pm) + sq(k.L));
}

double from_eta(const StepsizeInputs& in, double eta) { return 1.0 / (in.consts.L + std::sqrt(eta)); }

}  // namespace

double delta_tolerance(Method method, double c, double B, std::size_t G) {
  StepsizeInputs in;
  in.c = c;
  in.B = B;
  in.G = G;
  return delta_tolerance(method, in);
}

double delta_tolerance(Method method, const StepsizeInputs& in) {
  if (!(in.B >= 0.0)) throw ArgumentError("delta_tolerance: B must be non-negative");
  if (in.B == 0.0 || in.c == 0.0) return kInf;
  const double c = in.c;
  const double B = in.B;
  switch (method) {
    case Method::Marina2:
    case Method::DashaPage:
      return 1.0 / ((8.0 * c + 4.0 * std::sqrt(c)) * B);
    case Method::EF21:
    case Method::EF21BC:
      return 1.0 / (8.0 * c * sq(std::sqrt(B) + B));
    case Method::Marina:
      return in.p / (48.0 * c * B);
  }
  return kInf;
}

double stepsize_marina2(const StepsizeInputs& in) {
  check_common(in);
  check_tolerance(Method::Marina2, in);
  return from_eta(in, eta_marina2(in));
}

double stepsize_marina_baseline(const StepsizeInputs& in) {
  check_common(in);
  check_tolerance(Method::Marina, in);
  const auto& k = in.consts;
  const double calL2_b = sq(k.calL_pm) / static_cast<double>(in.b);
  const double w = in.omega;
  const double cd = in.c * in.delta;
  const double A = (6.0 * (1.0 - in.p) / in.p) *
                   ((4.0 * cd / in.p) * (w * sq(k.L) + (1.0 + w) * (sq(k.L_pm) + calL2_b)) +
                    (1.0 / (2.0 * static_cast<double>(in.G))) *
                        (w * (sq(k.L) + sq(k.L_pm)) + (1.0 + w) * calL2_b));
  return from_eta(in, A);
}

double stepsize_dasha(const StepsizeInputs& in) {
  check_common(in);
  check_tolerance(Method::DashaPage, in);
  return from_eta(in, eta_dasha(in));
}

double stepsize_ef21bc(const StepsizeInputs& in) {
  check_common(in);
  check_alphas(in);
  check_tolerance(Method::EF21BC, in);
  return from_eta(in, eta_ef21bc(in));
}

double stepsize_theory(Method method, const StepsizeInputs& in) {
  switch (method) {
    case Method::Marina: return stepsize_marina_baseline(in);
    case Method::Marina2: return stepsize_marina2(in);
    case Method::DashaPage: return stepsize_dasha(in);
    case Method::EF21: {
      StepsizeInputs copy = in;
      copy.alpha_P = 1.0;
      return stepsize_ef21bc(copy);
    }
    case Method::EF21BC: return stepsize_ef21bc(in);
  }
  throw ArgumentError("unknown method");
}

double stepsize_pl(Method method, const StepsizeInputs& in) {
  check_common(in);
  const double mu = in.consts.mu;
  if (!(mu > 0.0)) {
    throw DomainError("stepsize_pl: mu must be positive; use the non-convex stepsize instead");
  }
  const auto& k = in.consts;
  const double cd8 = 8.0 * in.c * in.delta;
  const double G = static_cast<double>(in.G);

  switch (method) {
    case Method::Marina2: {
      check_tolerance(Method::Marina2, in);
      const double eta = 2.0 * eta_marina2(in);
      return std::min(from_eta(in, eta), in.p / (2.0 * mu));
    }
    case Method::DashaPage: {
      if (!(in.a > 0.0 && in.a <= 1.0)) throw ArgumentError("stepsize_pl: a must lie in (0, 1]");
      const double w = in.omega;
      const double D = 1.0 - 2.0 * w * sq(in.a) - sq(1.0 - in.a) - in.a / 2.0;
      if (!(D > 0.0)) {
        throw DomainError("stepsize_pl: momentum a = " + std::to_string(in.a) +
                          " is too large for omega = " + std::to_string(w));
      }
      const double kappa = 1.0 - 8.0 * in.B * in.c * in.delta - in.B * std::sqrt(cd8 / G);
      if (!(kappa > 0.0)) {
        throw DomainError("stepsize_pl: delta too large for the heterogeneity bound B",
                          delta_tolerance(Method::DashaPage, in));
      }
      // (1 + sqrt(8 c delta G))/G + 8 c delta + sqrt(8 c delta / G)
      const double factor = (1.0 + std::sqrt(cd8 * G)) / G + cd8 + std::sqrt(cd8 / G);
      const double eta =
          (8.0 * w * (sq(k.L_pm) + sq(k.L)) / D +
           ((1.0 - in.p) / static_cast<double>(in.b)) * sq(k.calL_pm) * (20.0 * w / D + 4.0 / in.p)) *
          factor;
      return std::min({from_eta(in, eta), in.p / (2.0 * mu * kappa), in.a / (2.0 * mu * kappa)});
    }
    case Method::EF21:
    case Method::EF21BC: {
      check_alphas(in);
      const double aD = in.alpha_D;
      const double aP = method == Method::EF21 ? 1.0 : in.alpha_P;
      const double kappa = 1.0 - in.B * (cd8 + std::sqrt(cd8));
      if (!(kappa > 0.0)) {
        throw DomainError("stepsize_pl: delta too large for the heterogeneity bound B",
                          delta_tolerance(Method::EF21BC, in));
      }
      const double eta = (64.0 / sq(aD)) * (1.0 + (10.0 / sq(aP)) * (1.0 - aP / 4.0)) *
                         sq(1.0 + std::sqrt(cd8)) * (sq(k.L_pm) + sq(k.L));
      return std::min({from_eta(in, eta), aD / (8.0 * kappa * mu), aP / (4.0 * kappa * mu)});
    }
    case Method::Marina:
      throw ArgumentError("stepsize_pl: no PL stepsize for the baseline; use the non-convex one");
  }
  throw ArgumentError("unknown method");
}

}  // namespace byzsim
