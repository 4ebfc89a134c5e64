#pragma once

// Alpha-stable distributions S(alpha, beta, gamma, delta) in the
// "1-parameterization": characteristic function
//   exp(-gamma^a |u|^a [1 - i beta tan(pi a / 2) sign(u)] + i delta u),  a != 1
//   exp(-gamma |u| [1 + i beta (2/pi) sign(u) log|u|] + i delta u),      a == 1
// This is the only parameterization the library exposes.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "ecit/error.hpp"
#include "ecit/quadrature.hpp"
#include "ecit/rng.hpp"

namespace ecit {

// A probability in [0, 1]; NaN and out-of-range values are rejected.
class Probability {
 public:
  constexpr Probability() = default;
  explicit Probability(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw DomainError("probability out of [0,1]: " + std::to_string(value));
    }
  }
  constexpr double value() const noexcept { return value_; }
  constexpr operator double() const noexcept { return value_; }

 private:
  double value_ = 0.0;
};

class StableParams {
 public:
  StableParams(double alpha, double beta = 0.0, double gamma = 1.0,
               double delta = 0.0)
      : alpha_(alpha), beta_(beta), gamma_(gamma), delta_(delta) {
    if (!std::isfinite(alpha) || !std::isfinite(beta) ||
        !std::isfinite(gamma) || !std::isfinite(delta)) {
      throw DomainError("stable parameters must be finite");
    }
    if (!(alpha > 0.0 && alpha <= 2.0)) {
      throw DomainError("stable alpha must lie in (0, 2], got " +
                        std::to_string(alpha));
    }
    if (!(beta >= -1.0 && beta <= 1.0)) {
      throw DomainError("stable beta must lie in [-1, 1], got " +
                        std::to_string(beta));
    }
    if (!(gamma > 0.0)) {
      throw DomainError("stable gamma must be positive, got " +
                        std::to_string(gamma));
    }
  }

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double gamma() const noexcept { return gamma_; }
  double delta() const noexcept { return delta_; }

  bool operator==(const StableParams&) const = default;

 private:
  double alpha_;
  double beta_;
  double gamma_;
  double delta_;
};

// Lower and upper tail probabilities, each computed without cancellation so
// that both stay accurate deep in their own tail.
struct TailProbabilities {
  double lower = 0.0;  // P(X <= x)
  double upper = 0.0;  // P(X > x)
};

inline std::complex<double> char_fn(double u, const StableParams& params) {
  using std::numbers::pi;
  if (u == 0.0) return {1.0, 0.0};
  const double a = params.alpha();
  const double b = params.beta();
  const double g = params.gamma();
  const double sgn = u > 0.0 ? 1.0 : -1.0;
  const double au = std::abs(u);
  std::complex<double> exponent;
  if (a == 1.0) {
    exponent = {-g * au, -g * au * b * (2.0 / pi) * sgn * std::log(au)};
  } else {
    const double scale = std::pow(g * au, a);
    exponent = {-scale, scale * b * std::tan(pi * a / 2.0) * sgn};
  }
  exponent += std::complex<double>(0.0, params.delta() * u);
  return std::exp(exponent);
}

namespace detail {

inline constexpr quadrature::Tolerance kCdfTolerance{1e-10, 1e-8, 400};

// The integrands below are exp(-g) and 1 - exp(-g) for a g that is monotone
// in theta. The transition between "g negligible" and "g huge" can be far
// narrower than the interval, so the interval is cut where log g crosses a
// ladder of levels and truncated where the integrand is below 1e-15.
inline constexpr std::array<double, 9> kLogLevels = {3.6,  2.0,  0.5,  -1.0, -3.0,
                                                     -8.0, -16.0, -26.0, -37.0};

struct LevelCuts {
  double lo;  // domain after truncation
  double hi;
  std::vector<double> cuts;
};

template <typename LogG>
LevelCuts level_cuts(const LogG& log_g, double lo, double hi, bool keep_small_g) {
  const double width = hi - lo;
  const double a0 = lo + 1e-13 * width;
  const double b0 = hi - 1e-13 * width;
  const double fa = log_g(a0);
  const double fb = log_g(b0);
  LevelCuts out{lo, hi, {}};
  if (!std::isfinite(fa) || !std::isfinite(fb) || fa == fb) return out;
  const bool increasing = fb > fa;
  for (const double level : kLogLevels) {
    if ((fa > level) == (fb > level)) continue;
    double a = a0;
    double b = b0;
    for (int i = 0; i < 32; ++i) {
      const double mid = 0.5 * (a + b);
      if ((log_g(mid) > level) == increasing) {
        b = mid;
      } else {
        a = mid;
      }
    }
    // Truncate conservatively: keep the bracket end on the retained side.
    if (keep_small_g && level == kLogLevels.front()) {
      if (increasing) out.hi = b; else out.lo = a;
    } else if (!keep_small_g && level == kLogLevels.back()) {
      if (increasing) out.lo = a; else out.hi = b;
    } else {
      out.cuts.push_back(0.5 * (a + b));
    }
  }
  return out;
}

// Integral of exp(-g) (keep_small_g) or of 1 - exp(-g) over [lo, hi].
template <typename LogG>
double integrate_transition(const LogG& log_g, double lo, double hi,
                            bool keep_small_g) {
  const auto domain = level_cuts(log_g, lo, hi, keep_small_g);
  if (keep_small_g) {
    const auto expneg = [&](double t) {
      const double lg = log_g(t);
      return lg > 700.0 ? 0.0 : std::exp(-std::exp(lg));
    };
    return quadrature::integrate(expneg, domain.lo, domain.hi, kCdfTolerance,
                                 domain.cuts).value;
  }
  const auto one_minus = [&](double t) {
    const double lg = log_g(t);
    return lg > 700.0 ? 1.0 : -std::expm1(-std::exp(lg));
  };
  return quadrature::integrate(one_minus, domain.lo, domain.hi, kCdfTolerance,
                               domain.cuts).value;
}

template <typename LogG>
void integrate_pair(const LogG& log_g, double lo, double hi, bool want_upper,
                    double& lower_integral, double& upper_integral) {
  const double span = hi - lo;
  if (want_upper) {
    upper_integral = integrate_transition(log_g, lo, hi, false);
    lower_integral = span - upper_integral;
  } else {
    lower_integral = integrate_transition(log_g, lo, hi, true);
    upper_integral = span - lower_integral;
  }
}

// Tail probabilities of the standard 0-parameterized stable law, alpha != 1,
// via Nolan's single-integral representation.
inline TailProbabilities s0_tails(double x, double alpha, double beta) {
  using std::numbers::pi;
  const double tan_pa2 = std::tan(pi * alpha / 2.0);
  const double zeta = -beta * tan_pa2;
  if (x < zeta) {
    const auto mirrored = s0_tails(-x, alpha, -beta);
    return {mirrored.upper, mirrored.lower};
  }
  const double theta0 = std::atan(beta * tan_pa2) / alpha;
  const double at_zeta = (pi / 2.0 - theta0) / pi;
  const double xz = x - zeta;
  if (xz <= 1e-14 * (1.0 + std::abs(zeta))) {
    return {at_zeta, 1.0 - at_zeta};
  }
  const double expo = alpha / (alpha - 1.0);
  const double log_c0 = std::log(std::cos(alpha * theta0)) / (alpha - 1.0);
  const double log_xz = std::log(xz);
  const auto log_g = [=](double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(alpha * (theta0 + theta));
    return expo * log_xz + log_c0 + expo * (std::log(c) - std::log(s)) +
           std::log(std::cos(alpha * theta0 + (alpha - 1.0) * theta)) -
           std::log(c);
  };
  const double lo = -theta0;
  const double hi = pi / 2.0;
  if (!(hi > lo)) {
    // Totally skewed to the left (alpha < 1, beta = -1): no mass above zeta.
    return {1.0, 0.0};
  }
  double keep = 0.0;  // integral of exp(-g)
  double drop = 0.0;  // integral of 1 - exp(-g)
  if (alpha > 1.0) {
    // upper = keep / pi; keep is the small quantity for large x.
    integrate_pair(log_g, lo, hi, false, keep, drop);
    const double upper = keep / pi;
    return {1.0 - upper, upper};
  }
  // alpha < 1: upper = drop / pi, lower = at_zeta + keep / pi.
  integrate_pair(log_g, lo, hi, true, keep, drop);
  const double upper = drop / pi;
  if (upper > 0.5) {
    integrate_pair(log_g, lo, hi, false, keep, drop);
    const double lower = at_zeta + keep / pi;
    return {lower, 1.0 - lower};
  }
  return {1.0 - upper, upper};
}

// Tail probabilities of the standard stable law with alpha = 1, beta != 0.
inline TailProbabilities alpha1_tails(double x, double beta) {
  using std::numbers::pi;
  if (beta < 0.0) {
    const auto mirrored = alpha1_tails(-x, -beta);
    return {mirrored.upper, mirrored.lower};
  }
  const double shift = -pi * x / (2.0 * beta) + std::log(2.0 / pi);
  const auto log_g = [=](double theta) {
    const double w = pi / 2.0 + beta * theta;
    return shift + std::log(w) - std::log(std::cos(theta)) +
           w * std::tan(theta) / beta;
  };
  double keep = 0.0;
  double drop = 0.0;
  integrate_pair(log_g, -pi / 2.0, pi / 2.0, false, keep, drop);
  double lower = keep / pi;
  if (lower > 0.5) {
    integrate_pair(log_g, -pi / 2.0, pi / 2.0, true, keep, drop);
    const double upper = drop / pi;
    return {1.0 - upper, upper};
  }
  return {lower, 1.0 - lower};
}

inline bool is_gaussian(const StableParams& p) { return p.alpha() == 2.0; }
inline bool is_cauchy(const StableParams& p) {
  return p.alpha() == 1.0 && p.beta() == 0.0;
}
inline bool is_levy(const StableParams& p) {
  return p.alpha() == 0.5 && std::abs(p.beta()) == 1.0;
}

inline TailProbabilities closed_form_tails(double x, const StableParams& p) {
  using std::numbers::pi;
  const double t = (x - p.delta()) / p.gamma();
  if (is_gaussian(p)) {
    // Normal with variance 2 gamma^2.
    return {0.5 * std::erfc(-t / 2.0), 0.5 * std::erfc(t / 2.0)};
  }
  if (is_cauchy(p)) {
    if (t == 0.0) return {0.5, 0.5};
    if (t < 0.0) {
      const double lower = std::atan(-1.0 / t) / pi;
      return {lower, 1.0 - lower};
    }
    const double upper = std::atan(1.0 / t) / pi;
    return {1.0 - upper, upper};
  }
  // Levy, totally skewed to the right (beta = 1) or its mirror.
  const double s = p.beta() > 0.0 ? t : -t;
  TailProbabilities right;
  if (s <= 0.0) {
    right = {0.0, 1.0};
  } else {
    const double r = std::sqrt(1.0 / (2.0 * s));
    right = {std::erfc(r), std::erf(r)};
  }
  return p.beta() > 0.0 ? right : TailProbabilities{right.upper, right.lower};
}

}  // namespace detail

// Tail probabilities from the integral representation alone, with no
// closed-form short-circuits. Exposed so closed forms can serve as an
// independent check of the quadrature path. Cauchy (alpha = 1, beta = 0) has no
// integral form here and is always evaluated in closed form.
inline TailProbabilities stable_tails_integral(double x,
                                               const StableParams& params) {
  using std::numbers::pi;
  if (!std::isfinite(x)) throw DomainError("stable cdf argument must be finite");
  const double a = params.alpha();
  const double b = params.beta();
  const double g = params.gamma();
  if (a == 1.0) {
    if (b == 0.0) return detail::closed_form_tails(x, params);
    const double z = (x - params.delta() - (2.0 / pi) * b * g * std::log(g)) / g;
    return detail::alpha1_tails(z, b);
  }
  const double z = (x - params.delta()) / g;
  return detail::s0_tails(z - b * std::tan(pi * a / 2.0), a, b);
}

inline TailProbabilities stable_tails(double x, const StableParams& params) {
  if (!std::isfinite(x)) throw DomainError("stable cdf argument must be finite");
  if (detail::is_gaussian(params) || detail::is_cauchy(params) ||
      detail::is_levy(params)) {
    return detail::closed_form_tails(x, params);
  }
  return stable_tails_integral(x, params);
}

inline Probability stable_cdf(double x, const StableParams& params) {
  const double lower = stable_tails(x, params).lower;
  return Probability(std::clamp(lower, 0.0, 1.0));
}

namespace detail {

// Brent's method on an increasing function with h(lo) <= 0 <= h(hi).
template <typename H>
double brent_root(const H& h, double lo, double hi, double h_lo, double h_hi,
                  double f_tol) {
  double a = lo, b = hi, fa = h_lo, fb = h_hi;
  double c = a, fc = fa, d = b - a, e = d;
  for (int iter = 0; iter < 200; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double x_tol = 2.0 * std::numeric_limits<double>::epsilon() *
                         std::max(1.0, std::abs(b));
    const double m = 0.5 * (c - b);
    if (std::abs(fb) <= f_tol || std::abs(m) <= x_tol) return b;
    if (std::abs(e) >= x_tol && std::abs(fa) > std::abs(fb)) {
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
        q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) {
        q = -q;
      } else {
        p = -p;
      }
      if (2.0 * p < std::min(3.0 * m * q - std::abs(x_tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > x_tol ? d : (m > 0.0 ? x_tol : -x_tol);
    fb = h(b);
  }
  throw NumericalError("stable quantile: root finder did not converge");
}

}  // namespace detail

// Inverse CDF. Endpoints 0 and 1 are rejected (the quantiles are infinite);
// callers combining p-values clamp first.
inline double stable_quantile(Probability p, const StableParams& params) {
  using std::numbers::pi;
  const double pv = p.value();
  if (!(pv > 0.0 && pv < 1.0)) {
    throw DomainError("stable quantile requires 0 < p < 1, got " +
                      std::to_string(pv));
  }
  const double g = params.gamma();
  const double dl = params.delta();
  if (detail::is_gaussian(params)) {
    return dl - 2.0 * g * boost::math::erfc_inv(2.0 * pv);
  }
  if (detail::is_cauchy(params)) {
    if (pv == 0.5) return dl;
    return pv < 0.5 ? dl - g / std::tan(pi * pv) : dl + g / std::tan(pi * (1.0 - pv));
  }
  if (detail::is_levy(params)) {
    if (params.beta() > 0.0) {
      const double r = boost::math::erfc_inv(pv);
      return dl + g / (2.0 * r * r);
    }
    const double r = boost::math::erfc_inv(1.0 - pv);
    return dl - g / (2.0 * r * r);
  }

  // Work in whichever tail is smaller so targets near 0 or 1 keep precision.
  const bool use_lower = pv <= 0.5;
  const double target = use_lower ? pv : 1.0 - pv;
  const auto h = [&](double x) {
    const auto t = stable_tails(x, params);
    return use_lower ? t.lower - target : target - t.upper;
  };

  const double guess = dl + g * std::tan(pi * (pv - 0.5));
  double step = g * std::max(1.0, std::abs(guess - dl));
  double lo = guess - step;
  double hi = guess + step;
  double h_lo = h(lo);
  double h_hi = h(hi);
  for (int i = 0; h_lo > 0.0; ++i) {
    if (i > 200) throw NumericalError("stable quantile: cannot bracket from below");
    hi = lo;
    h_hi = h_lo;
    step *= 2.0;
    lo -= step;
    h_lo = h(lo);
  }
  for (int i = 0; h_hi < 0.0; ++i) {
    if (i > 200) throw NumericalError("stable quantile: cannot bracket from above");
    lo = hi;
    h_lo = h_hi;
    step *= 2.0;
    hi += step;
    h_hi = h(hi);
  }
  if (h_lo == 0.0) return lo;
  if (h_hi == 0.0) return hi;
  return detail::brent_root(h, lo, hi, h_lo, h_hi, 1e-14 * std::max(target, 1e-3));
}

// Chambers-Mallows-Stuck draws, deterministic given the seed.
inline std::vector<double> stable_sample(const StableParams& params,
                                         std::size_t n, std::uint64_t seed) {
  using std::numbers::pi;
  if (n == 0) throw DomainError("stable_sample requires n >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> angle(-pi / 2.0, pi / 2.0);
  std::exponential_distribution<double> expo(1.0);
  const double a = params.alpha();
  const double b = params.beta();
  const double g = params.gamma();
  std::vector<double> out(n);
  if (a == 1.0) {
    const double shift = params.delta() + (2.0 / pi) * b * g * std::log(g);
    for (auto& v : out) {
      const double u = angle(rng);
      const double w = expo(rng);
      const double bu = pi / 2.0 + b * u;
      const double x = (2.0 / pi) *
                       (bu * std::tan(u) - b * std::log((pi / 2.0) * w * std::cos(u) / bu));
      v = g * x + shift;
    }
    return out;
  }
  const double t = b * std::tan(pi * a / 2.0);
  const double b_ang = std::atan(t) / a;
  const double s = std::pow(1.0 + t * t, 1.0 / (2.0 * a));
  for (auto& v : out) {
    const double u = angle(rng);
    const double w = expo(rng);
    const double x = s * std::sin(a * (u + b_ang)) / std::pow(std::cos(u), 1.0 / a) *
                     std::pow(std::cos(u - a * (u + b_ang)) / w, (1.0 - a) / a);
    v = g * x + params.delta();
  }
  return out;
}

// Law of the mean of K i.i.d. copies. For alpha = 1 with beta != 0 the mean
// also shifts location by (2/pi) beta gamma log K.
inline StableParams aggregate_params(const StableParams& params, std::size_t k) {
  using std::numbers::pi;
  if (k == 0) throw DomainError("aggregate_params requires K >= 1");
  const double kd = static_cast<double>(k);
  const double a = params.alpha();
  const double gamma = params.gamma() * std::pow(kd, 1.0 / a - 1.0);
  double delta = params.delta();
  if (a == 1.0 && params.beta() != 0.0) {
    delta += (2.0 / pi) * params.beta() * params.gamma() * std::log(kd);
  }
  return {a, params.beta(), gamma, delta};
}

// Law of X1 + X2 for independent stable variables sharing alpha.
inline StableParams sum_params(const StableParams& p1, const StableParams& p2) {
  if (p1.alpha() != p2.alpha()) {
    throw DomainError("sum_params requires equal alpha (" +
                      std::to_string(p1.alpha()) + " vs " +
                      std::to_string(p2.alpha()) + ")");
  }
  const double a = p1.alpha();
  const double w1 = std::pow(p1.gamma(), a);
  const double w2 = std::pow(p2.gamma(), a);
  const double beta = (p1.beta() * w1 + p2.beta() * w2) / (w1 + w2);
  return {a, std::clamp(beta, -1.0, 1.0), std::pow(w1 + w2, 1.0 / a),
          p1.delta() + p2.delta()};
}

}  // namespace ecit
