#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ecit/error.hpp"

namespace ecit::quadrature {

struct Tolerance {
  double absolute = 1e-10;
  double relative = 1e-8;
  int max_intervals = 400;
};

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525048416, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

template <typename F>
Estimate kronrod21(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kWgk[10];
  double gauss = 0.0;
  for (int j = 0; j < 5; ++j) {
    const int jtw = 2 * j + 1;
    const double dx = half * kXgk[jtw];
    const double fsum = f(center - dx) + f(center + dx);
    gauss += kWg[j] * fsum;
    kronrod += kWgk[jtw] * fsum;
  }
  for (int j = 0; j < 5; ++j) {
    const int jtwm1 = 2 * j;
    const double dx = half * kXgk[jtwm1];
    kronrod += kWgk[jtwm1] * (f(center - dx) + f(center + dx));
  }
  return {kronrod * half, std::abs((kronrod - gauss) * half)};
}

struct Interval {
  double a;
  double b;
  Estimate est;
  bool operator<(const Interval& other) const {
    return est.error < other.est.error;
  }
};

}  // namespace detail

// Globally adaptive Gauss-Kronrod integration over the finite interval [a,b],
// optionally pre-split at the given interior breakpoints. Stops once the
// summed error estimate is below max(absolute, relative * |I|); throws
// NumericalError when the interval budget is exhausted first.
template <typename F>
Estimate integrate(const F& f, double a, double b, const Tolerance& tol = {},
                   const std::vector<double>& breakpoints = {}) {
  if (!(a < b)) return {0.0, 0.0};
  std::vector<double> cuts{a};
  for (const double p : breakpoints) {
    if (p > a && p < b) cuts.push_back(p);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());

  std::vector<detail::Interval> heap;
  double total = 0.0;
  double total_err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i] < cuts[i + 1])) continue;
    const auto est = detail::kronrod21(f, cuts[i], cuts[i + 1]);
    total += est.value;
    total_err += est.error;
    heap.push_back({cuts[i], cuts[i + 1], est});
  }
  std::make_heap(heap.begin(), heap.end());

  const auto converged = [&] {
    if (total_err > std::max(tol.absolute, tol.relative * std::abs(total))) {
      return false;
    }
    // The running sums drift; confirm against a fresh summation.
    total = 0.0;
    total_err = 0.0;
    for (const auto& iv : heap) {
      total += iv.est.value;
      total_err += iv.est.error;
    }
    return total_err <= std::max(tol.absolute, tol.relative * std::abs(total));
  };

  while (!converged()) {
    if (static_cast<int>(heap.size()) >= tol.max_intervals) {
      throw NumericalError("adaptive quadrature did not converge: error " +
                           std::to_string(total_err) + " after " +
                           std::to_string(heap.size()) + " intervals");
    }
    std::pop_heap(heap.begin(), heap.end());
    const auto worst = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw NumericalError("adaptive quadrature: interval underflow");
    }
    const auto left = detail::kronrod21(f, worst.a, mid);
    const auto right = detail::kronrod21(f, mid, worst.b);
    total += left.value + right.value - worst.est.value;
    total_err += left.error + right.error - worst.est.error;
    heap.push_back({worst.a, mid, left});
    std::push_heap(heap.begin(), heap.end());
    heap.push_back({mid, worst.b, right});
    std::push_heap(heap.begin(), heap.end());
    if (!std::isfinite(total)) {
      throw NumericalError("adaptive quadrature produced a non-finite value");
    }
  }
  return {total, total_err};
}

}  // namespace ecit::quadrature
