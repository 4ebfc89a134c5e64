#pragma once

// p-value combination: the stable-quantile ensemble combiner and the classical
// combiners. Every combiner is oriented so that small inputs give a small
// combined p-value and rejection means p_combined <= level.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "ecit/error.hpp"
#include "ecit/rng.hpp"
#include "ecit/stable.hpp"

namespace ecit {

inline constexpr double kDefaultClampEpsilon = 1e-12;

// Non-empty p-values, each strictly inside (0, 1).
class PValueVector {
 public:
  PValueVector() = default;
  explicit PValueVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DomainError("p-value vector must be non-empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const double p = values_[i];
      if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("p-value " + std::to_string(i) + " = " + std::to_string(p) +
                          " is not strictly inside (0,1); clamp first");
      }
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

 private:
  std::vector<double> values_;
};

enum class CombineMethod {
  stable,
  tippett,
  edgington,
  fisher,
  pearson,
  mudholkar,
  stouffer,
  liptak,
};

inline std::string_view to_string(CombineMethod m) {
  switch (m) {
    case CombineMethod::stable: return "stable";
    case CombineMethod::tippett: return "tippett";
    case CombineMethod::edgington: return "edgington";
    case CombineMethod::fisher: return "fisher";
    case CombineMethod::pearson: return "pearson";
    case CombineMethod::mudholkar: return "mudholkar";
    case CombineMethod::stouffer: return "stouffer";
    case CombineMethod::liptak: return "liptak";
  }
  return "unknown";
}

inline CombineMethod parse_combine_method(std::string_view name) {
  for (const auto m : {CombineMethod::stable, CombineMethod::tippett,
                       CombineMethod::edgington, CombineMethod::fisher,
                       CombineMethod::pearson, CombineMethod::mudholkar,
                       CombineMethod::stouffer, CombineMethod::liptak}) {
    if (name == to_string(m)) return m;
  }
  if (name == "ours" || name == "ensemble") return CombineMethod::stable;
  if (name == "mudholkar_george") return CombineMethod::mudholkar;
  throw ConfigError("unknown combination method '" + std::string(name) + "'");
}

struct CombinedResult {
  double statistic = 0.0;
  Probability p_combined;
  CombineMethod method = CombineMethod::stable;
  std::size_t k = 0;
};

struct ClassicalOptions {
  // Edgington's exact Irwin-Hall null is only offered up to K = 30; beyond
  // that the moment-matched normal approximation must be requested.
  bool edgington_normal_approx = false;
};

inline constexpr std::size_t kEdgingtonExactMaxK = 30;

// Mean of the stable quantiles of the inputs, referred to the law of the mean
// of K i.i.d. copies (lower tail).
inline CombinedResult combine_stable(const PValueVector& pvals,
                                     const StableParams& params) {
  const std::size_t k = pvals.size();
  double sum = 0.0;
  for (const double p : pvals) sum += stable_quantile(Probability(p), params);
  const double statistic = sum / static_cast<double>(k);
  const auto aggregated = aggregate_params(params, k);
  return {statistic, stable_cdf(statistic, aggregated), CombineMethod::stable, k};
}

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// P(S <= s) for S the sum of k independent Uniform(0,1).
inline double irwin_hall_cdf(double s, std::size_t k) {
  const double kd = static_cast<double>(k);
  if (s <= 0.0) return 0.0;
  if (s >= kd) return 1.0;
  // Symmetric about k/2; evaluate the smaller tail for accuracy.
  if (s > kd / 2.0) return 1.0 - irwin_hall_cdf(kd - s, k);
  // The alternating sum cancels catastrophically in double precision once
  // K grows past ~15, so it is accumulated with 50 significant digits.
  using Wide = boost::multiprecision::cpp_bin_float_50;
  const Wide ws(s);
  Wide total = 0;
  Wide binom = 1;
  Wide factorial = 1;
  for (std::size_t j = 1; j <= k; ++j) factorial *= static_cast<unsigned>(j);
  const auto floor_s = static_cast<std::size_t>(std::floor(s));
  for (std::size_t j = 0; j <= floor_s; ++j) {
    const Wide term = binom * pow(ws - static_cast<unsigned>(j), static_cast<int>(k));
    total += (j % 2 == 0) ? term : Wide(-term);
    binom = binom * static_cast<unsigned>(k - j) / static_cast<unsigned>(j + 1);
  }
  return std::clamp(static_cast<double>(total / factorial), 0.0, 1.0);
}

}  // namespace detail

inline CombinedResult combine_classical(CombineMethod method, const PValueVector& pvals,
                                        const ClassicalOptions& options = {}) {
  const std::size_t k = pvals.size();
  const double kd = static_cast<double>(k);
  double statistic = 0.0;
  double p = 0.0;
  switch (method) {
    case CombineMethod::stable:
      throw ConfigError("combine_classical: use combine_stable for the stable combiner");
    case CombineMethod::tippett: {
      statistic = *std::min_element(pvals.begin(), pvals.end());
      p = -std::expm1(kd * std::log1p(-statistic));
      break;
    }
    case CombineMethod::edgington: {
      for (const double v : pvals) statistic += v;
      if (k > kEdgingtonExactMaxK) {
        if (!options.edgington_normal_approx) {
          throw DomainError("edgington: exact Irwin-Hall null unavailable for K = " +
                            std::to_string(k) + " > " +
                            std::to_string(kEdgingtonExactMaxK) +
                            "; enable the normal approximation");
        }
        p = detail::normal_cdf((statistic - kd / 2.0) / std::sqrt(kd / 12.0));
      } else {
        p = detail::irwin_hall_cdf(statistic, k);
      }
      break;
    }
    case CombineMethod::fisher: {
      for (const double v : pvals) statistic -= 2.0 * std::log(v);
      p = boost::math::cdf(
          boost::math::complement(boost::math::chi_squared(2.0 * kd), statistic));
      break;
    }
    case CombineMethod::pearson: {
      for (const double v : pvals) statistic -= 2.0 * std::log1p(-v);
      p = boost::math::cdf(boost::math::chi_squared(2.0 * kd), statistic);
      break;
    }
    case CombineMethod::mudholkar: {
      for (const double v : pvals) statistic += std::log(v) - std::log1p(-v);
      const double dof = 5.0 * kd + 4.0;
      const double scale = std::sqrt(3.0 * dof / (std::numbers::pi * std::numbers::pi *
                                                   kd * (5.0 * kd + 2.0)));
      p = boost::math::cdf(boost::math::students_t(dof), statistic * scale);
      break;
    }
    case CombineMethod::stouffer: {
      for (const double v : pvals) statistic += detail::normal_quantile(v);
      p = detail::normal_cdf(statistic / std::sqrt(kd));
      break;
    }
    case CombineMethod::liptak: {
      for (const double v : pvals) statistic += detail::normal_quantile(1.0 - v);
      p = detail::normal_cdf(-statistic / std::sqrt(kd));
      break;
    }
  }
  return {statistic, Probability(std::clamp(p, 0.0, 1.0)), method, k};
}

// Single entry point used by the ensemble engine and the CLI.
inline CombinedResult combine(CombineMethod method, const PValueVector& pvals,
                              const StableParams& params,
                              const ClassicalOptions& options = {}) {
  if (method == CombineMethod::stable) return combine_stable(pvals, params);
  return combine_classical(method, pvals, options);
}

// Randomization for p-values from an m-permutation test, which live on the
// lattice {k / (m + 1)}.
struct LatticeJitter {
  std::uint64_t seed = 0;
  std::size_t permutations = 0;
};

// Clips to [epsilon, 1 - epsilon]. With jitter, each exact lattice value p is
// first replaced by p - U / (m + 1), U ~ Uniform(0,1) (p = 0 maps to
// U / (m + 1)), which turns a valid permutation p-value into an exactly
// uniform one under the null.
inline PValueVector clamp_pvalues(std::span<const double> raw,
                                  double epsilon = kDefaultClampEpsilon,
                                  std::optional<LatticeJitter> jitter = std::nullopt) {
  if (!(epsilon > 0.0 && epsilon <= 0.01)) {
    throw DomainError("clamp epsilon must lie in (0, 0.01], got " + std::to_string(epsilon));
  }
  if (raw.empty()) throw DomainError("p-value vector must be non-empty");
  std::vector<double> out(raw.begin(), raw.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] >= 0.0 && out[i] <= 1.0)) {
      throw DomainError("raw p-value " + std::to_string(i) + " = " +
                        std::to_string(out[i]) + " outside [0,1]");
    }
  }
  if (jitter) {
    if (jitter->permutations == 0) {
      throw DomainError("lattice jitter requires a positive permutation count");
    }
    const double cells = static_cast<double>(jitter->permutations) + 1.0;
    const double width = 1.0 / cells;
    Rng rng(jitter->seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& p : out) {
      // One draw per entry regardless of lattice membership keeps the stream
      // aligned with the input index.
      const double u = unit(rng);
      const double scaled = p * cells;
      if (std::abs(scaled - std::round(scaled)) > 1e-9) continue;
      p = p > 0.0 ? p - u * width : u * width;
    }
  }
  for (auto& p : out) p = std::clamp(p, epsilon, 1.0 - epsilon);
  return PValueVector(std::move(out));
}

}  // namespace ecit
