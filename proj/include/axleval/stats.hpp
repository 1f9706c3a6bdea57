#pragma once

// Two-sided Mann-Whitney U test for two independent samples.
//
// The pooled observations are ranked (ties get average ranks) and the rank
// sum R1 of the first sample gives U1 = R1 - n1*(n1+1)/2, the number of
// (a, b) pairs the first sample wins (plus half per tie), with
// U1 + U2 = n1*n2. Under the null hypothesis the distribution of U is the
// distribution of inversion counts over binary sequences with n1 zeros and
// n2 ones (Mann & Whitney, 1947), which satisfies the recurrence
//
//   count(n1, n2, u) = count(n1, n2-1, u) + count(n1-1, n2, u - n2)
//
// and is computed here with exact 64-bit integer arithmetic. Exact p-values
// are used for tie-free samples with n1+n2 <= 30; otherwise the normal
// approximation with continuity correction and the standard tie-corrected
// variance applies. Critical values are derived from the same exact
// distribution: the largest u whose (one- or two-tailed) cumulative
// probability stays within alpha.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "axleval/errors.hpp"

namespace axleval {

struct Sample {
  std::string label;
  std::vector<double> values;
};

enum class PMethod { Exact, NormalApproximation };
enum class Decision { Reject, FailToReject };
enum class Tails { One, Two };

struct UTestOutcome {
  double u1 = 0.0;
  double u2 = 0.0;
  double u = 0.0;  // min(u1, u2), the decision statistic
  double p_two_tailed = 1.0;
  PMethod p_method = PMethod::Exact;
  std::optional<int> critical_value;
  Decision decision = Decision::FailToReject;
  double alpha = 0.05;
};

/// Ranks 1..n over the pooled values, tied values sharing the mean of their
/// rank span. Rejects non-finite input.
inline std::vector<double> rank_with_ties(std::span<const double> pooled) {
  if (pooled.empty()) {
    throw ValidationError("rank_with_ties requires a non-empty sequence");
  }
  for (double v : pooled) {
    if (!std::isfinite(v)) {
      throw ValidationError("rank_with_ties requires finite values");
    }
  }
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });

  std::vector<double> ranks(pooled.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && pooled[order[j]] == pooled[order[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = shared;
    i = j;
  }
  return ranks;
}

struct UStatistics {
  double u1 = 0.0;
  double u2 = 0.0;
  bool has_ties = false;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups in the pooled data
};

inline UStatistics u_statistic(const Sample& a, const Sample& b) {
  if (a.values.empty() || b.values.empty()) {
    throw ValidationError("u_statistic requires two non-empty samples");
  }
  std::vector<double> pooled;
  pooled.reserve(a.values.size() + b.values.size());
  pooled.insert(pooled.end(), a.values.begin(), a.values.end());
  pooled.insert(pooled.end(), b.values.begin(), b.values.end());
  const std::vector<double> ranks = rank_with_ties(pooled);

  const double n1 = static_cast<double>(a.values.size());
  const double n2 = static_cast<double>(b.values.size());
  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) rank_sum_a += ranks[i];

  UStatistics result;
  result.u1 = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
  result.u2 = n1 * n2 - result.u1;

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (t > 1.0) {
      result.has_ties = true;
      result.tie_term += t * t * t - t;
    }
    i = j;
  }
  return result;
}

namespace detail {

/// Frequency of each u in [0, n1*n2] under the exact null distribution.
/// Safe in 64-bit integers through n1 = n2 = 20 (total C(40,20) ~ 1.4e11).
inline std::vector<std::int64_t> exact_u_distribution(int n1, int n2) {
  // dp[b] holds the count vector for (a, b) as a sweeps 0..n1.
  std::vector<std::vector<std::int64_t>> dp(static_cast<std::size_t>(n2) + 1);
  for (auto& counts : dp) counts = {1};  // a = 0: only u = 0
  for (int a = 1; a <= n1; ++a) {
    std::vector<std::vector<std::int64_t>> next(static_cast<std::size_t>(n2) + 1);
    next[0] = {1};  // b = 0: only u = 0
    for (int b = 1; b <= n2; ++b) {
      std::vector<std::int64_t> counts(static_cast<std::size_t>(a) * b + 1, 0);
      const auto& drop_a = dp[static_cast<std::size_t>(b)];       // (a-1, b), shift by b
      const auto& drop_b = next[static_cast<std::size_t>(b) - 1];  // (a, b-1), no shift
      for (std::size_t u = 0; u < drop_a.size(); ++u) counts[u + b] += drop_a[u];
      for (std::size_t u = 0; u < drop_b.size(); ++u) counts[u] += drop_b[u];
      next[static_cast<std::size_t>(b)] = std::move(counts);
    }
    dp = std::move(next);
  }
  return dp[static_cast<std::size_t>(n2)];
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

/// Two-tailed exact p-value, 2*P(U <= min(u, n1*n2 - u)) capped at 1.
/// Requires tie-free data (integral u) and n1 + n2 <= 30.
inline double exact_p_value(double u, int n1, int n2) {
  if (n1 < 1 || n2 < 1) {
    throw ValidationError("exact_p_value requires n1, n2 >= 1");
  }
  if (n1 + n2 > 30) {
    throw ValidationError("exact_p_value supports n1 + n2 <= 30; use the normal approximation");
  }
  if (u < 0.0 || u > static_cast<double>(n1) * n2) {
    throw ValidationError("u outside [0, n1*n2]");
  }
  if (u != std::floor(u)) {
    throw ValidationError(
        "non-integral u implies ties; the exact distribution assumes none — "
        "use the normal approximation");
  }
  const std::vector<std::int64_t> counts = detail::exact_u_distribution(n1, n2);
  const auto u_low = static_cast<std::int64_t>(
      std::min(u, static_cast<double>(n1) * n2 - u));
  std::int64_t cumulative = 0;
  for (std::int64_t i = 0; i <= u_low; ++i) cumulative += counts[static_cast<std::size_t>(i)];
  std::int64_t total = 0;
  for (std::int64_t c : counts) total += c;
  const double p = 2.0 * static_cast<double>(cumulative) / static_cast<double>(total);
  return std::min(p, 1.0);
}

/// Two-tailed normal-approximation p-value with continuity correction.
/// tie_term is sum(t^3 - t) over tie groups of the pooled sample (0 when
/// tie-free); it enters the variance as the standard correction.
inline double approx_p_value(double u, int n1, int n2, double tie_term = 0.0) {
  if (n1 < 1 || n2 < 1) {
    throw ValidationError("approx_p_value requires n1, n2 >= 1");
  }
  const double dn1 = n1;
  const double dn2 = n2;
  const double n = dn1 + dn2;
  const double mean = dn1 * dn2 / 2.0;
  double variance = dn1 * dn2 * (n + 1.0) / 12.0;
  if (tie_term > 0.0 && n > 1.0) {
    variance -= dn1 * dn2 * tie_term / (12.0 * n * (n - 1.0));
  }
  if (variance <= 0.0) {
    throw ValidationError("zero variance: all pooled values are tied");
  }
  const double z = -std::max(std::abs(u - mean) - 0.5, 0.0) / std::sqrt(variance);
  const double p = 2.0 * detail::normal_cdf(z);
  return std::clamp(p, 0.0, 1.0);
}

/// Largest u whose cumulative null probability stays within alpha, or
/// nullopt when even u = 0 is not extreme enough to reject.
inline std::optional<int> try_critical_value(int n1, int n2, double alpha,
                                             Tails tails = Tails::Two) {
  if (n1 < 1 || n1 > 20 || n2 < 1 || n2 > 20) {
    throw ValidationError("critical values are tabulated for n1, n2 in [1, 20]");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  const std::vector<std::int64_t> counts = detail::exact_u_distribution(n1, n2);
  std::int64_t total = 0;
  for (std::int64_t c : counts) total += c;
  const double factor = (tails == Tails::Two) ? 2.0 : 1.0;

  std::optional<int> best;
  std::int64_t cumulative = 0;
  for (std::size_t u = 0; u < counts.size(); ++u) {
    cumulative += counts[u];
    if (factor * static_cast<double>(cumulative) / static_cast<double>(total) <= alpha) {
      best = static_cast<int>(u);
    }
  }
  return best;
}

/// As try_critical_value, but absence of an entry is an error (no rejection
/// is possible at these sample sizes).
inline int critical_value_lookup(int n1, int n2, double alpha, Tails tails = Tails::Two) {
  const std::optional<int> value = try_critical_value(n1, n2, alpha, tails);
  if (!value) {
    throw ValidationError("no critical value exists for n1=" + std::to_string(n1) +
                          ", n2=" + std::to_string(n2) + " at alpha=" + std::to_string(alpha));
  }
  return *value;
}

/// Full two-sided test: U statistics, p-value (exact when tie-free and
/// small enough, else normal approximation), critical value when both
/// sample sizes are within the tabulated range, and the decision. The
/// decision compares u = min(u1, u2) against the critical value; outside
/// the tabulated range it falls back to p <= alpha.
inline UTestOutcome mann_whitney_test(const Sample& a, const Sample& b, double alpha = 0.05) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  const UStatistics stats = u_statistic(a, b);
  const int n1 = static_cast<int>(a.values.size());
  const int n2 = static_cast<int>(b.values.size());

  UTestOutcome outcome;
  outcome.u1 = stats.u1;
  outcome.u2 = stats.u2;
  outcome.u = std::min(stats.u1, stats.u2);
  outcome.alpha = alpha;

  if (!stats.has_ties && n1 + n2 <= 30) {
    outcome.p_method = PMethod::Exact;
    outcome.p_two_tailed = exact_p_value(outcome.u, n1, n2);
  } else {
    outcome.p_method = PMethod::NormalApproximation;
    outcome.p_two_tailed = approx_p_value(outcome.u, n1, n2, stats.tie_term);
  }

  if (n1 <= 20 && n2 <= 20) {
    outcome.critical_value = try_critical_value(n1, n2, alpha, Tails::Two);
  }
  if (outcome.critical_value) {
    outcome.decision = (outcome.u <= static_cast<double>(*outcome.critical_value))
                           ? Decision::Reject
                           : Decision::FailToReject;
  } else {
    outcome.decision =
        (outcome.p_two_tailed <= alpha) ? Decision::Reject : Decision::FailToReject;
  }
  return outcome;
}

}  // namespace axleval
