#pragma once

// Goodness of fit by the random time change theorem: under the true model the
// compensator increments between successive events of a component are i.i.d.
// Exp(1). Q-Q pairs, the origin-anchored Q-Q slope and a one-sample
// Kolmogorov-Smirnov test quantify departures from that law.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "blockhawkes/core.hpp"

namespace blockhawkes {

enum class ModelLabel { hawkes, poisson };

inline const char* to_string(ModelLabel l) { return l == ModelLabel::hawkes ? "hawkes" : "poisson"; }

struct RescaledResiduals {
  std::vector<std::vector<double>> interarrivals;  // per component
  std::vector<bool> insufficient;                  // fewer than two events
};

/// Compensator increments {Lambda_i(t_1), Lambda_i(t_2) - Lambda_i(t_1), ...}
/// of every component, evaluated at left limits.
inline RescaledResiduals time_rescale(const HawkesModel& model, const EventSequence& seq) {
  const auto compensated = own_event_compensators(model, seq);
  RescaledResiduals out;
  out.interarrivals.resize(compensated.size());
  out.insufficient.resize(compensated.size());
  for (std::size_t i = 0; i < compensated.size(); ++i) {
    const auto& c = compensated[i];
    if (c.size() < 2) {
      out.insufficient[i] = true;
      continue;
    }
    auto& r = out.interarrivals[i];
    r.reserve(c.size());
    r.push_back(c.front());
    for (std::size_t k = 1; k < c.size(); ++k) r.push_back(c[k] - c[k - 1]);
  }
  return out;
}

struct QQPair {
  double theoretical = 0.0;
  double empirical = 0.0;

  friend bool operator==(const QQPair&, const QQPair&) = default;
};

/// Q-Q pairs against Exp(1) at plotting positions j / (n + 1). Empty input
/// yields an empty list.
inline std::vector<QQPair> qq_exponential(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  std::vector<QQPair> out;
  out.reserve(samples.size());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const double p = static_cast<double>(j + 1) / (n + 1.0);
    out.push_back({-std::log1p(-p), samples[j]});
  }
  return out;
}

/// Least-squares slope through the origin of empirical on theoretical quantiles.
inline double qq_slope(const std::vector<QQPair>& pairs) {
  if (pairs.size() < 2) throw InvalidInput("Q-Q slope needs at least two pairs");
  const bool degenerate = std::all_of(pairs.begin(), pairs.end(), [&](const QQPair& q) {
    return q.theoretical == pairs.front().theoretical;
  });
  if (degenerate) throw DomainError("Q-Q slope undefined: all theoretical quantiles are equal");
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& q : pairs) {
    sxy += q.theoretical * q.empirical;
    sxx += q.theoretical * q.theoretical;
  }
  return sxy / sxx;
}

/// |slope - 1|; zero when the Q-Q points follow the 45 degree line.
inline double slope_deviation(const std::vector<QQPair>& pairs) {
  return std::abs(qq_slope(pairs) - 1.0);
}

/// Survival function of the Kolmogorov distribution, P(K > x).
inline double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  constexpr double pi = 3.14159265358979323846;
  if (x < 1.18) {
    // Small-argument series for the CDF.
    const double w = -pi * pi / (8.0 * x * x);
    double s = 0.0;
    for (int k = 1; k <= 11; k += 2) s += std::exp(w * k * k);
    return 1.0 - std::sqrt(2.0 * pi) / x * s;
  }
  double s = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += sign * term;
    if (term < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against the Exp(1) CDF 1 - exp(-x).
/// The p-value uses the asymptotic Kolmogorov law with Stephens' small-sample
/// argument (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D.
inline KsResult ks_exp1(std::vector<double> samples) {
  if (samples.empty()) throw InvalidInput("KS test needs at least one sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double cdf = samples[k] <= 0.0 ? 0.0 : -std::expm1(-samples[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - cdf, cdf - static_cast<double>(k) / n});
  }
  const double rn = std::sqrt(n);
  return {d, kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d)};
}

struct ComponentGof {
  std::vector<double> rescaled_interarrivals;
  std::vector<QQPair> qq_pairs;
  double slope = 0.0;
  double slope_deviation = 0.0;
  double ks_statistic = 0.0;
  double ks_p_value = 0.0;
  bool insufficient = false;  // fewer than two events; statistics not computed
};

struct GofReport {
  ModelLabel model_label = ModelLabel::hawkes;
  std::vector<ComponentGof> components;
};

inline GofReport evaluate_gof(const HawkesModel& model, const EventSequence& seq,
                              ModelLabel label) {
  const RescaledResiduals rr = time_rescale(model, seq);
  GofReport report;
  report.model_label = label;
  report.components.resize(rr.interarrivals.size());
  for (std::size_t i = 0; i < rr.interarrivals.size(); ++i) {
    ComponentGof& c = report.components[i];
    c.insufficient = rr.insufficient[i];
    if (c.insufficient) continue;
    c.rescaled_interarrivals = rr.interarrivals[i];
    c.qq_pairs = qq_exponential(c.rescaled_interarrivals);
    c.slope = qq_slope(c.qq_pairs);
    c.slope_deviation = std::abs(c.slope - 1.0);
    const KsResult ks = ks_exp1(c.rescaled_interarrivals);
    c.ks_statistic = ks.statistic;
    c.ks_p_value = ks.p_value;
  }
  return report;
}

/// Goodness of fit of a homogeneous Poisson baseline. Zero-rate components are
/// flagged insufficient.
inline GofReport evaluate_poisson_gof(const Vector& rates, const EventSequence& seq) {
  Vector floored = rates;
  for (Eigen::Index i = 0; i < floored.size(); ++i)
    if (!(floored(i) > 0.0)) floored(i) = 1.0;  // component has no events; excluded below
  GofReport report = evaluate_gof(poisson_model(floored), seq, ModelLabel::poisson);
  for (Eigen::Index i = 0; i < rates.size(); ++i)
    if (!(rates(i) > 0.0)) report.components[i] = ComponentGof{.insufficient = true};
  return report;
}

}  // namespace blockhawkes
