#pragma once

// Exact evaluation of conditional intensities, compensators, kernel norms and
// the log-likelihood of multivariate Hawkes processes.
//
// Conventions used throughout:
//   * lambda_i(t) sums events strictly before t (left limit), so an event never
//     excites itself and simultaneous events of other components do not count.
//   * all times are hours since the start of the observation window.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "blockhawkes/error.hpp"
#include "blockhawkes/event_sequence.hpp"
#include "blockhawkes/model.hpp"

namespace blockhawkes {

/// Intensities below this floor make the log-likelihood undefined.
inline constexpr double kIntensityFloor = 1e-300;

inline void check_compatible(const HawkesModel& model, const EventSequence& seq) {
  model.validate();
  if (model.dimension() != seq.dimension())
    throw InvalidInput("model dimension " + std::to_string(model.dimension()) +
                       " does not match sequence dimension " + std::to_string(seq.dimension()));
}

namespace detail {

inline void check_component(const HawkesModel& model, std::size_t i) {
  if (i >= model.dimension())
    throw InvalidInput("component " + std::to_string(i + 1) + " outside 1.." +
                       std::to_string(model.dimension()));
}

inline void check_time(const EventSequence& seq, double t) {
  if (!(t >= 0.0 && t <= seq.horizon()))
    throw DomainError("time " + std::to_string(t) + " outside [0, " +
                      std::to_string(seq.horizon()) + "]");
}

inline double intensity_unchecked(const HawkesModel& model, const EventSequence& seq,
                                  std::size_t i, double t) {
  return std::visit(
      [&](const auto& k) {
        double s = model.mu(i);
        for (const Event& e : seq) {
          if (!(e.time < t)) break;
          s += k.value(i, e.mark, t - e.time);
        }
        return s;
      },
      model.kernel);
}

inline double compensator_unchecked(const HawkesModel& model, const EventSequence& seq,
                                    std::size_t i, double t) {
  return std::visit(
      [&](const auto& k) {
        double s = model.mu(i) * t;
        for (const Event& e : seq) {
          if (!(e.time < t)) break;
          s += k.integral(i, e.mark, t - e.time);
        }
        return s;
      },
      model.kernel);
}

/// Left-limit decay traces S[u](j) = sum_{t_l < t_k, d_l = j} exp(-beta_u (t_k - t_l))
/// at every event k. Row k, column u * m + j. Jumps of events sharing a
/// timestamp are applied only once time moves past it.
inline Matrix shared_decay_traces(const EventSequence& seq, const std::vector<double>& betas) {
  const std::size_t m = seq.dimension();
  const std::size_t nu = betas.size();
  Matrix traces(static_cast<Eigen::Index>(seq.size()), static_cast<Eigen::Index>(nu * m));
  Matrix state = Matrix::Zero(static_cast<Eigen::Index>(nu), static_cast<Eigen::Index>(m));
  double last = 0.0;
  std::size_t pending = 0;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Event& e = seq[k];
    if (e.time > last) {
      for (; pending < k; ++pending) state.col(seq[pending].mark).array() += 1.0;
      for (std::size_t u = 0; u < nu; ++u) state.row(u) *= std::exp(-betas[u] * (e.time - last));
      last = e.time;
    }
    for (std::size_t u = 0; u < nu; ++u)
      traces.row(k).segment(u * m, m) = state.row(u);
  }
  return traces;
}

}  // namespace detail

/// lambda_i(t) by direct summation over the history; O(n) per call.
inline double intensity_naive(const HawkesModel& model, const EventSequence& seq, std::size_t i,
                              double t) {
  check_compatible(model, seq);
  detail::check_component(model, i);
  detail::check_time(seq, t);
  return detail::intensity_unchecked(model, seq, i, t);
}

struct RecursiveIntensities {
  std::vector<double> at_events;  // lambda_{d_k}(t_k), left limits
  Matrix end_state;               // v_i^u just after the last event, m x U
  double end_time = 0.0;
};

/// All event intensities in one O(n m U) pass over the Markov state v_i^u.
/// Requires decays shared across pairs (sum-of-exponentials, or exponential
/// with a single beta).
inline RecursiveIntensities intensity_recursive(const HawkesModel& model,
                                                const EventSequence& seq) {
  check_compatible(model, seq);
  const auto shared = as_shared_decay(model.kernel);
  if (!shared)
    throw UnsupportedKernel("recursive intensity requires decays shared by all kernel pairs");
  const std::size_t m = model.dimension();
  const std::size_t nu = shared->num_decays();

  RecursiveIntensities out;
  out.at_events.resize(seq.size());
  Matrix v = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(nu));
  auto apply_jump = [&](std::size_t mark) {
    for (std::size_t u = 0; u < nu; ++u) v.col(u) += shared->alpha[u].col(mark);
  };

  double last = 0.0;
  std::size_t pending = 0;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Event& e = seq[k];
    if (e.time > last) {
      for (; pending < k; ++pending) apply_jump(seq[pending].mark);
      for (std::size_t u = 0; u < nu; ++u) v.col(u) *= std::exp(-shared->beta[u] * (e.time - last));
      last = e.time;
    }
    out.at_events[k] = model.mu(e.mark) + v.row(e.mark).sum();
  }
  for (; pending < seq.size(); ++pending) apply_jump(seq[pending].mark);
  out.end_state = std::move(v);
  out.end_time = last;
  return out;
}

/// Lambda_i(t) = integral of lambda_i over [0, t], in closed form for every
/// kernel family.
inline double compensator(const HawkesModel& model, const EventSequence& seq, std::size_t i,
                          double t) {
  check_compatible(model, seq);
  detail::check_component(model, i);
  detail::check_time(seq, t);
  return detail::compensator_unchecked(model, seq, i, t);
}

struct QuadratureOptions {
  double abs_tol = 1e-9;
  double rel_tol = 1e-7;
  unsigned max_depth = 20;
};

/// Lambda_i(t) by adaptive Gauss-Kronrod quadrature of the intensity,
/// integrating each inter-event segment separately.
inline double compensator_quadrature(const HawkesModel& model, const EventSequence& seq,
                                     std::size_t i, double t, const QuadratureOptions& opt = {}) {
  check_compatible(model, seq);
  detail::check_component(model, i);
  detail::check_time(seq, t);
  using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;

  double total = 0.0;
  double total_error = 0.0;
  double a = 0.0;
  std::size_t history = 0;  // events with time <= a
  while (a < t) {
    while (history < seq.size() && seq[history].time <= a) ++history;
    const double b = history < seq.size() ? std::min(seq[history].time, t) : t;
    auto segment = [&](double s) {
      return std::visit(
          [&](const auto& k) {
            double v = model.mu(i);
            for (std::size_t l = 0; l < history; ++l)
              v += k.value(i, seq[l].mark, s - seq[l].time);
            return v;
          },
          model.kernel);
    };
    double err = 0.0;
    total += Rule::integrate(segment, a, b, opt.max_depth, opt.rel_tol * 0.1, &err);
    total_error += err;
    a = b;
  }
  if (total_error > std::max(opt.abs_tol, opt.rel_tol * std::abs(total)))
    throw NumericError("compensator quadrature did not converge",
                       "component " + std::to_string(i + 1) + ", t=" + std::to_string(t) +
                           ", estimate=" + std::to_string(total) +
                           ", error=" + std::to_string(total_error));
  return total;
}

/// For every component i, Lambda_i evaluated at each of its own event times
/// (left limit). O(n m U) for exponential families, O(n^2) for power law.
inline std::vector<std::vector<double>> own_event_compensators(const HawkesModel& model,
                                                               const EventSequence& seq) {
  check_compatible(model, seq);
  const std::size_t m = model.dimension();
  std::vector<std::vector<double>> out(m);
  auto counts = seq.counts();
  for (std::size_t i = 0; i < m; ++i) out[i].reserve(counts[i]);

  if (const auto shared = as_shared_decay(model.kernel)) {
    const std::size_t nu = shared->num_decays();
    const Matrix traces = detail::shared_decay_traces(seq, shared->beta);
    std::vector<double> seen(m, 0.0);  // N_j(t-)
    double last = 0.0;
    std::size_t pending = 0;
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const Event& e = seq[k];
      if (e.time > last) {
        for (; pending < k; ++pending) seen[seq[pending].mark] += 1.0;
        last = e.time;
      }
      const std::size_t i = e.mark;
      double lam = model.mu(i) * e.time;
      for (std::size_t u = 0; u < nu; ++u)
        for (std::size_t j = 0; j < m; ++j)
          lam += shared->alpha[u](i, j) * (seen[j] - traces(k, u * m + j)) / shared->beta[u];
      out[i].push_back(lam);
    }
    return out;
  }

  if (const auto* ek = std::get_if<ExponentialKernel>(&model.kernel)) {
    // Per-pair decays: S_ij(t) = sum_{t_l < t, d_l = j} exp(-beta_ij (t - t_l)).
    Matrix state = Matrix::Zero(m, m);
    std::vector<double> seen(m, 0.0);
    double last = 0.0;
    std::size_t pending = 0;
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const Event& e = seq[k];
      if (e.time > last) {
        for (; pending < k; ++pending) {
          state.col(seq[pending].mark).array() += 1.0;
          seen[seq[pending].mark] += 1.0;
        }
        state.array() *= (-ek->beta.array() * (e.time - last)).exp();
        last = e.time;
      }
      const std::size_t i = e.mark;
      double lam = model.mu(i) * e.time;
      for (std::size_t j = 0; j < m; ++j)
        lam += ek->alpha(i, j) / ek->beta(i, j) * (seen[j] - state(i, j));
      out[i].push_back(lam);
    }
    return out;
  }

  for (const Event& e : seq)
    out[e.mark].push_back(detail::compensator_unchecked(model, seq, e.mark, e.time));
  return out;
}

/// l = sum_k ln lambda_{d_k}(t_k) - sum_i Lambda_i(T).
inline double log_likelihood(const HawkesModel& model, const EventSequence& seq) {
  check_compatible(model, seq);
  std::vector<double> lam;
  if (as_shared_decay(model.kernel)) {
    lam = intensity_recursive(model, seq).at_events;
  } else {
    lam.reserve(seq.size());
    for (const Event& e : seq) lam.push_back(detail::intensity_unchecked(model, seq, e.mark, e.time));
  }
  double l = 0.0;
  for (std::size_t k = 0; k < lam.size(); ++k) {
    if (!(lam[k] >= kIntensityFloor)) throw LikelihoodUndefined(k, lam[k]);
    l += std::log(lam[k]);
  }
  for (std::size_t i = 0; i < model.dimension(); ++i)
    l -= detail::compensator_unchecked(model, seq, i, seq.horizon());
  return l;
}

struct KernelNorms {
  Matrix norms;                // ||phi_ij||, expected type-i offspring of a type-j event
  double spectral_radius = 0;  // branching ratio
  bool unstable = false;       // spectral_radius >= 1: no stationary version exists
};

inline double spectral_radius(const Matrix& k) {
  if (k.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(k, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline KernelNorms kernel_norms(const HawkesModel& model) {
  if (const auto* pl = std::get_if<PowerLawKernel>(&model.kernel))
    if (pl->beta.size() > 0 && !(pl->beta.array() > 1.0).all())
      throw DomainError("power-law kernel is not integrable: every beta must exceed 1");
  model.validate();
  const std::size_t m = model.dimension();
  KernelNorms out;
  out.norms.resize(m, m);
  std::visit(
      [&](const auto& k) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < m; ++j) out.norms(i, j) = k.norm(i, j);
      },
      model.kernel);
  out.spectral_radius = spectral_radius(out.norms);
  out.unstable = out.spectral_radius >= 1.0;
  return out;
}

}  // namespace blockhawkes
