#pragma once

// Ogata thinning for multivariate Hawkes processes.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "blockhawkes/core.hpp"
#include "blockhawkes/rng.hpp"

namespace blockhawkes {

struct SimConfig {
  HawkesModel model;
  double horizon = 0.0;  // hours
  std::uint64_t seed = 0;
  std::size_t max_events = 10'000'000;
  bool allow_unstable = false;  // permit spectral radius >= 1 (short-horizon tests)
};

/// Raised when max_events would be exceeded. Holds everything generated up to
/// that point, on a horizon cut at the offending candidate time.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, EventSequence partial)
      : Error(what), partial_(std::move(partial)) {}

  const EventSequence& partial() const noexcept { return partial_; }

 private:
  EventSequence partial_;
};

namespace detail {

/// Excitation part of every component intensity, advanced in time exactly.
/// Exponential families keep a Markov state; power-law kernels sum the history.
class ExcitationTracker {
 public:
  explicit ExcitationTracker(const HawkesModel& model) : model_(model), m_(model.dimension()) {
    if (auto shared = as_shared_decay(model.kernel)) {
      shared_ = std::move(*shared);
      state_ = Matrix::Zero(m_, shared_->num_decays());
    } else if (const auto* ek = std::get_if<ExponentialKernel>(&model.kernel)) {
      exp_ = ek;
      state_ = Matrix::Zero(m_, m_);
    } else {
      power_ = &std::get<PowerLawKernel>(model.kernel);
    }
  }

  /// Moves the clock to t >= now without adding events.
  void advance(double t) {
    const double dt = t - now_;
    if (shared_) {
      for (std::size_t u = 0; u < shared_->num_decays(); ++u)
        state_.col(u) *= std::exp(-shared_->beta[u] * dt);
    } else if (exp_) {
      state_.array() *= (-exp_->beta.array() * dt).exp();
    }
    now_ = t;
  }

  /// Adds an event of `mark` at the current time.
  void jump(std::size_t mark) {
    if (shared_) {
      for (std::size_t u = 0; u < shared_->num_decays(); ++u)
        state_.col(u) += shared_->alpha[u].col(mark);
    } else if (exp_) {
      state_.col(mark) += exp_->alpha.col(mark);
    } else {
      history_.push_back({now_, mark});
    }
  }

  /// Intensity of every component at the current time, counting events
  /// already jumped in (right limit at an event time).
  void intensities(Vector& out) const {
    out = model_.mu;
    if (shared_ || exp_) {
      out += state_.rowwise().sum();
      return;
    }
    for (const Event& e : history_)
      for (std::size_t i = 0; i < m_; ++i) out(i) += power_->value(i, e.mark, now_ - e.time);
  }

 private:
  const HawkesModel& model_;
  std::size_t m_;
  std::optional<SumExponentialKernel> shared_;
  const ExponentialKernel* exp_ = nullptr;
  const PowerLawKernel* power_ = nullptr;
  Matrix state_;
  std::vector<Event> history_;
  double now_ = 0.0;
};

}  // namespace detail

/// Draws one realisation on [0, horizon]. Deterministic given the config.
///
/// Between events every intensity is nonincreasing (all kernels are
/// nonnegative and nonincreasing), so the total intensity just after the last
/// accepted or rejected point bounds the intensity until the next event.
inline EventSequence simulate(const SimConfig& config) {
  const HawkesModel& model = config.model;
  model.validate();
  if (!(config.horizon > 0.0) || !std::isfinite(config.horizon))
    throw InvalidInput("simulation horizon must be positive and finite");
  if (config.max_events < 1) throw InvalidInput("max_events must be at least 1");
  if (!config.allow_unstable) {
    const KernelNorms norms = kernel_norms(model);
    if (norms.unstable)
      throw StabilityError("kernel-norm spectral radius " + std::to_string(norms.spectral_radius) +
                           " >= 1; refusing to simulate an unstable model");
  }

  const std::size_t m = model.dimension();
  Rng rng(config.seed);
  detail::ExcitationTracker tracker(model);
  std::vector<Event> events;
  Vector lam(m);
  tracker.intensities(lam);
  double bound = lam.sum();
  double t = 0.0;

  for (;;) {
    t += rng.exponential(bound);
    if (!(t <= config.horizon)) break;
    tracker.advance(t);
    tracker.intensities(lam);
    const double total = lam.sum();
    const double draw = rng.uniform() * bound;
    if (draw <= total) {
      std::size_t mark = 0;
      double acc = lam(0);
      while (mark + 1 < m && draw > acc) acc += lam(++mark);
      if (events.size() == config.max_events)
        throw TruncationError("simulation exceeded max_events=" + std::to_string(config.max_events),
                              EventSequence(std::move(events), m, t));
      events.push_back({t, mark});
      tracker.jump(mark);
      tracker.intensities(lam);
      bound = lam.sum();
    } else {
      bound = total;
    }
  }
  return EventSequence(std::move(events), m, config.horizon);
}

}  // namespace blockhawkes
