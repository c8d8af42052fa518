#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "blockhawkes/error.hpp"

namespace blockhawkes {

/// A single marked event. `mark` is a zero-based component index; files and
/// reports use one-based marks.
struct Event {
  double time = 0.0;  // hours since window start
  std::size_t mark = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

inline bool event_order(const Event& a, const Event& b) {
  return a.time < b.time || (a.time == b.time && a.mark < b.mark);
}

/// Time-ordered marked events on the observation window [0, horizon].
///
/// Events are ordered by (time, mark). Simultaneous events of different
/// components are allowed; two events of one component at the same instant
/// are not.
class EventSequence {
 public:
  EventSequence(std::size_t dimension, double horizon)
      : EventSequence(std::vector<Event>{}, dimension, horizon) {}

  EventSequence(std::vector<Event> events, std::size_t dimension, double horizon)
      : events_(std::move(events)), dimension_(dimension), horizon_(horizon) {
    validate();
  }

  /// Sorts by (time, mark) before validating.
  static EventSequence from_unsorted(std::vector<Event> events, std::size_t dimension,
                                     double horizon) {
    std::sort(events.begin(), events.end(), event_order);
    return EventSequence(std::move(events), dimension, horizon);
  }

  std::span<const Event> events() const noexcept { return events_; }
  const Event& operator[](std::size_t k) const { return events_[k]; }
  auto begin() const noexcept { return events_.begin(); }
  auto end() const noexcept { return events_.end(); }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  std::size_t dimension() const noexcept { return dimension_; }
  double horizon() const noexcept { return horizon_; }

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> n(dimension_, 0);
    for (const auto& e : events_) ++n[e.mark];
    return n;
  }

  std::vector<double> times_of(std::size_t mark) const {
    std::vector<double> out;
    for (const auto& e : events_)
      if (e.mark == mark) out.push_back(e.time);
    return out;
  }

  /// Same events on a horizon scaled by `s`, with every time scaled too.
  EventSequence rescaled(double s) const {
    std::vector<Event> ev = events_;
    for (auto& e : ev) e.time *= s;
    return EventSequence(std::move(ev), dimension_, horizon_ * s);
  }

 private:
  void validate() const {
    if (dimension_ == 0) throw InvalidInput("event sequence dimension must be positive");
    if (!std::isfinite(horizon_) || horizon_ < 0.0)
      throw InvalidInput("event sequence horizon must be finite and nonnegative");
    for (std::size_t k = 0; k < events_.size(); ++k) {
      const Event& e = events_[k];
      if (!std::isfinite(e.time) || e.time < 0.0 || e.time > horizon_)
        throw InvalidInput("event " + std::to_string(k) + " at time " + std::to_string(e.time) +
                           " lies outside [0, " + std::to_string(horizon_) + "]");
      if (e.mark >= dimension_)
        throw InvalidInput("event " + std::to_string(k) + " has mark " +
                           std::to_string(e.mark + 1) + " outside 1.." +
                           std::to_string(dimension_));
      if (k > 0 && !event_order(events_[k - 1], e)) {
        if (events_[k - 1].time == e.time && events_[k - 1].mark == e.mark)
          throw InvalidInput("events " + std::to_string(k - 1) + " and " + std::to_string(k) +
                             " are simultaneous events of the same component");
        throw InvalidInput("event " + std::to_string(k) + " is out of (time, mark) order");
      }
    }
  }

  std::vector<Event> events_;
  std::size_t dimension_;
  double horizon_;
};

}  // namespace blockhawkes
