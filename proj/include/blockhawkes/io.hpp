#pragma once

// File formats:
//   events CSV   `time_hours,mark`, marks one-based, times fixed with 12 decimals
//   blocks CSV   `height,timestamp,tx_count`
//   model JSON   {"kernel": "sum_exponentials"|"exponential"|"power_law", "mu", "alpha", "beta"[, "c"]}
//                sum_exponentials: alpha[u][i][j], beta[u]; others: m x m matrices
//   fit JSON     model fields plus log_lik, kernel_norms, converged, diagnostics
//   GoF JSON     {"model_label", "components": [...]}

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "blockhawkes/fit.hpp"
#include "blockhawkes/gof.hpp"
#include "blockhawkes/ingest.hpp"

namespace blockhawkes {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Events CSV

inline void write_events_csv(std::ostream& out, const EventSequence& seq) {
  out << "time_hours,mark\n";
  for (const Event& e : seq) out << fmt::format("{:.12f},{}\n", e.time, e.mark + 1);
}

/// Reads an events CSV. The dimension defaults to the largest mark and the
/// horizon to the last event time; explicit values must cover the data.
inline EventSequence read_events_csv(std::istream& in, std::optional<std::size_t> dimension = {},
                                     std::optional<double> horizon = {}) {
  static constexpr std::string_view cols[] = {"time_hours", "mark"};
  std::vector<Event> events;
  std::vector<std::size_t> lines;
  detail::read_csv(in, cols, [&](std::size_t line, const std::vector<std::string_view>& f) -> std::string {
    Event e;
    std::size_t mark = 0;
    if (!detail::parse_number(f[0], e.time) || e.time < 0.0) return "bad time '" + std::string(f[0]) + "'";
    if (!detail::parse_number(f[1], mark) || mark < 1) return "bad mark '" + std::string(f[1]) + "'";
    e.mark = mark - 1;
    events.push_back(e);
    lines.push_back(line);
    return {};
  });

  std::size_t max_mark = 0;
  double last = 0.0;
  for (const Event& e : events) {
    max_mark = std::max(max_mark, e.mark + 1);
    last = std::max(last, e.time);
  }
  const std::size_t m = dimension.value_or(std::max<std::size_t>(max_mark, 1));
  const double t_end = horizon.value_or(last);
  std::vector<LineError> errors;
  for (std::size_t k = 0; k < events.size(); ++k) {
    if (events[k].mark >= m)
      errors.push_back({lines[k], fmt::format("mark {} exceeds dimension {}", events[k].mark + 1, m)});
    if (events[k].time > t_end)
      errors.push_back({lines[k], fmt::format("time {} beyond horizon {}", events[k].time, t_end)});
  }
  if (!errors.empty()) throw ParseError(std::move(errors));

  std::vector<std::size_t> order(events.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return event_order(events[a], events[b]); });
  std::vector<Event> sorted;
  sorted.reserve(events.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k > 0 && events[order[k]] == events[order[k - 1]])
      errors.push_back({lines[order[k]], "duplicate event of the same component at the same time"});
    sorted.push_back(events[order[k]]);
  }
  if (!errors.empty()) throw ParseError(std::move(errors));
  return EventSequence(std::move(sorted), m, t_end);
}

inline void write_blocks_csv(std::ostream& out, std::span<const BlockRecord> blocks) {
  out << "height,timestamp,tx_count\n";
  for (const auto& b : blocks)
    out << fmt::format("{},{},{}\n", b.height, format_timestamp(b.timestamp), b.tx_count);
}

// ---------------------------------------------------------------------------
// JSON helpers

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Matrix matrix_from_json(const Json& j, const char* field) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw InvalidInput(fmt::format("'{}' must be a nonempty matrix", field));
  const auto rows = j.size();
  const auto cols = j.front().size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw InvalidInput(fmt::format("'{}' rows must all have {} entries", field, cols));
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw InvalidInput(fmt::format("'{}' entries must be numbers", field));
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

inline Vector vector_from_json(const Json& j, const char* field) {
  if (!j.is_array()) throw InvalidInput(fmt::format("'{}' must be an array", field));
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidInput(fmt::format("'{}' entries must be numbers", field));
    v(i) = j[i].get<double>();
  }
  return v;
}

inline const Json& require(const Json& j, const char* field) {
  if (!j.is_object() || !j.contains(field)) throw InvalidInput(fmt::format("missing field '{}'", field));
  return j.at(field);
}

// ---------------------------------------------------------------------------
// Models

inline Json model_to_json(const HawkesModel& model) {
  Json j;
  j["mu"] = to_json(model.mu);
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, SumExponentialKernel>) {
          j["kernel"] = "sum_exponentials";
          Json alpha = Json::array();
          for (const auto& a : k.alpha) alpha.push_back(to_json(a));
          j["alpha"] = std::move(alpha);
          j["beta"] = k.beta;
        } else if constexpr (std::is_same_v<K, ExponentialKernel>) {
          j["kernel"] = "exponential";
          j["alpha"] = to_json(k.alpha);
          j["beta"] = to_json(k.beta);
        } else {
          j["kernel"] = "power_law";
          j["alpha"] = to_json(k.alpha);
          j["c"] = to_json(k.c);
          j["beta"] = to_json(k.beta);
        }
      },
      model.kernel);
  return j;
}

/// Parses and validates a model document; a fit JSON is also a model document.
inline HawkesModel model_from_json(const Json& j) {
  const std::string kind = j.is_object() && j.contains("kernel") ? j.at("kernel").get<std::string>()
                                                                  : std::string("sum_exponentials");
  HawkesModel model;
  model.mu = vector_from_json(require(j, "mu"), "mu");
  if (kind == "sum_exponentials") {
    SumExponentialKernel k;
    const Json& alpha = require(j, "alpha");
    if (!alpha.is_array()) throw InvalidInput("'alpha' must be an array of matrices");
    for (const auto& a : alpha) k.alpha.push_back(matrix_from_json(a, "alpha"));
    const Vector beta = vector_from_json(require(j, "beta"), "beta");
    k.beta.assign(beta.data(), beta.data() + beta.size());
    model.kernel = std::move(k);
  } else if (kind == "exponential") {
    model.kernel = ExponentialKernel{matrix_from_json(require(j, "alpha"), "alpha"),
                                     matrix_from_json(require(j, "beta"), "beta")};
  } else if (kind == "power_law") {
    model.kernel = PowerLawKernel{matrix_from_json(require(j, "alpha"), "alpha"),
                                  matrix_from_json(require(j, "c"), "c"),
                                  matrix_from_json(require(j, "beta"), "beta")};
  } else {
    throw InvalidInput("unknown kernel '" + kind + "'");
  }
  model.validate();
  return model;
}

inline Json fit_to_json(const FitResult& fit) {
  Json j = model_to_json(fit.model);
  j["log_lik"] = fit.log_lik;
  j["kernel_norms"] = to_json(fit.kernel_norms.norms);
  j["spectral_radius"] = fit.kernel_norms.spectral_radius;
  j["stationary"] = !fit.kernel_norms.unstable;
  j["converged"] = fit.converged;
  j["projected_gradient"] = fit.projected_gradient;
  j["iterations"] = {{"inner", fit.iterations.inner},
                     {"outer", fit.iterations.outer},
                     {"evaluations", fit.iterations.evaluations}};
  Json trace = Json::array();
  for (const auto& p : fit.optimizer_trace) trace.push_back({p.iteration, p.objective});
  j["optimizer_trace"] = std::move(trace);
  j["warnings"] = fit.warnings;
  return j;
}

inline Json poisson_to_json(const PoissonFit& p) {
  return {{"rates", to_json(p.rates)}, {"empty", p.empty}, {"log_lik", p.log_lik}};
}

inline Json gof_to_json(const GofReport& report) {
  Json comps = Json::array();
  for (std::size_t i = 0; i < report.components.size(); ++i) {
    const ComponentGof& c = report.components[i];
    Json jc = {{"component", i + 1}, {"insufficient", c.insufficient}};
    if (!c.insufficient) {
      Json qq = Json::array();
      for (const auto& q : c.qq_pairs) qq.push_back({q.theoretical, q.empirical});
      jc["n"] = c.rescaled_interarrivals.size();
      jc["slope"] = c.slope;
      jc["slope_deviation"] = c.slope_deviation;
      jc["ks_statistic"] = c.ks_statistic;
      jc["ks_p_value"] = c.ks_p_value;
      jc["rescaled_interarrivals"] = c.rescaled_interarrivals;
      jc["qq_pairs"] = std::move(qq);
    }
    comps.push_back(std::move(jc));
  }
  return {{"model_label", to_string(report.model_label)}, {"components", std::move(comps)}};
}

inline void write_qq_csv(std::ostream& out, const std::vector<QQPair>& pairs) {
  out << "theoretical,empirical\n";
  for (const auto& q : pairs) out << fmt::format("{:.17g},{:.17g}\n", q.theoretical, q.empirical);
}

inline Json cleaning_report_to_json(const CleaningReport& r) {
  auto block = [](const BlockRecord& b) {
    return Json{{"height", b.height}, {"timestamp", format_timestamp(b.timestamp)}, {"tx_count", b.tx_count}};
  };
  Json dups = Json::array();
  for (const auto& d : r.duplicates_dropped) {
    Json e = block(d.dropped);
    e["kept_height"] = d.kept_height;
    dups.push_back(std::move(e));
  }
  Json reo = Json::array();
  for (const auto& o : r.reordered) {
    Json e = block(o.block);
    e["from_position"] = o.from_position;
    e["to_position"] = o.to_position;
    reo.push_back(std::move(e));
  }
  Json ties = Json::array();
  for (const auto& t : r.ties)
    ties.push_back({{"timestamp", format_timestamp(t.timestamp)},
                    {"kept_height", t.kept_height},
                    {"dropped_height", t.dropped_height},
                    {"tx_count", t.tx_count}});
  return {{"duplicates_dropped", std::move(dups)},
          {"reordered", std::move(reo)},
          {"ties", std::move(ties)},
          {"counts",
           {{"duplicates", r.duplicates_dropped.size()},
            {"reordered", r.reordered.size()},
            {"ties", r.ties.size()}}}};
}

}  // namespace blockhawkes
