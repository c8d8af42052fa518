#pragma once

// Raw blockchain and price data -> trivariate event stream.
//
// Marks of the assembled stream (zero-based internally, one-based in files):
//   0 / 1  block arrival
//   1 / 2  positive price jump
//   2 / 3  negative price jump

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>

#include "blockhawkes/error.hpp"
#include "blockhawkes/event_sequence.hpp"

namespace blockhawkes {

using Timestamp = std::chrono::sys_seconds;

inline constexpr std::chrono::seconds kBarSpacing{300};
inline constexpr std::size_t kBlockMark = 0;
inline constexpr std::size_t kUpJumpMark = 1;
inline constexpr std::size_t kDownJumpMark = 2;

// ---------------------------------------------------------------------------
// Timestamps

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(out)) return false;
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  out = 0;
  for (std::size_t k = pos; k < pos + len; ++k) {
    if (s[k] < '0' || s[k] > '9') return false;
    out = out * 10 + (s[k] - '0');
  }
  return true;
}

}  // namespace detail

/// Accepts integer Unix seconds or ISO-8601 UTC: `YYYY-MM-DD[T ]HH:MM:SS`
/// with optional fractional seconds (truncated) and a `Z`, ` UTC` or `+00:00`
/// suffix.
inline std::optional<Timestamp> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  text = detail::trim(text);
  if (text.empty()) return std::nullopt;
  std::int64_t unix_seconds = 0;
  if (detail::parse_number(text, unix_seconds)) return Timestamp{seconds{unix_seconds}};

  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':')
    return std::nullopt;
  if (!detail::fixed_int(text, 0, 4, y) || !detail::fixed_int(text, 5, 2, mo) ||
      !detail::fixed_int(text, 8, 2, d) || !detail::fixed_int(text, 11, 2, h) ||
      !detail::fixed_int(text, 14, 2, mi) || !detail::fixed_int(text, 17, 2, s))
    return std::nullopt;
  std::string_view rest = text.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') rest.remove_prefix(1);
  }
  rest = detail::trim(rest);
  if (!(rest.empty() || rest == "Z" || rest == "UTC" || rest == "+00:00" || rest == "+0000"))
    return std::nullopt;

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) return std::nullopt;
  return Timestamp{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{s};
}

/// `YYYY-MM-DDTHH:MM:SSZ`
inline std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const auto secs = (t - day_start).count();
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     secs / 3600, secs / 60 % 60, secs % 60);
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= line.size(); ++k) {
    if (k == line.size() || line[k] == ',') {
      out.push_back(trim(line.substr(start, k - start)));
      start = k + 1;
    }
  }
  return out;
}

/// Reads a header + rows CSV, mapping the named columns. Calls
/// `row(line_no, fields)` for each nonblank data line; `row` returns an error
/// message or an empty string.
template <class RowFn>
void read_csv(std::istream& in, std::span<const std::string_view> columns, RowFn&& row) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> index(columns.size(), SIZE_MAX);
  bool have_header = false;
  std::vector<LineError> errors;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (!have_header) {
      have_header = true;
      for (std::size_t c = 0; c < columns.size(); ++c)
        for (std::size_t f = 0; f < fields.size(); ++f)
          if (fields[f] == columns[c]) index[c] = f;
      for (std::size_t c = 0; c < columns.size(); ++c)
        if (index[c] == SIZE_MAX)
          errors.push_back({line_no, "header lacks column '" + std::string(columns[c]) + "'"});
      if (!errors.empty()) throw ParseError(std::move(errors));
      continue;
    }
    std::vector<std::string_view> picked;
    bool short_row = false;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (index[c] >= fields.size()) {
        short_row = true;
        break;
      }
      picked.push_back(fields[index[c]]);
    }
    std::string err = short_row ? std::string("expected ") + std::to_string(columns.size()) + " fields"
                                : row(line_no, picked);
    if (!err.empty()) errors.push_back({line_no, std::move(err)});
  }
  if (!have_header) errors.push_back({1, "missing header"});
  if (!errors.empty()) throw ParseError(std::move(errors));
}

}  // namespace detail

struct BlockRecord {
  std::uint64_t height = 0;
  Timestamp timestamp{};
  std::uint64_t tx_count = 0;

  friend bool operator==(const BlockRecord&, const BlockRecord&) = default;
};

struct PriceBar {
  Timestamp timestamp{};  // bar start
  double vwap = 0.0;
};

/// Blocks CSV with header `height,timestamp,tx_count`.
inline std::vector<BlockRecord> read_blocks_csv(std::istream& in) {
  static constexpr std::string_view cols[] = {"height", "timestamp", "tx_count"};
  std::vector<BlockRecord> out;
  detail::read_csv(in, cols, [&](std::size_t, const std::vector<std::string_view>& f) -> std::string {
    BlockRecord r;
    if (!detail::parse_number(f[0], r.height)) return "bad height '" + std::string(f[0]) + "'";
    const auto ts = parse_timestamp(f[1]);
    if (!ts) return "bad timestamp '" + std::string(f[1]) + "'";
    r.timestamp = *ts;
    if (!detail::parse_number(f[2], r.tx_count)) return "bad tx_count '" + std::string(f[2]) + "'";
    out.push_back(r);
    return {};
  });
  return out;
}

/// Price CSV with header `timestamp,vwap`; nonpositive prices are rejected.
inline std::vector<PriceBar> read_prices_csv(std::istream& in) {
  static constexpr std::string_view cols[] = {"timestamp", "vwap"};
  std::vector<PriceBar> out;
  detail::read_csv(in, cols, [&](std::size_t, const std::vector<std::string_view>& f) -> std::string {
    PriceBar b;
    const auto ts = parse_timestamp(f[0]);
    if (!ts) return "bad timestamp '" + std::string(f[0]) + "'";
    b.timestamp = *ts;
    if (!detail::parse_number(f[1], b.vwap)) return "bad vwap '" + std::string(f[1]) + "'";
    if (!(b.vwap > 0.0)) return "nonpositive vwap " + std::string(f[1]);
    out.push_back(b);
    return {};
  });
  return out;
}

// ---------------------------------------------------------------------------
// Block cleaning

struct DuplicateDrop {
  BlockRecord dropped;
  std::uint64_t kept_height = 0;
};

struct Reorder {
  BlockRecord block;
  std::size_t from_position = 0;  // zero-based, after duplicate removal
  std::size_t to_position = 0;
};

struct TieWarning {
  Timestamp timestamp{};
  std::uint64_t kept_height = 0;
  std::uint64_t dropped_height = 0;
  std::uint64_t tx_count = 0;
};

struct CleaningReport {
  std::vector<DuplicateDrop> duplicates_dropped;
  std::vector<Reorder> reordered;
  std::vector<TieWarning> ties;

  bool empty() const { return duplicates_dropped.empty() && reordered.empty() && ties.empty(); }
};

struct CleanedBlocks {
  std::vector<BlockRecord> cleaned;
  CleaningReport report;
};

/// Repairs block timestamps:
///  1. among blocks sharing a timestamp keep the one with more transactions
///     (lower height on a tie, with a warning);
///  2. sort the survivors by timestamp. A survivor is logged as reordered when
///     its timestamp is earlier than that of some block before it in the input.
inline CleanedBlocks clean_blocks(std::span<const BlockRecord> records) {
  if (records.empty()) throw InvalidInput("no block records to clean");
  {
    std::unordered_set<std::uint64_t> heights;
    for (const auto& r : records)
      if (!heights.insert(r.height).second)
        throw InvalidInput("duplicate block height " + std::to_string(r.height));
  }

  CleanedBlocks out;
  std::map<Timestamp, std::size_t> keeper;  // timestamp -> index into records
  for (std::size_t k = 0; k < records.size(); ++k) {
    auto [it, inserted] = keeper.try_emplace(records[k].timestamp, k);
    if (inserted) continue;
    const BlockRecord& cur = records[it->second];
    const BlockRecord& cand = records[k];
    bool take = cand.tx_count > cur.tx_count;
    if (cand.tx_count == cur.tx_count) {
      take = cand.height < cur.height;
      out.report.ties.push_back({cand.timestamp, take ? cand.height : cur.height,
                                 take ? cur.height : cand.height, cand.tx_count});
    }
    if (take) it->second = k;
  }

  std::vector<BlockRecord> survivors;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const std::size_t kept = keeper.at(records[k].timestamp);
    if (kept == k)
      survivors.push_back(records[k]);
    else
      out.report.duplicates_dropped.push_back({records[k], records[kept].height});
  }

  std::vector<std::size_t> order(survivors.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return survivors[a].timestamp < survivors[b].timestamp;
  });
  std::vector<std::size_t> rank(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos;

  Timestamp running_max = Timestamp::min();
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    if (k > 0 && survivors[k].timestamp < running_max)
      out.report.reordered.push_back({survivors[k], k, rank[k]});
    running_max = std::max(running_max, survivors[k].timestamp);
  }

  out.cleaned.reserve(survivors.size());
  for (std::size_t idx : order) out.cleaned.push_back(survivors[idx]);
  return out;
}

// ---------------------------------------------------------------------------
// Price jumps

struct LogReturn {
  Timestamp timestamp{};  // later bar of the pair
  double value = 0.0;
  bool gap = false;  // spans one or more missing bars
};

struct GapRecord {
  Timestamp from{};
  Timestamp to{};
  std::size_t missing_bars = 0;
};

struct ReturnSeries {
  std::vector<LogReturn> returns;
  std::vector<GapRecord> gaps;
};

/// r_t = ln(vwap_t / vwap_{t-1}) on the 5-minute grid. A return across
/// missing bars is still one log difference, flagged and logged as a gap.
inline ReturnSeries log_returns(std::span<const PriceBar> bars) {
  if (bars.size() < 2) throw InvalidInput("log returns need at least two price bars");
  for (std::size_t k = 0; k < bars.size(); ++k)
    if (!(bars[k].vwap > 0.0) || !std::isfinite(bars[k].vwap))
      throw InvalidInput(fmt::format("row {}: nonpositive vwap {}", k + 1, bars[k].vwap));
  ReturnSeries out;
  out.returns.reserve(bars.size() - 1);
  for (std::size_t k = 1; k < bars.size(); ++k) {
    const auto step = bars[k].timestamp - bars[k - 1].timestamp;
    if (step <= std::chrono::seconds{0} || step % kBarSpacing != std::chrono::seconds{0})
      throw InvalidInput(fmt::format("row {}: timestamp {} is not on the 5-minute grid after {}", k + 1,
                                     format_timestamp(bars[k].timestamp),
                                     format_timestamp(bars[k - 1].timestamp)));
    const bool gap = step > kBarSpacing;
    out.returns.push_back({bars[k].timestamp, std::log(bars[k].vwap / bars[k - 1].vwap), gap});
    if (gap)
      out.gaps.push_back({bars[k - 1].timestamp, bars[k].timestamp,
                          static_cast<std::size_t>(step / kBarSpacing) - 1});
  }
  return out;
}

struct JumpConfig {
  double window_hours = 3.0;
  double q_low = 0.10;
  double q_high = 0.90;
  std::size_t min_history = 12;  // one hour of 5-minute bars

  void validate() const {
    if (!(window_hours * 3600.0 >= 2.0 * static_cast<double>(kBarSpacing.count())))
      throw ConfigError("rolling window must cover at least two 5-minute bars");
    if (!(q_low >= 0.0 && q_low < q_high && q_high <= 1.0))
      throw ConfigError("quantiles must satisfy 0 <= q_low < q_high <= 1");
    if (min_history < 1) throw ConfigError("min_history must be positive");
  }
};

/// Sample quantile with linear interpolation between order statistics at
/// positions (k - 1) / (n - 1). `sorted` must be ascending and nonempty.
inline double quantile_inclusive(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

struct JumpEvents {
  std::vector<Timestamp> up;
  std::vector<Timestamp> down;
  std::size_t evaluated = 0;  // returns with enough history to be tested
};

/// Flags returns outside the rolling [q_low, q_high] quantile band of the
/// preceding window [t - window, t). The current return is not part of its
/// own history; values equal to a threshold are not events.
inline JumpEvents extract_jumps(std::span<const LogReturn> returns, const JumpConfig& config) {
  config.validate();
  for (std::size_t k = 1; k < returns.size(); ++k)
    if (!(returns[k - 1].timestamp < returns[k].timestamp))
      throw InvalidInput("returns must be strictly time-ordered");
  const auto window = std::chrono::seconds{static_cast<std::int64_t>(std::llround(config.window_hours * 3600.0))};

  JumpEvents out;
  std::vector<double> history;
  std::size_t first = 0;
  for (std::size_t k = 0; k < returns.size(); ++k) {
    const Timestamp t = returns[k].timestamp;
    while (first < k && returns[first].timestamp < t - window) ++first;
    if (k - first < config.min_history) continue;
    history.clear();
    for (std::size_t l = first; l < k; ++l) history.push_back(returns[l].value);
    std::sort(history.begin(), history.end());
    ++out.evaluated;
    const double r = returns[k].value;
    if (r > quantile_inclusive(history, config.q_high))
      out.up.push_back(t);
    else if (r < quantile_inclusive(history, config.q_low))
      out.down.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly

struct TrivariateStream {
  EventSequence events;
  std::size_t dropped_blocks = 0;
  std::size_t dropped_up = 0;
  std::size_t dropped_down = 0;
};

/// Merges block arrivals and price jumps inside [start, end] into one event
/// stream in hours since `start`.
inline TrivariateStream build_trivariate(std::span<const BlockRecord> blocks,
                                         std::span<const Timestamp> up_times,
                                         std::span<const Timestamp> down_times, Timestamp start,
                                         Timestamp end) {
  if (!(start < end)) throw ConfigError("observation window is empty");
  const double horizon = static_cast<double>((end - start).count()) / 3600.0;
  std::vector<Event> events;
  auto add = [&](Timestamp t, std::size_t mark, std::size_t& dropped) {
    if (t < start || t > end) {
      ++dropped;
      return;
    }
    events.push_back({static_cast<double>((t - start).count()) / 3600.0, mark});
  };
  std::size_t db = 0, du = 0, dd = 0;
  for (const auto& b : blocks) add(b.timestamp, kBlockMark, db);
  for (Timestamp t : up_times) add(t, kUpJumpMark, du);
  for (Timestamp t : down_times) add(t, kDownJumpMark, dd);
  return {EventSequence::from_unsorted(std::move(events), 3, horizon), db, du, dd};
}

}  // namespace blockhawkes
