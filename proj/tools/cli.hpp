#pragma once

// Batch command-line front end. `run_cli` is the whole program; main() only
// forwards argv so the commands can be exercised in-process by the tests.
//
// Exit codes: 0 success, 2 input/parse error, 3 numeric or fit failure,
// 4 model-validity error.

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "blockhawkes/fit.hpp"
#include "blockhawkes/gof.hpp"
#include "blockhawkes/ingest.hpp"
#include "blockhawkes/io.hpp"
#include "blockhawkes/sim.hpp"

namespace blockhawkes::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kInputError = 2, kNumericError = 3, kModelError = 4 };

/// Carries an exit code out of a command.
struct Failure {
  int code;
  std::string message;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Failure{kInputError, "SHA-256 digest failed"};
  std::string hex;
  for (unsigned int k = 0; k < len; ++k) hex += fmt::format("{:02x}", digest[k]);
  return hex;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kInputError, "cannot open '" + path + "' for reading"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) throw Failure{kInputError, "cannot write '" + path + "'"};
}

inline std::string utc_now() {
  return format_timestamp(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

/// Tracks the inputs and effective configuration of one command for its manifest.
class Run {
 public:
  explicit Run(std::string command) : command_(std::move(command)) {}

  /// Reads an input file, recording its digest.
  std::string input(const std::string& path) {
    std::string content = read_file(path);
    digests_[path] = sha256_hex(content);
    return content;
  }

  Json& config() { return config_; }

  Json manifest() const {
    return {{"command", command_},
            {"config_digest", sha256_hex(config_.dump())},
            {"input_digests", digests_},
            {"tool_version", kToolVersion},
            {"timestamp", utc_now()}};
  }

  /// Serialises `doc` with the manifest embedded.
  std::string json_document(Json doc) const {
    doc["manifest"] = manifest();
    return doc.dump(2) + "\n";
  }

 private:
  std::string command_;
  Json config_ = Json::object();
  Json digests_ = Json::object();
};

/// Parses a key/value config document (`key = value`, `#` comments, optional
/// `[section]` headers which are ignored) into long-flag arguments.
inline std::vector<std::string> config_arguments(const std::string& text,
                                                 const std::vector<std::string>& flags,
                                                 const std::vector<std::string>& options) {
  std::vector<std::string> args;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::vector<LineError> errors;
  auto contains = [](const std::vector<std::string>& v, const std::string& k) {
    return std::find(v.begin(), v.end(), k) != v.end();
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = detail::trim(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = detail::trim(line.substr(0, hash));
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back({line_no, "expected key = value"});
      continue;
    }
    std::string key(detail::trim(line.substr(0, eq)));
    std::replace(key.begin(), key.end(), '_', '-');
    std::string value(detail::trim(line.substr(eq + 1)));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']')
      value = value.substr(1, value.size() - 2);
    if (contains(flags, key)) {
      if (value == "true") args.push_back("--" + key);
      else if (value != "false") errors.push_back({line_no, "'" + key + "' expects true or false"});
    } else if (contains(options, key)) {
      args.push_back("--" + key);
      args.push_back(value);
    } else {
      errors.push_back({line_no, "unknown key '" + key + "'"});
    }
  }
  if (!errors.empty()) throw ParseError(std::move(errors));
  return args;
}

inline std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = detail::trim(rest.substr(0, comma));
    double v = 0.0;
    if (!detail::parse_number(item, v))
      throw Failure{kInputError, fmt::format("{}: cannot parse '{}' as a number", what, item)};
    out.push_back(v);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return out;
}

inline Timestamp parse_time_flag(const std::string& text, const char* what) {
  const auto t = parse_timestamp(text);
  if (!t) throw Failure{kInputError, fmt::format("{}: cannot parse timestamp '{}'", what, text)};
  return *t;
}

inline HawkesModel load_model(Run& run, const std::string& path) {
  Json j;
  try {
    j = Json::parse(run.input(path));
  } catch (const Json::exception& e) {
    throw Failure{kInputError, fmt::format("{}: invalid JSON: {}", path, e.what())};
  }
  try {
    return model_from_json(j);
  } catch (const Json::exception& e) {
    throw Failure{kModelError, fmt::format("{}: {}", path, e.what())};
  } catch (const Error& e) {
    throw Failure{kModelError, fmt::format("{}: {}", path, e.what())};
  }
}

inline EventSequence load_events(Run& run, const std::string& path, std::optional<std::size_t> dimension,
                                 std::optional<double> horizon) {
  std::istringstream in(run.input(path));
  return read_events_csv(in, dimension, horizon);
}

/// "qq.csv" -> "qq.hawkes.1.csv"
inline std::string qq_path(const std::string& base, const std::string& label, std::size_t component) {
  const auto slash = base.find_last_of('/');
  const auto dot = base.find_last_of('.');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  const std::string stem = has_ext ? base.substr(0, dot) : base;
  const std::string ext = has_ext ? base.substr(dot) : ".csv";
  return fmt::format("{}.{}.{}{}", stem, label, component, ext);
}

struct Options {
  // clean-blocks
  std::string blocks_in, blocks_out, report_out;
  // extract-jumps
  std::string prices_in, events_out, blocks_for_window, window_start, window_end;
  double window_hours = 3.0, q_low = 0.10, q_high = 0.90;
  std::size_t min_history = 12;
  // fit / gof / simulate
  std::string events_in, json_out, model_in, qq_out, decay_init = "0.5,5,50", constraint = "projection";
  std::size_t num_decays = 3, inner_max_iter = 100, outer_max_iter = 500, max_events = 10'000'000;
  double inner_tol = 1e-6, outer_tol = 1e-4;
  bool poisson_baseline = false, allow_unstable = false;
  std::optional<double> horizon;
  std::optional<std::size_t> dimension;
  double sim_horizon = 0.0;
  std::uint64_t seed = 0;
  std::string config_path;
};

// ---------------------------------------------------------------------------
// Commands

inline int cmd_clean_blocks(const Options& o, std::ostream& out) {
  Run run("clean-blocks");
  std::istringstream in(run.input(o.blocks_in));
  const auto records = read_blocks_csv(in);
  if (records.empty()) throw Failure{kInputError, o.blocks_in + ": no block records"};
  const CleanedBlocks cleaned = clean_blocks(records);
  std::ostringstream csv;
  write_blocks_csv(csv, cleaned.cleaned);
  write_file(o.blocks_out, csv.str());
  Json report = cleaning_report_to_json(cleaned.report);
  report["input_records"] = records.size();
  report["output_records"] = cleaned.cleaned.size();
  write_file(o.report_out, run.json_document(std::move(report)));
  for (const auto& t : cleaned.report.ties)
    std::cerr << fmt::format("warning: tx_count tie at {}; kept height {}, dropped {}\n",
                             format_timestamp(t.timestamp), t.kept_height, t.dropped_height);
  out << fmt::format("cleaned {} -> {} blocks ({} duplicates dropped, {} reordered)\n", records.size(),
                     cleaned.cleaned.size(), cleaned.report.duplicates_dropped.size(),
                     cleaned.report.reordered.size());
  return kOk;
}

inline int cmd_extract_jumps(const Options& o, std::ostream& out) {
  Run run("extract-jumps");
  JumpConfig cfg{o.window_hours, o.q_low, o.q_high, o.min_history};
  run.config() = {{"window_hours", cfg.window_hours},
                  {"q_low", cfg.q_low},
                  {"q_high", cfg.q_high},
                  {"min_history", cfg.min_history}};
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw Failure{kInputError, e.what()};
  }

  std::istringstream in(run.input(o.prices_in));
  const auto bars = read_prices_csv(in);
  const ReturnSeries series = log_returns(bars);
  const JumpEvents jumps = extract_jumps(series.returns, cfg);

  std::vector<BlockRecord> blocks;
  if (!o.blocks_for_window.empty()) {
    std::istringstream bin(run.input(o.blocks_for_window));
    blocks = clean_blocks(read_blocks_csv(bin)).cleaned;
  }
  const Timestamp start = o.window_start.empty() ? bars.front().timestamp
                                                 : parse_time_flag(o.window_start, "--window-start");
  const Timestamp end = o.window_end.empty() ? bars.back().timestamp
                                             : parse_time_flag(o.window_end, "--window-end");
  run.config()["window_start"] = format_timestamp(start);
  run.config()["window_end"] = format_timestamp(end);
  const TrivariateStream stream = build_trivariate(blocks, jumps.up, jumps.down, start, end);

  std::ostringstream csv;
  write_events_csv(csv, stream.events);
  write_file(o.events_out, csv.str());
  if (!o.report_out.empty()) {
    Json gaps = Json::array();
    for (const auto& g : series.gaps)
      gaps.push_back({{"from", format_timestamp(g.from)}, {"to", format_timestamp(g.to)},
                      {"missing_bars", g.missing_bars}});
    Json report = {{"horizon_hours", stream.events.horizon()},
                   {"returns", series.returns.size()},
                   {"evaluated", jumps.evaluated},
                   {"up_events", jumps.up.size()},
                   {"down_events", jumps.down.size()},
                   {"block_events", stream.events.counts()[kBlockMark]},
                   {"dropped_outside_window",
                    {{"blocks", stream.dropped_blocks}, {"up", stream.dropped_up}, {"down", stream.dropped_down}}},
                   {"gaps", std::move(gaps)}};
    write_file(o.report_out, run.json_document(std::move(report)));
  }
  out << fmt::format("{} up and {} down jumps from {} returns\n", jumps.up.size(), jumps.down.size(),
                     series.returns.size());
  return kOk;
}

inline int cmd_fit(const Options& o, std::ostream& out) {
  Run run("fit");
  FitConfig cfg;
  cfg.num_decays = o.num_decays;
  cfg.decay_init = parse_list(o.decay_init, "--decay-init");
  cfg.inner_max_iter = o.inner_max_iter;
  cfg.outer_max_iter = o.outer_max_iter;
  cfg.inner_tol = o.inner_tol;
  cfg.outer_tol = o.outer_tol;
  if (o.constraint == "log_barrier" || o.constraint == "log-barrier") cfg.constraint = ConstraintMode::log_barrier;
  else if (o.constraint != "projection") throw Failure{kInputError, "--constraint must be projection or log_barrier"};
  run.config() = {{"num_decays", cfg.num_decays},
                  {"decay_init", cfg.decay_init},
                  {"inner_max_iter", cfg.inner_max_iter},
                  {"outer_max_iter", cfg.outer_max_iter},
                  {"inner_tol", cfg.inner_tol},
                  {"outer_tol", cfg.outer_tol},
                  {"constraint", o.constraint},
                  {"poisson_baseline", o.poisson_baseline}};
  if (o.horizon) run.config()["horizon"] = *o.horizon;
  if (o.dimension) run.config()["dimension"] = *o.dimension;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw Failure{kInputError, e.what()};
  }
  const EventSequence seq = load_events(run, o.events_in, o.dimension, o.horizon);

  Json doc;
  try {
    const FitResult fit = fit_full(seq, cfg);
    doc = fit_to_json(fit);
    if (o.poisson_baseline) doc["poisson_baseline"] = poisson_to_json(fit_poisson(seq));
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
    out << fmt::format("log-likelihood {:.6f}, spectral radius {:.4f}, converged {}\n", fit.log_lik,
                       fit.kernel_norms.spectral_radius, fit.converged);
  } catch (const Error& e) {
    throw Failure{kNumericError, fmt::format("fit failed on {} events over {} h: {}", seq.size(),
                                             seq.horizon(), e.what())};
  }
  doc["data"] = {{"events", seq.size()}, {"horizon", seq.horizon()}, {"counts", seq.counts()}};
  write_file(o.json_out, run.json_document(std::move(doc)));
  return kOk;
}

inline int cmd_gof(const Options& o, std::ostream& out) {
  Run run("gof");
  run.config() = {{"poisson_baseline", o.poisson_baseline}};
  if (o.horizon) run.config()["horizon"] = *o.horizon;
  const HawkesModel model = load_model(run, o.model_in);
  const EventSequence seq = load_events(run, o.events_in, model.dimension(), o.horizon);

  std::vector<GofReport> reports;
  try {
    reports.push_back(evaluate_gof(model, seq, ModelLabel::hawkes));
    if (o.poisson_baseline) reports.push_back(evaluate_poisson_gof(fit_poisson(seq).rates, seq));
  } catch (const Error& e) {
    throw Failure{kNumericError, e.what()};
  }

  Json doc = gof_to_json(reports.front());
  if (reports.size() > 1) doc["poisson_baseline"] = gof_to_json(reports.back());
  write_file(o.json_out, run.json_document(std::move(doc)));
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.components.size(); ++i) {
      const ComponentGof& c = r.components[i];
      if (c.insufficient) {
        out << fmt::format("{} component {}: insufficient events\n", to_string(r.model_label), i + 1);
        continue;
      }
      out << fmt::format("{} component {}: slope deviation {:.4f}, KS p-value {:.4g}\n",
                         to_string(r.model_label), i + 1, c.slope_deviation, c.ks_p_value);
      if (!o.qq_out.empty()) {
        std::ostringstream csv;
        write_qq_csv(csv, c.qq_pairs);
        write_file(qq_path(o.qq_out, to_string(r.model_label), i + 1), csv.str());
      }
    }
  }
  return kOk;
}

inline int cmd_simulate(const Options& o, std::ostream& out) {
  Run run("simulate");
  SimConfig cfg{load_model(run, o.model_in), o.sim_horizon, o.seed, o.max_events, o.allow_unstable};
  EventSequence seq(cfg.model.dimension(), 0.0);
  try {
    seq = simulate(cfg);
  } catch (const StabilityError& e) {
    throw Failure{kModelError, std::string(e.what()) + " (pass --allow-unstable to override)"};
  } catch (const TruncationError& e) {
    throw Failure{kNumericError, e.what()};
  } catch (const InvalidInput& e) {
    throw Failure{kInputError, e.what()};
  } catch (const Error& e) {
    throw Failure{kModelError, e.what()};
  }
  std::ostringstream csv;
  write_events_csv(csv, seq);
  write_file(o.events_out, csv.str());
  out << fmt::format("simulated {} events over {} h\n", seq.size(), seq.horizon());
  return kOk;
}

// ---------------------------------------------------------------------------

inline void report_parse_error(const ParseError& e, std::ostream& err) {
  const auto& lines = e.lines();
  if (lines.empty()) {
    err << "error: " << e.what() << "\n";
    return;
  }
  err << fmt::format("error: {} malformed line(s)\n", lines.size());
  for (std::size_t k = 0; k < std::min<std::size_t>(lines.size(), 10); ++k)
    err << fmt::format("  line {}: {}\n", lines[k].line, lines[k].message);
  if (lines.size() > 10) err << fmt::format("  ... and {} more\n", lines.size() - 10);
}

/// Runs one command. `args` excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Hawkes-process toolkit for block arrivals and price jumps"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", kToolVersion);

  auto* clean = app.add_subcommand("clean-blocks", "Remove duplicate timestamps and reorder blocks");
  clean->add_option("input", o.blocks_in, "blocks CSV (height,timestamp,tx_count)")->required();
  clean->add_option("--out", o.blocks_out, "cleaned blocks CSV")->required();
  clean->add_option("--report", o.report_out, "cleaning report JSON")->required();

  auto* jumps = app.add_subcommand("extract-jumps", "Detect price jumps and build the event stream");
  jumps->add_option("input", o.prices_in, "price CSV (timestamp,vwap) on a 5-minute grid")->required();
  jumps->add_option("--out", o.events_out, "events CSV")->required();
  jumps->add_option("--report", o.report_out, "summary JSON");
  jumps->add_option("--blocks", o.blocks_for_window, "blocks CSV to include as component 1");
  jumps->add_option("--window-start", o.window_start, "window start (default: first bar)");
  jumps->add_option("--window-end", o.window_end, "window end (default: last bar)");
  jumps->add_option("--window-hours", o.window_hours, "rolling history length")->capture_default_str();
  jumps->add_option("--q-low", o.q_low, "lower quantile")->capture_default_str();
  jumps->add_option("--q-high", o.q_high, "upper quantile")->capture_default_str();
  jumps->add_option("--min-history", o.min_history, "minimum history size")->capture_default_str();

  auto* fit = app.add_subcommand("fit", "Fit a sum-of-exponentials Hawkes model");
  fit->add_option("input", o.events_in, "events CSV")->required();
  fit->add_option("--out", o.json_out, "fit result JSON")->required();
  fit->add_option("--num-decays", o.num_decays)->capture_default_str();
  fit->add_option("--decay-init", o.decay_init, "comma-separated initial decays")->capture_default_str();
  fit->add_option("--inner-max-iter", o.inner_max_iter)->capture_default_str();
  fit->add_option("--outer-max-iter", o.outer_max_iter)->capture_default_str();
  fit->add_option("--inner-tol", o.inner_tol)->capture_default_str();
  fit->add_option("--outer-tol", o.outer_tol)->capture_default_str();
  fit->add_option("--constraint", o.constraint, "projection or log_barrier")->capture_default_str();
  fit->add_flag("--poisson-baseline", o.poisson_baseline, "also fit a homogeneous Poisson model");

  auto* gof = app.add_subcommand("gof", "Time-rescaling goodness of fit");
  gof->add_option("input", o.events_in, "events CSV")->required();
  gof->add_option("--model", o.model_in, "model or fit JSON")->required();
  gof->add_option("--out", o.json_out, "report JSON")->required();
  gof->add_option("--qq", o.qq_out, "Q-Q CSV path; one file per model and component");
  gof->add_flag("--poisson-baseline", o.poisson_baseline, "also evaluate a fitted Poisson model");

  for (auto* sub : {fit, gof}) {
    sub->add_option_function<double>("--horizon", [&](double h) { o.horizon = h; }, "observation window length (h)");
    sub->add_option("--config", o.config_path, "key = value config file");
  }
  fit->add_option_function<std::size_t>("--dimension", [&](std::size_t d) { o.dimension = d; },
                                        "number of components");

  auto* sim = app.add_subcommand("simulate", "Simulate a Hawkes model by thinning");
  sim->add_option("--model", o.model_in, "model JSON")->required();
  sim->add_option("--horizon", o.sim_horizon, "hours")->required();
  sim->add_option("--seed", o.seed)->capture_default_str();
  sim->add_option("--out", o.events_out, "events CSV")->required();
  sim->add_option("--max-events", o.max_events)->capture_default_str();
  sim->add_flag("--allow-unstable", o.allow_unstable, "simulate even if the spectral radius is >= 1");

  for (auto* sub : {clean, jumps, sim}) sub->add_option("--config", o.config_path, "key = value config file");

  try {
    // Config values are spliced in ahead of the user's arguments; with
    // take-last semantics explicit flags win.
    if (!args.empty()) {
      const auto it = std::find(args.begin(), args.end(), "--config");
      if (it != args.end() && std::next(it) != args.end()) {
        if (const CLI::App* sub = app.get_subcommand_no_throw(args.front())) {
          std::vector<std::string> flags, options;
          for (const CLI::Option* opt : sub->get_options()) {
            if (opt->get_lnames().empty() || opt->get_lnames().front() == "config") continue;
            const std::string& name = opt->get_lnames().front();
            (name == "poisson-baseline" || name == "allow-unstable" ? flags : options).push_back(name);
          }
          const auto extra = config_arguments(read_file(*std::next(it)), flags, options);
          args.insert(args.begin() + 1, extra.begin(), extra.end());
        }
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    const int code = app.exit(e, out, msg);
    err << msg.str();
    return code == 0 ? kOk : kInputError;
  } catch (const ParseError& e) {
    report_parse_error(e, err);
    return kInputError;
  } catch (const Failure& f) {
    err << "error: " << f.message << "\n";
    return f.code;
  }

  try {
    if (*clean) return cmd_clean_blocks(o, out);
    if (*jumps) return cmd_extract_jumps(o, out);
    if (*fit) return cmd_fit(o, out);
    if (*gof) return cmd_gof(o, out);
    return cmd_simulate(o, out);
  } catch (const Failure& f) {
    err << "error: " << f.message << "\n";
    return f.code;
  } catch (const ParseError& e) {
    report_parse_error(e, err);
    return kInputError;
  } catch (const StabilityError& e) {
    err << "error: " << e.what() << "\n";
    return kModelError;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n" << e.diagnostics() << "\n";
    return kNumericError;
  } catch (const Error& e) {
    // Remaining library errors here come from malformed or inconsistent inputs.
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace blockhawkes::cli
