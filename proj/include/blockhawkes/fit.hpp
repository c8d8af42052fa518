#pragma once

// Maximum-likelihood estimation of sum-of-exponentials Hawkes models.
//
// For fixed decays the log-likelihood is concave in (mu, alpha) and separates
// by target component i:
//
//   l_i(theta) = sum_{k: d_k = i} ln(x_k . theta) - c . theta,
//   theta = (mu_i, alpha^u_ij),  x_k = (1, S^u_j(t_k)),  c = (T, M^u_j(T)),
//
// where S^u_j are the decay traces of the recursive evaluator. Each block is
// solved by a projected Newton method with an exact Hessian. The shared decays
// are chosen by Nelder-Mead on the profile likelihood over log(beta).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "blockhawkes/core.hpp"
#include "blockhawkes/nelder_mead.hpp"

namespace blockhawkes {

enum class ConstraintMode {
  projection,   // projected Newton; active bounds hold exact zeros
  log_barrier,  // interior-point path on mu > floor, alpha > 0
};

/// Lower bound on fitted background rates.
inline constexpr double kMuFloor = 1e-10;

struct FitConfig {
  std::size_t num_decays = 3;
  std::vector<double> decay_init{0.5, 5.0, 50.0};
  std::size_t inner_max_iter = 100;
  std::size_t outer_max_iter = 500;
  double inner_tol = 1e-6;
  double outer_tol = 1e-4;  // simplex diameter in log-decay space
  ConstraintMode constraint = ConstraintMode::projection;

  void validate() const {
    if (num_decays < 1) throw ConfigError("num_decays must be at least 1");
    if (decay_init.size() != num_decays)
      throw ConfigError("decay_init has " + std::to_string(decay_init.size()) + " entries, expected " +
                        std::to_string(num_decays));
    auto sorted = decay_init;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t u = 0; u < sorted.size(); ++u) {
      if (!std::isfinite(sorted[u]) || sorted[u] <= 0.0)
        throw ConfigError("decay_init entries must be positive");
      if (u > 0 && !(sorted[u - 1] < sorted[u]))
        throw ConfigError("decay_init entries must be distinct");
    }
    if (inner_max_iter < 1) throw ConfigError("inner_max_iter must be positive");
    if (!(inner_tol > 0.0) || !(outer_tol > 0.0)) throw ConfigError("tolerances must be positive");
  }
};

struct TracePoint {
  std::size_t iteration = 0;
  double objective = 0.0;
};

struct IterationCounts {
  std::size_t inner = 0;        // Newton iterations (max over components) of the returned fit
  std::size_t outer = 0;        // Nelder-Mead iterations
  std::size_t evaluations = 0;  // profile evaluations
};

struct FitResult {
  HawkesModel model;
  double log_lik = -std::numeric_limits<double>::infinity();
  KernelNorms kernel_norms;
  bool converged = false;
  IterationCounts iterations;
  std::vector<TracePoint> optimizer_trace;
  double projected_gradient = 0.0;  // inf-norm at the returned (mu, alpha)
  std::vector<std::string> warnings;
};

struct LikelihoodGradient {
  double value = 0.0;
  Vector d_mu;
  std::vector<Matrix> d_alpha;  // d_alpha[u](i, j)
};

namespace detail {

/// Design of the separable per-component problem at fixed decays.
struct FitDesign {
  std::size_t m = 0;
  std::size_t num_decays = 0;
  Matrix traces;               // n x (U m), column u * m + j
  std::vector<double> totals;  // M^u_j(T), index u * m + j
  std::vector<std::vector<std::size_t>> rows_of;  // event indices per component

  std::size_t params() const { return 1 + num_decays * m; }

  Matrix features(std::size_t i) const {
    Matrix x(static_cast<Eigen::Index>(rows_of[i].size()), static_cast<Eigen::Index>(params()));
    for (std::size_t r = 0; r < rows_of[i].size(); ++r) {
      x(r, 0) = 1.0;
      x.row(r).tail(params() - 1) = traces.row(rows_of[i][r]);
    }
    return x;
  }
};

inline FitDesign make_design(const EventSequence& seq, const std::vector<double>& decays) {
  FitDesign d;
  d.m = seq.dimension();
  d.num_decays = decays.size();
  d.traces = shared_decay_traces(seq, decays);
  d.totals.assign(d.num_decays * d.m, 0.0);
  d.rows_of.resize(d.m);
  const double horizon = seq.horizon();
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Event& e = seq[k];
    d.rows_of[e.mark].push_back(k);
    for (std::size_t u = 0; u < d.num_decays; ++u)
      d.totals[u * d.m + e.mark] += -std::expm1(-decays[u] * (horizon - e.time)) / decays[u];
  }
  return d;
}

/// Concave block l(theta) = sum ln(x theta) - c . theta on theta >= lower.
class ComponentProblem {
 public:
  ComponentProblem(Matrix x, Vector c, Vector lower)
      : x_(std::move(x)), c_(std::move(c)), lower_(std::move(lower)) {}

  double value(const Vector& theta) const {
    const Vector lam = x_ * theta;
    if (!(lam.array() > 0.0).all()) return -std::numeric_limits<double>::infinity();
    return lam.array().log().sum() - c_.dot(theta);
  }

  void derivatives(const Vector& theta, Vector& g, Matrix& h) const {
    const Vector inv = (x_ * theta).cwiseInverse();
    g = x_.transpose() * inv - c_;
    const Matrix scaled = inv.asDiagonal() * x_;
    h = -(scaled.transpose() * scaled);
  }

  Vector project(Vector theta) const { return theta.cwiseMax(lower_); }

  /// theta - P(theta + g), the stationarity measure on the box.
  double projected_gradient(const Vector& theta, const Vector& g) const {
    return (theta - project(theta + g)).cwiseAbs().maxCoeff();
  }

  const Vector& lower() const { return lower_; }

 private:
  Matrix x_;
  Vector c_;
  Vector lower_;
};

struct ComponentSolution {
  Vector theta;
  std::vector<double> history;  // objective after each iteration, [0] = start
  double projected_gradient = 0.0;
};

inline Vector solve_damped(const Matrix& neg_h, const Vector& g) {
  const double scale = std::max(1.0, neg_h.diagonal().cwiseAbs().maxCoeff());
  Matrix a = neg_h;
  a.diagonal().array() += 1e-12 * scale;
  Eigen::LDLT<Matrix> ldlt(a);
  Vector d;
  if (ldlt.info() == Eigen::Success) d = ldlt.solve(g);
  if (d.size() != g.size() || !d.allFinite() || g.dot(d) <= 0.0) d = g / scale;
  return d;
}

inline ComponentSolution solve_projected(const ComponentProblem& prob, Vector theta,
                                         std::size_t max_iter, double target) {
  ComponentSolution sol;
  theta = prob.project(std::move(theta));
  double f = prob.value(theta);
  sol.history.push_back(f);
  Vector g;
  Matrix h;
  const Eigen::Index p = theta.size();
  for (std::size_t it = 0; it < max_iter; ++it) {
    prob.derivatives(theta, g, h);
    const double pg = prob.projected_gradient(theta, g);
    if (pg <= target) break;

    // Variables held at their bound this step (Bertsekas' epsilon-active set).
    const double eps = std::min(1e-8, pg);
    std::vector<Eigen::Index> free;
    for (Eigen::Index j = 0; j < p; ++j)
      if (!(theta(j) <= prob.lower()(j) + eps && g(j) < 0.0)) free.push_back(j);

    Vector dir = Vector::Zero(p);
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Matrix hf(nf, nf);
      Vector gf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        gf(a) = g(free[a]);
        for (Eigen::Index b = 0; b < nf; ++b) hf(a, b) = -h(free[a], free[b]);
      }
      const Vector df = solve_damped(hf, gf);
      for (Eigen::Index a = 0; a < nf; ++a) dir(free[a]) = df(a);
    }

    bool accepted = false;
    double step = 1.0;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      Vector trial = prob.project(theta + step * dir);
      const double ft = prob.value(trial);
      if (ft >= f + 1e-4 * g.dot(trial - theta) && ft >= f) {
        accepted = ft > f || (trial - theta).cwiseAbs().maxCoeff() > 0.0;
        theta = std::move(trial);
        f = ft;
        break;
      }
    }
    sol.history.push_back(f);
    if (!accepted) break;  // no further progress at working precision
  }
  prob.derivatives(theta, g, h);
  sol.projected_gradient = prob.projected_gradient(theta, g);
  sol.theta = std::move(theta);
  return sol;
}

inline ComponentSolution solve_barrier(const ComponentProblem& prob, Vector theta,
                                       std::size_t max_iter, double target) {
  ComponentSolution sol;
  const Vector& lo = prob.lower();
  // Strictly interior start.
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    theta(j) = std::max(theta(j), lo(j) + 1e-3);
  double f = prob.value(theta);
  sol.history.push_back(f);
  const double dim = static_cast<double>(theta.size());
  double nu = 1.0;
  auto barrier_value = [&](const Vector& t) {
    return prob.value(t) + nu * (t - lo).array().log().sum();
  };
  Vector g;
  Matrix h;
  std::size_t it = 0;
  while (it < max_iter) {
    // Centering steps for the current barrier weight.
    for (; it < max_iter; ++it) {
      prob.derivatives(theta, g, h);
      const Vector slack_inv = (theta - lo).cwiseInverse();
      const Vector gb = g + nu * slack_inv;
      if (gb.cwiseProduct(theta - lo).cwiseAbs().maxCoeff() <= 0.1 * nu) break;
      Matrix neg_hb = -h;
      neg_hb.diagonal() += nu * slack_inv.cwiseAbs2();
      const Vector dir = solve_damped(neg_hb, gb);
      double step = 1.0;
      for (Eigen::Index j = 0; j < dir.size(); ++j)
        if (dir(j) < 0.0) step = std::min(step, 0.99 * (theta(j) - lo(j)) / -dir(j));
      const double fb = barrier_value(theta);
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        Vector trial = theta + step * dir;
        if (barrier_value(trial) >= fb + 1e-4 * step * gb.dot(dir)) {
          theta = std::move(trial);
          accepted = true;
          break;
        }
      }
      f = prob.value(theta);
      sol.history.push_back(f);
      if (!accepted) break;
    }
    prob.derivatives(theta, g, h);
    if (nu * dim <= 0.1 * target && prob.projected_gradient(theta, g) <= target) break;
    if (nu < 1e-14) break;
    nu *= 0.1;
  }
  prob.derivatives(theta, g, h);
  sol.projected_gradient = prob.projected_gradient(theta, g);
  sol.theta = std::move(theta);
  return sol;
}

inline std::vector<double> canonical_decays(std::vector<double> decays) {
  std::sort(decays.begin(), decays.end());
  for (std::size_t u = 0; u < decays.size(); ++u) {
    if (!std::isfinite(decays[u]) || decays[u] <= 0.0)
      throw InvalidInput("decays must be positive and finite");
    if (u > 0 && !(decays[u - 1] < decays[u]))
      throw InvalidInput("decays must be distinct");
  }
  if (decays.empty()) throw InvalidInput("at least one decay is required");
  return decays;
}

}  // namespace detail

/// Analytic gradient of the log-likelihood with respect to (mu, alpha) for a
/// shared-decay model, built from the same decay traces as the recursion.
inline LikelihoodGradient log_likelihood_gradient(const HawkesModel& model,
                                                  const EventSequence& seq) {
  check_compatible(model, seq);
  const auto shared = as_shared_decay(model.kernel);
  if (!shared) throw UnsupportedKernel("likelihood gradient requires shared decays");
  const std::size_t m = model.dimension();
  const std::size_t nu = shared->num_decays();
  const detail::FitDesign design = detail::make_design(seq, shared->beta);

  LikelihoodGradient out;
  out.d_mu = Vector::Constant(m, -seq.horizon());
  out.d_alpha.assign(nu, Matrix::Zero(m, m));
  for (std::size_t u = 0; u < nu; ++u)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) out.d_alpha[u](i, j) = -design.totals[u * m + j];

  out.value = -seq.horizon() * model.mu.sum();
  for (std::size_t u = 0; u < nu; ++u)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        out.value -= shared->alpha[u](i, j) * design.totals[u * m + j];

  for (std::size_t k = 0; k < seq.size(); ++k) {
    const std::size_t i = seq[k].mark;
    double lam = model.mu(i);
    for (std::size_t u = 0; u < nu; ++u)
      for (std::size_t j = 0; j < m; ++j) lam += shared->alpha[u](i, j) * design.traces(k, u * m + j);
    if (!(lam >= kIntensityFloor)) throw LikelihoodUndefined(k, lam);
    out.value += std::log(lam);
    out.d_mu(i) += 1.0 / lam;
    for (std::size_t u = 0; u < nu; ++u)
      for (std::size_t j = 0; j < m; ++j) out.d_alpha[u](i, j) += design.traces(k, u * m + j) / lam;
  }
  return out;
}

/// Maximises the log-likelihood over mu > 0, alpha >= 0 with the decays held
/// fixed. Non-convergence is reported through `converged`, not thrown.
inline FitResult fit_given_decays(const EventSequence& seq, const std::vector<double>& decays,
                                  const FitConfig& config) {
  if (!(seq.horizon() > 0.0)) throw InvalidInput("cannot fit on an empty observation window");
  if (!(config.inner_tol > 0.0) || config.inner_max_iter < 1)
    throw ConfigError("inner solver needs a positive tolerance and iteration budget");
  const std::vector<double> beta = detail::canonical_decays(decays);
  const std::size_t m = seq.dimension();
  const std::size_t nu = beta.size();
  const detail::FitDesign design = detail::make_design(seq, beta);
  const auto counts = seq.counts();
  const double horizon = seq.horizon();

  FitResult result;
  SumExponentialKernel kernel{std::vector<Matrix>(nu, Matrix::Zero(m, m)), beta};
  Vector mu = Vector::Constant(m, kMuFloor);
  std::vector<std::vector<double>> histories(m);
  double pg_max = 0.0;

  for (std::size_t i = 0; i < m; ++i) {
    if (counts[i] == 0) {
      result.warnings.push_back("component " + std::to_string(i + 1) +
                                " has no events; its background rate and kernel row are pinned at "
                                "the floor");
      histories[i] = {-kMuFloor * horizon};
      continue;
    }
    Vector c(design.params());
    c(0) = horizon;
    for (std::size_t q = 0; q < nu * m; ++q) c(1 + q) = design.totals[q];
    Vector lower = Vector::Zero(design.params());
    lower(0) = kMuFloor;
    const detail::ComponentProblem prob(design.features(i), std::move(c), std::move(lower));

    // Start from the component's Poisson MLE so the result never falls below it.
    Vector start = Vector::Zero(design.params());
    start(0) = static_cast<double>(counts[i]) / horizon;
    const double start_value = prob.value(start);
    const double target = 1e-3 * config.inner_tol * (1.0 + std::abs(start_value));
    const detail::ComponentSolution sol =
        config.constraint == ConstraintMode::projection
            ? detail::solve_projected(prob, start, config.inner_max_iter, target)
            : detail::solve_barrier(prob, start, config.inner_max_iter, target);

    mu(i) = sol.theta(0);
    for (std::size_t u = 0; u < nu; ++u)
      for (std::size_t j = 0; j < m; ++j) kernel.alpha[u](i, j) = sol.theta(1 + u * m + j);
    histories[i] = sol.history;
    pg_max = std::max(pg_max, sol.projected_gradient);
  }

  std::size_t longest = 0;
  for (const auto& h : histories) longest = std::max(longest, h.size());
  for (std::size_t it = 0; it < longest; ++it) {
    double total = 0.0;
    for (const auto& h : histories) total += h[std::min(it, h.size() - 1)];
    result.optimizer_trace.push_back({it, total});
  }
  result.iterations.inner = longest == 0 ? 0 : longest - 1;
  result.iterations.evaluations = 1;
  result.projected_gradient = pg_max;
  result.converged = pg_max <= config.inner_tol * (1.0 + std::abs(result.optimizer_trace.back().objective));
  result.model = HawkesModel{std::move(mu), std::move(kernel)};
  result.log_lik = log_likelihood(result.model, seq);
  result.kernel_norms = kernel_norms(result.model);
  return result;
}

/// Profile-likelihood fit: Nelder-Mead over log(decays), each vertex scored by
/// the maximised log-likelihood of fit_given_decays.
inline FitResult fit_full(const EventSequence& seq, const FitConfig& config) {
  config.validate();
  std::vector<double> init = config.decay_init;
  std::sort(init.begin(), init.end());
  if (config.outer_max_iter == 0) {
    FitResult r = fit_given_decays(seq, init, config);
    r.converged = false;
    r.iterations.outer = 0;
    r.optimizer_trace = {{0, r.log_lik}};
    return r;
  }

  std::optional<FitResult> best;
  std::vector<std::string> warnings;
  std::size_t evaluations = 0;
  auto profile = [&](const std::vector<double>& log_decays) {
    std::vector<double> decays(log_decays.size());
    std::transform(log_decays.begin(), log_decays.end(), decays.begin(),
                   [](double x) { return std::exp(x); });
    ++evaluations;
    try {
      FitResult r = fit_given_decays(seq, decays, config);
      if (!std::isfinite(r.log_lik)) throw NumericError("non-finite profile value", "");
      const double v = -r.log_lik;
      if (!best || r.log_lik > best->log_lik) best = std::move(r);
      return v;
    } catch (const Error& e) {
      warnings.push_back("profile evaluation failed at log-decays (" +
                         [&] {
                           std::string s;
                           for (double x : log_decays) s += (s.empty() ? "" : ", ") + std::to_string(x);
                           return s;
                         }() +
                         "): " + e.what());
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<std::vector<double>> simplex;
  std::vector<double> x0(init.size());
  std::transform(init.begin(), init.end(), x0.begin(), [](double b) { return std::log(b); });
  simplex.push_back(x0);
  for (std::size_t d = 0; d < x0.size(); ++d) {
    auto v = x0;
    v[d] += std::log(1.05);
    simplex.push_back(std::move(v));
  }
  NelderMeadOptions opt;
  opt.max_iter = config.outer_max_iter;
  opt.tol = config.outer_tol;
  const NelderMeadResult nm = nelder_mead_minimize(profile, simplex, opt);
  if (!best) throw FittingError("every profile evaluation failed; first: " +
                                (warnings.empty() ? std::string("none") : warnings.front()));

  FitResult r = std::move(*best);
  r.converged = nm.converged && r.converged;
  r.iterations.outer = nm.iterations;
  r.iterations.evaluations = evaluations;
  r.optimizer_trace.clear();
  for (std::size_t it = 0; it < nm.best_history.size(); ++it)
    r.optimizer_trace.push_back({it, -nm.best_history[it]});
  r.warnings.insert(r.warnings.end(), warnings.begin(), warnings.end());
  return r;
}

struct PoissonFit {
  Vector rates;             // N_i(T) / T
  std::vector<bool> empty;  // component had no events; excluded from goodness of fit
  double log_lik = 0.0;
};

inline PoissonFit fit_poisson(const EventSequence& seq) {
  if (!(seq.horizon() > 0.0)) throw InvalidInput("Poisson fit requires a positive horizon");
  const auto counts = seq.counts();
  PoissonFit out;
  out.rates.resize(seq.dimension());
  out.empty.resize(seq.dimension());
  for (std::size_t i = 0; i < seq.dimension(); ++i) {
    const double n = static_cast<double>(counts[i]);
    out.rates(i) = n / seq.horizon();
    out.empty[i] = counts[i] == 0;
    if (counts[i] > 0) out.log_lik += n * std::log(out.rates(i)) - out.rates(i) * seq.horizon();
  }
  return out;
}

}  // namespace blockhawkes
