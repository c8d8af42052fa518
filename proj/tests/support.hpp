#pragma once

// Shared fixtures and slow reference implementations for the test suites.
// The references are written directly from the model definitions and do not
// call into the library's evaluation code.

#include <cmath>
#include <cstddef>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "blockhawkes/model.hpp"
#include "blockhawkes/event_sequence.hpp"
#include "blockhawkes/rng.hpp"

namespace blockhawkes::testing {

/// The published trivariate fit: decays in 1/h and the three alpha matrices.
inline SumExponentialKernel published_kernel() {
  SumExponentialKernel k;
  k.beta = {2.340, 15.730, 21.875};
  Matrix a1(3, 3), a2(3, 3), a3(3, 3);
  a1 << 1.377, 1.635, 1.615, 0.244, 0.118, 0.558, 0.326, 0.497, 0.096;
  a2 << 1.526, 0.0, 0.215, 0.0, 0.0, 2.131, 0.0, 0.147, 0.0;
  a3 << 0.020, 0.0, 0.0, 0.0, 0.0, 1.357, 0.0, 0.0, 1.383;
  k.alpha = {a1, a2, a3};
  return k;
}

inline HawkesModel published_model(double mu_block, double mu_jump) {
  Vector mu(3);
  mu << mu_block, mu_jump, mu_jump;
  return HawkesModel{mu, published_kernel()};
}

/// Random sum-of-exponentials model whose kernel-norm matrix has row sums
/// (and hence spectral radius) at most `max_row_norm`.
inline HawkesModel random_sum_exp_model(Rng& rng, std::size_t m, std::size_t num_decays,
                                        double max_row_norm) {
  SumExponentialKernel k;
  double b = 0.3 + rng.uniform();
  for (std::size_t u = 0; u < num_decays; ++u) {
    k.beta.push_back(b);
    b *= 2.0 + 4.0 * rng.uniform();
  }
  for (std::size_t u = 0; u < num_decays; ++u) {
    Matrix a(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) a(i, j) = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    k.alpha.push_back(a);
  }
  Matrix norms = Matrix::Zero(m, m);
  for (std::size_t u = 0; u < num_decays; ++u) norms += k.alpha[u] / k.beta[u];
  const double worst = norms.rowwise().sum().maxCoeff();
  if (worst > 0.0)
    for (auto& a : k.alpha) a *= max_row_norm * (0.5 + 0.5 * rng.uniform()) / worst;
  Vector mu(m);
  for (std::size_t i = 0; i < m; ++i) mu(i) = 0.2 + rng.uniform();
  return HawkesModel{mu, k};
}

/// Uniformly scattered events (not Hawkes-distributed), sorted.
inline EventSequence random_events(Rng& rng, std::size_t m, std::size_t n, double horizon) {
  std::vector<Event> ev;
  for (std::size_t k = 0; k < n; ++k)
    ev.push_back({horizon * rng.uniform(), static_cast<std::size_t>(rng.next_u64() % m)});
  return EventSequence::from_unsorted(std::move(ev), m, horizon);
}

/// phi_ij(dt) written out from the kernel definitions.
inline double reference_kernel(const KernelSpec& spec, std::size_t i, std::size_t j, double dt) {
  if (const auto* k = std::get_if<SumExponentialKernel>(&spec)) {
    double s = 0.0;
    for (std::size_t u = 0; u < k->beta.size(); ++u) s += k->alpha[u](i, j) * std::exp(-k->beta[u] * dt);
    return s;
  }
  if (const auto* k = std::get_if<ExponentialKernel>(&spec)) return k->alpha(i, j) * std::exp(-k->beta(i, j) * dt);
  const auto& p = std::get<PowerLawKernel>(spec);
  return p.alpha(i, j) * std::pow(p.c(i, j) + dt, -p.beta(i, j));
}

/// mu_i + sum over events strictly before t.
inline double reference_intensity(const HawkesModel& model, const EventSequence& seq, std::size_t i,
                                  double t) {
  double lam = model.mu(i);
  for (const Event& e : seq)
    if (e.time < t) lam += reference_kernel(model.kernel, i, e.mark, t - e.time);
  return lam;
}

/// Integral of the reference intensity over [0, t]: composite 20-point
/// Gauss-Legendre between event times, panels no wider than `panel`.
inline double reference_compensator(const HawkesModel& model, const EventSequence& seq, std::size_t i,
                                    double t, double panel = 0.05) {
  std::vector<double> cuts{0.0};
  for (const Event& e : seq)
    if (e.time > cuts.back() && e.time < t) cuts.push_back(e.time);
  cuts.push_back(t);
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s], b = cuts[s + 1];
    if (!(b > a)) continue;
    const auto pieces = static_cast<std::size_t>(std::ceil((b - a) / panel));
    const double h = (b - a) / static_cast<double>(pieces);
    for (std::size_t p = 0; p < pieces; ++p) {
      const double lo = a + h * static_cast<double>(p);
      const double hi = p + 1 == pieces ? b : lo + h;
      const double mid = 0.5 * (lo + hi);
      // Events at the left edge count; the interior sees every event <= lo.
      total += boost::math::quadrature::gauss<double, 20>::integrate(
          [&](double x) {
            double lam = model.mu(i);
            for (const Event& e : seq)
              if (e.time < mid) lam += reference_kernel(model.kernel, i, e.mark, x - e.time);
            return lam;
          },
          lo, hi);
    }
  }
  return total;
}

/// Log-likelihood as the sum of log reference intensities minus the
/// reference compensators at the horizon.
inline double reference_log_likelihood(const HawkesModel& model, const EventSequence& seq, double panel = 0.05) {
  double l = 0.0;
  for (const Event& e : seq) l += std::log(reference_intensity(model, seq, e.mark, e.time));
  for (std::size_t i = 0; i < model.dimension(); ++i)
    l -= reference_compensator(model, seq, i, seq.horizon(), panel);
  return l;
}

inline double relative_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace blockhawkes::testing
