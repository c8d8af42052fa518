#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "blockhawkes/error.hpp"

namespace blockhawkes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline void require_square(const Matrix& m, std::size_t dim, const char* name) {
  if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim)
    throw InvalidInput(std::string(name) + " must be " + std::to_string(dim) + "x" +
                       std::to_string(dim));
}

inline void require_all(const Matrix& m, const char* name, const char* rule, auto pred) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j)) || !pred(m(i, j)))
        throw InvalidInput(std::string(name) + "(" + std::to_string(i + 1) + "," +
                           std::to_string(j + 1) + ") = " + std::to_string(m(i, j)) +
                           " violates " + rule);
}

}  // namespace detail

/// phi_ij(t) = alpha_ij * exp(-beta_ij * t)
struct ExponentialKernel {
  Matrix alpha;
  Matrix beta;

  std::size_t dimension() const { return static_cast<std::size_t>(alpha.rows()); }

  double value(std::size_t i, std::size_t j, double dt) const {
    return alpha(i, j) * std::exp(-beta(i, j) * dt);
  }
  double integral(std::size_t i, std::size_t j, double dt) const {
    return alpha(i, j) / beta(i, j) * -std::expm1(-beta(i, j) * dt);
  }
  double norm(std::size_t i, std::size_t j) const { return alpha(i, j) / beta(i, j); }

  void validate() const {
    detail::require_square(alpha, dimension(), "alpha");
    detail::require_square(beta, dimension(), "beta");
    detail::require_all(alpha, "alpha", "alpha >= 0", [](double v) { return v >= 0.0; });
    detail::require_all(beta, "beta", "beta > 0", [](double v) { return v > 0.0; });
  }
};

/// phi_ij(t) = sum_u alpha[u]_ij * exp(-beta[u] * t), decays shared by all pairs.
struct SumExponentialKernel {
  std::vector<Matrix> alpha;
  std::vector<double> beta;

  std::size_t dimension() const {
    return alpha.empty() ? 0 : static_cast<std::size_t>(alpha.front().rows());
  }
  std::size_t num_decays() const { return beta.size(); }

  double value(std::size_t i, std::size_t j, double dt) const {
    double s = 0.0;
    for (std::size_t u = 0; u < beta.size(); ++u) s += alpha[u](i, j) * std::exp(-beta[u] * dt);
    return s;
  }
  double integral(std::size_t i, std::size_t j, double dt) const {
    double s = 0.0;
    for (std::size_t u = 0; u < beta.size(); ++u)
      s += alpha[u](i, j) / beta[u] * -std::expm1(-beta[u] * dt);
    return s;
  }
  double norm(std::size_t i, std::size_t j) const {
    double s = 0.0;
    for (std::size_t u = 0; u < beta.size(); ++u) s += alpha[u](i, j) / beta[u];
    return s;
  }

  void validate() const {
    if (beta.empty()) throw InvalidInput("sum-of-exponentials kernel needs at least one decay");
    if (alpha.size() != beta.size())
      throw InvalidInput("sum-of-exponentials kernel has " + std::to_string(alpha.size()) +
                         " alpha matrices for " + std::to_string(beta.size()) + " decays");
    for (std::size_t u = 0; u < beta.size(); ++u) {
      detail::require_square(alpha[u], dimension(), "alpha[u]");
      detail::require_all(alpha[u], "alpha[u]", "alpha >= 0", [](double v) { return v >= 0.0; });
      if (!std::isfinite(beta[u]) || beta[u] <= 0.0)
        throw InvalidInput("decay beta[" + std::to_string(u + 1) + "] must be positive");
      if (u > 0 && !(beta[u - 1] < beta[u]))
        throw InvalidInput("decays must be strictly increasing");
    }
  }
};

/// phi_ij(t) = alpha_ij * (c_ij + t)^(-beta_ij), integrable for beta_ij > 1.
struct PowerLawKernel {
  Matrix alpha;
  Matrix c;
  Matrix beta;

  std::size_t dimension() const { return static_cast<std::size_t>(alpha.rows()); }

  double value(std::size_t i, std::size_t j, double dt) const {
    return alpha(i, j) * std::pow(c(i, j) + dt, -beta(i, j));
  }
  double integral(std::size_t i, std::size_t j, double dt) const {
    const double e = 1.0 - beta(i, j);
    return alpha(i, j) / (beta(i, j) - 1.0) *
           (std::pow(c(i, j), e) - std::pow(c(i, j) + dt, e));
  }
  double norm(std::size_t i, std::size_t j) const {
    if (!(beta(i, j) > 1.0))
      throw DomainError("power-law kernel (" + std::to_string(i + 1) + "," +
                        std::to_string(j + 1) + ") is not integrable: beta <= 1");
    return alpha(i, j) * std::pow(c(i, j), 1.0 - beta(i, j)) / (beta(i, j) - 1.0);
  }

  void validate() const {
    detail::require_square(alpha, dimension(), "alpha");
    detail::require_square(c, dimension(), "c");
    detail::require_square(beta, dimension(), "beta");
    detail::require_all(alpha, "alpha", "alpha >= 0", [](double v) { return v >= 0.0; });
    detail::require_all(c, "c", "c > 0", [](double v) { return v > 0.0; });
    detail::require_all(beta, "beta", "beta > 1", [](double v) { return v > 1.0; });
  }
};

using KernelSpec = std::variant<ExponentialKernel, SumExponentialKernel, PowerLawKernel>;

inline std::size_t kernel_dimension(const KernelSpec& k) {
  return std::visit([](const auto& kk) { return kk.dimension(); }, k);
}

/// Markov form of a kernel: itself for sum-of-exponentials, a one-term sum
/// for an exponential kernel whose decays are all equal, nothing otherwise.
inline std::optional<SumExponentialKernel> as_shared_decay(const KernelSpec& k) {
  if (const auto* s = std::get_if<SumExponentialKernel>(&k)) return *s;
  if (const auto* e = std::get_if<ExponentialKernel>(&k)) {
    if (e->beta.size() == 0) return std::nullopt;
    const double b = e->beta(0, 0);
    if ((e->beta.array() == b).all()) return SumExponentialKernel{{e->alpha}, {b}};
  }
  return std::nullopt;
}

/// Background rates (events/hour) plus excitation kernel.
struct HawkesModel {
  Vector mu;
  KernelSpec kernel;

  std::size_t dimension() const { return static_cast<std::size_t>(mu.size()); }

  void validate() const {
    if (mu.size() == 0) throw InvalidInput("model dimension must be positive");
    for (Eigen::Index i = 0; i < mu.size(); ++i)
      if (!std::isfinite(mu(i)) || mu(i) <= 0.0)
        throw InvalidInput("background rate mu(" + std::to_string(i + 1) +
                           ") must be positive");
    std::visit([](const auto& kk) { kk.validate(); }, kernel);
    if (kernel_dimension(kernel) != dimension())
      throw InvalidInput("kernel dimension " + std::to_string(kernel_dimension(kernel)) +
                         " does not match " + std::to_string(dimension()) +
                         " background rates");
  }
};

/// Homogeneous Poisson model as a Hawkes model with a zero kernel.
inline HawkesModel poisson_model(const Vector& rates) {
  const auto m = rates.size();
  return HawkesModel{rates, ExponentialKernel{Matrix::Zero(m, m), Matrix::Ones(m, m)}};
}

}  // namespace blockhawkes
