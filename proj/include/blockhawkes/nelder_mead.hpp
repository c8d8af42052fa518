#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace blockhawkes {

struct NelderMeadOptions {
  std::size_t max_iter = 500;
  double tol = 1e-4;  // stop when every vertex is within tol (inf-norm) of the best
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

struct NelderMeadResult {
  std::vector<double> best;
  double value = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<double> best_history;  // best value after each iteration, index 0 = initial simplex
};

/// Derivative-free minimisation of `f` from the given initial simplex
/// (dim + 1 vertices). `f` may return +inf for infeasible points.
template <class F>
NelderMeadResult nelder_mead_minimize(F&& f, std::vector<std::vector<double>> simplex,
                                      const NelderMeadOptions& opt = {}) {
  const std::size_t nv = simplex.size();
  const std::size_t dim = nv == 0 ? 0 : nv - 1;
  NelderMeadResult res;
  std::vector<double> fx(nv);
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  for (std::size_t v = 0; v < nv; ++v) fx[v] = eval(simplex[v]);

  std::vector<std::size_t> order(nv);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    std::vector<std::vector<double>> xs(nv);
    std::vector<double> fs(nv);
    for (std::size_t k = 0; k < nv; ++k) {
      xs[k] = std::move(simplex[order[k]]);
      fs[k] = fx[order[k]];
    }
    simplex = std::move(xs);
    fx = std::move(fs);
  };
  auto affine = [&](const std::vector<double>& base, const std::vector<double>& to, double s) {
    std::vector<double> p(dim);
    for (std::size_t d = 0; d < dim; ++d) p[d] = base[d] + s * (to[d] - base[d]);
    return p;
  };
  auto diameter = [&] {
    double r = 0.0;
    for (std::size_t v = 1; v < nv; ++v)
      for (std::size_t d = 0; d < dim; ++d) r = std::max(r, std::abs(simplex[v][d] - simplex[0][d]));
    return r;
  };

  sort_simplex();
  res.best_history.push_back(fx[0]);
  while (true) {
    if (diameter() <= opt.tol) {
      res.converged = true;
      break;
    }
    if (res.iterations >= opt.max_iter) break;
    ++res.iterations;

    std::vector<double> centroid(dim, 0.0);
    for (std::size_t v = 0; v < dim; ++v)
      for (std::size_t d = 0; d < dim; ++d) centroid[d] += simplex[v][d] / static_cast<double>(dim);
    const std::size_t worst = dim;

    auto xr = affine(centroid, simplex[worst], -opt.reflection);
    const double fr = eval(xr);
    bool do_shrink = false;
    if (fr < fx[0]) {
      auto xe = affine(centroid, xr, opt.expansion);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = std::move(xe);
        fx[worst] = fe;
      } else {
        simplex[worst] = std::move(xr);
        fx[worst] = fr;
      }
    } else if (fr < fx[worst - 1]) {
      simplex[worst] = std::move(xr);
      fx[worst] = fr;
    } else if (fr < fx[worst]) {
      auto xc = affine(centroid, xr, opt.contraction);
      const double fc = eval(xc);
      if (fc <= fr) {
        simplex[worst] = std::move(xc);
        fx[worst] = fc;
      } else {
        do_shrink = true;
      }
    } else {
      auto xc = affine(centroid, simplex[worst], opt.contraction);
      const double fc = eval(xc);
      if (fc < fx[worst]) {
        simplex[worst] = std::move(xc);
        fx[worst] = fc;
      } else {
        do_shrink = true;
      }
    }
    if (do_shrink) {
      for (std::size_t v = 1; v < nv; ++v) {
        simplex[v] = affine(simplex[0], simplex[v], opt.shrink);
        fx[v] = eval(simplex[v]);
      }
    }
    sort_simplex();
    res.best_history.push_back(fx[0]);
  }
  res.best = simplex.empty() ? std::vector<double>{} : simplex[0];
  res.value = fx.empty() ? res.value : fx[0];
  return res;
}

}  // namespace blockhawkes
