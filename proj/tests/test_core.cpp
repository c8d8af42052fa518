#include <gtest/gtest.h>

#include <cmath>

#include "blockhawkes/core.hpp"
#include "blockhawkes/sim.hpp"
#include "support.hpp"

using namespace blockhawkes;
using namespace blockhawkes::testing;

namespace {

HawkesModel univariate_exp(double mu, double alpha, double beta) {
  Matrix a(1, 1), b(1, 1);
  a << alpha;
  b << beta;
  Vector m(1);
  m << mu;
  return HawkesModel{m, ExponentialKernel{a, b}};
}

HawkesModel univariate_sum_exp(double mu, std::vector<double> alpha, std::vector<double> beta) {
  SumExponentialKernel k;
  for (double a : alpha) k.alpha.push_back(Matrix::Constant(1, 1, a));
  k.beta = std::move(beta);
  Vector m(1);
  m << mu;
  return HawkesModel{m, k};
}

EventSequence univariate(std::vector<double> times, double horizon) {
  std::vector<Event> ev;
  for (double t : times) ev.push_back({t, 0});
  return EventSequence(std::move(ev), 1, horizon);
}

}  // namespace

// ---------------------------------------------------------------------------
// Event sequences

TEST(EventSequence, AcceptsCrossMarkTiesAndRejectsSameMarkTies) {
  EXPECT_NO_THROW(EventSequence({{1.0, 0}, {1.0, 1}}, 2, 2.0));
  EXPECT_THROW(EventSequence({{1.0, 0}, {1.0, 0}}, 2, 2.0), InvalidInput);
}

TEST(EventSequence, RejectsBadTimesAndMarks) {
  EXPECT_THROW(EventSequence({{3.0, 0}}, 1, 2.0), InvalidInput);
  EXPECT_THROW(EventSequence({{-0.5, 0}}, 1, 2.0), InvalidInput);
  EXPECT_THROW(EventSequence({{1.0, 1}}, 1, 2.0), InvalidInput);
  EXPECT_THROW(EventSequence({{1.5, 0}, {1.0, 0}}, 1, 2.0), InvalidInput);
  EXPECT_THROW(EventSequence(0, 1.0), InvalidInput);
}

TEST(EventSequence, FromUnsortedOrdersByTimeThenMark) {
  const auto seq = EventSequence::from_unsorted({{2.0, 0}, {1.0, 1}, {1.0, 0}}, 2, 3.0);
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq[0], (Event{1.0, 0}));
  EXPECT_EQ(seq[1], (Event{1.0, 1}));
  EXPECT_EQ(seq[2], (Event{2.0, 0}));
  EXPECT_EQ(seq.counts(), (std::vector<std::size_t>{2, 1}));
}

// ---------------------------------------------------------------------------
// Model validation

TEST(Model, ValidatesParameters) {
  auto bad_mu = univariate_exp(0.0, 1.0, 1.0);
  EXPECT_THROW(bad_mu.validate(), InvalidInput);
  auto neg_alpha = univariate_exp(1.0, -0.1, 1.0);
  EXPECT_THROW(neg_alpha.validate(), InvalidInput);
  auto unsorted = univariate_sum_exp(1.0, {0.1, 0.1}, {2.0, 1.0});
  EXPECT_THROW(unsorted.validate(), InvalidInput);
  auto power = HawkesModel{Vector::Ones(1), PowerLawKernel{Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                                                          Matrix::Constant(1, 1, 0.9)}};
  EXPECT_THROW(power.validate(), InvalidInput);
}

// ---------------------------------------------------------------------------
// Intensity

TEST(Intensity, EmptySequenceGivesBackground) {
  const auto model = univariate_exp(1.7, 2.0, 1.0);
  const EventSequence seq(1, 5.0);
  EXPECT_DOUBLE_EQ(intensity_naive(model, seq, 0, 3.0), 1.7);
  EXPECT_TRUE(intensity_recursive(model, seq).at_events.empty());
}

TEST(Intensity, ZeroKernelGivesBackground) {
  const auto model = univariate_exp(0.8, 0.0, 1.0);
  const auto seq = univariate({0.5, 1.0, 2.0}, 3.0);
  EXPECT_DOUBLE_EQ(intensity_naive(model, seq, 0, 2.5), 0.8);
}

TEST(Intensity, HandEvaluatedExponential) {
  const auto model = univariate_exp(1.0, 2.0, 1.0);
  const auto seq = univariate({1.0}, 2.0);
  EXPECT_NEAR(intensity_naive(model, seq, 0, 2.0), 1.0 + 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(intensity_naive(model, seq, 0, 2.0), 1.7358, 5e-5);
  // Left limit: an event does not excite itself.
  EXPECT_DOUBLE_EQ(intensity_naive(model, seq, 0, 1.0), 1.0);
}

TEST(Intensity, RecursiveHandExample) {
  const auto model = univariate_exp(1.0, 2.0, 1.0);
  const auto seq = univariate({1.0, 2.0}, 2.0);
  const auto rec = intensity_recursive(model, seq);
  ASSERT_EQ(rec.at_events.size(), 2u);
  EXPECT_DOUBLE_EQ(rec.at_events[0], 1.0);
  EXPECT_NEAR(rec.at_events[1], 1.0 + 2.0 * std::exp(-1.0), 1e-15);
}

TEST(Intensity, OutsideWindowIsDomainError) {
  const auto model = univariate_exp(1.0, 2.0, 1.0);
  const auto seq = univariate({1.0}, 2.0);
  EXPECT_THROW(intensity_naive(model, seq, 0, 2.5), DomainError);
  EXPECT_THROW(intensity_naive(model, seq, 0, -0.1), DomainError);
}

TEST(Intensity, DimensionMismatchIsInvalidInput) {
  const auto model = univariate_exp(1.0, 2.0, 1.0);
  const EventSequence seq({{1.0, 1}}, 2, 2.0);
  EXPECT_THROW(intensity_naive(model, seq, 0, 1.5), InvalidInput);
}

TEST(Intensity, PerPairDecaysAreUnsupportedByRecursion) {
  Matrix a = Matrix::Constant(2, 2, 0.1), b(2, 2);
  b << 1.0, 2.0, 3.0, 4.0;
  const HawkesModel model{Vector::Ones(2), ExponentialKernel{a, b}};
  EXPECT_THROW(intensity_recursive(model, EventSequence(2, 1.0)), UnsupportedKernel);
}

TEST(Intensity, ExcitationNeverReducesIntensity) {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const auto model = random_sum_exp_model(rng, 3, 2, 0.8);
    const auto seq = random_events(rng, 3, 50, 10.0);
    for (int q = 0; q < 20; ++q) {
      const double t = 10.0 * rng.uniform();
      for (std::size_t i = 0; i < 3; ++i) EXPECT_GE(intensity_naive(model, seq, i, t), model.mu(i));
    }
  }
}

TEST(Intensity, NaiveMatchesReferenceForEveryKernelFamily) {
  Rng rng(3);
  const auto seq = random_events(rng, 2, 60, 8.0);
  Matrix a(2, 2), b(2, 2), c(2, 2), p(2, 2);
  a << 0.3, 0.1, 0.0, 0.5;
  b << 1.0, 2.0, 3.0, 0.5;
  c << 0.5, 1.0, 2.0, 0.1;
  p << 1.5, 2.5, 3.0, 1.2;
  const std::vector<HawkesModel> models{
      HawkesModel{Vector::Constant(2, 0.4), ExponentialKernel{a, b}},
      HawkesModel{Vector::Constant(2, 0.4), PowerLawKernel{a, c, p}},
      random_sum_exp_model(rng, 2, 3, 0.7),
  };
  for (const auto& model : models)
    for (int q = 0; q < 30; ++q) {
      const double t = 8.0 * rng.uniform();
      for (std::size_t i = 0; i < 2; ++i)
        EXPECT_NEAR(intensity_naive(model, seq, i, t), reference_intensity(model, seq, i, t), 1e-12);
    }
}

TEST(Intensity, RecursiveMatchesNaiveOnRandomTrivariateSequences) {
  Rng rng(2024);
  for (int rep = 0; rep < 5; ++rep) {
    const auto model = random_sum_exp_model(rng, 3, 3, 0.8);
    const auto seq = simulate({model, 150.0, 100 + static_cast<std::uint64_t>(rep)});
    ASSERT_GT(seq.size(), 100u);
    const auto rec = intensity_recursive(model, seq);
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const double ref = intensity_naive(model, seq, seq[k].mark, seq[k].time);
      EXPECT_LE(std::abs(rec.at_events[k] - ref), 1e-10 * (1.0 + std::abs(ref)));
    }
  }
}

TEST(Intensity, SimultaneousCrossMarkEventsDoNotExciteEachOther) {
  SumExponentialKernel k{{Matrix::Constant(2, 2, 1.0)}, {1.0}};
  const HawkesModel model{Vector::Constant(2, 0.5), k};
  const EventSequence seq({{1.0, 0}, {1.0, 1}, {2.0, 0}}, 2, 3.0);
  const auto rec = intensity_recursive(model, seq);
  EXPECT_DOUBLE_EQ(rec.at_events[0], 0.5);
  EXPECT_DOUBLE_EQ(rec.at_events[1], 0.5);
  EXPECT_NEAR(rec.at_events[2], 0.5 + 2.0 * std::exp(-1.0), 1e-15);
  for (std::size_t e = 0; e < seq.size(); ++e)
    EXPECT_NEAR(rec.at_events[e], intensity_naive(model, seq, seq[e].mark, seq[e].time), 1e-15);
}

// ---------------------------------------------------------------------------
// Compensator

TEST(Compensator, ZeroKernelIsLinear) {
  const auto model = univariate_exp(0.7, 0.0, 1.0);
  const auto seq = univariate({0.5, 1.0}, 4.0);
  EXPECT_DOUBLE_EQ(compensator(model, seq, 0, 3.0), 2.1);
  EXPECT_DOUBLE_EQ(compensator(model, seq, 0, 0.0), 0.0);
}

TEST(Compensator, HandEvaluatedExponential) {
  const auto model = univariate_exp(1.0, 2.0, 1.0);
  const auto seq = univariate({1.0}, 2.0);
  const double expected = 2.0 + 2.0 * (1.0 - std::exp(-1.0));
  EXPECT_NEAR(compensator(model, seq, 0, 2.0), expected, 1e-14);
  EXPECT_NEAR(compensator(model, seq, 0, 2.0), 3.2642, 5e-5);
}

TEST(Compensator, ClosedFormsMatchReferenceQuadrature) {
  Rng rng(5);
  Matrix a(2, 2), b(2, 2), c(2, 2), p(2, 2);
  a << 0.3, 0.1, 0.0, 0.5;
  b << 1.0, 2.0, 3.0, 0.5;
  c << 0.5, 1.0, 2.0, 0.1;
  p << 1.5, 2.5, 3.0, 1.2;
  const std::vector<HawkesModel> models{
      HawkesModel{Vector::Constant(2, 0.4), ExponentialKernel{a, b}},
      HawkesModel{Vector::Constant(2, 0.4), PowerLawKernel{a, c, p}},
      random_sum_exp_model(rng, 2, 3, 0.7),
  };
  const auto seq = random_events(rng, 2, 40, 6.0);
  for (const auto& model : models)
    for (double t : {0.0, 1.3, 3.7, 6.0})
      for (std::size_t i = 0; i < 2; ++i) {
        const double ref = reference_compensator(model, seq, i, t, 0.01);
        EXPECT_LE(std::abs(compensator(model, seq, i, t) - ref), 1e-9 * (1.0 + ref));
        EXPECT_LE(std::abs(compensator_quadrature(model, seq, i, t) - ref), 1e-7 * (1.0 + ref));
      }
}

TEST(Compensator, NondecreasingAndStartsAtZero) {
  Rng rng(8);
  const auto model = random_sum_exp_model(rng, 3, 2, 0.9);
  const auto seq = random_events(rng, 3, 80, 20.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(compensator(model, seq, i, 0.0), 0.0);
    double prev = 0.0;
    for (double t = 0.05; t <= 20.0; t += 0.05) {
      const double v = compensator(model, seq, i, t);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Compensator, OwnEventValuesMatchPointwiseCompensator) {
  Rng rng(9);
  Matrix a = Matrix::Constant(2, 2, 0.2), b(2, 2);
  b << 1.0, 2.0, 3.0, 0.5;
  const std::vector<HawkesModel> models{
      random_sum_exp_model(rng, 2, 2, 0.8),
      HawkesModel{Vector::Constant(2, 0.4), ExponentialKernel{a, b}},
  };
  auto seq = random_events(rng, 2, 100, 15.0);
  for (const auto& model : models) {
    const auto own = own_event_compensators(model, seq);
    std::vector<std::size_t> idx(2, 0);
    for (const Event& e : seq) {
      const double ref = compensator(model, seq, e.mark, e.time);
      EXPECT_NEAR(own[e.mark][idx[e.mark]++], ref, 1e-10 * (1.0 + ref));
    }
  }
}

TEST(Compensator, QuadratureReportsNonConvergence) {
  const auto model = univariate_exp(1.0, 2.0, 1.0);
  const auto seq = univariate({1.0}, 2.0);
  QuadratureOptions opt;
  opt.abs_tol = 0.0;
  opt.rel_tol = 0.0;
  opt.max_depth = 0;
  EXPECT_THROW(compensator_quadrature(model, seq, 0, 2.0, opt), NumericError);
}

// ---------------------------------------------------------------------------
// Log-likelihood

TEST(LogLikelihood, PoissonClosedForm) {
  const auto model = univariate_exp(1.5, 0.0, 1.0);
  const auto seq = univariate({0.2, 0.9, 1.4, 3.3}, 4.0);
  EXPECT_NEAR(log_likelihood(model, seq), 4.0 * std::log(1.5) - 1.5 * 4.0, 1e-13);
}

TEST(LogLikelihood, HandExpandedExample) {
  const auto model = univariate_exp(1.0, 2.0, 1.0);
  const auto seq = univariate({1.0, 2.0}, 2.0);
  const double expected = std::log(1.0) + std::log(1.0 + 2.0 * std::exp(-1.0)) -
                          (2.0 + 2.0 * (1.0 - std::exp(-1.0)) + 2.0 * (1.0 - std::exp(0.0)));
  EXPECT_NEAR(log_likelihood(model, seq), expected, 1e-14);
}

TEST(LogLikelihood, MatchesSlowReferenceOnSimulatedData) {
  Rng rng(21);
  const auto model = random_sum_exp_model(rng, 3, 2, 0.7);
  const auto seq = simulate({model, 80.0, 77});
  ASSERT_GE(seq.size(), 100u);
  EXPECT_NEAR(log_likelihood(model, seq), reference_log_likelihood(model, seq, 0.02), 1e-8);
}

TEST(LogLikelihood, NonSharedKernelsUseDirectSummation) {
  Matrix a(2, 2), c(2, 2), p(2, 2);
  a << 0.3, 0.1, 0.0, 0.5;
  c << 0.5, 1.0, 2.0, 0.1;
  p << 1.5, 2.5, 3.0, 1.2;
  const HawkesModel model{Vector::Constant(2, 0.4), PowerLawKernel{a, c, p}};
  Rng rng(4);
  const auto seq = random_events(rng, 2, 50, 10.0);
  EXPECT_NEAR(log_likelihood(model, seq), reference_log_likelihood(model, seq, 0.01), 1e-8);
}

TEST(LogLikelihood, ZeroWeightComponentLeavesOtherTermsUnchanged) {
  Rng rng(12);
  const auto base = random_sum_exp_model(rng, 2, 2, 0.7);
  const auto seq = simulate({base, 50.0, 5});
  const auto& k = std::get<SumExponentialKernel>(base.kernel);

  SumExponentialKernel wide;
  wide.beta = k.beta;
  for (const auto& a : k.alpha) {
    Matrix w = Matrix::Zero(3, 3);
    w.topLeftCorner(2, 2) = a;
    wide.alpha.push_back(w);
  }
  Vector mu(3);
  mu << base.mu(0), base.mu(1), 2.5;
  const HawkesModel extended{mu, wide};
  const EventSequence seq3(std::vector<Event>(seq.begin(), seq.end()), 3, seq.horizon());

  // The extra component has no events, so it contributes exactly -mu_3 T.
  EXPECT_NEAR(log_likelihood(extended, seq3), log_likelihood(base, seq) - 2.5 * seq.horizon(), 1e-9);
  for (const Event& e : seq)
    EXPECT_DOUBLE_EQ(intensity_naive(extended, seq3, e.mark, e.time), intensity_naive(base, seq, e.mark, e.time));
}

TEST(LogLikelihood, VanishingIntensityNamesTheEvent) {
  const auto model = univariate_exp(1e-320, 0.0, 1.0);
  const auto seq = univariate({0.5, 1.0}, 2.0);
  try {
    (void)log_likelihood(HawkesModel{model.mu, model.kernel}, seq);
    FAIL() << "expected LikelihoodUndefined";
  } catch (const LikelihoodUndefined& e) {
    EXPECT_EQ(e.event_index(), 0u);
  }
}

// ---------------------------------------------------------------------------
// Kernel norms

TEST(KernelNorms, ZeroKernel) {
  const auto n = kernel_norms(univariate_exp(1.0, 0.0, 3.0));
  EXPECT_EQ(n.norms(0, 0), 0.0);
  EXPECT_EQ(n.spectral_radius, 0.0);
  EXPECT_FALSE(n.unstable);
}

TEST(KernelNorms, PublishedModelArithmetic) {
  const auto n = kernel_norms(published_model(1.0, 1.0));
  EXPECT_NEAR(n.norms(0, 0), 1.377 / 2.340 + 1.526 / 15.730 + 0.020 / 21.875, 1e-12);
  EXPECT_NEAR(n.norms(1, 2), 0.558 / 2.340 + 2.131 / 15.730 + 1.357 / 21.875, 1e-12);
  EXPECT_NEAR(n.norms(0, 0), 0.686, 5e-4);
  EXPECT_NEAR(n.norms(1, 2), 0.436, 5e-4);
}

TEST(KernelNorms, SingleDecaySumMatchesExponential) {
  Rng rng(1);
  const auto model = random_sum_exp_model(rng, 3, 1, 0.9);
  const auto& k = std::get<SumExponentialKernel>(model.kernel);
  const HawkesModel exp_model{model.mu, ExponentialKernel{k.alpha[0], Matrix::Constant(3, 3, k.beta[0])}};
  const auto a = kernel_norms(model), b = kernel_norms(exp_model);
  EXPECT_LE((a.norms - b.norms).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(a.spectral_radius, b.spectral_radius, 1e-14);
}

TEST(KernelNorms, PowerLawClosedFormAndDomain) {
  Matrix a = Matrix::Constant(1, 1, 0.6), c = Matrix::Constant(1, 1, 2.0), p = Matrix::Constant(1, 1, 2.5);
  const HawkesModel model{Vector::Ones(1), PowerLawKernel{a, c, p}};
  EXPECT_NEAR(kernel_norms(model).norms(0, 0), 0.6 * std::pow(2.0, -1.5) / 1.5, 1e-15);
  const HawkesModel bad{Vector::Ones(1), PowerLawKernel{a, c, Matrix::Constant(1, 1, 1.0)}};
  EXPECT_THROW(kernel_norms(bad), DomainError);
}

TEST(KernelNorms, FlagsSupercriticalModels) {
  const auto n = kernel_norms(univariate_exp(1.0, 3.0, 2.0));
  EXPECT_NEAR(n.spectral_radius, 1.5, 1e-14);
  EXPECT_TRUE(n.unstable);
}
