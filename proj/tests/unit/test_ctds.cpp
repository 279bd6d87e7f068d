#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "core/ctds.hpp"
#include "core/error.hpp"
#include "support/oracles.hpp"
#include "support/error_code.hpp"

namespace stereotrap {
namespace {

using testing::AnalyticCell;
using testing::AnalyticProbs;
using testing::GridSearchA1;

using testing::CodeOf;

constexpr double kLeft = 3.0;
constexpr double kRight = 11.0;
constexpr int kBins = 7;

BinnedDistances FieldBins() { return MakeBins(kLeft, kRight, kBins); }

BinnedDistances WithCounts(std::vector<std::size_t> counts) {
  BinnedDistances b = MakeBins(kLeft, kRight, static_cast<int>(counts.size()));
  b.counts = std::move(counts);
  return b;
}

DetectionModel UniformModel(std::vector<double> a, double w_l = kLeft, double w = kRight) {
  DetectionModel m;
  m.coefficients = std::move(a);
  m.w_l = w_l;
  m.w = w;
  return m;
}

TEST(MakeBins, SevenBinsFromThreeToElevenMetres) {
  const BinnedDistances b = FieldBins();
  ASSERT_EQ(b.edges.size(), 8u);
  for (int j = 0; j <= kBins; ++j) EXPECT_NEAR(b.edges[j], 3.0 + j * 8.0 / 7.0, 1e-12);
  EXPECT_NEAR(b.edges[1], 4.142857, 1e-6);
  EXPECT_EQ(b.counts, std::vector<std::size_t>(7, 0));
}

TEST(MakeBins, SingleBinAndZeroLeft) {
  EXPECT_EQ(MakeBins(3, 11, 1).edges, (std::vector<double>{3, 11}));
  EXPECT_EQ(MakeBins(0, 10, 5).edges, (std::vector<double>{0, 2, 4, 6, 8, 10}));
}

TEST(MakeBins, InvalidWindow) {
  EXPECT_EQ(CodeOf([] { MakeBins(5, 5, 3); }), ErrorCode::kInvalidWindow);
  EXPECT_EQ(CodeOf([] { MakeBins(-1, 5, 3); }), ErrorCode::kInvalidWindow);
  EXPECT_EQ(CodeOf([] { MakeBins(0, 5, 0); }), ErrorCode::kInvalidWindow);
}

TEST(BinDistances, EdgeRules) {
  const BinnedDistances b = BinDistances(FieldBins(), {3.0, 4.2, 10.999, 11.0});
  EXPECT_EQ(b.counts, (std::vector<std::size_t>{1, 1, 0, 0, 0, 0, 2}));
  EXPECT_EQ(b.outside_window, 0u);
}

TEST(BinDistances, EmptyAndOutside) {
  EXPECT_EQ(BinDistances(FieldBins(), {}).counts, std::vector<std::size_t>(7, 0));
  const BinnedDistances b = BinDistances(FieldBins(), {2.9});
  EXPECT_EQ(b.total(), 0u);
  EXPECT_EQ(b.outside_window, 1u);
  EXPECT_EQ(BinDistances(FieldBins(), {11.0001, NAN}).outside_window, 2u);
}

TEST(BinDistances, InteriorEdgeGoesToUpperBin) {
  const BinnedDistances b = BinDistances(MakeBins(0, 10, 5), {2.0, 4.0, 9.999});
  EXPECT_EQ(b.counts, (std::vector<std::size_t>{0, 1, 1, 0, 1}));
}

TEST(DetectionG, Examples) {
  const DetectionModel none = UniformModel({});
  for (double r : {3.0, 5.5, 11.0}) EXPECT_DOUBLE_EQ(none.g(r), 1.0);
  EXPECT_NEAR(UniformModel({1.0}).g(kRight), 0.0, 1e-15);
  EXPECT_NEAR(UniformModel({0.5}).g(7.0), 1.0 / 1.5, 1e-12);
  EXPECT_DOUBLE_EQ(UniformModel({0.37, -0.1}).g(kLeft), 1.0);
}

TEST(DetectionG, ZeroScalingReferencesOrigin) {
  DetectionModel m = UniformModel({0.5}, 0.0, 10.0);
  m.scaling = ScalingPoint::kZero;
  EXPECT_DOUBLE_EQ(m.g(0.0), 1.0);
  m = UniformModel({0.5}, 2.0, 10.0);
  m.scaling = ScalingPoint::kZero;
  EXPECT_NEAR(m.g(2.0), 1.5 / (1.0 + 0.5 * std::cos(-std::numbers::pi * 2.0 / 8.0)), 1e-12);
}

TEST(CellProbabilities, UniformMatchesAnalyticArea) {
  for (const auto& bins : {FieldBins(), MakeBins(0, 10, 5), MakeBins(1.5, 40, 13)}) {
    const auto p = CellProbabilities(UniformModel({}, bins.left(), bins.right()), bins.edges);
    const double total = bins.right() * bins.right() - bins.left() * bins.left();
    for (std::size_t j = 0; j < p.size(); ++j) {
      EXPECT_NEAR(p[j], (bins.edges[j + 1] * bins.edges[j + 1] - bins.edges[j] * bins.edges[j]) / total,
                  1e-12);
    }
  }
}

TEST(CellProbabilities, CosineMatchesAnalyticAndSumsToOne) {
  for (double a : {0.0, 0.2, 0.7, 1.0}) {
    const auto p = CellProbabilities(UniformModel({a}), FieldBins().edges);
    const auto q = AnalyticProbs(a, FieldBins().edges);
    double sum = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      EXPECT_NEAR(p[j], q[j], 1e-12);
      sum += p[j];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(AverageDetectionProbability, UniformIsOneAndCosineAnalytic) {
  EXPECT_NEAR(AverageDetectionProbability(UniformModel({})), 1.0, 1e-12);
  const double a = 0.4;
  const double expected = 2.0 * AnalyticCell(a, kLeft, kRight, kLeft, kRight) / (1.0 + a) /
                          (kRight * kRight - kLeft * kLeft);
  EXPECT_NEAR(AverageDetectionProbability(UniformModel({a})), expected, 1e-12);
}

TEST(FitDetectionFunction, UniformTruthGivesFlatFit) {
  BinnedDistances bins = FieldBins();
  const double total = kRight * kRight - kLeft * kLeft;
  for (int j = 0; j < kBins; ++j) {
    const double p = (bins.edges[j + 1] * bins.edges[j + 1] - bins.edges[j] * bins.edges[j]) / total;
    bins.counts[j] = static_cast<std::size_t>(std::llround(1e6 * p));
  }
  const DetectionFunctionFit fit = FitDetectionFunction(bins);
  ASSERT_EQ(fit.model.coefficients.size(), 1u);
  EXPECT_LT(std::abs(fit.model.coefficients[0]), 0.02);
  EXPECT_GE(fit.p_hat, 0.99);
  EXPECT_LE(fit.p_hat, 1.01);
  EXPECT_LE(std::abs(fit.model.coefficients[0] - GridSearchA1(bins)), 1e-3);
}

TEST(FitDetectionFunction, DecliningCountsMatchGridSearch) {
  const BinnedDistances bins = WithCounts({30, 28, 25, 20, 15, 9, 4});
  const DetectionFunctionFit fit = FitDetectionFunction(bins);
  const double a1 = fit.model.coefficients.at(0);
  EXPECT_GT(a1, 0.0);
  EXPECT_LT(fit.p_hat, 1.0);
  EXPECT_GT(fit.p_hat, 0.0);
  EXPECT_LE(std::abs(a1 - GridSearchA1(bins)), 1e-3);
  EXPECT_EQ(fit.adjustment_orders, std::vector<int>{1});
  EXPECT_NEAR(fit.aic, 2.0 - 2.0 * fit.loglik, 1e-12);
  EXPECT_NEAR(fit.loglik, BinnedLogLikelihood(fit.model, bins), 1e-12);
}

TEST(FitDetectionFunction, RandomCountsMatchGridSearch) {
  std::mt19937 rng(21);
  std::uniform_int_distribution<int> u(0, 40);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> counts(kBins);
    for (auto& c : counts) c = u(rng);
    counts[0] += 1;
    const BinnedDistances bins = WithCounts(counts);
    const DetectionFunctionFit fit = FitDetectionFunction(bins);
    EXPECT_LE(std::abs(fit.model.coefficients[0] - GridSearchA1(bins)), 1e-3) << trial;
  }
}

TEST(FitDetectionFunction, InvariantsHoldForEveryFit) {
  std::mt19937 rng(22);
  std::uniform_int_distribution<int> u(0, 60);
  for (int trial = 0; trial < 12; ++trial) {
    std::vector<std::size_t> counts(kBins);
    for (auto& c : counts) c = u(rng);
    counts[trial % kBins] += 1;
    FitOptions opt;
    opt.n_adjustments = trial % 3;
    const DetectionFunctionFit fit = FitDetectionFunction(WithCounts(counts), opt);
    double sum = 0.0;
    for (double p : fit.fitted_bin_probs) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(fit.model.g(kLeft), 1.0);
    EXPECT_GT(fit.p_hat, 0.0);
    EXPECT_LE(fit.p_hat, 1.0 + 1e-9);
    for (int k = 0; k < kConstraintGridPoints; ++k) {
      const double r = kLeft + (kRight - kLeft) * k / (kConstraintGridPoints - 1);
      EXPECT_GE(fit.model.g(r), -1e-9);
      EXPECT_LE(fit.model.g(r), 1.0 + 1e-9);
    }
  }
}

TEST(FitDetectionFunction, CountScalingKeepsCoefficients) {
  const std::vector<std::size_t> base = {30, 28, 25, 20, 15, 9, 4};
  const double a = FitDetectionFunction(WithCounts(base)).model.coefficients[0];
  for (std::size_t s : {2u, 5u, 17u}) {
    std::vector<std::size_t> scaled = base;
    for (auto& c : scaled) c *= s;
    EXPECT_NEAR(FitDetectionFunction(WithCounts(scaled)).model.coefficients[0], a, 1e-6);
  }
}

TEST(FitDetectionFunction, SingleBinWithoutAdjustments) {
  const BinnedDistances bins = WithCounts({0, 0, 12, 0, 0, 0, 0});
  FitOptions opt;
  opt.n_adjustments = 0;
  const DetectionFunctionFit fit = FitDetectionFunction(bins, opt);
  EXPECT_DOUBLE_EQ(fit.p_hat, 1.0);
  const double p2 = AnalyticProbs(0.0, bins.edges)[2];
  EXPECT_NEAR(fit.loglik, 12.0 * std::log(p2), 1e-10);
  EXPECT_NEAR(fit.aic, -2.0 * fit.loglik, 1e-12);
}

TEST(FitDetectionFunction, Errors) {
  EXPECT_EQ(CodeOf([] { FitDetectionFunction(FieldBins()); }), ErrorCode::kEmptyBins);
  FitOptions opt;
  opt.n_adjustments = -1;
  EXPECT_EQ(CodeOf([&] { FitDetectionFunction(WithCounts({1, 2, 3}), opt); }),
            ErrorCode::kInvalidArgument);
}

TEST(FitDetectionFunction, HalfNormalKeyFits) {
  FitOptions opt;
  opt.key = KeyFunction::kHalfNormal;
  opt.n_adjustments = 0;
  const DetectionFunctionFit fit = FitDetectionFunction(WithCounts({30, 28, 25, 20, 15, 9, 4}), opt);
  EXPECT_GT(fit.model.sigma, 0.0);
  EXPECT_EQ(fit.parameter_count(), 1u);
  EXPECT_LT(fit.p_hat, 1.0);
  EXPECT_DOUBLE_EQ(fit.model.g(kLeft), 1.0);
}

TEST(GofChi2, ExactExpectationGivesZero) {
  BinnedDistances bins = MakeBins(0, 3, 3);
  bins.counts = {1, 3, 5};
  FitOptions opt;
  opt.n_adjustments = 0;
  const GoodnessOfFit gof = GofChi2(bins, FitDetectionFunction(bins, opt));
  EXPECT_NEAR(gof.chi2, 0.0, 1e-20);
  EXPECT_EQ(gof.dof, 2);
  EXPECT_NEAR(gof.p_value, 1.0, 1e-12);
}

TEST(GofChi2, DegreesOfFreedom) {
  const BinnedDistances bins = WithCounts({30, 28, 25, 20, 15, 9, 4});
  EXPECT_EQ(GofChi2(bins, FitDetectionFunction(bins)).dof, 5);
  const BinnedDistances two = WithCounts({3, 4});
  FitOptions opt;
  opt.n_adjustments = 1;
  EXPECT_TRUE(std::isnan(GofChi2(two, FitDetectionFunction(two, opt)).p_value));
}

TEST(GofChi2, MatchesRecomputationOnMultinomialDraws) {
  std::mt19937 rng(23);
  const auto truth = AnalyticProbs(0.6, FieldBins().edges);
  std::discrete_distribution<int> draw(truth.begin(), truth.end());
  for (int trial = 0; trial < 10; ++trial) {
    BinnedDistances bins = FieldBins();
    for (int i = 0; i < 150; ++i) ++bins.counts[draw(rng)];
    const DetectionFunctionFit fit = FitDetectionFunction(bins);
    const auto p = AnalyticProbs(fit.model.coefficients[0], bins.edges);
    double chi2 = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double e = 150.0 * p[j];
      chi2 += (bins.counts[j] - e) * (bins.counts[j] - e) / e;
    }
    EXPECT_NEAR(GofChi2(bins, fit).chi2, chi2, 1e-9);
  }
}

TEST(GofChi2, LengthMismatch) {
  const BinnedDistances bins = WithCounts({3, 4, 5});
  const DetectionFunctionFit fit = FitDetectionFunction(bins);
  EXPECT_EQ(CodeOf([&] { GofChi2(WithCounts({3, 4}), fit); }), ErrorCode::kLengthMismatch);
}

TEST(CtdsIo, FitJsonAndBinnedJson) {
  const BinnedDistances bins = WithCounts({30, 28, 25, 20, 15, 9, 4});
  const DetectionFunctionFit fit = FitDetectionFunction(bins);
  const GoodnessOfFit gof = GofChi2(bins, fit);
  const auto j = nlohmann::json::parse(FitToJson(fit, &gof));
  EXPECT_EQ(j["key"], "uniform");
  EXPECT_EQ(j["coefficients"][0].get<double>(), fit.model.coefficients[0]);
  EXPECT_EQ(j["p_hat"].get<double>(), fit.p_hat);
  EXPECT_EQ(j["fitted_bin_probs"].size(), 7u);
  EXPECT_EQ(j["gof"]["dof"], 5);

  const BinnedDistances back = BinnedFromJson(FitToJson(fit));
  EXPECT_EQ(back.edges, bins.edges);
  EXPECT_EQ(back.counts, bins.counts);
  EXPECT_EQ(CodeOf([] { BinnedFromJson(R"({"edges": [3, 2], "counts": [1]})"); }),
            ErrorCode::kInvalidWindow);
  EXPECT_EQ(CodeOf([] { BinnedFromJson(R"({"edges": [1, 2, 3], "counts": [1]})"); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([] { BinnedFromJson("nope"); }), ErrorCode::kParse);
}

TEST(CtdsIo, SvgHasBarsAndCurve) {
  const DetectionFunctionFit fit = FitDetectionFunction(WithCounts({30, 28, 25, 20, 15, 9, 4}));
  const std::string svg = DetectionProbabilitySvg(fit);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  std::size_t bars = 0;
  for (std::size_t p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++bars;
  EXPECT_EQ(bars, 1u + 7u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

}  // namespace
}  // namespace stereotrap
