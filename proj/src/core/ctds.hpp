#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace stereotrap {

struct BinnedDistances {
  std::vector<double> edges;         // J + 1 strictly increasing edges, meters
  std::vector<std::size_t> counts;   // J counts
  std::size_t outside_window = 0;    // distances ignored while binning

  double left() const { return edges.front(); }
  double right() const { return edges.back(); }
  std::size_t bins() const { return counts.size(); }
  std::size_t total() const;
  void validate() const;
};

// edges[j] = w_l + j * (w - w_l) / n_bins, with zero counts.
BinnedDistances MakeBins(double w_l, double w, int n_bins);

// [edges[j], edges[j+1]) goes to bin j; the right truncation closes the last
// bin. Distances outside the window only bump `outside_window`.
BinnedDistances BinDistances(BinnedDistances bins, const std::vector<double>& distances);

enum class KeyFunction { kUniform, kHalfNormal };
// Where g is scaled to 1.
enum class ScalingPoint { kLeftTruncation, kZero };

const char* KeyFunctionName(KeyFunction k) noexcept;

// Key function times a cosine series in (r - w_l) / (w - w_l), scaled to 1 at
// the scaling point.
struct DetectionModel {
  KeyFunction key = KeyFunction::kUniform;
  std::vector<double> coefficients;  // a_1 .. a_m for orders 1 .. m
  double sigma = 0.0;                // half-normal only, meters
  double w_l = 0.0;
  double w = 1.0;
  ScalingPoint scaling = ScalingPoint::kLeftTruncation;

  double unscaled(double r) const;
  double g(double r) const;
};

double DetectionG(double r, const DetectionModel& model);

// p_j proportional to the integral of r * g(r) over bin j (64-point
// Gauss-Legendre per bin), normalised over all bins.
std::vector<double> CellProbabilities(const DetectionModel& model, const std::vector<double>& edges);

// Integral of 2 r g(r) over [w_l, w] divided by w^2 - w_l^2.
double AverageDetectionProbability(const DetectionModel& model);

struct DetectionFunctionFit {
  DetectionModel model;
  std::vector<int> adjustment_orders;
  double loglik = 0.0;
  double aic = 0.0;
  double p_hat = 1.0;
  std::vector<double> fitted_bin_probs;
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  int iterations = 0;

  std::size_t parameter_count() const {
    return model.coefficients.size() + (model.key == KeyFunction::kHalfNormal ? 1 : 0);
  }
};

struct FitOptions {
  KeyFunction key = KeyFunction::kUniform;
  int n_adjustments = 1;
  ScalingPoint scaling = ScalingPoint::kLeftTruncation;
  int max_iterations = 2000;
  double tolerance = 1e-9;
};

inline constexpr int kConstraintGridPoints = 512;
inline constexpr double kConstraintPenalty = 1e6;

// Multinomial log-likelihood sum_j n_j log p_j (no multinomial constant).
double BinnedLogLikelihood(const DetectionModel& model, const BinnedDistances& bins);

// Constraint violation of g on the grid: sum of max(0, -g~(r)) and
// max(0, g(r) - 1 - 1e-9) over 512 evenly spaced points of [w_l, w].
double ConstraintViolation(const DetectionModel& model);

// Maximum-likelihood fit by Nelder-Mead from all-zero coefficients.
DetectionFunctionFit FitDetectionFunction(const BinnedDistances& bins, const FitOptions& options = {});

struct GoodnessOfFit {
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 0.0;  // NaN when dof <= 0
};

GoodnessOfFit GofChi2(const BinnedDistances& bins, const DetectionFunctionFit& fit);

std::string FitToJson(const DetectionFunctionFit& fit, const GoodnessOfFit* gof = nullptr);
BinnedDistances BinnedFromJson(const std::string& text);

// Bars: per-bin detection estimate p_hat * n_j / (N * pi_j), with pi_j the bin
// share under g = 1. Curve: fitted g(r).
std::string DetectionProbabilitySvg(const DetectionFunctionFit& fit);

}  // namespace stereotrap
