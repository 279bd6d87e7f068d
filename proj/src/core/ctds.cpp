#include "core/ctds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <json.hpp>

#include "core/error.hpp"
#include "core/nelder_mead.hpp"

namespace stereotrap {
namespace {

using Gauss64 = boost::math::quadrature::gauss<double, 64>;

DetectionModel ModelFromParams(const std::vector<double>& p, const BinnedDistances& bins,
                               const FitOptions& opt) {
  DetectionModel m;
  m.key = opt.key;
  m.w_l = bins.left();
  m.w = bins.right();
  m.scaling = opt.scaling;
  std::size_t first = 0;
  if (opt.key == KeyFunction::kHalfNormal) {
    m.sigma = std::exp(p[0]);
    first = 1;
  }
  m.coefficients.assign(p.begin() + static_cast<std::ptrdiff_t>(first), p.end());
  return m;
}

std::string Fmt(double v, const char* spec = "%.3f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::size_t BinnedDistances::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

void BinnedDistances::validate() const {
  if (edges.size() < 2 || counts.size() + 1 != edges.size()) {
    throw Error(ErrorCode::kInvalidArgument, "bins need J + 1 edges for J counts");
  }
  for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
    if (!(edges[j] < edges[j + 1])) {
      throw Error(ErrorCode::kInvalidWindow, "bin edges must be strictly increasing");
    }
  }
  if (!(edges.front() >= 0.0)) throw Error(ErrorCode::kInvalidWindow, "negative left truncation");
}

BinnedDistances MakeBins(double w_l, double w, int n_bins) {
  if (!(w_l >= 0.0) || !(w > w_l) || n_bins < 1 || !std::isfinite(w)) {
    throw Error(ErrorCode::kInvalidWindow, "bins need w > w_l >= 0 and n_bins >= 1");
  }
  BinnedDistances bins;
  bins.edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int j = 0; j <= n_bins; ++j) bins.edges[j] = w_l + j * (w - w_l) / n_bins;
  bins.edges.back() = w;
  bins.counts.assign(static_cast<std::size_t>(n_bins), 0);
  return bins;
}

BinnedDistances BinDistances(BinnedDistances bins, const std::vector<double>& distances) {
  bins.validate();
  for (double d : distances) {
    if (!(d >= bins.left()) || d > bins.right()) {
      ++bins.outside_window;
      continue;
    }
    auto it = std::upper_bound(bins.edges.begin(), bins.edges.end(), d);
    std::size_t j = static_cast<std::size_t>(it - bins.edges.begin());
    j = j == 0 ? 0 : j - 1;
    if (j >= bins.counts.size()) j = bins.counts.size() - 1;
    ++bins.counts[j];
  }
  return bins;
}

const char* KeyFunctionName(KeyFunction k) noexcept {
  return k == KeyFunction::kUniform ? "uniform" : "half-normal";
}

double DetectionModel::unscaled(double r) const {
  double series = 1.0;
  const double t = std::numbers::pi * (r - w_l) / (w - w_l);
  for (std::size_t m = 0; m < coefficients.size(); ++m) {
    series += coefficients[m] * std::cos(static_cast<double>(m + 1) * t);
  }
  if (key == KeyFunction::kHalfNormal) series *= std::exp(-r * r / (2.0 * sigma * sigma));
  return series;
}

double DetectionModel::g(double r) const {
  const double ref = unscaled(scaling == ScalingPoint::kLeftTruncation ? w_l : 0.0);
  return unscaled(r) / ref;
}

double DetectionG(double r, const DetectionModel& model) { return model.g(r); }

std::vector<double> CellProbabilities(const DetectionModel& model, const std::vector<double>& edges) {
  std::vector<double> p(edges.size() - 1);
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
    p[j] = Gauss64::integrate([&](double r) { return r * model.g(r); }, edges[j], edges[j + 1]);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

double AverageDetectionProbability(const DetectionModel& model) {
  const double integral =
      Gauss64::integrate([&](double r) { return 2.0 * r * model.g(r); }, model.w_l, model.w);
  return integral / (model.w * model.w - model.w_l * model.w_l);
}

double BinnedLogLikelihood(const DetectionModel& model, const BinnedDistances& bins) {
  const auto p = CellProbabilities(model, bins.edges);
  double ll = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (bins.counts[j] == 0) continue;
    if (!(p[j] > 0.0)) return -std::numeric_limits<double>::infinity();
    ll += static_cast<double>(bins.counts[j]) * std::log(p[j]);
  }
  return ll;
}

double ConstraintViolation(const DetectionModel& model) {
  const double ref = model.unscaled(model.scaling == ScalingPoint::kLeftTruncation ? model.w_l : 0.0);
  if (!(ref > 0.0)) return 1.0 + std::abs(ref) * kConstraintGridPoints;
  double violation = 0.0;
  for (int i = 0; i < kConstraintGridPoints; ++i) {
    const double r = model.w_l + (model.w - model.w_l) * i / (kConstraintGridPoints - 1);
    const double raw = model.unscaled(r);
    violation += std::max(0.0, -raw);
    violation += std::max(0.0, raw / ref - 1.0 - 1e-9);
  }
  return violation;
}

DetectionFunctionFit FitDetectionFunction(const BinnedDistances& bins, const FitOptions& options) {
  bins.validate();
  if (bins.total() == 0) throw Error(ErrorCode::kEmptyBins, "no distances inside the window");
  if (options.n_adjustments < 0) {
    throw Error(ErrorCode::kInvalidArgument, "adjustment count must be non-negative");
  }

  std::vector<double> x0;
  if (options.key == KeyFunction::kHalfNormal) x0.push_back(std::log(bins.right()));
  x0.resize(x0.size() + static_cast<std::size_t>(options.n_adjustments), 0.0);

  const auto objective = [&](const std::vector<double>& p) {
    const DetectionModel m = ModelFromParams(p, bins, options);
    const double violation = ConstraintViolation(m);
    double nll = -BinnedLogLikelihood(m, bins);
    if (!std::isfinite(nll)) nll = 1e12;
    return nll + kConstraintPenalty * violation;
  };

  NelderMeadOptions nm;
  nm.max_iterations = options.max_iterations;
  nm.tolerance = options.tolerance;
  const NelderMeadResult res = NelderMead(objective, x0, nm);
  if (!res.converged) {
    throw Error(ErrorCode::kNonConvergence, "detection function fit did not converge");
  }

  DetectionFunctionFit fit;
  fit.model = ModelFromParams(res.x, bins, options);
  for (int m = 1; m <= options.n_adjustments; ++m) fit.adjustment_orders.push_back(m);
  fit.loglik = BinnedLogLikelihood(fit.model, bins);
  fit.aic = 2.0 * static_cast<double>(fit.parameter_count()) - 2.0 * fit.loglik;
  fit.p_hat = AverageDetectionProbability(fit.model);
  fit.fitted_bin_probs = CellProbabilities(fit.model, bins.edges);
  fit.edges = bins.edges;
  fit.counts = bins.counts;
  fit.iterations = res.iterations;
  return fit;
}

GoodnessOfFit GofChi2(const BinnedDistances& bins, const DetectionFunctionFit& fit) {
  bins.validate();
  if (fit.fitted_bin_probs.size() != bins.counts.size()) {
    throw Error(ErrorCode::kLengthMismatch, "fit and bins have different bin counts");
  }
  const double n = static_cast<double>(bins.total());
  GoodnessOfFit gof;
  for (std::size_t j = 0; j < bins.counts.size(); ++j) {
    const double expected = n * fit.fitted_bin_probs[j];
    if (!(expected > 0.0)) continue;
    const double diff = static_cast<double>(bins.counts[j]) - expected;
    gof.chi2 += diff * diff / expected;
  }
  gof.dof = static_cast<int>(bins.counts.size()) - 1 - static_cast<int>(fit.parameter_count());
  if (gof.dof > 0) {
    boost::math::chi_squared dist(gof.dof);
    gof.p_value = boost::math::cdf(boost::math::complement(dist, gof.chi2));
  } else {
    gof.p_value = std::numeric_limits<double>::quiet_NaN();
  }
  return gof;
}

std::string FitToJson(const DetectionFunctionFit& fit, const GoodnessOfFit* gof) {
  nlohmann::json j;
  j["key"] = KeyFunctionName(fit.model.key);
  j["adjustment_orders"] = fit.adjustment_orders;
  j["coefficients"] = fit.model.coefficients;
  j["sigma"] = fit.model.key == KeyFunction::kHalfNormal ? nlohmann::json(fit.model.sigma)
                                                         : nlohmann::json(nullptr);
  j["scaling"] = fit.model.scaling == ScalingPoint::kLeftTruncation ? "left-truncation" : "zero";
  j["w_l"] = fit.model.w_l;
  j["w"] = fit.model.w;
  j["loglik"] = fit.loglik;
  j["aic"] = fit.aic;
  j["p_hat"] = fit.p_hat;
  j["fitted_bin_probs"] = fit.fitted_bin_probs;
  j["edges"] = fit.edges;
  j["counts"] = fit.counts;
  j["iterations"] = fit.iterations;
  if (gof != nullptr) {
    j["gof"] = {{"chi2", gof->chi2},
                {"dof", gof->dof},
                {"p_value", std::isnan(gof->p_value) ? nlohmann::json(nullptr)
                                                     : nlohmann::json(gof->p_value)}};
  }
  return j.dump(2);
}

BinnedDistances BinnedFromJson(const std::string& text) {
  BinnedDistances bins;
  try {
    const auto j = nlohmann::json::parse(text);
    bins.edges = j.at("edges").get<std::vector<double>>();
    bins.counts = j.at("counts").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("binned distances: ") + e.what());
  }
  bins.validate();
  return bins;
}

std::string DetectionProbabilitySvg(const DetectionFunctionFit& fit) {
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 60, kRight = 20, kTop = 20, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const DetectionModel& m = fit.model;
  const double n = static_cast<double>(std::accumulate(fit.counts.begin(), fit.counts.end(), std::size_t{0}));

  std::vector<double> bars(fit.counts.size(), 0.0);
  const double area = m.w * m.w - m.w_l * m.w_l;
  double y_max = 1.0;
  for (std::size_t j = 0; j < bars.size(); ++j) {
    const double share = (fit.edges[j + 1] * fit.edges[j + 1] - fit.edges[j] * fit.edges[j]) / area;
    bars[j] = n > 0 ? fit.p_hat * static_cast<double>(fit.counts[j]) / (n * share) : 0.0;
    y_max = std::max(y_max, bars[j]);
  }
  y_max *= 1.1;
  const auto px = [&](double r) { return kLeft + (r - m.w_l) / (m.w - m.w_l) * plot_w; };
  const auto py = [&](double v) { return kTop + plot_h - v / y_max * plot_h; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  for (std::size_t j = 0; j < bars.size(); ++j) {
    const double x0 = px(fit.edges[j]);
    const double x1 = px(fit.edges[j + 1]);
    s += "<rect x=\"" + Fmt(x0) + "\" y=\"" + Fmt(py(bars[j])) + "\" width=\"" + Fmt(x1 - x0) +
         "\" height=\"" + Fmt(py(0.0) - py(bars[j])) +
         "\" fill=\"#4a78c2\" fill-opacity=\"0.6\" stroke=\"#1f3f7a\"/>\n";
  }
  s += "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"";
  constexpr int kCurvePoints = 200;
  for (int i = 0; i <= kCurvePoints; ++i) {
    const double r = m.w_l + (m.w - m.w_l) * i / kCurvePoints;
    s += Fmt(px(r)) + "," + Fmt(py(std::max(0.0, m.g(r)))) + (i < kCurvePoints ? " " : "");
  }
  s += "\"/>\n";
  // Axes with ticks at the bin edges and every 0.2 in probability.
  s += "<line x1=\"" + Fmt(kLeft) + "\" y1=\"" + Fmt(py(0)) + "\" x2=\"" + Fmt(kLeft + plot_w) +
       "\" y2=\"" + Fmt(py(0)) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + Fmt(kLeft) + "\" y1=\"" + Fmt(kTop) + "\" x2=\"" + Fmt(kLeft) + "\" y2=\"" +
       Fmt(py(0)) + "\" stroke=\"black\"/>\n";
  for (double e : fit.edges) {
    s += "<text x=\"" + Fmt(px(e)) + "\" y=\"" + Fmt(py(0) + 16) +
         "\" font-size=\"11\" text-anchor=\"middle\">" + Fmt(e, "%.2f") + "</text>\n";
  }
  for (double v = 0.0; v <= y_max + 1e-9; v += 0.2) {
    s += "<text x=\"" + Fmt(kLeft - 6) + "\" y=\"" + Fmt(py(v) + 4) +
         "\" font-size=\"11\" text-anchor=\"end\">" + Fmt(v, "%.1f") + "</text>\n";
  }
  s += "<text x=\"" + Fmt(kLeft + plot_w / 2) + "\" y=\"" + Fmt(kHeight - 10) +
       "\" font-size=\"12\" text-anchor=\"middle\">distance (m)</text>\n";
  s += "<text x=\"14\" y=\"" + Fmt(kTop + plot_h / 2) +
       "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
       Fmt(kTop + plot_h / 2) + ")\">detection probability</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace stereotrap
