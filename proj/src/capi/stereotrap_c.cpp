#include "stereotrap.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "core/ctds.hpp"
#include "core/distance.hpp"
#include "core/error.hpp"
#include "core/flow.hpp"
#include "core/geometry.hpp"
#include "core/io.hpp"
#include "core/log.hpp"
#include "core/matching.hpp"
#include "core/pipeline.hpp"
#include "core/quality.hpp"
#include "core/sampler.hpp"

namespace st = stereotrap;

struct st_raster {
  st::Raster r;
};
struct st_calibration {
  st::CalibrationSet cal;
};
struct st_rectification {
  st::RectificationMap map;
  st::Extrinsics stereo;
};
struct st_flow {
  st::FlowField f;
};
struct st_gmm {
  st::GmmBackgroundModel model;
};
struct st_ctds_fit {
  st::DetectionFunctionFit fit;
  st::BinnedDistances bins;
};
struct st_config {
  st::PipelineConfig c;
};

namespace {

thread_local std::string g_last_error;

st_status Fail(st_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `fn`, mapping exceptions to status codes and recording the message.
template <typename Fn>
st_status Guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return ST_OK;
  } catch (const st::Error& e) {
    return Fail(static_cast<st_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(ST_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(ST_ERR_INTERNAL, e.what());
  }
}

#define ST_REQUIRE(ptr)                                                    \
  do {                                                                     \
    if ((ptr) == nullptr) return Fail(ST_ERR_NULL_POINTER, #ptr " is NULL"); \
  } while (0)

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

st::Side ToSide(st_side s) { return s == ST_RIGHT ? st::Side::kRight : st::Side::kLeft; }

const st::Intrinsics& SideIntrinsics(const st_calibration* cal, st_side side) {
  return side == ST_RIGHT ? cal->cal.right : cal->cal.left;
}

st::MatcherParams ToMatcher(const st_matcher_params* p) {
  st::MatcherParams m;
  m.max_disparity = p->max_disparity;
  m.census_window = p->census_window;
  m.p1 = p->p1;
  m.p2 = p->p2;
  m.lr_tolerance = p->lr_tolerance;
  return m;
}

st::FlowParams ToFlow(const st_flow_params* p) {
  st::FlowParams f;
  f.levels = p->levels;
  f.pyr_scale = p->pyr_scale;
  f.poly_n = p->poly_n;
  f.poly_sigma = p->poly_sigma;
  f.iterations = p->iterations;
  f.window = p->window;
  f.min_eigenvalue = p->min_eigenvalue;
  return f;
}

void CopyIndices(const std::vector<std::size_t>& src, size_t* indices, size_t capacity,
                 size_t* count) {
  if (count != nullptr) *count = src.size();
  if (indices == nullptr) return;
  std::copy_n(src.begin(), std::min(capacity, src.size()), indices);
}

template <typename T>
void CopyValues(const std::vector<T>& src, T* out, size_t capacity, size_t* count) {
  if (count != nullptr) *count = src.size();
  if (out == nullptr) return;
  std::copy_n(src.begin(), std::min(capacity, src.size()), out);
}

std::vector<std::string> ToStrings(const char* const* items, size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    if (items[i] == nullptr) throw st::Error(st::ErrorCode::kInvalidArgument, "NULL path in list");
    out.emplace_back(items[i]);
  }
  return out;
}

std::string OrEmpty(const char* s) { return s == nullptr ? std::string() : std::string(s); }

}  // namespace

extern "C" {

const char* st_version(void) { return "0.1.0"; }

const char* st_status_string(st_status status) {
  switch (status) {
    case ST_OK: return "OK";
    case ST_ERR_NULL_POINTER: return "NullPointer";
    case ST_ERR_INTERNAL: return "Internal";
    default: break;
  }
  const int code = static_cast<int>(status);
  if (code >= 1 && code <= static_cast<int>(st::ErrorCode::kParse)) {
    return st::ErrorCodeName(static_cast<st::ErrorCode>(code));
  }
  return "Unknown";
}

const char* st_last_error_message(void) { return g_last_error.c_str(); }

void st_set_log_level(st_log_level level) {
  st::SetLogLevel(static_cast<st::LogLevel>(std::clamp(static_cast<int>(level), 0, 4)));
}

void st_string_free(char* s) { std::free(s); }

st_status st_raster_create(int width, int height, st_raster** out) {
  ST_REQUIRE(out);
  return Guard([&] {
    if (width <= 0 || height <= 0) {
      throw st::Error(st::ErrorCode::kInvalidArgument, "raster width and height must be positive");
    }
    *out = new st_raster{st::Raster(width, height)};
  });
}

void st_raster_destroy(st_raster* raster) { delete raster; }

st_status st_raster_size(const st_raster* raster, int* width, int* height) {
  ST_REQUIRE(raster);
  if (width != nullptr) *width = raster->r.width;
  if (height != nullptr) *height = raster->r.height;
  return ST_OK;
}

st_status st_raster_data(st_raster* raster, float** values, uint8_t** valid) {
  ST_REQUIRE(raster);
  if (values != nullptr) *values = raster->r.values.data();
  if (valid != nullptr) *valid = raster->r.valid.data();
  return ST_OK;
}

st_status st_raster_get(const st_raster* raster, int x, int y, float* value, int* valid) {
  ST_REQUIRE(raster);
  if (!raster->r.in_bounds(x, y)) return Fail(ST_ERR_INVALID_ARGUMENT, "pixel outside the raster");
  if (value != nullptr) *value = raster->r.at(x, y);
  if (valid != nullptr) *valid = raster->r.is_valid(x, y) ? 1 : 0;
  return ST_OK;
}

st_status st_raster_set(st_raster* raster, int x, int y, float value, int valid) {
  ST_REQUIRE(raster);
  if (!raster->r.in_bounds(x, y)) return Fail(ST_ERR_INVALID_ARGUMENT, "pixel outside the raster");
  raster->r.at(x, y) = value;
  raster->r.set_valid(x, y, valid != 0);
  return ST_OK;
}

st_status st_raster_load(const char* path, st_raster** out) {
  ST_REQUIRE(path);
  ST_REQUIRE(out);
  return Guard([&] { *out = new st_raster{st::LoadGray(path)}; });
}

st_status st_raster_save(const st_raster* raster, const char* path) {
  ST_REQUIRE(raster);
  ST_REQUIRE(path);
  return Guard([&] { st::WriteGray(st::GrayImage(raster->r), path); });
}

st_status st_raster_save_disparity_png(const st_raster* disparity, const char* path) {
  ST_REQUIRE(disparity);
  ST_REQUIRE(path);
  return Guard([&] { st::WriteDisparityPng(st::DisparityMap(disparity->r, 0.0), path); });
}

st_status st_split_sbs(const st_raster* frame, st_raster** left, st_raster** right) {
  ST_REQUIRE(frame);
  ST_REQUIRE(left);
  ST_REQUIRE(right);
  return Guard([&] {
    auto halves = st::SplitSbs(st::GrayImage(frame->r));
    auto* l = new st_raster{std::move(halves.first)};
    *right = new st_raster{std::move(halves.second)};
    *left = l;
  });
}

st_status st_rgb_to_gray(const float* rgb, int width, int height, st_raster** out) {
  ST_REQUIRE(rgb);
  ST_REQUIRE(out);
  return Guard([&] {
    if (width < 0 || height < 0) throw st::Error(st::ErrorCode::kInvalidArgument, "negative size");
    st::ColorImage img;
    img.width = width;
    img.height = height;
    img.channels = 3;
    img.data.assign(rgb, rgb + static_cast<std::size_t>(width) * height * 3);
    *out = new st_raster{st::ToGrayscale(img)};
  });
}

st_status st_calibration_load(const char* path, st_calibration** out) {
  ST_REQUIRE(path);
  ST_REQUIRE(out);
  return Guard([&] { *out = new st_calibration{st::LoadCalibration(path)}; });
}

st_status st_calibration_parse(const char* json, st_calibration** out) {
  ST_REQUIRE(json);
  ST_REQUIRE(out);
  return Guard([&] { *out = new st_calibration{st::ParseCalibrationJson(json)}; });
}

void st_calibration_destroy(st_calibration* cal) { delete cal; }

st_status st_calibration_to_json(const st_calibration* cal, char** json) {
  ST_REQUIRE(cal);
  ST_REQUIRE(json);
  return Guard([&] { *json = CopyString(st::CalibrationToJson(cal->cal)); });
}

st_status st_undistort_point(const st_calibration* cal, st_side side, double u, double v,
                             double* x, double* y) {
  ST_REQUIRE(cal);
  return Guard([&] {
    const st::Intrinsics& intr = SideIntrinsics(cal, side);
    const Eigen::Vector2d p = st::UndistortPoint({u, v}, intr);
    if (x != nullptr) *x = (p.x() - intr.cx) / intr.fx;
    if (y != nullptr) *y = (p.y() - intr.cy) / intr.fy;
  });
}

st_status st_project_point(const st_calibration* cal, st_side side, double x, double y, double z,
                           double* u, double* v) {
  ST_REQUIRE(cal);
  return Guard([&] {
    const Eigen::Vector2d p = st::ProjectPoint({x, y, z}, SideIntrinsics(cal, side));
    if (u != nullptr) *u = p.x();
    if (v != nullptr) *v = p.y();
  });
}

st_status st_rectification_compute(const st_calibration* cal, st_rectification** out) {
  ST_REQUIRE(cal);
  ST_REQUIRE(out);
  return Guard([&] { *out = new st_rectification{st::ComputeRectification(cal->cal), cal->cal.stereo}; });
}

void st_rectification_destroy(st_rectification* rect) { delete rect; }

st_status st_rectification_info(const st_rectification* rect, int* width, int* height,
                                double* focal, double* cx, double* cy, double* baseline) {
  ST_REQUIRE(rect);
  const st::RectificationMap& m = rect->map;
  if (width != nullptr) *width = m.width;
  if (height != nullptr) *height = m.height;
  if (focal != nullptr) *focal = m.rectified_fx;
  if (cx != nullptr) *cx = m.rectified_cx;
  if (cy != nullptr) *cy = m.rectified_cy;
  if (baseline != nullptr) *baseline = m.rectified_baseline;
  return ST_OK;
}

st_status st_rectification_remap(const st_rectification* rect, st_side side,
                                 const st_raster* image, st_raster** out) {
  ST_REQUIRE(rect);
  ST_REQUIRE(image);
  ST_REQUIRE(out);
  return Guard([&] {
    *out = new st_raster{st::Remap(st::GrayImage(image->r), rect->map, ToSide(side))};
  });
}

st_status st_rectification_project(const st_rectification* rect, st_side side, double x, double y,
                                   double z, double* u, double* v) {
  ST_REQUIRE(rect);
  return Guard([&] {
    Eigen::Vector3d point(x, y, z);
    if (side == ST_RIGHT) point = rect->stereo.rotation * point + rect->stereo.translation;
    const Eigen::Vector2d p = st::ProjectRectified(point, rect->map, ToSide(side));
    if (u != nullptr) *u = p.x();
    if (v != nullptr) *v = p.y();
  });
}

st_status st_essential_8point(const double* first, const double* second, size_t n,
                              double rotation[9], double translation[3], double essential[9]) {
  ST_REQUIRE(first);
  ST_REQUIRE(second);
  return Guard([&] {
    std::vector<st::Correspondence> pairs(n);
    for (size_t i = 0; i < n; ++i) {
      pairs[i].first = {first[2 * i], first[2 * i + 1]};
      pairs[i].second = {second[2 * i], second[2 * i + 1]};
    }
    const st::EssentialEstimate est = st::EstimateEssential8Point(pairs);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (rotation != nullptr) rotation[r * 3 + c] = est.pose.rotation(r, c);
        if (essential != nullptr) essential[r * 3 + c] = est.essential(r, c);
      }
      if (translation != nullptr) translation[r] = est.pose.translation(r);
    }
  });
}

void st_matcher_params_default(st_matcher_params* params) {
  if (params == nullptr) return;
  const st::MatcherParams d;
  *params = {d.max_disparity, d.census_window, d.p1, d.p2, d.lr_tolerance};
}

st_status st_compute_disparity(const st_raster* left, const st_raster* right,
                               const st_matcher_params* params, st_raster** out) {
  ST_REQUIRE(left);
  ST_REQUIRE(right);
  ST_REQUIRE(out);
  return Guard([&] {
    st_matcher_params p;
    st_matcher_params_default(&p);
    if (params != nullptr) p = *params;
    st::DisparityMap d =
        st::ComputeDisparity(st::GrayImage(left->r), st::GrayImage(right->r), ToMatcher(&p));
    *out = new st_raster{std::move(static_cast<st::Raster&>(d))};
  });
}

st_status st_disparity_to_depth(const st_raster* disparity, double baseline, double focal,
                                double min_disparity, st_raster** out) {
  ST_REQUIRE(disparity);
  ST_REQUIRE(out);
  return Guard([&] {
    st::DepthMap d = st::DisparityToDepth(st::DisparityMap(disparity->r, 0.0), baseline, focal,
                                          min_disparity);
    *out = new st_raster{std::move(static_cast<st::Raster&>(d))};
  });
}

double st_depth_from_disparity(double disparity, double baseline, double focal,
                               double min_disparity) {
  return st::DisparityToDepth(disparity, baseline, focal, min_disparity);
}

void st_flow_params_default(st_flow_params* params) {
  if (params == nullptr) return;
  const st::FlowParams d;
  *params = {d.levels, d.pyr_scale, d.poly_n, d.poly_sigma, d.iterations, d.window, d.min_eigenvalue};
}

st_status st_flow_estimate(const st_raster* curr, const st_raster* prev,
                           const st_flow_params* params, st_flow** out) {
  ST_REQUIRE(curr);
  ST_REQUIRE(prev);
  ST_REQUIRE(out);
  return Guard([&] {
    st_flow_params p;
    st_flow_params_default(&p);
    if (params != nullptr) p = *params;
    *out = new st_flow{st::EstimateFlow(st::GrayImage(curr->r), st::GrayImage(prev->r), ToFlow(&p))};
  });
}

st_status st_flow_create(int width, int height, st_flow** out) {
  ST_REQUIRE(out);
  return Guard([&] {
    if (width < 0 || height < 0) throw st::Error(st::ErrorCode::kInvalidArgument, "negative size");
    *out = new st_flow{st::FlowField(width, height)};
  });
}

void st_flow_destroy(st_flow* flow) { delete flow; }

st_status st_flow_size(const st_flow* flow, int* width, int* height) {
  ST_REQUIRE(flow);
  if (width != nullptr) *width = flow->f.width;
  if (height != nullptr) *height = flow->f.height;
  return ST_OK;
}

st_status st_flow_get(const st_flow* flow, int x, int y, float* dx, float* dy, int* valid) {
  ST_REQUIRE(flow);
  if (x < 0 || y < 0 || x >= flow->f.width || y >= flow->f.height) {
    return Fail(ST_ERR_INVALID_ARGUMENT, "pixel outside the flow field");
  }
  const std::size_t i = flow->f.index(x, y);
  if (dx != nullptr) *dx = flow->f.dx[i];
  if (dy != nullptr) *dy = flow->f.dy[i];
  if (valid != nullptr) *valid = flow->f.valid[i];
  return ST_OK;
}

st_status st_flow_set(st_flow* flow, int x, int y, float dx, float dy, int valid) {
  ST_REQUIRE(flow);
  if (x < 0 || y < 0 || x >= flow->f.width || y >= flow->f.height) {
    return Fail(ST_ERR_INVALID_ARGUMENT, "pixel outside the flow field");
  }
  const std::size_t i = flow->f.index(x, y);
  flow->f.dx[i] = dx;
  flow->f.dy[i] = dy;
  flow->f.valid[i] = valid != 0;
  return ST_OK;
}

st_status st_flow_load(const char* path, st_flow** out) {
  ST_REQUIRE(path);
  ST_REQUIRE(out);
  return Guard([&] { *out = new st_flow{st::ReadFlowPfm(path)}; });
}

st_status st_flow_save(const st_flow* flow, const char* path) {
  ST_REQUIRE(flow);
  ST_REQUIRE(path);
  return Guard([&] { st::WriteFlowPfm(flow->f, path); });
}

st_status st_warp_backward(const st_raster* raster, const st_flow* flow, st_raster** out) {
  ST_REQUIRE(raster);
  ST_REQUIRE(flow);
  ST_REQUIRE(out);
  return Guard([&] {
    if (raster->r.width != flow->f.width || raster->r.height != flow->f.height) {
      throw st::Error(st::ErrorCode::kDimensionMismatch, "flow does not match the raster");
    }
    *out = new st_raster{st::WarpBackward(raster->r, flow->f)};
  });
}

st_status st_temporal_error(const st_raster* const* disparities, size_t n_frames,
                            const st_flow* const* flows, size_t n_flows,
                            st_pixel_count convention, st_temporal_report* report,
                            double* per_frame) {
  if (n_frames > 0) ST_REQUIRE(disparities);
  if (n_flows > 0) ST_REQUIRE(flows);
  return Guard([&] {
    std::vector<st::DisparityMap> d;
    std::vector<st::FlowField> f;
    for (size_t i = 0; i < n_frames; ++i) {
      if (disparities[i] == nullptr) throw st::Error(st::ErrorCode::kInvalidArgument, "NULL raster");
      d.emplace_back(disparities[i]->r, 0.0);
    }
    for (size_t i = 0; i < n_flows; ++i) {
      if (flows[i] == nullptr) throw st::Error(st::ErrorCode::kInvalidArgument, "NULL flow");
      f.push_back(flows[i]->f);
    }
    const st::TemporalErrorReport r = st::TemporalError(
        d, f,
        convention == ST_PIXELS_FULL_FRAME ? st::PixelCountConvention::kFullFrame
                                           : st::PixelCountConvention::kValidOnly);
    if (report != nullptr) *report = {r.e_t, r.n_frames, r.n_pixels, r.valid_pixel_fraction};
    if (per_frame != nullptr) std::copy(r.per_frame_errors.begin(), r.per_frame_errors.end(), per_frame);
  });
}

st_status st_fixed_rate_sample(size_t n_frames, double fps, double rate, size_t* indices,
                               size_t capacity, size_t* count) {
  return Guard([&] { CopyIndices(st::FixedRateSample(n_frames, fps, rate).indices, indices, capacity, count); });
}

st_status st_accumulate_ratios(const double* ratios, size_t n, double threshold, size_t burn_in,
                               size_t* indices, size_t capacity, size_t* count) {
  if (n > 0) ST_REQUIRE(ratios);
  return Guard([&] {
    if (!(threshold > 0.0)) {
      throw st::Error(st::ErrorCode::kInvalidArgument, "accumulation threshold must be positive");
    }
    const std::vector<double> r(ratios, ratios + n);
    CopyIndices(st::AccumulateRatios(r, threshold, burn_in), indices, capacity, count);
  });
}

st_status st_gmm_create(int width, int height, st_gmm** out) {
  ST_REQUIRE(out);
  return Guard([&] { *out = new st_gmm{st::GmmBackgroundModel(width, height)}; });
}

void st_gmm_destroy(st_gmm* gmm) { delete gmm; }

st_status st_gmm_apply(st_gmm* gmm, const st_raster* frame, double learning_rate,
                       double* foreground_ratio, uint8_t* mask) {
  ST_REQUIRE(gmm);
  ST_REQUIRE(frame);
  return Guard([&] {
    const st::GrayImage img(frame->r);
    const auto fg = learning_rate < 0.0 ? gmm->model.Apply(img) : gmm->model.Apply(img, learning_rate);
    if (foreground_ratio != nullptr) *foreground_ratio = st::ForegroundRatio(fg);
    if (mask != nullptr) std::copy(fg.begin(), fg.end(), mask);
  });
}

st_status st_distance_from_bbox(const st_raster* depth, double x, double y, double w, double h,
                                double min_valid_fraction, double* distance,
                                double* valid_fraction) {
  ST_REQUIRE(depth);
  return Guard([&] {
    st::Detection det;
    det.bbox = {x, y, w, h};
    const st::DistanceRecord rec =
        st::DistanceFromBbox(st::DepthMap(depth->r), det, min_valid_fraction);
    if (distance != nullptr) *distance = rec.distance;
    if (valid_fraction != nullptr) *valid_fraction = rec.valid_depth_fraction;
  });
}

st_status st_distance_from_mask(const st_raster* depth, const uint8_t* mask,
                                double min_valid_fraction, double* distance,
                                double* valid_fraction) {
  ST_REQUIRE(depth);
  ST_REQUIRE(mask);
  return Guard([&] {
    st::Detection det;
    det.mask = st::BinaryMask{depth->r.width, depth->r.height,
                              std::vector<std::uint8_t>(mask, mask + depth->r.size())};
    const st::DistanceRecord rec =
        st::DistanceFromMask(st::DepthMap(depth->r), det, min_valid_fraction);
    if (distance != nullptr) *distance = rec.distance;
    if (valid_fraction != nullptr) *valid_fraction = rec.valid_depth_fraction;
  });
}

void st_ctds_options_default(st_ctds_options* options) {
  if (options == nullptr) return;
  *options = {ST_KEY_UNIFORM, 1, 0};
}

st_status st_ctds_make_bins(double w_l, double w, int n_bins, double* edges) {
  ST_REQUIRE(edges);
  return Guard([&] {
    const st::BinnedDistances b = st::MakeBins(w_l, w, n_bins);
    std::copy(b.edges.begin(), b.edges.end(), edges);
  });
}

st_status st_ctds_fit_binned(const double* edges, const size_t* counts, size_t n_bins,
                             const st_ctds_options* options, st_ctds_fit** out) {
  ST_REQUIRE(edges);
  ST_REQUIRE(counts);
  ST_REQUIRE(out);
  return Guard([&] {
    st_ctds_options o;
    st_ctds_options_default(&o);
    if (options != nullptr) o = *options;
    st::BinnedDistances bins;
    bins.edges.assign(edges, edges + n_bins + 1);
    bins.counts.assign(counts, counts + n_bins);
    bins.validate();
    st::FitOptions fo;
    fo.key = o.key == ST_KEY_HALF_NORMAL ? st::KeyFunction::kHalfNormal : st::KeyFunction::kUniform;
    fo.n_adjustments = o.adjustments;
    fo.scaling = o.scale_at_zero ? st::ScalingPoint::kZero : st::ScalingPoint::kLeftTruncation;
    st::DetectionFunctionFit fit = st::FitDetectionFunction(bins, fo);
    *out = new st_ctds_fit{std::move(fit), std::move(bins)};
  });
}

void st_ctds_fit_destroy(st_ctds_fit* fit) { delete fit; }

st_status st_ctds_fit_summary(const st_ctds_fit* fit, double* loglik, double* aic, double* p_hat,
                              int* iterations) {
  ST_REQUIRE(fit);
  if (loglik != nullptr) *loglik = fit->fit.loglik;
  if (aic != nullptr) *aic = fit->fit.aic;
  if (p_hat != nullptr) *p_hat = fit->fit.p_hat;
  if (iterations != nullptr) *iterations = fit->fit.iterations;
  return ST_OK;
}

st_status st_ctds_fit_coefficients(const st_ctds_fit* fit, double* coefficients, size_t capacity,
                                   size_t* count) {
  ST_REQUIRE(fit);
  CopyValues(fit->fit.model.coefficients, coefficients, capacity, count);
  return ST_OK;
}

st_status st_ctds_fit_bin_probabilities(const st_ctds_fit* fit, double* probs, size_t capacity,
                                        size_t* count) {
  ST_REQUIRE(fit);
  CopyValues(fit->fit.fitted_bin_probs, probs, capacity, count);
  return ST_OK;
}

st_status st_ctds_fit_g(const st_ctds_fit* fit, double r, double* g) {
  ST_REQUIRE(fit);
  ST_REQUIRE(g);
  *g = st::DetectionG(r, fit->fit.model);
  return ST_OK;
}

st_status st_ctds_fit_gof(const st_ctds_fit* fit, double* chi2, int* dof, double* p_value) {
  ST_REQUIRE(fit);
  return Guard([&] {
    const st::GoodnessOfFit gof = st::GofChi2(fit->bins, fit->fit);
    if (chi2 != nullptr) *chi2 = gof.chi2;
    if (dof != nullptr) *dof = gof.dof;
    if (p_value != nullptr) *p_value = gof.p_value;
  });
}

st_status st_ctds_fit_to_json(const st_ctds_fit* fit, char** json) {
  ST_REQUIRE(fit);
  ST_REQUIRE(json);
  return Guard([&] {
    const st::GoodnessOfFit gof = st::GofChi2(fit->bins, fit->fit);
    *json = CopyString(st::FitToJson(fit->fit, &gof));
  });
}

st_status st_ctds_fit_to_svg(const st_ctds_fit* fit, char** svg) {
  ST_REQUIRE(fit);
  ST_REQUIRE(svg);
  return Guard([&] { *svg = CopyString(st::DetectionProbabilitySvg(fit->fit)); });
}

st_status st_config_create(st_config** out) {
  ST_REQUIRE(out);
  return Guard([&] { *out = new st_config{}; });
}

st_status st_config_load(const char* path, st_config** out) {
  ST_REQUIRE(path);
  ST_REQUIRE(out);
  return Guard([&] { *out = new st_config{st::LoadPipelineConfig(path)}; });
}

st_status st_config_parse(const char* json, const char* base_dir, st_config** out) {
  ST_REQUIRE(json);
  ST_REQUIRE(out);
  return Guard([&] { *out = new st_config{st::PipelineConfigFromJson(json, OrEmpty(base_dir))}; });
}

void st_config_destroy(st_config* config) { delete config; }

st_status st_config_set(st_config* config, const char* key, const char* value) {
  ST_REQUIRE(config);
  ST_REQUIRE(key);
  ST_REQUIRE(value);
  return Guard([&] { st::ApplyOverride(config->c, key, value); });
}

st_status st_config_validate(const st_config* config) {
  ST_REQUIRE(config);
  return Guard([&] { config->c.validate(); });
}

st_status st_config_to_json(const st_config* config, char** json) {
  ST_REQUIRE(config);
  ST_REQUIRE(json);
  return Guard([&] { *json = CopyString(st::PipelineConfigToJson(config->c)); });
}

st_status st_pipeline_run(const st_config* config, const char* store_root,
                          st_run_summary* summary) {
  ST_REQUIRE(config);
  ST_REQUIRE(store_root);
  return Guard([&] {
    const st::RunSummary s = st::RunPipeline(config->c, st::ScanObservationStore(store_root));
    if (summary != nullptr) {
      *summary = {s.observations, s.succeeded, s.failed, s.distances, s.fitted ? 1 : 0, s.exit_code};
    }
  });
}

st_status st_stage_split(const char* frame, const char* left_out, const char* right_out) {
  ST_REQUIRE(frame);
  ST_REQUIRE(left_out);
  ST_REQUIRE(right_out);
  return Guard([&] { st::StageSplit(frame, left_out, right_out); });
}

st_status st_stage_rectify(const st_config* config, const char* left_in, const char* right_in,
                           const char* left_out, const char* right_out) {
  ST_REQUIRE(config);
  ST_REQUIRE(left_in);
  ST_REQUIRE(right_in);
  ST_REQUIRE(left_out);
  ST_REQUIRE(right_out);
  return Guard([&] { st::StageRectify(config->c.calibration, left_in, right_in, left_out, right_out); });
}

st_status st_stage_match(const st_config* config, const char* left, const char* right,
                         const char* disparity_out, const char* png_out) {
  ST_REQUIRE(config);
  ST_REQUIRE(left);
  ST_REQUIRE(right);
  ST_REQUIRE(disparity_out);
  return Guard([&] { st::StageMatch(left, right, config->c.matcher, disparity_out, OrEmpty(png_out)); });
}

st_status st_stage_depth(const st_config* config, const char* disparity, const char* depth_out) {
  ST_REQUIRE(config);
  ST_REQUIRE(disparity);
  ST_REQUIRE(depth_out);
  return Guard([&] {
    st::StageDepth(config->c.calibration, disparity, config->c.min_disparity, depth_out);
  });
}

st_status st_stage_flow(const st_config* config, const char* prev, const char* curr,
                        const char* flow_out) {
  ST_REQUIRE(config);
  ST_REQUIRE(prev);
  ST_REQUIRE(curr);
  ST_REQUIRE(flow_out);
  return Guard([&] { st::StageFlow(prev, curr, config->c.flow, flow_out); });
}

st_status st_stage_quality(const st_config* config, const char* const* disparities,
                           size_t n_disparities, const char* const* flows, size_t n_flows,
                           const char* report_out, double* e_t) {
  ST_REQUIRE(config);
  if (n_disparities > 0) ST_REQUIRE(disparities);
  if (n_flows > 0) ST_REQUIRE(flows);
  return Guard([&] {
    const st::TemporalErrorReport r =
        st::StageQuality(ToStrings(disparities, n_disparities), ToStrings(flows, n_flows),
                         config->c.quality.pixel_count, OrEmpty(report_out));
    if (e_t != nullptr) *e_t = r.e_t;
  });
}

st_status st_stage_sample(const st_config* config, const char* const* frames, size_t n_frames,
                          const char* video_id, const char* plan_out, size_t* n_samples) {
  ST_REQUIRE(config);
  if (n_frames > 0) ST_REQUIRE(frames);
  return Guard([&] {
    const st::SamplePlan plan = st::StageSample(ToStrings(frames, n_frames), config->c.sampler,
                                                OrEmpty(video_id), OrEmpty(plan_out));
    if (n_samples != nullptr) *n_samples = plan.indices.size();
  });
}

st_status st_stage_distances(const st_config* config, const char* detections,
                             const char* depth_dir, const char* plan, const char* observation_id,
                             const char* csv_out, int append, size_t* n_records) {
  ST_REQUIRE(config);
  ST_REQUIRE(detections);
  ST_REQUIRE(depth_dir);
  return Guard([&] {
    const auto records =
        st::StageDistances(detections, depth_dir, OrEmpty(plan), OrEmpty(observation_id),
                           config->c.min_valid_fraction, OrEmpty(csv_out), append != 0);
    if (n_records != nullptr) *n_records = records.size();
  });
}

st_status st_stage_ctds_fit(const st_config* config, const char* const* inputs, size_t n_inputs,
                            const char* fit_out, const char* svg_out) {
  ST_REQUIRE(config);
  if (n_inputs > 0) ST_REQUIRE(inputs);
  return Guard([&] {
    st::StageCtdsFit(ToStrings(inputs, n_inputs), config->c.ctds, OrEmpty(fit_out), OrEmpty(svg_out));
  });
}

st_status st_stage_report(const st_config* config, const char* const* reports, size_t n_reports,
                          const char* csv_out) {
  ST_REQUIRE(config);
  if (n_reports > 0) ST_REQUIRE(reports);
  return Guard([&] {
    const st::QualityConfig& q = config->c.quality;
    st::StageReport(ToStrings(reports, n_reports), q.histogram_bins, q.histogram_lo, q.histogram_hi,
                    OrEmpty(csv_out));
  });
}

}  // extern "C"
