#ifndef REPLICHECK_METRICS_HPP
#define REPLICHECK_METRICS_HPP

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "replicheck/io.hpp"

namespace replicheck {

enum class Metric { Linf, MAE, MSE, MAPE, R2, EVS, Var, Bias, TopN, mAP };

std::string metric_name(Metric m);
Metric metric_from_name(const std::string& s);  // throws SchemaError
bool metric_is_ge(Metric m);                    // R2 / EVS / TopN / mAP want >= R

struct RegressionMetrics {
  double linf = 0, mae = 0, mse = 0, mape = 0;
  double r2 = 0, evs = 0, var = 0, bias = 0;  // bias signed
  double operator[](Metric m) const;
};

// n >= 2; throws DivisionDomain if any gt_i == 0 (MAPE) and DegenerateVariance
// when Var(f) == 0 (R2 / EVS). Population variances throughout.
RegressionMetrics compute_regression_metrics(std::span<const double> gt,
                                             std::span<const double> pred);

struct MetricContext {
  double bias1 = 0;        // |bias of pred1 vs gt|
  double mae1 = 0;         // used by the exact finite-n bounds
  double var_f = 0;        // Var(f(x)) over the dataset
  double mape1 = 0;
  double inv_gt_mean = 0;  // mean(1/|gt_i|), exact absolute-perturbation MAPE bound
  long n = 0;
};

MetricContext context_from(std::span<const double> gt, std::span<const double> pred);

// The published budget table: Linf/MAE/Bias eps; MSE/Var eps^2 + 2 eps bias1;
// MAPE eps (1 + mape1); EVS/R2 (eps^2 + 2 eps bias1) / var_f.
double budget(Metric m, double eps, const MetricContext& ctx);

// Worst-case finite-n bounds with no independence assumption: MSE/R2 replace
// bias1 by mae1, Var/EVS use eps^2 + 2 eps sqrt(var1), MAPE uses mean(1/|gt|)
// against an absolute perturbation. Never violated by any |e_i| <= eps.
double budget_exact(Metric m, double eps, double var1, const MetricContext& ctx);

struct MetricBound {
  Metric metric = Metric::MAE;
  bool ge = false;  // direction: true for >= R
  double R = 0;
  long N = 1;           // TopN
  double iou_t = 0.5;   // mAP
};

struct MarginResult {
  Metric metric = Metric::MAE;
  double M1 = 0;
  double R = 0;
  double g = 0;       // budget at eps_M
  double eps_M = 0;   // published-table inversion
  double eps_exact = 0;  // inversion of budget_exact (var1 = Var of pred1 errs)
  bool feasible = false;
};

// Largest eps with M1 + g(eps) <= R (or M1 - g(eps) >= R for >=-metrics).
// var1 is Var(delta_1); pass M1's Var value (or mse - bias^2) for the exact
// quadratic inversions. Infeasible slack yields eps = 0, feasible = false.
MarginResult derive_margin(Metric m, double M1, const MetricBound& bound,
                           const MetricContext& ctx, double var1);

// Worst-case Top-N accuracy under per-logit perturbations of magnitude <= eps.
// A sample survives iff its ground-truth class is in the nominal top N and its
// logit beats the (N+1)-th largest by more than 2 eps (ties lost).
double topn_worst_case(const Matrix& logits, std::span<const long> gt_class,
                       long N, double eps);
inline double top1_worst_case(const Matrix& logits, std::span<const long> gt_class,
                              double eps) {
  return topn_worst_case(logits, gt_class, 1, eps);
}

// Piecewise-linear inversion of a non-increasing score LUT; returns the
// largest eps whose interpolated score still meets target. TargetOutOfRange
// when target lies outside the tabulated score range.
double build_lut_and_invert(const std::function<double(double)>& score_fn,
                            std::span<const double> eps_grid, double target);

std::vector<double> default_eps_grid(double lo, double hi, int points = 64);

// Axis-aligned boxes sharing the origin corner; extents are the free corner.
struct BoxPair {
  double x = 0, y = 0;    // ground truth extents
  double x1 = 0, y1 = 0;  // prediction extents
  double eps = 0;         // corner perturbation bound
};

struct IouMin {
  double iou = 0;
  double x2 = 0, y2 = 0;  // attaining corner
};

// Minimum IoU over |x2-x1| <= eps, |y2-y1| <= eps; attained at the corner
// moved away from the ground truth on each axis. PreconditionViolated when
// eps > 0 and eps >= |x1-x| (or the y analogue) or the moved corner leaves
// the positive quadrant.
IouMin iou_min(const BoxPair& bp);

struct Detection {
  double x = 0, y = 0;  // extents after origin normalization
  long cls = 0;
  double confidence = 0;
};

struct GtBox {
  double x = 0, y = 0;
  long cls = 0;
};

// Worst-case mAP at IoU threshold t under corner perturbations <= eps.
// Greedy matching by descending confidence; all-point interpolated AP.
double map_with_margin(std::vector<Detection> dets, const std::vector<GtBox>& gt,
                       double t, double eps);

}  // namespace replicheck

#endif
