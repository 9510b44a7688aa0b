#include "replicheck/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "replicheck/errors.hpp"

namespace replicheck {

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::Linf: return "Linf";
    case Metric::MAE: return "MAE";
    case Metric::MSE: return "MSE";
    case Metric::MAPE: return "MAPE";
    case Metric::R2: return "R2";
    case Metric::EVS: return "EVS";
    case Metric::Var: return "Var";
    case Metric::Bias: return "Bias";
    case Metric::TopN: return "TopN";
    case Metric::mAP: return "mAP";
  }
  return "?";
}

Metric metric_from_name(const std::string& s) {
  for (Metric m : {Metric::Linf, Metric::MAE, Metric::MSE, Metric::MAPE, Metric::R2,
                   Metric::EVS, Metric::Var, Metric::Bias, Metric::TopN, Metric::mAP})
    if (metric_name(m) == s) return m;
  throw SchemaError("unknown metric name: " + s);
}

bool metric_is_ge(Metric m) {
  return m == Metric::R2 || m == Metric::EVS || m == Metric::TopN || m == Metric::mAP;
}

double RegressionMetrics::operator[](Metric m) const {
  switch (m) {
    case Metric::Linf: return linf;
    case Metric::MAE: return mae;
    case Metric::MSE: return mse;
    case Metric::MAPE: return mape;
    case Metric::R2: return r2;
    case Metric::EVS: return evs;
    case Metric::Var: return var;
    case Metric::Bias: return bias;
    default: throw MissingContext("metric has no regression value: " + metric_name(m));
  }
}

RegressionMetrics compute_regression_metrics(std::span<const double> gt,
                                             std::span<const double> pred) {
  size_t n = gt.size();
  if (n != pred.size() || n < 2) throw ShapeMismatch("metrics need n >= 2 matched samples");
  RegressionMetrics r;
  double sum_d = 0, sum_d2 = 0, sum_ad = 0, sum_f = 0, mape = 0;
  for (size_t i = 0; i < n; ++i) {
    double d = pred[i] - gt[i];
    sum_d += d;
    sum_d2 += d * d;
    sum_ad += std::fabs(d);
    sum_f += gt[i];
    r.linf = std::max(r.linf, std::fabs(d));
    if (gt[i] == 0.0) throw DivisionDomain("MAPE undefined: ground truth sample is zero");
    mape += std::fabs(d) / std::fabs(gt[i]);
  }
  double dn = static_cast<double>(n);
  r.bias = sum_d / dn;
  r.mae = sum_ad / dn;
  r.mse = sum_d2 / dn;
  r.mape = mape / dn;
  r.var = r.mse - r.bias * r.bias;
  double fbar = sum_f / dn, ssf = 0;
  for (size_t i = 0; i < n; ++i) ssf += (gt[i] - fbar) * (gt[i] - fbar);
  double var_f = ssf / dn;
  if (var_f == 0.0) throw DegenerateVariance("Var(f) = 0: R2 / EVS undefined");
  r.r2 = 1.0 - r.mse / var_f;
  r.evs = 1.0 - r.var / var_f;
  return r;
}

MetricContext context_from(std::span<const double> gt, std::span<const double> pred) {
  RegressionMetrics m = compute_regression_metrics(gt, pred);
  MetricContext ctx;
  ctx.bias1 = std::fabs(m.bias);
  ctx.mae1 = m.mae;
  ctx.mape1 = m.mape;
  ctx.n = static_cast<long>(gt.size());
  double fbar = 0;
  for (double v : gt) fbar += v;
  fbar /= static_cast<double>(gt.size());
  double ssf = 0, inv = 0;
  for (double v : gt) {
    ssf += (v - fbar) * (v - fbar);
    inv += 1.0 / std::fabs(v);
  }
  ctx.var_f = ssf / static_cast<double>(gt.size());
  ctx.inv_gt_mean = inv / static_cast<double>(gt.size());
  return ctx;
}

double budget(Metric m, double eps, const MetricContext& ctx) {
  switch (m) {
    case Metric::Linf:
    case Metric::MAE:
    case Metric::Bias:
      return eps;
    case Metric::MSE:
    case Metric::Var:
      return eps * eps + 2.0 * eps * ctx.bias1;
    case Metric::MAPE:
      return eps * (1.0 + ctx.mape1);
    case Metric::EVS:
    case Metric::R2:
      if (ctx.var_f <= 0) throw MissingContext("budget: var_f required for EVS/R2");
      return (eps * eps + 2.0 * eps * ctx.bias1) / ctx.var_f;
    default:
      throw MissingContext("budget: no closed form for " + metric_name(m) + ", use the LUT");
  }
}

double budget_exact(Metric m, double eps, double var1, const MetricContext& ctx) {
  switch (m) {
    case Metric::Linf:
    case Metric::MAE:
    case Metric::Bias:
      return eps;
    case Metric::MSE:
      return eps * eps + 2.0 * eps * ctx.mae1;
    case Metric::Var:
      return eps * eps + 2.0 * eps * std::sqrt(std::max(0.0, var1));
    case Metric::MAPE:
      if (ctx.inv_gt_mean <= 0) throw MissingContext("budget_exact: inv_gt_mean required");
      return eps * ctx.inv_gt_mean;
    case Metric::EVS:
      if (ctx.var_f <= 0) throw MissingContext("budget_exact: var_f required");
      return (eps * eps + 2.0 * eps * std::sqrt(std::max(0.0, var1))) / ctx.var_f;
    case Metric::R2:
      if (ctx.var_f <= 0) throw MissingContext("budget_exact: var_f required");
      return (eps * eps + 2.0 * eps * ctx.mae1) / ctx.var_f;
    default:
      throw MissingContext("budget_exact: no closed form for " + metric_name(m));
  }
}

namespace {
// Largest eps >= 0 with eps^2 + 2 b eps <= c (b, c >= 0).
double quad_root(double b, double c) { return -b + std::sqrt(b * b + c); }
}  // namespace

MarginResult derive_margin(Metric m, double M1, const MetricBound& bound,
                           const MetricContext& ctx, double var1) {
  MarginResult r;
  r.metric = m;
  r.M1 = M1;
  r.R = bound.R;
  double slack = metric_is_ge(m) ? M1 - bound.R : bound.R - M1;
  if (slack < 0) {
    r.feasible = false;
    r.eps_M = r.eps_exact = 0;
    return r;
  }
  r.feasible = true;
  switch (m) {
    case Metric::Linf:
    case Metric::MAE:
    case Metric::Bias:
      r.eps_M = r.eps_exact = slack;
      break;
    case Metric::MAPE:
      r.eps_M = slack / (1.0 + ctx.mape1);
      r.eps_exact = ctx.inv_gt_mean > 0 ? slack / ctx.inv_gt_mean : r.eps_M;
      break;
    case Metric::MSE:
      r.eps_M = quad_root(ctx.bias1, slack);
      r.eps_exact = quad_root(ctx.mae1, slack);
      break;
    case Metric::Var:
      r.eps_M = quad_root(ctx.bias1, slack);
      r.eps_exact = quad_root(std::sqrt(std::max(0.0, var1)), slack);
      break;
    case Metric::EVS:
      if (ctx.var_f <= 0) throw MissingContext("derive_margin: var_f required");
      r.eps_M = quad_root(ctx.bias1, slack * ctx.var_f);
      r.eps_exact = quad_root(std::sqrt(std::max(0.0, var1)), slack * ctx.var_f);
      break;
    case Metric::R2:
      if (ctx.var_f <= 0) throw MissingContext("derive_margin: var_f required");
      r.eps_M = quad_root(ctx.bias1, slack * ctx.var_f);
      r.eps_exact = quad_root(ctx.mae1, slack * ctx.var_f);
      break;
    default:
      throw MissingContext("derive_margin: " + metric_name(m) + " requires the LUT path");
  }
  r.g = budget(m, r.eps_M, ctx);
  return r;
}

double topn_worst_case(const Matrix& logits, std::span<const long> gt_class, long N,
                       double eps) {
  if (logits.cols < 2 || N < 1 || N >= logits.cols)
    throw PreconditionViolated("topn_worst_case: need 1 <= N < C, C >= 2");
  if (static_cast<size_t>(logits.rows) != gt_class.size())
    throw ShapeMismatch("topn_worst_case: row count mismatch");
  long correct = 0;
  std::vector<double> sorted(static_cast<size_t>(logits.cols));
  for (long i = 0; i < logits.rows; ++i) {
    long g = gt_class[static_cast<size_t>(i)];
    double gl = logits.at(i, g);
    for (long c = 0; c < logits.cols; ++c) sorted[static_cast<size_t>(c)] = logits.at(i, c);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    // Pessimistic rank: ties with other classes count against the sample.
    long ahead = 0;
    for (long c = 0; c < logits.cols; ++c)
      if (c != g && logits.at(i, c) >= gl) ahead++;
    if (ahead >= N) continue;
    if (gl - sorted[static_cast<size_t>(N)] > 2.0 * eps) correct++;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows);
}

double build_lut_and_invert(const std::function<double(double)>& score_fn,
                            std::span<const double> eps_grid, double target) {
  if (eps_grid.empty()) throw PreconditionViolated("empty eps grid");
  std::vector<double> score(eps_grid.size());
  for (size_t i = 0; i < eps_grid.size(); ++i) score[i] = score_fn(eps_grid[i]);
  if (target > score.front() || target < score.back())
    throw TargetOutOfRange("target " + format_double(target) + " outside LUT range [" +
                           format_double(score.back()) + ", " +
                           format_double(score.front()) + "]");
  size_t j = 0;
  for (size_t i = 0; i < score.size(); ++i)
    if (score[i] >= target) j = i;
  if (j + 1 == score.size()) return eps_grid[j];
  double s0 = score[j], s1 = score[j + 1];
  double frac = (s0 - target) / (s0 - s1);  // s0 >= target > s1 here
  return eps_grid[j] + frac * (eps_grid[j + 1] - eps_grid[j]);
}

std::vector<double> default_eps_grid(double lo, double hi, int points) {
  if (!(lo > 0) || !(hi > lo) || points < 2)
    throw PreconditionViolated("bad eps grid parameters");
  std::vector<double> g(static_cast<size_t>(points));
  double ratio = std::pow(hi / lo, 1.0 / (points - 1));
  double v = lo;
  for (int i = 0; i < points; ++i, v *= ratio) g[static_cast<size_t>(i)] = v;
  g.back() = hi;
  return g;
}

IouMin iou_min(const BoxPair& bp) {
  if (bp.x <= 0 || bp.y <= 0 || bp.x1 <= 0 || bp.y1 <= 0 || bp.eps < 0)
    throw PreconditionViolated("iou_min: extents must be positive, eps >= 0");
  if (bp.eps > 0) {
    if (bp.eps >= std::fabs(bp.x1 - bp.x) || bp.eps >= std::fabs(bp.y1 - bp.y))
      throw PreconditionViolated("iou_min: eps must be smaller than |x1-x| and |y1-y|");
    if (bp.x1 - bp.eps <= 0 || bp.y1 - bp.eps <= 0)
      throw PreconditionViolated("iou_min: perturbed corner leaves the positive quadrant");
  }
  auto sgn = [](double d) { return d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0; };
  IouMin r;
  r.x2 = bp.x1 + sgn(bp.x1 - bp.x) * bp.eps;
  r.y2 = bp.y1 + sgn(bp.y1 - bp.y) * bp.eps;
  double inter = std::min(bp.x, r.x2) * std::min(bp.y, r.y2);
  double uni = bp.x * bp.y + r.x2 * r.y2 - inter;
  r.iou = inter / uni;
  return r;
}

double map_with_margin(std::vector<Detection> dets, const std::vector<GtBox>& gt,
                       double t, double eps) {
  // Stable greedy matching: descending confidence, original order on ties.
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.confidence > b.confidence;
                   });
  std::vector<bool> gt_used(gt.size(), false);
  std::vector<bool> tp(dets.size(), false);
  for (size_t d = 0; d < dets.size(); ++d) {
    double best = -1;
    size_t best_g = gt.size();
    for (size_t g = 0; g < gt.size(); ++g) {
      if (gt_used[g] || gt[g].cls != dets[d].cls) continue;
      double v = iou_min({gt[g].x, gt[g].y, dets[d].x, dets[d].y, eps}).iou;
      if (v >= t && v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best_g < gt.size()) {
      gt_used[best_g] = true;
      tp[d] = true;
    }
  }

  std::vector<long> classes;
  for (const auto& g : gt) classes.push_back(g.cls);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.empty()) throw PreconditionViolated("map_with_margin: no ground truth");

  double sum_ap = 0;
  for (long cls : classes) {
    long npos = 0;
    for (const auto& g : gt)
      if (g.cls == cls) npos++;
    std::vector<double> prec, rec;
    long ctp = 0, cfp = 0;
    for (size_t d = 0; d < dets.size(); ++d) {
      if (dets[d].cls != cls) continue;
      (tp[d] ? ctp : cfp)++;
      prec.push_back(static_cast<double>(ctp) / static_cast<double>(ctp + cfp));
      rec.push_back(static_cast<double>(ctp) / static_cast<double>(npos));
    }
    // All-point interpolation: sum recall steps times max precision to the right.
    double ap = 0, prev_r = 0;
    for (size_t i = 0; i < prec.size(); ++i) {
      double pmax = 0;
      for (size_t j = i; j < prec.size(); ++j) pmax = std::max(pmax, prec[j]);
      ap += (rec[i] - prev_r) * pmax;
      prev_r = rec[i];
    }
    sum_ap += ap;
  }
  return sum_ap / static_cast<double>(classes.size());
}

}  // namespace replicheck
