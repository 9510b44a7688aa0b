#include "replicheck/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "replicheck/errors.hpp"
#include "replicheck/rng.hpp"

namespace replicheck {

TfmVerdict tfm_verify(std::span<const double> gt, std::span<const double> pred1,
                      const std::vector<MetricBound>& bounds, const Matrix* logits,
                      const std::vector<long>* gt_class, std::span<const double> lut_grid) {
  if (bounds.empty()) throw PreconditionViolated("tfm_verify: no bounds given");
  MetricContext ctx = context_from(gt, pred1);
  RegressionMetrics reg = compute_regression_metrics(gt, pred1);
  TfmVerdict v;
  v.pass = true;
  for (const MetricBound& b : bounds) {
    TfmRow row;
    row.metric = b.metric;
    row.R = b.R;
    if (b.metric == Metric::TopN) {
      if (!logits || !gt_class)
        throw MissingContext("TopN bound needs logits and ground-truth classes");
      row.M1 = topn_worst_case(*logits, *gt_class, b.N, 0.0);
      row.pass = row.M1 >= b.R;
      if (row.pass) {
        std::vector<double> grid(lut_grid.begin(), lut_grid.end());
        if (grid.empty()) grid = default_eps_grid(1e-6, 1.0);
        auto fn = [&](double e) { return topn_worst_case(*logits, *gt_class, b.N, e); };
        row.feasible = true;
        if (fn(grid.back()) >= b.R) {
          row.eps_M = grid.back();
        } else {
          row.eps_M = build_lut_and_invert(fn, grid, b.R);
        }
        row.eps_exact = row.eps_M;
      }
    } else if (b.metric == Metric::mAP) {
      throw MissingContext("mAP bound needs a detection scenario, not prediction vectors");
    } else {
      double m1 = reg[b.metric];
      double m1_checked = b.metric == Metric::Bias ? std::fabs(m1) : m1;
      row.M1 = m1;
      row.pass = b.ge ? m1_checked >= b.R : m1_checked <= b.R;
      MarginResult mr = derive_margin(b.metric, m1_checked, b, ctx, reg.var);
      row.eps_M = mr.eps_M;
      row.eps_exact = mr.eps_exact;
      row.feasible = mr.feasible;
    }
    v.pass = v.pass && row.pass;
    v.rows.push_back(row);
  }
  if (v.pass) {
    v.eps_max_valid = true;
    v.eps_max = std::numeric_limits<double>::infinity();
    for (const TfmRow& r : v.rows)
      v.eps_max = std::min(v.eps_max, std::min(r.eps_M, r.eps_exact));
  }
  return v;
}

ReplicationReport replicate_verify(const PredictionSet& pred1, const PredictionSet& pred2,
                                   double eps_max, const std::string& dataset_id) {
  if (eps_max < 0) throw PreconditionViolated("replicate_verify: eps_max must be >= 0");
  RunDiff d = compare_runs(pred1, pred2);
  ReplicationReport r;
  r.per_sample_max = d.per_sample_max;
  r.max_abs = d.max_abs;
  r.worst_sample = d.worst_sample;
  r.eps_max = eps_max;
  r.dataset_id = dataset_id;
  for (size_t i = 0; i < r.per_sample_max.size(); ++i) {
    if (r.per_sample_max[i] > eps_max) {
      r.violations++;
      if (r.first_violation < 0) r.first_violation = static_cast<long>(i);
    }
  }
  r.status = r.violations == 0 ? "REPLICATED" : "INCONCLUSIVE";
  return r;
}

std::vector<std::pair<double, double>> emit_cdf(std::span<const double> errors) {
  if (errors.empty()) throw PreconditionViolated("emit_cdf: empty input");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> cdf;
  cdf.reserve(sorted.size());
  double n = static_cast<double>(sorted.size());
  for (size_t i = 0; i < sorted.size(); ++i)
    cdf.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  return cdf;
}

std::string cdf_to_csv(const std::vector<std::pair<double, double>>& cdf) {
  std::string out = "error,cum_fraction\n";
  for (const auto& [e, f] : cdf) {
    out += format_double(e);
    out += ',';
    out += format_double(f);
    out += '\n';
  }
  return out;
}

namespace {

TensorSpec tensor(std::string name, std::vector<long> dims, std::vector<double> data) {
  TensorSpec t;
  t.name = std::move(name);
  t.dims = std::move(dims);
  t.data_type = Repr::FP64;
  t.data = std::move(data);
  return t;
}

std::vector<double> draw(Rng& rng, long n, double lo, double hi) {
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

NodeSpec node(std::string name, std::string op, std::vector<std::string> ins,
              std::string out, nlohmann::json attrs = nlohmann::json::object()) {
  NodeSpec n;
  n.name = std::move(name);
  n.op_type = std::move(op);
  n.inputs = std::move(ins);
  n.outputs = {std::move(out)};
  n.attributes = std::move(attrs);
  return n;
}

}  // namespace

UseCase generate_usecase(const std::string& arch, std::uint64_t seed, long n_samples) {
  if (n_samples < 2) throw PreconditionViolated("generate_usecase: need n >= 2");
  Rng rng(seed);
  UseCase uc;
  GraphSpec& g = uc.model.graph;
  uc.model.ir_version = 1;
  uc.model.opset_imports = {{"ai.onnx", 17}};
  long p = 20;
  if (arch == "linear-like") {
    g.name = "linear_like";
    g.graph_inputs.push_back(tensor("x", {1, p}, {}));
    g.graph_inputs.back().data.reset();
    long widths[] = {24, 16, 1};
    long in_w = p;
    std::string cur = "x";
    for (int layer = 0; layer < 3; ++layer) {
      long out_w = widths[layer];
      std::string base = "dense" + std::to_string(layer + 1);
      g.initializers.push_back(tensor(base + "_w", {in_w, out_w}, draw(rng, in_w * out_w, -1, 1)));
      g.initializers.push_back(tensor(base + "_b", {out_w}, draw(rng, out_w, -1, 1)));
      g.nodes.push_back(node(base, "Gemm", {cur, base + "_w", base + "_b"}, base + "_out"));
      g.nodes.push_back(node(base + "_act", "Relu", {base + "_out"}, base + "_relu"));
      cur = base + "_relu";
      in_w = out_w;
    }
    g.graph_outputs = {cur};
  } else if (arch == "lstm-like") {
    g.name = "lstm_like";
    long T = 16, H = 8;
    g.graph_inputs.push_back(tensor("x", {T, p}, {}));
    g.graph_inputs.back().data.reset();
    std::string cur = "x";
    long in_w = p;
    for (int layer = 0; layer < 3; ++layer) {
      std::string base = "lstm" + std::to_string(layer + 1);
      g.initializers.push_back(tensor(base + "_w", {2, 4 * H, in_w}, draw(rng, 2 * 4 * H * in_w, -1, 1)));
      g.initializers.push_back(tensor(base + "_r", {2, 4 * H, H}, draw(rng, 2 * 4 * H * H, -1, 1)));
      g.initializers.push_back(tensor(base + "_b", {2, 8 * H}, draw(rng, 2 * 8 * H, -1, 1)));
      g.nodes.push_back(node(base, "LSTM", {cur, base + "_w", base + "_r", base + "_b"},
                             base + "_out",
                             {{"hidden_size", H}, {"direction", "bidirectional"}}));
      cur = base + "_out";
      in_w = 2 * H;
    }
    long flat = T * 2 * H;
    g.nodes.push_back(node("flatten", "Reshape", {cur}, "flat",
                           {{"shape", nlohmann::json::array({1, flat})}}));
    g.initializers.push_back(tensor("head_w", {flat, 1}, draw(rng, flat, -1, 1)));
    g.initializers.push_back(tensor("head_b", {1}, draw(rng, 1, -1, 1)));
    g.nodes.push_back(node("head", "Gemm", {"flat", "head_w", "head_b"}, "y"));
    g.graph_outputs = {"y"};
    p = T * p;
  } else {
    throw PreconditionViolated("generate_usecase: unknown arch " + arch);
  }

  uc.inputs = Matrix(n_samples, p);
  for (double& v : uc.inputs.data) v = rng.uniform(-3, 3);

  ExecConfig cfg;  // FP64 strict run defines the noiseless target
  PredictionSet ps = run(uc.model, cfg, uc.inputs);
  double mean = 0;
  for (long i = 0; i < n_samples; ++i) mean += ps.outputs.at(i, 0);
  mean /= static_cast<double>(n_samples);
  double var = 0;
  for (long i = 0; i < n_samples; ++i) {
    double d = ps.outputs.at(i, 0) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n_samples);
  double sigma = 0.1 * std::sqrt(var);
  if (sigma == 0) sigma = 0.1;
  uc.ground_truth.resize(static_cast<size_t>(n_samples));
  for (long i = 0; i < n_samples; ++i)
    uc.ground_truth[static_cast<size_t>(i)] = ps.outputs.at(i, 0) + sigma * rng.gauss();
  return uc;
}

Matrix latin_hypercube(std::uint64_t seed, long n, long p, double lo, double hi) {
  if (n < 1 || p < 1 || !(hi > lo)) throw PreconditionViolated("latin_hypercube: bad params");
  Rng rng(seed);
  Matrix m(n, p);
  std::vector<long> perm(static_cast<size_t>(n));
  for (long c = 0; c < p; ++c) {
    for (long i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    for (long i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(rng.integer(0, i))]);
    for (long r = 0; r < n; ++r) {
      double stratum = static_cast<double>(perm[static_cast<size_t>(r)]);
      m.at(r, c) = lo + (hi - lo) * (stratum + rng.unit()) / static_cast<double>(n);
    }
  }
  return m;
}

std::vector<MetricBound> parse_bounds(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("bounds file: ") + e.what());
  }
  if (!j.is_array() || j.empty()) throw SchemaError("bounds file must be a non-empty array");
  std::vector<MetricBound> bounds;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("metric") || !e.contains("R"))
      throw SchemaError("each bound needs \"metric\" and \"R\"");
    MetricBound b;
    b.metric = metric_from_name(e.at("metric").get<std::string>());
    if (!e.at("R").is_number()) throw SchemaError("bound R must be a number");
    b.R = e.at("R").get<double>();
    std::string dir = e.value("direction", metric_is_ge(b.metric) ? "ge" : "le");
    if (dir != "le" && dir != "ge") throw SchemaError("direction must be \"le\" or \"ge\"");
    b.ge = dir == "ge";
    if (b.ge != metric_is_ge(b.metric))
      throw SchemaError("direction " + dir + " not valid for " + metric_name(b.metric));
    if (e.contains("params")) {
      const auto& p = e.at("params");
      b.N = p.value("N", b.N);
      b.iou_t = p.value("iou_t", b.iou_t);
    }
    bounds.push_back(b);
  }
  return bounds;
}

std::string report_json(const std::string& model_name, const std::string& repr,
                        const std::string& acc, const std::string& dataset_id,
                        const TfmVerdict* tfm, const ReplicationReport* rep,
                        const std::string& cdf_csv_path) {
  nlohmann::json j;
  j["config"] = {{"model", model_name},
                 {"repr", repr},
                 {"accumulation", acc},
                 {"dataset_id", dataset_id}};
  if (tfm) {
    nlohmann::json rows = nlohmann::json::array();
    for (const TfmRow& r : tfm->rows)
      rows.push_back({{"metric", metric_name(r.metric)},
                      {"M1", r.M1},
                      {"R", r.R},
                      {"pass", r.pass},
                      {"eps_M", r.eps_M},
                      {"eps_exact", r.eps_exact},
                      {"feasible", r.feasible}});
    j["tfm_verdict"] = {{"rows", rows}, {"pass", tfm->pass}};
    if (tfm->eps_max_valid) j["eps_max"] = tfm->eps_max;
  }
  if (rep) {
    j["replication"] = {{"max_abs_eps", rep->max_abs},
                        {"status", rep->status},
                        {"violations", rep->violations},
                        {"eps_max", rep->eps_max},
                        {"worst_sample", rep->worst_sample}};
  }
  if (!cdf_csv_path.empty()) j["cdf_csv_path"] = cdf_csv_path;
  return j.dump(2) + "\n";
}

}  // namespace replicheck
