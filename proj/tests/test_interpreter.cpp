#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "replicheck/errors.hpp"
#include "replicheck/interpreter.hpp"
#include "replicheck/rng.hpp"

using namespace replicheck;

namespace {

TensorSpec tensor(const std::string& name, std::vector<long> dims,
                  std::vector<double> data, bool with_data = true) {
  TensorSpec t;
  t.name = name;
  t.dims = std::move(dims);
  t.data_type = Repr::FP64;
  if (with_data) t.data = std::move(data);
  return t;
}

NodeSpec node(const std::string& name, const std::string& op,
              std::vector<std::string> ins, const std::string& out,
              nlohmann::json attrs = nlohmann::json::object()) {
  NodeSpec n;
  n.name = name;
  n.op_type = op;
  n.inputs = std::move(ins);
  n.outputs = {out};
  n.attributes = std::move(attrs);
  return n;
}

ModelSpec shell(const std::string& name) {
  ModelSpec m;
  m.ir_version = 1;
  m.opset_imports = {{"ai.onnx", 13}};
  m.graph.name = name;
  return m;
}

// x(1,2) -> Gemm with W=[[1,2],[3,4]] -> y
ModelSpec gemm_fixture() {
  ModelSpec m = shell("g");
  m.graph.graph_inputs.push_back(tensor("x", {1, 2}, {}, false));
  m.graph.initializers.push_back(tensor("w", {2, 2}, {1, 2, 3, 4}));
  m.graph.nodes.push_back(node("gemm", "Gemm", {"x", "w"}, "y"));
  m.graph.graph_outputs = {"y"};
  return m;
}

// Random 3-layer Dense/ReLU net; returns (model, widths).
ModelSpec dense3(Rng& rng, long p, std::vector<long> widths) {
  ModelSpec m = shell("d3");
  m.graph.graph_inputs.push_back(tensor("x", {1, p}, {}, false));
  std::string cur = "x";
  long in_w = p;
  for (size_t l = 0; l < widths.size(); ++l) {
    long out_w = widths[l];
    std::string base = "d" + std::to_string(l);
    std::vector<double> w(static_cast<size_t>(in_w * out_w)), b(static_cast<size_t>(out_w));
    for (double& v : w) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);
    m.graph.initializers.push_back(tensor(base + "_w", {in_w, out_w}, w));
    m.graph.initializers.push_back(tensor(base + "_b", {out_w}, b));
    m.graph.nodes.push_back(node(base, "Gemm", {cur, base + "_w", base + "_b"}, base + "_o"));
    m.graph.nodes.push_back(node(base + "_r", "Relu", {base + "_o"}, base + "_a"));
    cur = base + "_a";
    in_w = out_w;
  }
  m.graph.graph_outputs = {cur};
  return m;
}

Matrix row(std::vector<double> vals) {
  Matrix m(1, static_cast<long>(vals.size()));
  m.data = std::move(vals);
  return m;
}

}  // namespace

TEST_CASE("identity Add rounds inputs into the representation") {
  ModelSpec m = shell("id");
  m.graph.graph_inputs.push_back(tensor("x", {1, 3}, {}, false));
  m.graph.initializers.push_back(tensor("z", {3}, {0, 0, 0}));
  m.graph.nodes.push_back(node("add", "Add", {"x", "z"}, "y"));
  m.graph.graph_outputs = {"y"};
  Matrix batch = row({0.1, -2.5, 1.0 + std::ldexp(1.0, -9)});
  for (Repr r : {Repr::FP64, Repr::FP32, Repr::FP16, Repr::BF16}) {
    ExecConfig cfg;
    cfg.repr = r;
    PredictionSet ps = run(m, cfg, batch);
    for (long c = 0; c < 3; ++c)
      CHECK(ps.outputs.at(0, c) == round_to(r, batch.at(0, c)));
  }
}

TEST_CASE("single Gemm FP64") {
  PredictionSet ps = run(gemm_fixture(), ExecConfig{}, row({1, 1}));
  CHECK(ps.outputs.at(0, 0) == 4.0);
  CHECK(ps.outputs.at(0, 1) == 6.0);
}

TEST_CASE("Gemm transpose flags and alpha/beta") {
  ModelSpec m = gemm_fixture();
  m.graph.nodes[0].attributes = {{"transB", 1}, {"alpha", 2.0}};
  // y = 2 * x * W^T = 2 * [1*1+1*2, 1*3+1*4]
  PredictionSet ps = run(m, ExecConfig{}, row({1, 1}));
  CHECK(ps.outputs.at(0, 0) == 6.0);
  CHECK(ps.outputs.at(0, 1) == 14.0);
}

TEST_CASE("run rejects invalid models and wrong batches") {
  ModelSpec m = gemm_fixture();
  CHECK_THROWS_AS(run(m, ExecConfig{}, Matrix(1, 3)), ShapeMismatch);
  m.graph.initializers.clear();
  CHECK_THROWS_AS(run(m, ExecConfig{}, row({1, 1})), Error);
}

TEST_CASE("compare_runs") {
  PredictionSet a = run(gemm_fixture(), ExecConfig{}, row({1, 1}));
  RunDiff self = compare_runs(a, a);
  CHECK(self.max_abs == 0.0);
  PredictionSet b = a;
  b.outputs.at(0, 1) = 6.25;
  RunDiff d = compare_runs(a, b);
  CHECK(d.eps.at(0, 1) == 0.25);
  CHECK(d.max_abs == 0.25);
  CHECK(d.worst_sample == 0);
  b.outputs = Matrix(2, 2);
  CHECK_THROWS_AS(compare_runs(a, b), ShapeMismatch);
}

TEST_CASE("FP64 affine graph matches a dense oracle") {
  Rng rng(17);
  ModelSpec m = shell("affine");
  long p = 6, q = 4;
  std::vector<double> w(static_cast<size_t>(p * q)), b(static_cast<size_t>(q));
  for (double& v : w) v = rng.uniform(-1, 1);
  for (double& v : b) v = rng.uniform(-1, 1);
  m.graph.graph_inputs.push_back(tensor("x", {1, p}, {}, false));
  m.graph.initializers.push_back(tensor("w", {p, q}, w));
  m.graph.initializers.push_back(tensor("b", {q}, b));
  m.graph.nodes.push_back(node("g", "Gemm", {"x", "w", "b"}, "y"));
  m.graph.graph_outputs = {"y"};
  Matrix batch(8, p);
  for (double& v : batch.data) v = rng.uniform(-3, 3);
  PredictionSet ps = run(m, ExecConfig{}, batch);
  for (long r = 0; r < 8; ++r)
    for (long j = 0; j < q; ++j) {
      double acc = 0;
      for (long k = 0; k < p; ++k) acc += batch.at(r, k) * w[static_cast<size_t>(k * q + j)];
      acc += b[static_cast<size_t>(j)];
      CHECK(ps.outputs.at(r, j) == doctest::Approx(acc).epsilon(1e-15));
    }
}

TEST_CASE("FP32 forward error on a Dense/ReLU stack stays within the textbook bound") {
  Rng rng(99);
  ModelSpec m = dense3(rng, 12, {16, 16, 4});
  Matrix batch(32, 12);
  for (double& v : batch.data) v = rng.uniform(-3, 3);
  ExecConfig c64, c32;
  c32.repr = Repr::FP32;
  PredictionSet a = run(m, c64, batch);
  PredictionSet b = run(m, c32, batch);
  // crude activation magnitude bound: max |output| over the FP64 run of every
  // truncated prefix of the network
  double act = 0;
  ModelSpec probe = m;
  for (size_t upto = 1; upto <= m.graph.nodes.size(); ++upto) {
    probe.graph.nodes.assign(m.graph.nodes.begin(), m.graph.nodes.begin() + static_cast<long>(upto));
    probe.graph.graph_outputs = {probe.graph.nodes.back().outputs[0]};
    PredictionSet pp = run(probe, c64, batch);
    for (double v : pp.outputs.data) act = std::max(act, std::fabs(v));
  }
  double bound = 10.0 * 16 * std::ldexp(1.0, -24) * act;
  CHECK(compare_runs(a, b).max_abs < bound);
}

TEST_CASE("strict SL2: no output escapes its grid") {
  Rng rng(3);
  ModelSpec m = dense3(rng, 8, {10, 6, 2});
  Matrix batch(16, 8);
  for (double& v : batch.data) v = rng.uniform(-3, 3);
  for (Repr r : {Repr::FP32, Repr::FP16, Repr::BF16}) {
    ExecConfig cfg;
    cfg.repr = r;
    PredictionSet ps = run(m, cfg, batch);
    for (double v : ps.outputs.data) CHECK(round_to(r, v) == v);
  }
}

TEST_CASE("INT execution requires calibration and orders by width") {
  Rng rng(21);
  ModelSpec m = dense3(rng, 8, {10, 6, 1});
  Matrix batch(64, 8);
  for (double& v : batch.data) v = rng.uniform(-3, 3);
  ExecConfig c10;
  c10.repr = Repr::INT10;
  CHECK_THROWS_AS(run(m, c10, batch), UncalibratedQuant);
  c10.quant_calibration = &batch;
  ExecConfig c16 = c10;
  c16.repr = Repr::INT16;
  PredictionSet base = run(m, ExecConfig{}, batch);
  double e10 = compare_runs(base, run(m, c10, batch)).max_abs;
  double e16 = compare_runs(base, run(m, c16, batch)).max_abs;
  CHECK(e10 > e16);
  CHECK(e16 > 0);
}

TEST_CASE("determinism: identical configs give bit-identical outputs") {
  Rng rng(8);
  ModelSpec m = dense3(rng, 8, {10, 6, 2});
  Matrix batch(16, 8);
  for (double& v : batch.data) v = rng.uniform(-3, 3);
  for (Repr r : {Repr::FP32, Repr::BF16}) {
    ExecConfig cfg;
    cfg.repr = r;
    cfg.acc = AccMode::Kahan;
    CHECK(run(m, cfg, batch).outputs == run(m, cfg, batch).outputs);
  }
}

TEST_CASE("LSTM single step matches a hand oracle") {
  ModelSpec m = shell("l");
  m.graph.graph_inputs.push_back(tensor("x", {1, 1}, {}, false));
  double wi = 0.3, wf = -0.2, wg = 0.7, wo = 0.5;
  double ri = 0.1, rf = 0.2, rg = -0.3, ro = 0.4;
  std::vector<double> bias = {0.05, -0.1, 0.2, 0.0, 0.01, 0.02, 0.03, 0.04};
  m.graph.initializers.push_back(tensor("w", {1, 4, 1}, {wi, wf, wg, wo}));
  m.graph.initializers.push_back(tensor("r", {1, 4, 1}, {ri, rf, rg, ro}));
  m.graph.initializers.push_back(tensor("b", {1, 8}, bias));
  m.graph.nodes.push_back(node("lstm", "LSTM", {"x", "w", "r", "b"}, "h",
                               {{"hidden_size", 1}}));
  m.graph.graph_outputs = {"h"};
  double x = 0.8;
  PredictionSet ps = run(m, ExecConfig{}, row({x}));
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  double gi = sig((wi * x + 0.0) + (bias[0] + bias[4]));
  double gg = std::tanh((wg * x + 0.0) + (bias[2] + bias[6]));
  double go = sig((wo * x + 0.0) + (bias[3] + bias[7]));
  double c = gi * gg;
  CHECK(ps.outputs.at(0, 0) == go * std::tanh(c));
}

TEST_CASE("bidirectional LSTM layout and causality") {
  Rng rng(5);
  ModelSpec m = shell("bi");
  long T = 4, p = 3, H = 2;
  m.graph.graph_inputs.push_back(tensor("x", {T, p}, {}, false));
  auto init = [&](const std::string& name, std::vector<long> dims) {
    std::vector<double> d(static_cast<size_t>(num_elements(dims)));
    for (double& v : d) v = rng.uniform(-1, 1);
    m.graph.initializers.push_back(tensor(name, dims, d));
  };
  init("w", {2, 4 * H, p});
  init("r", {2, 4 * H, H});
  init("b", {2, 8 * H});
  m.graph.nodes.push_back(node("lstm", "LSTM", {"x", "w", "r", "b"}, "h",
                               {{"hidden_size", H}, {"direction", "bidirectional"}}));
  m.graph.graph_outputs = {"h"};
  Matrix batch(1, T * p);
  for (double& v : batch.data) v = rng.uniform(-1, 1);
  PredictionSet a = run(m, ExecConfig{}, batch);
  CHECK(a.outputs.cols == T * 2 * H);

  // forward half of timestep 0 only depends on x[0,:]; backward half of the
  // last timestep only depends on x[T-1,:]
  Matrix mutated = batch;
  for (long j = 0; j < p; ++j) mutated.at(0, (T - 1) * p + j) += 0.5;  // change x[T-1]
  PredictionSet b = run(m, ExecConfig{}, mutated);
  for (long u = 0; u < H; ++u)
    CHECK(a.outputs.at(0, 0 * 2 * H + u) == b.outputs.at(0, 0 * 2 * H + u));

  Matrix mutated2 = batch;
  for (long j = 0; j < p; ++j) mutated2.at(0, j) += 0.5;  // change x[0]
  PredictionSet c = run(m, ExecConfig{}, mutated2);
  for (long u = 0; u < H; ++u)
    CHECK(a.outputs.at(0, (T - 1) * 2 * H + H + u) ==
          c.outputs.at(0, (T - 1) * 2 * H + H + u));
}

TEST_CASE("Add broadcast, Concat, Reshape") {
  ModelSpec m = shell("misc");
  m.graph.graph_inputs.push_back(tensor("x", {2, 3}, {}, false));
  m.graph.initializers.push_back(tensor("b", {3}, {10, 20, 30}));
  m.graph.nodes.push_back(node("add", "Add", {"x", "b"}, "s"));
  m.graph.nodes.push_back(node("cat", "Concat", {"s", "x"}, "c", {{"axis", 1}}));
  m.graph.nodes.push_back(node("rs", "Reshape", {"c"}, "f", {{"shape", {1, 12}}}));
  m.graph.graph_outputs = {"f"};
  Matrix batch = row({1, 2, 3, 4, 5, 6});
  PredictionSet ps = run(m, ExecConfig{}, batch);
  std::vector<double> want = {11, 22, 33, 1, 2, 3, 14, 25, 36, 4, 5, 6};
  CHECK(ps.outputs.data == want);
}
