#include "replicheck/interpreter.hpp"

#include <cmath>
#include <map>

#include "replicheck/errors.hpp"

namespace replicheck {

namespace {

struct Tensor {
  std::vector<long> dims;
  std::vector<double> vals;
};

// Per-sample graph executor. All scalar arithmetic goes through numerics;
// every intermediate value lands on the representation's grid before reuse.
class Executor {
 public:
  Executor(const ModelSpec& m, const ExecConfig& cfg) : m_(m), cfg_(cfg) {
    auto violations = validate_model(m);
    if (!violations.empty())
      throw Error("run: invalid model: " + violations.front().kind + " on '" +
                  violations.front().subject + "'");
    shapes_ = infer_shapes(m);
    quant_ = is_int(cfg.repr);
    if (quant_) {
      if (!cfg.quant_calibration)
        throw UncalibratedQuant("INT execution requires a calibration dataset");
      width_ = int_width(cfg.repr);
      calibrate_scales(*cfg.quant_calibration);
    }
    load_initializers();
  }

  PredictionSet run_batch(const Matrix& batch) {
    long p = input_width();
    if (batch.cols != p)
      throw ShapeMismatch("batch has " + std::to_string(batch.cols) +
                          " columns, graph inputs need " + std::to_string(p));
    PredictionSet ps;
    ps.inputs = batch;
    long m_out = output_width();
    ps.outputs = Matrix(batch.rows, m_out);
    flags_ = ExecFlags{};
    for (long r = 0; r < batch.rows; ++r) {
      std::span<const double> row(batch.data.data() + static_cast<size_t>(r) * p,
                                  static_cast<size_t>(p));
      auto out = exec_sample(row, nullptr);
      for (long c = 0; c < m_out; ++c) ps.outputs.at(r, c) = out[c];
    }
    ps.overflow_count = flags_.overflow;
    ps.saturation_count = flags_.saturated;
    return ps;
  }

  long input_width() const {
    long p = 0;
    for (const auto& t : m_.graph.graph_inputs) p += num_elements(t.dims);
    return p;
  }

  long output_width() const {
    long w = 0;
    for (const auto& o : m_.graph.graph_outputs) w += num_elements(shapes_.at(o));
    return w;
  }

 private:
  using Stats = std::map<std::string, double>;

  void note(Stats* stats, const std::string& key, double v) const {
    if (!stats) return;
    double a = std::fabs(v);
    auto [it, fresh] = stats->emplace(key, a);
    if (!fresh && a > it->second) it->second = a;
  }

  void calibrate_scales(const Matrix& calib) {
    // FP64 pass over the calibration batch collects per-tensor magnitudes.
    Stats stats;
    for (const auto& t : m_.graph.initializers)
      for (double v : *t.data) note(&stats, t.name, v);
    long p = input_width();
    if (calib.cols != p) throw ShapeMismatch("calibration batch width mismatch");
    bool saved_quant = quant_;
    Repr saved_repr = cfg_.repr;
    quant_ = false;
    cfg_.repr = Repr::FP64;
    load_initializers();
    for (long r = 0; r < calib.rows; ++r) {
      std::span<const double> row(calib.data.data() + static_cast<size_t>(r) * p,
                                  static_cast<size_t>(p));
      exec_sample(row, &stats);
    }
    quant_ = saved_quant;
    cfg_.repr = saved_repr;
    for (const auto& [key, maxabs] : stats) scales_[key] = calibrate(width_, maxabs);
  }

  const QuantParams& scale_of(const std::string& key) {
    auto it = scales_.find(key);
    if (it == scales_.end())
      it = scales_.emplace(key, calibrate(width_, 1.0)).first;
    return it->second;
  }

  // Snap v onto the quantization grid of the named tensor.
  double qgrid(const std::string& key, double v) {
    const QuantParams& q = scale_of(key);
    return dequantize(q, quantize(q, v, &flags_));
  }

  void load_initializers() {
    init_cache_.clear();
    for (const auto& t : m_.graph.initializers) {
      Tensor tensor;
      tensor.dims = t.dims;
      tensor.vals.reserve(t.data->size());
      for (double v : *t.data)
        tensor.vals.push_back(quant_ ? qgrid(t.name, v) : round_to(cfg_.repr, v, &flags_));
      init_cache_[t.name] = std::move(tensor);
    }
  }

  // Inner product of two strided views, reduction index ascending. FP kinds
  // round each product then accumulate; INT kinds accumulate exact integer
  // products and rescale once.
  double dot(const std::vector<double>& a, size_t a0, size_t astep, double ascale,
             const std::vector<double>& b, size_t b0, size_t bstep, double bscale,
             long k) {
    if (quant_) {
      std::int64_t acc = 0;
      for (long i = 0; i < k; ++i) {
        auto qa = static_cast<std::int64_t>(std::llround(a[a0 + i * astep] / ascale));
        auto qb = static_cast<std::int64_t>(std::llround(b[b0 + i * bstep] / bscale));
        acc += qa * qb;
      }
      return static_cast<double>(acc) * ascale * bscale;
    }
    scratch_.clear();
    for (long i = 0; i < k; ++i)
      scratch_.push_back(fp_op(cfg_.repr, '*', a[a0 + i * astep], b[b0 + i * bstep], &flags_));
    return accumulate(cfg_.repr, cfg_.acc, scratch_, &flags_);
  }

  double activation(const std::string& f, double x, const std::string& out_key) {
    if (quant_) {
      double y = f == "relu"    ? (x > 0.0 ? x : 0.0)
                 : f == "tanh"  ? std::tanh(x)
                                : 1.0 / (1.0 + std::exp(-x));
      return qgrid(out_key, y);
    }
    return transcendental(cfg_.repr, f == "sigmoid" ? "sigmoid" : f, x, &flags_);
  }

  std::vector<double> exec_sample(std::span<const double> row, Stats* stats) {
    std::map<std::string, Tensor> tensors;
    for (const auto& [name, t] : init_cache_) tensors[name] = t;

    size_t offset = 0;
    for (const auto& in : m_.graph.graph_inputs) {
      Tensor t;
      t.dims = in.dims;
      long n = num_elements(in.dims);
      for (long i = 0; i < n; ++i) {
        double v = row[offset + i];
        note(stats, in.name, v);
        t.vals.push_back(quant_ ? qgrid(in.name, v) : round_to(cfg_.repr, v, &flags_));
      }
      offset += n;
      tensors[in.name] = std::move(t);
    }

    for (const auto& n : m_.graph.nodes) {
      Tensor out = exec_node(n, tensors, stats);
      if (stats)
        for (double v : out.vals) note(stats, n.outputs[0], v);
      tensors[n.outputs[0]] = std::move(out);
    }

    std::vector<double> result;
    for (const auto& go : m_.graph.graph_outputs) {
      const Tensor& t = tensors.at(go);
      result.insert(result.end(), t.vals.begin(), t.vals.end());
    }
    return result;
  }

  Tensor exec_node(const NodeSpec& n, std::map<std::string, Tensor>& tensors, Stats* stats) {
    const std::string& out_name = n.outputs[0];
    Tensor out;
    out.dims = shapes_.at(out_name);
    out.vals.resize(static_cast<size_t>(num_elements(out.dims)));

    auto in = [&](size_t i) -> const Tensor& { return tensors.at(n.inputs[i]); };
    auto in_scale = [&](size_t i) -> double {
      return quant_ ? scale_of(n.inputs[i]).scale : 1.0;
    };

    if (n.op_type == "MatMul" || n.op_type == "Gemm") {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      bool ta = n.op_type == "Gemm" && attr_int(n, "transA", 0) != 0;
      bool tb = n.op_type == "Gemm" && attr_int(n, "transB", 0) != 0;
      long rows = ta ? a.dims[1] : a.dims[0];
      long k = ta ? a.dims[0] : a.dims[1];
      long cols = tb ? b.dims[0] : b.dims[1];
      double alpha = attr_double(n, "alpha", 1.0);
      double beta = attr_double(n, "beta", 1.0);
      const Tensor* c = n.op_type == "Gemm" && n.inputs.size() == 3 ? &in(2) : nullptr;
      for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) {
          size_t a0 = ta ? static_cast<size_t>(i) : static_cast<size_t>(i) * a.dims[1];
          size_t astep = ta ? static_cast<size_t>(a.dims[1]) : 1;
          size_t b0 = tb ? static_cast<size_t>(j) * b.dims[1] : static_cast<size_t>(j);
          size_t bstep = tb ? 1 : static_cast<size_t>(b.dims[1]);
          double v = dot(a.vals, a0, astep, in_scale(0), b.vals, b0, bstep, in_scale(1), k);
          if (quant_) {
            if (alpha != 1.0) v *= alpha;
            if (c) {
              double cv = c->vals[bias_index(*c, i, j, cols)];
              v += beta * cv;
            }
            v = qgrid(out_name, v);
          } else {
            if (alpha != 1.0)
              v = fp_op(cfg_.repr, '*', round_to(cfg_.repr, alpha, &flags_), v, &flags_);
            if (c) {
              double cv = c->vals[bias_index(*c, i, j, cols)];
              if (beta != 1.0)
                cv = fp_op(cfg_.repr, '*', round_to(cfg_.repr, beta, &flags_), cv, &flags_);
              v = fp_op(cfg_.repr, '+', v, cv, &flags_);
            }
          }
          out.vals[static_cast<size_t>(i) * cols + j] = v;
        }
      }
    } else if (n.op_type == "Add") {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      long cols = a.dims.size() == 2 ? a.dims[1] : static_cast<long>(a.vals.size());
      for (size_t i = 0; i < a.vals.size(); ++i) {
        double bv;
        if (b.vals.size() == a.vals.size())
          bv = b.vals[i];
        else if (b.vals.size() == 1)
          bv = b.vals[0];
        else
          bv = b.vals[i % static_cast<size_t>(cols)];  // row broadcast
        out.vals[i] = quant_ ? qgrid(out_name, a.vals[i] + bv)
                             : fp_op(cfg_.repr, '+', a.vals[i], bv, &flags_);
      }
    } else if (n.op_type == "Relu" || n.op_type == "Sigmoid" || n.op_type == "Tanh") {
      std::string f = n.op_type == "Relu" ? "relu" : n.op_type == "Sigmoid" ? "sigmoid" : "tanh";
      const Tensor& a = in(0);
      for (size_t i = 0; i < a.vals.size(); ++i) out.vals[i] = activation(f, a.vals[i], out_name);
    } else if (n.op_type == "Concat") {
      long axis = attr_int(n, "axis", 0);
      // Supported layouts are 1-D and 2-D tensors.
      if (out.dims.size() == 1 || axis == 0) {
        size_t pos = 0;
        for (size_t i = 0; i < n.inputs.size(); ++i)
          for (double v : in(i).vals)
            out.vals[pos++] = quant_ ? qgrid(out_name, v) : v;
      } else {
        long rows = out.dims[0], cols = out.dims[1];
        for (long r = 0; r < rows; ++r) {
          long col = 0;
          for (size_t i = 0; i < n.inputs.size(); ++i) {
            const Tensor& t = in(i);
            for (long c = 0; c < t.dims[1]; ++c) {
              double v = t.vals[static_cast<size_t>(r) * t.dims[1] + c];
              out.vals[static_cast<size_t>(r) * cols + col + c] =
                  quant_ ? qgrid(out_name, v) : v;
            }
            col += t.dims[1];
          }
        }
      }
    } else if (n.op_type == "Reshape") {
      const Tensor& a = in(0);
      for (size_t i = 0; i < a.vals.size(); ++i)
        out.vals[i] = quant_ ? qgrid(out_name, a.vals[i]) : a.vals[i];
    } else if (n.op_type == "LSTM") {
      exec_lstm(n, tensors, out, stats);
    } else {
      throw UnsupportedOp("exec: " + n.op_type);
    }
    return out;
  }

  static size_t bias_index(const Tensor& c, long i, long j, long cols) {
    if (static_cast<long>(c.vals.size()) == cols) return static_cast<size_t>(j);
    if (c.vals.size() == 1) return 0;
    return static_cast<size_t>(i) * cols + j;
  }

  // Gate order i, f, g, o; c = f*c + i*g; h = o*tanh(c). Bidirectional runs a
  // reversed pass and concatenates [h_fwd, h_bwd] per timestep.
  void exec_lstm(const NodeSpec& n, std::map<std::string, Tensor>& tensors, Tensor& out,
                 Stats* stats) {
    const Tensor& x = tensors.at(n.inputs[0]);
    const Tensor& w = tensors.at(n.inputs[1]);
    const Tensor& rw = tensors.at(n.inputs[2]);
    const Tensor& b = tensors.at(n.inputs[3]);
    long T = x.dims[0], p = x.dims[1];
    long H = attr_int(n, "hidden_size", 0);
    long D = attr_string(n, "direction", "forward") == "bidirectional" ? 2 : 1;
    long out_cols = D * H;

    double sx = quant_ ? scale_of(n.inputs[0]).scale : 1.0;
    double sw = quant_ ? scale_of(n.inputs[1]).scale : 1.0;
    double sr = quant_ ? scale_of(n.inputs[2]).scale : 1.0;
    std::string hkey = n.name + "#h";
    std::string ckey = n.name + "#c";
    double sh = quant_ ? scale_of(hkey).scale : 1.0;
    QuantParams gate_q = quant_ ? calibrate(width_, 1.0) : QuantParams{};

    for (long d = 0; d < D; ++d) {
      std::vector<double> h(static_cast<size_t>(H), 0.0), c(static_cast<size_t>(H), 0.0);
      size_t wbase = static_cast<size_t>(d) * 4 * H * p;
      size_t rbase = static_cast<size_t>(d) * 4 * H * H;
      size_t bbase = static_cast<size_t>(d) * 8 * H;
      for (long step = 0; step < T; ++step) {
        long t = d == 0 ? step : T - 1 - step;
        std::vector<double> h_new(static_cast<size_t>(H)), c_new(static_cast<size_t>(H));
        for (long u = 0; u < H; ++u) {
          double gates[4];
          for (int k = 0; k < 4; ++k) {
            size_t wrow = wbase + static_cast<size_t>(k * H + u) * p;
            size_t rrow = rbase + static_cast<size_t>(k * H + u) * H;
            double wx = dot(w.vals, wrow, 1, sw, x.vals, static_cast<size_t>(t) * p, 1, sx, p);
            double rh = dot(rw.vals, rrow, 1, sr, h, 0, 1, sh, H);
            double wb = b.vals[bbase + static_cast<size_t>(k * H + u)];
            double rb = b.vals[bbase + static_cast<size_t>(4 * H + k * H + u)];
            double pre;
            if (quant_) {
              pre = wx + rh + wb + rb;
            } else {
              pre = fp_op(cfg_.repr, '+', wx, rh, &flags_);
              pre = fp_op(cfg_.repr, '+', pre, fp_op(cfg_.repr, '+', wb, rb, &flags_), &flags_);
            }
            const char* act = k == 2 ? "tanh" : "sigmoid";
            if (quant_) {
              double y = k == 2 ? std::tanh(pre) : 1.0 / (1.0 + std::exp(-pre));
              gates[k] = dequantize(gate_q, quantize(gate_q, y, &flags_));
            } else {
              gates[k] = transcendental(cfg_.repr, act, pre, &flags_);
            }
          }
          double gi = gates[0], gf = gates[1], gg = gates[2], go = gates[3];
          if (quant_) {
            c_new[u] = qgrid(ckey, gf * c[u] + gi * gg);
            h_new[u] = qgrid(hkey, go * std::tanh(c_new[u]));
            note(stats, ckey, c_new[u]);
            note(stats, hkey, h_new[u]);
          } else {
            c_new[u] = fp_op(cfg_.repr, '+', fp_op(cfg_.repr, '*', gf, c[u], &flags_),
                             fp_op(cfg_.repr, '*', gi, gg, &flags_), &flags_);
            h_new[u] = fp_op(cfg_.repr, '*', go,
                             transcendental(cfg_.repr, "tanh", c_new[u], &flags_), &flags_);
            note(stats, ckey, c_new[u]);
            note(stats, hkey, h_new[u]);
          }
          out.vals[static_cast<size_t>(t) * out_cols + d * H + u] = h_new[u];
        }
        h = std::move(h_new);
        c = std::move(c_new);
      }
    }
  }

  const ModelSpec& m_;
  ExecConfig cfg_;
  std::map<std::string, std::vector<long>> shapes_;
  std::map<std::string, Tensor> init_cache_;
  std::map<std::string, QuantParams> scales_;
  std::vector<double> scratch_;
  ExecFlags flags_;
  bool quant_ = false;
  int width_ = 16;
};

}  // namespace

PredictionSet run(const ModelSpec& m, const ExecConfig& cfg, const Matrix& batch) {
  Executor ex(m, cfg);
  return ex.run_batch(batch);
}

RunDiff compare_runs(const PredictionSet& a, const PredictionSet& b) {
  if (a.outputs.rows != b.outputs.rows || a.outputs.cols != b.outputs.cols)
    throw ShapeMismatch("compare_runs: prediction shapes differ");
  RunDiff d;
  d.eps = Matrix(a.outputs.rows, a.outputs.cols);
  d.per_sample_max.resize(static_cast<size_t>(a.outputs.rows), 0.0);
  for (long r = 0; r < a.outputs.rows; ++r) {
    double row_max = 0.0;
    for (long c = 0; c < a.outputs.cols; ++c) {
      double e = b.outputs.at(r, c) - a.outputs.at(r, c);
      d.eps.at(r, c) = e;
      row_max = std::max(row_max, std::fabs(e));
    }
    d.per_sample_max[static_cast<size_t>(r)] = row_max;
    if (row_max > d.max_abs) {
      d.max_abs = row_max;
      d.worst_sample = r;
    }
  }
  return d;
}

}  // namespace replicheck
