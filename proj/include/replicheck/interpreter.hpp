#ifndef REPLICHECK_INTERPRETER_HPP
#define REPLICHECK_INTERPRETER_HPP

#include "replicheck/io.hpp"
#include "replicheck/mlmd.hpp"
#include "replicheck/numerics.hpp"

namespace replicheck {

struct ExecConfig {
  Repr repr = Repr::FP64;
  AccMode acc = AccMode::NaiveLTR;
  // INT kinds require a calibration batch; per-tensor scales are derived from
  // an FP64 pass over it plus the initializer data.
  const Matrix* quant_calibration = nullptr;
};

struct PredictionSet {
  Matrix inputs;   // n x p
  Matrix outputs;  // n x m, every value on the representation's grid
  long overflow_count = 0;
  long saturation_count = 0;
};

// Executes the graph on each batch row independently, nodes in listed order,
// with strict scalar rounding into cfg.repr (no hidden extended precision).
// Throws ShapeMismatch / UncalibratedQuant.
PredictionSet run(const ModelSpec& m, const ExecConfig& cfg, const Matrix& batch);

struct RunDiff {
  Matrix eps;              // b.outputs - a.outputs, exact FP64 subtraction
  double max_abs = 0.0;    // over all samples and components
  long worst_sample = -1;
  std::vector<double> per_sample_max;  // max-component |eps_i| per sample
};

RunDiff compare_runs(const PredictionSet& a, const PredictionSet& b);

}  // namespace replicheck

#endif
