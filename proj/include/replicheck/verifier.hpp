#ifndef REPLICHECK_VERIFIER_HPP
#define REPLICHECK_VERIFIER_HPP

#include <optional>
#include <string>
#include <vector>

#include "replicheck/interpreter.hpp"
#include "replicheck/metrics.hpp"
#include "replicheck/mlmd.hpp"

namespace replicheck {

struct TfmRow {
  Metric metric = Metric::MAE;
  double M1 = 0;
  double R = 0;
  bool pass = false;
  double eps_M = 0;      // published-table margin
  double eps_exact = 0;  // finite-n worst-case margin (the sound one)
  bool feasible = false;
};

struct TfmVerdict {
  std::vector<TfmRow> rows;
  bool pass = false;
  // min over rows of min(eps_M, eps_exact); meaningless unless pass.
  double eps_max = 0;
  bool eps_max_valid = false;
};

// Computes every requested metric of pred1 vs gt, checks it against its bound
// and derives the margin. TopN bounds additionally need logits + gt_class.
TfmVerdict tfm_verify(std::span<const double> gt, std::span<const double> pred1,
                      const std::vector<MetricBound>& bounds,
                      const Matrix* logits = nullptr,
                      const std::vector<long>* gt_class = nullptr,
                      std::span<const double> lut_grid = {});

struct ReplicationReport {
  std::vector<double> per_sample_max;
  double max_abs = 0;
  long worst_sample = -1;
  double eps_max = 0;
  std::string status;  // REPLICATED | INCONCLUSIVE
  long violations = 0;
  long first_violation = -1;
  std::string dataset_id;
};

// Pure prediction-vs-prediction check; never sees ground truth.
ReplicationReport replicate_verify(const PredictionSet& pred1, const PredictionSet& pred2,
                                   double eps_max, const std::string& dataset_id = "");

// Sorted signed errors with cumulative fraction k/n.
std::vector<std::pair<double, double>> emit_cdf(std::span<const double> errors);
std::string cdf_to_csv(const std::vector<std::pair<double, double>>& cdf);

struct UseCase {
  ModelSpec model;
  Matrix inputs;       // n x p (lstm windows flattened row-major)
  std::vector<double> ground_truth;  // n values (single-output models)
};

// linear-like: 3 Dense+ReLU pairs, 20 -> 24 -> 16 -> 1.
// lstm-like: 3 bidirectional LSTM (H = 8) over a 16 x 20 window, then Dense.
// Ground truth is the FP64 strict run plus seeded Gaussian noise.
UseCase generate_usecase(const std::string& arch, std::uint64_t seed, long n_samples);

// Latin-Hypercube batch in [lo, hi]^p: one sample per stratum per dimension.
Matrix latin_hypercube(std::uint64_t seed, long n, long p, double lo, double hi);

// Bounds file: JSON list of {"metric": str, "direction": "le"|"ge",
// "R": number, "params": {"N": int, "iou_t": number}}. Throws SchemaError.
std::vector<MetricBound> parse_bounds(const std::string& json_text);

// Report envelope for the CLI (JSON text).
std::string report_json(const std::string& model_name, const std::string& repr,
                        const std::string& acc, const std::string& dataset_id,
                        const TfmVerdict* tfm, const ReplicationReport* rep,
                        const std::string& cdf_csv_path);

}  // namespace replicheck

#endif
