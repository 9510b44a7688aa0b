// replicheck: semantics-preservation toolkit for MLMD model graphs.
//
// Exit codes: 0 success / verification positive, 1 verification negative or
// runtime failure, 2 usage or input-format error.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "replicheck/errors.hpp"
#include "replicheck/interpreter.hpp"
#include "replicheck/metrics.hpp"
#include "replicheck/mlmd.hpp"
#include "replicheck/symcheck.hpp"
#include "replicheck/verifier.hpp"

namespace {

using namespace replicheck;

ModelSpec load_model(const std::string& path) { return parse_model(read_file(path)); }

std::vector<double> load_column(const std::string& path) {
  Matrix m = read_csv(path);
  if (m.rows == 0) throw Error("empty dataset: " + path);
  return m.data;  // flattened row-major; single-column files stay in order
}

Repr repr_arg(const std::string& s) { return repr_from_string(s); }

PredictionSet run_model(const std::string& model_path, const std::string& dataset_path,
                        const std::string& repr, const std::string& acc,
                        const std::string& calib_path) {
  ModelSpec m = load_model(model_path);
  Matrix data = read_csv(dataset_path);
  if (data.rows == 0) throw Error("empty dataset: " + dataset_path);
  ExecConfig cfg;
  cfg.repr = repr_arg(repr);
  cfg.acc = acc_mode_from_string(acc);
  Matrix calib;
  if (!calib_path.empty()) {
    calib = read_csv(calib_path);
    cfg.quant_calibration = &calib;
  }
  return run(m, cfg, data);
}

std::string predictions_csv(const PredictionSet& ps) {
  std::string out;
  for (long r = 0; r < ps.outputs.rows; ++r) {
    for (long c = 0; c < ps.outputs.cols; ++c) {
      if (c) out += ',';
      out += format_double(ps.outputs.at(r, c));
    }
    out += '\n';
  }
  return out;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    write_file(out_path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"replicheck: MLMD semantics-preservation verifier"};
  app.require_subcommand(1);
  long jobs = 1;
  app.add_option("--jobs", jobs, "worker count (results are order-independent)");

  std::string model_path, model_b_path, dataset_path, calib_path, bounds_path;
  std::string gt_path, pred_path, pred_a_path, pred_b_path, errors_path;
  std::string repr = "fp64", repr_a = "fp64", repr_b = "fp64", acc = "naive";
  std::string level = "sl0", arch = "linear-like", out_path;
  double eps_max = -1;
  std::uint64_t seed = 1;
  long n_samples = 0;

  auto* validate = app.add_subcommand("validate", "check a model against the MLMD schema");
  validate->add_option("--model", model_path)->required();

  auto* infer = app.add_subcommand("infer", "run a model on a dataset");
  infer->add_option("--model", model_path)->required();
  infer->add_option("--dataset", dataset_path)->required();
  infer->add_option("--repr", repr);
  infer->add_option("--acc", acc);
  infer->add_option("--calib", calib_path);
  infer->add_option("--out", out_path);

  auto* tfm = app.add_subcommand("tfm-verify", "validate TFM metrics against bounds");
  auto* margins = app.add_subcommand("margins", "derive eps_max from bounds");
  for (auto* cmd : {tfm, margins}) {
    cmd->add_option("--gt", gt_path)->required();
    cmd->add_option("--pred", pred_path);
    cmd->add_option("--model", model_path);
    cmd->add_option("--dataset", dataset_path);
    cmd->add_option("--repr", repr);
    cmd->add_option("--acc", acc);
    cmd->add_option("--calib", calib_path);
    cmd->add_option("--bounds", bounds_path)->required();
    cmd->add_option("--out", out_path);
  }

  auto* replicate = app.add_subcommand("replicate", "TIM replication verification");
  replicate->add_option("--pred-a", pred_a_path);
  replicate->add_option("--pred-b", pred_b_path);
  replicate->add_option("--model", model_path);
  replicate->add_option("--dataset", dataset_path);
  replicate->add_option("--repr-a", repr_a);
  replicate->add_option("--repr-b", repr_b);
  replicate->add_option("--acc", acc);
  replicate->add_option("--calib", calib_path);
  replicate->add_option("--eps-max", eps_max)->required();
  replicate->add_option("--out", out_path);

  auto* sym = app.add_subcommand("symcheck", "symbolic SL0/SL2 cross-check");
  sym->add_option("--model-a", model_path)->required();
  sym->add_option("--model-b", model_b_path)->required();
  sym->add_option("--level", level)->check(CLI::IsMember({"sl0", "sl2"}));
  sym->add_option("--seed", seed);

  auto* gen = app.add_subcommand("gen", "generate a synthetic use case");
  gen->add_option("--arch", arch)->check(CLI::IsMember({"linear-like", "lstm-like"}));
  gen->add_option("--seed", seed);
  gen->add_option("--n", n_samples)->required();
  gen->add_option("--out", out_path)->required();

  auto* cdf = app.add_subcommand("cdf", "cumulative error distribution table");
  cdf->add_option("--errors", errors_path);
  cdf->add_option("--pred-a", pred_a_path);
  cdf->add_option("--pred-b", pred_b_path);
  cdf->add_option("--out", out_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*validate) {
      ModelSpec m = load_model(model_path);
      auto violations = validate_model(m);
      if (violations.empty()) {
        try {
          infer_shapes(m);
        } catch (const ShapeMismatch& e) {
          violations.push_back({"ShapeMismatch", m.graph.name, e.what()});
        }
      }
      if (violations.empty()) {
        std::cout << "OK\n";
        return 0;
      }
      for (const auto& v : violations)
        std::cout << v.kind << " " << v.subject << ": " << v.detail << "\n";
      return 1;
    }

    if (*infer) {
      PredictionSet ps = run_model(model_path, dataset_path, repr, acc, calib_path);
      emit(predictions_csv(ps), out_path);
      return 0;
    }

    if (*tfm || *margins) {
      std::vector<double> gt = load_column(gt_path);
      std::vector<double> pred;
      if (!pred_path.empty()) {
        pred = load_column(pred_path);
      } else if (!model_path.empty() && !dataset_path.empty()) {
        pred = run_model(model_path, dataset_path, repr, acc, calib_path).outputs.data;
      } else {
        throw SchemaError("need --pred or --model with --dataset");
      }
      auto bounds = parse_bounds(read_file(bounds_path));
      TfmVerdict v = tfm_verify(gt, pred, bounds);
      if (*margins) {
        std::string line =
            v.eps_max_valid ? format_double(v.eps_max) + "\n" : std::string("infeasible\n");
        emit(line, out_path);
      } else {
        emit(report_json(model_path.empty() ? pred_path : model_path, repr, acc, gt_path, &v,
                         nullptr, ""),
             out_path);
      }
      return v.pass ? 0 : 1;
    }

    if (*replicate) {
      PredictionSet a, b;
      std::string dataset_id;
      if (!pred_a_path.empty() && !pred_b_path.empty()) {
        a.outputs = read_csv(pred_a_path);
        b.outputs = read_csv(pred_b_path);
        if (a.outputs.rows == 0 || b.outputs.rows == 0) throw Error("empty prediction file");
        dataset_id = pred_a_path + "|" + pred_b_path;
      } else if (!model_path.empty() && !dataset_path.empty()) {
        a = run_model(model_path, dataset_path, repr_a, acc, calib_path);
        b = run_model(model_path, dataset_path, repr_b, acc, calib_path);
        dataset_id = dataset_path;
      } else {
        throw SchemaError("need --pred-a/--pred-b or --model with --dataset");
      }
      ReplicationReport rep = replicate_verify(a, b, eps_max, dataset_id);
      std::string cdf_path;
      if (!out_path.empty()) {
        std::filesystem::create_directories(out_path);
        RunDiff d = compare_runs(a, b);
        cdf_path = out_path + "/cdf.csv";
        write_file(cdf_path, cdf_to_csv(emit_cdf(d.eps.data)));
        write_file(out_path + "/report.json",
                   report_json(model_path, repr_b, acc, dataset_id, nullptr, &rep, cdf_path));
      }
      std::cout << report_json(model_path, repr_b, acc, dataset_id, nullptr, &rep, cdf_path);
      return rep.status == "REPLICATED" ? 0 : 1;
    }

    if (*sym) {
      ModelSpec a = load_model(model_path);
      ModelSpec b = load_model(model_b_path);
      if (level == "sl2") {
        bool eq = equal_sl2(a, b);
        std::cout << (eq ? "SL2-equal\n" : "SL2-unequal\n");
        return eq ? 0 : 1;
      }
      Sl0Result r = equivalent_sl0(a, b, 100000, seed);
      if (r.equivalent) {
        std::cout << "SL0-equivalent\n";
        return 0;
      }
      nlohmann::json j;
      j["verdict"] = "SL0-inequivalent";
      if (r.witness) {
        nlohmann::json w;
        for (const auto& v : r.witness->input) w["input"].push_back(v.str());
        for (const auto& v : r.witness->lhs) w["lhs"].push_back(v.str());
        for (const auto& v : r.witness->rhs) w["rhs"].push_back(v.str());
        j["witness"] = w;
      }
      std::cout << j.dump(2) << "\n";
      return 1;
    }

    if (*gen) {
      UseCase uc = generate_usecase(arch, seed, n_samples);
      std::filesystem::create_directories(out_path);
      write_file(out_path + "/model.json", serialize_model(uc.model));
      write_csv(out_path + "/dataset.csv", uc.inputs);
      Matrix gt(static_cast<long>(uc.ground_truth.size()), 1);
      gt.data = uc.ground_truth;
      write_csv(out_path + "/gt.csv", gt);
      return 0;
    }

    if (*cdf) {
      std::vector<double> errors;
      if (!errors_path.empty()) {
        errors = load_column(errors_path);
      } else if (!pred_a_path.empty() && !pred_b_path.empty()) {
        Matrix a = read_csv(pred_a_path), b = read_csv(pred_b_path);
        if (a.rows != b.rows || a.cols != b.cols) throw ShapeMismatch("prediction shapes differ");
        for (size_t i = 0; i < a.data.size(); ++i) errors.push_back(b.data[i] - a.data[i]);
      } else {
        throw SchemaError("need --errors or --pred-a/--pred-b");
      }
      emit(cdf_to_csv(emit_cdf(errors)), out_path);
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << " (line " << e.line << ", col " << e.col << ")\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const PreconditionViolated& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
