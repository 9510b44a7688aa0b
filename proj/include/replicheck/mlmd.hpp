#ifndef REPLICHECK_MLMD_HPP
#define REPLICHECK_MLMD_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "replicheck/numerics.hpp"

namespace replicheck {

// The MLMD graph IR: a JSON dialect mirroring a simplified ONNX data model.
// ModelSpec is immutable after parse; parsing and validation are pure.

struct TensorSpec {
  std::string name;
  std::vector<long> dims;          // non-empty, every dim >= 1
  Repr data_type = Repr::FP64;     // storage intent; file data is decimal reals
  std::optional<std::vector<double>> data;  // initializers only, row-major
};

struct NodeSpec {
  std::string name;
  std::string op_type;             // MatMul, Gemm, Add, Relu, Sigmoid, Tanh,
                                   // LSTM, Concat, Reshape
  std::string domain = "ai.onnx";
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  nlohmann::json attributes = nlohmann::json::object();
};

struct GraphSpec {
  std::string name;
  std::vector<NodeSpec> nodes;            // topologically ordered
  std::vector<TensorSpec> initializers;   // with data
  std::vector<TensorSpec> graph_inputs;   // without data
  std::vector<std::string> graph_outputs;
};

struct ModelSpec {
  GraphSpec graph;
  std::vector<std::pair<std::string, long>> opset_imports;
  long ir_version = 1;
};

struct Violation {
  std::string kind;     // DanglingInput, DuplicateName, TopologicalOrder,
                        // ArityMismatch, DataLengthMismatch, BadDims,
                        // UnsupportedOp, BadModel
  std::string subject;  // node or tensor responsible
  std::string detail;
};

bool op_supported(const std::string& op_type);

// Throws ParseError (with line/column) on malformed JSON and SchemaError on
// schema violations. No validation beyond schema conformance.
ModelSpec parse_model(const std::string& text);

std::string serialize_model(const ModelSpec& m);

// Every invariant violation; empty means valid. Violations are data, not
// failures.
std::vector<Violation> validate_model(const ModelSpec& m);

// Dims for every tensor (inputs, initializers, intermediates, outputs).
// Requires validate_model(m) empty; throws ShapeMismatch naming the node.
std::map<std::string, std::vector<long>> infer_shapes(const ModelSpec& m);

long num_elements(const std::vector<long>& dims);

// Attribute helpers with ONNX-conventional defaults.
double attr_double(const NodeSpec& n, const std::string& key, double dflt);
long attr_int(const NodeSpec& n, const std::string& key, long dflt);
std::string attr_string(const NodeSpec& n, const std::string& key, const std::string& dflt);
std::vector<long> attr_ints(const NodeSpec& n, const std::string& key);

}  // namespace replicheck

#endif
