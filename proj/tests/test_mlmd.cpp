#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>

#include "doctest.h"
#include "replicheck/errors.hpp"
#include "replicheck/mlmd.hpp"

using namespace replicheck;

namespace {

const char* kMinimal = R"({
  "ir_version": 1,
  "opset_import": [{"domain": "ai.onnx", "version": 13}],
  "graph": {
    "name": "g",
    "inputs": [{"name": "x", "dims": [1, 2], "data_type": "fp64"}],
    "outputs": ["y"],
    "initializers": [
      {"name": "w", "dims": [2, 2], "data_type": "fp64", "data": [1, 2, 3, 4]}
    ],
    "nodes": [
      {"name": "gemm", "op_type": "Gemm", "inputs": ["x", "w"], "outputs": ["y"]}
    ]
  }
})";

bool has_violation(const std::vector<Violation>& vs, const std::string& kind) {
  for (const auto& v : vs)
    if (v.kind == kind) return true;
  return false;
}

}  // namespace

TEST_CASE("parse minimal model") {
  ModelSpec m = parse_model(kMinimal);
  CHECK(m.graph.nodes.size() == 1);
  CHECK(m.ir_version == 1);
  REQUIRE(m.opset_imports.size() == 1);
  CHECK(m.opset_imports[0].first == "ai.onnx");
  CHECK(m.opset_imports[0].second == 13);
  CHECK(m.graph.nodes[0].domain == "ai.onnx");
  CHECK(validate_model(m).empty());
}

TEST_CASE("parse errors carry position, schema errors name the field") {
  try {
    parse_model("{\n  \"ir_version\": 1,\n  oops\n}");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }
  CHECK_THROWS_AS(parse_model("{\"ir_version\": 1}"), SchemaError);
  CHECK_THROWS_WITH_AS(parse_model(R"({"ir_version": "x"})"),
                       doctest::Contains("ir_version"), SchemaError);
}

TEST_CASE("serialize round trip") {
  ModelSpec m = parse_model(kMinimal);
  std::string s1 = serialize_model(m);
  ModelSpec m2 = parse_model(s1);
  CHECK(serialize_model(m2) == s1);
  CHECK(m2.graph.graph_outputs == m.graph.graph_outputs);
  CHECK(m2.graph.initializers[0].data == m.graph.initializers[0].data);
}

TEST_CASE("FP payloads are rounded to the declared data type") {
  std::string text = kMinimal;
  text.replace(text.find("\"fp64\", \"data\""), 14, "\"fp16\", \"data\"");
  text.replace(text.find("[1, 2, 3, 4]"), 12, "[0.1, 2, 3, 4]");
  ModelSpec m = parse_model(text);
  CHECK((*m.graph.initializers[0].data)[0] == 0.0999755859375);
}

TEST_CASE("validate_model catches mutations") {
  ModelSpec m = parse_model(kMinimal);
  CHECK(validate_model(m).empty());

  SUBCASE("dangling input") {
    m.graph.initializers.clear();
    auto vs = validate_model(m);
    CHECK(has_violation(vs, "DanglingInput"));
  }
  SUBCASE("duplicate name") {
    m.graph.initializers.push_back(m.graph.initializers[0]);
    CHECK(has_violation(validate_model(m), "DuplicateName"));
  }
  SUBCASE("arity mismatch") {
    m.graph.nodes[0].inputs.push_back("w");
    m.graph.nodes[0].inputs.push_back("w");
    CHECK(has_violation(validate_model(m), "ArityMismatch"));
  }
  SUBCASE("unsupported op") {
    m.graph.nodes[0].op_type = "Conv";
    CHECK(has_violation(validate_model(m), "UnsupportedOp"));
  }
  SUBCASE("data length mismatch") {
    m.graph.initializers[0].data->pop_back();
    CHECK(has_violation(validate_model(m), "DataLengthMismatch"));
  }
  SUBCASE("bad dims") {
    m.graph.initializers[0].dims = {2, 0};
    CHECK(has_violation(validate_model(m), "BadDims"));
  }
  SUBCASE("graph output not produced") {
    m.graph.graph_outputs = {"nope"};
    CHECK(has_violation(validate_model(m), "DanglingInput"));
  }
}

TEST_CASE("topological order violation") {
  ModelSpec m = parse_model(kMinimal);
  NodeSpec relu;
  relu.name = "act";
  relu.op_type = "Relu";
  relu.inputs = {"y"};
  relu.outputs = {"z"};
  m.graph.nodes.insert(m.graph.nodes.begin(), relu);  // consumer before producer
  m.graph.graph_outputs = {"z"};
  CHECK(has_violation(validate_model(m), "TopologicalOrder"));
}

TEST_CASE("infer_shapes") {
  SUBCASE("Gemm with bias") {
    ModelSpec m = parse_model(kMinimal);
    m.graph.graph_inputs[0].dims = {1, 20};
    m.graph.initializers[0].dims = {20, 8};
    m.graph.initializers[0].data = std::vector<double>(160, 0.0);
    TensorSpec b;
    b.name = "b";
    b.dims = {8};
    b.data_type = Repr::FP64;
    b.data = std::vector<double>(8, 0.0);
    m.graph.initializers.push_back(b);
    m.graph.nodes[0].inputs = {"x", "w", "b"};
    REQUIRE(validate_model(m).empty());
    auto shapes = infer_shapes(m);
    CHECK(shapes.at("y") == std::vector<long>{1, 8});
  }
  SUBCASE("MatMul mismatch") {
    ModelSpec m = parse_model(kMinimal);
    m.graph.nodes[0].op_type = "MatMul";
    m.graph.graph_inputs[0].dims = {2, 3};
    m.graph.initializers[0].dims = {4, 2};
    m.graph.initializers[0].data = std::vector<double>(8, 0.0);
    CHECK_THROWS_AS(infer_shapes(m), ShapeMismatch);
  }
  SUBCASE("bidirectional LSTM concatenates to 2H") {
    ModelSpec m;
    m.opset_imports = {{"ai.onnx", 13}};
    m.graph.name = "l";
    TensorSpec x;
    x.name = "x";
    x.dims = {16, 20};
    x.data_type = Repr::FP64;
    m.graph.graph_inputs.push_back(x);
    auto init = [&](const std::string& name, std::vector<long> dims) {
      TensorSpec t;
      t.name = name;
      t.dims = dims;
      t.data_type = Repr::FP64;
      t.data = std::vector<double>(static_cast<size_t>(num_elements(dims)), 0.0);
      m.graph.initializers.push_back(t);
    };
    init("w", {2, 32, 20});
    init("r", {2, 32, 8});
    init("b", {2, 64});
    NodeSpec n;
    n.name = "lstm";
    n.op_type = "LSTM";
    n.inputs = {"x", "w", "r", "b"};
    n.outputs = {"h"};
    n.attributes = {{"hidden_size", 8}, {"direction", "bidirectional"}};
    m.graph.nodes.push_back(n);
    m.graph.graph_outputs = {"h"};
    REQUIRE(validate_model(m).empty());
    CHECK(infer_shapes(m).at("h") == std::vector<long>{16, 16});
  }
  SUBCASE("Reshape checks element counts") {
    ModelSpec m = parse_model(kMinimal);
    NodeSpec r;
    r.name = "rs";
    r.op_type = "Reshape";
    r.inputs = {"y"};
    r.outputs = {"z"};
    r.attributes = {{"shape", {2, 1}}};
    m.graph.nodes.push_back(r);
    m.graph.graph_outputs = {"z"};
    REQUIRE(validate_model(m).empty());
    CHECK(infer_shapes(m).at("z") == std::vector<long>{2, 1});
    m.graph.nodes[1].attributes["shape"] = {3, 1};
    CHECK_THROWS_AS(infer_shapes(m), ShapeMismatch);
  }
}
