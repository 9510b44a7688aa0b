#include "replicheck/mlmd.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "replicheck/errors.hpp"

namespace replicheck {

using nlohmann::json;

bool op_supported(const std::string& op_type) {
  static const std::set<std::string> ops = {"MatMul", "Gemm",   "Add",
                                            "Relu",   "Sigmoid", "Tanh",
                                            "LSTM",   "Concat", "Reshape"};
  return ops.count(op_type) > 0;
}

long num_elements(const std::vector<long>& dims) {
  long n = 1;
  for (long d : dims) n *= d;
  return n;
}

namespace {

[[noreturn]] void schema_fail(const std::string& field, const std::string& why) {
  throw SchemaError("schema error at '" + field + "': " + why);
}

const json& require(const json& obj, const std::string& key, const std::string& ctx) {
  if (!obj.is_object()) schema_fail(ctx, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(ctx + "." + key, "missing field");
  return *it;
}

std::string require_string(const json& obj, const std::string& key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_string()) schema_fail(ctx + "." + key, "expected a string");
  return v.get<std::string>();
}

long require_int(const json& obj, const std::string& key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_number_integer()) schema_fail(ctx + "." + key, "expected an integer");
  return v.get<long>();
}

TensorSpec parse_tensor(const json& j, const std::string& ctx) {
  TensorSpec t;
  t.name = require_string(j, "name", ctx);
  const json& dims = require(j, "dims", ctx);
  if (!dims.is_array()) schema_fail(ctx + ".dims", "expected an array of integers");
  for (const auto& d : dims) {
    if (!d.is_number_integer()) schema_fail(ctx + ".dims", "expected an array of integers");
    t.dims.push_back(d.get<long>());
  }
  std::string dt = require_string(j, "data_type", ctx);
  try {
    t.data_type = repr_from_string(dt);
  } catch (const Error&) {
    schema_fail(ctx + ".data_type", "unknown data type '" + dt + "'");
  }
  if (j.contains("data")) {
    const json& data = j.at("data");
    if (!data.is_array()) schema_fail(ctx + ".data", "expected an array of numbers");
    std::vector<double> vals;
    vals.reserve(data.size());
    for (const auto& v : data) {
      if (!v.is_number()) schema_fail(ctx + ".data", "expected an array of numbers");
      double x = v.get<double>();
      // Payloads are read exactly into FP64 then rounded to the declared
      // data_type grid; INT intents stay raw, quantization happens at run
      // time against calibration statistics.
      if (is_float(t.data_type)) x = round_to(t.data_type, x);
      vals.push_back(x);
    }
    t.data = std::move(vals);
  }
  return t;
}

NodeSpec parse_node(const json& j, const std::string& ctx) {
  NodeSpec n;
  n.name = require_string(j, "name", ctx);
  n.op_type = require_string(j, "op_type", ctx);
  if (j.contains("domain")) {
    if (!j.at("domain").is_string()) schema_fail(ctx + ".domain", "expected a string");
    n.domain = j.at("domain").get<std::string>();
  }
  for (const char* key : {"inputs", "outputs"}) {
    const json& arr = require(j, key, ctx);
    if (!arr.is_array()) schema_fail(ctx + "." + key, "expected an array of strings");
    for (const auto& s : arr) {
      if (!s.is_string()) schema_fail(ctx + "." + key, "expected an array of strings");
      (std::string(key) == "inputs" ? n.inputs : n.outputs).push_back(s.get<std::string>());
    }
  }
  if (j.contains("attributes")) {
    if (!j.at("attributes").is_object()) schema_fail(ctx + ".attributes", "expected an object");
    n.attributes = j.at("attributes");
  }
  return n;
}

}  // namespace

ModelSpec parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Recover line/column from the byte offset.
    int line = 1, col = 1;
    for (size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        line++;
        col = 1;
      } else {
        col++;
      }
    }
    throw ParseError("JSON syntax error at line " + std::to_string(line) + ", column " +
                         std::to_string(col) + ": " + e.what(),
                     line, col);
  }

  ModelSpec m;
  m.ir_version = require_int(j, "ir_version", "$");
  const json& opsets = require(j, "opset_import", "$");
  if (!opsets.is_array()) schema_fail("$.opset_import", "expected an array");
  for (const auto& o : opsets) {
    m.opset_imports.emplace_back(require_string(o, "domain", "$.opset_import[]"),
                                 require_int(o, "version", "$.opset_import[]"));
  }
  const json& g = require(j, "graph", "$");
  m.graph.name = require_string(g, "name", "$.graph");
  const json& inputs = require(g, "inputs", "$.graph");
  if (!inputs.is_array()) schema_fail("$.graph.inputs", "expected an array");
  for (const auto& t : inputs) m.graph.graph_inputs.push_back(parse_tensor(t, "$.graph.inputs[]"));
  const json& outputs = require(g, "outputs", "$.graph");
  if (!outputs.is_array()) schema_fail("$.graph.outputs", "expected an array of strings");
  for (const auto& s : outputs) {
    if (!s.is_string()) schema_fail("$.graph.outputs", "expected an array of strings");
    m.graph.graph_outputs.push_back(s.get<std::string>());
  }
  const json& inits = require(g, "initializers", "$.graph");
  if (!inits.is_array()) schema_fail("$.graph.initializers", "expected an array");
  for (const auto& t : inits) m.graph.initializers.push_back(parse_tensor(t, "$.graph.initializers[]"));
  const json& nodes = require(g, "nodes", "$.graph");
  if (!nodes.is_array()) schema_fail("$.graph.nodes", "expected an array");
  for (const auto& n : nodes) m.graph.nodes.push_back(parse_node(n, "$.graph.nodes[]"));
  return m;
}

namespace {

json tensor_to_json(const TensorSpec& t) {
  json j;
  j["name"] = t.name;
  j["dims"] = t.dims;
  j["data_type"] = to_string(t.data_type);
  if (t.data) j["data"] = *t.data;
  return j;
}

}  // namespace

std::string serialize_model(const ModelSpec& m) {
  json j;
  j["ir_version"] = m.ir_version;
  j["opset_import"] = json::array();
  for (const auto& [domain, version] : m.opset_imports)
    j["opset_import"].push_back({{"domain", domain}, {"version", version}});
  json g;
  g["name"] = m.graph.name;
  g["inputs"] = json::array();
  for (const auto& t : m.graph.graph_inputs) g["inputs"].push_back(tensor_to_json(t));
  g["outputs"] = m.graph.graph_outputs;
  g["initializers"] = json::array();
  for (const auto& t : m.graph.initializers) g["initializers"].push_back(tensor_to_json(t));
  g["nodes"] = json::array();
  for (const auto& n : m.graph.nodes) {
    json nj;
    nj["name"] = n.name;
    nj["op_type"] = n.op_type;
    nj["domain"] = n.domain;
    nj["inputs"] = n.inputs;
    nj["outputs"] = n.outputs;
    if (!n.attributes.empty()) nj["attributes"] = n.attributes;
    g["nodes"].push_back(nj);
  }
  j["graph"] = g;
  return j.dump(2) + "\n";
}

namespace {

bool arity_ok(const NodeSpec& n) {
  size_t in = n.inputs.size(), out = n.outputs.size();
  if (out != 1) return false;
  if (n.op_type == "MatMul" || n.op_type == "Add") return in == 2;
  if (n.op_type == "Gemm") return in == 2 || in == 3;
  if (n.op_type == "Relu" || n.op_type == "Sigmoid" || n.op_type == "Tanh" ||
      n.op_type == "Reshape")
    return in == 1;
  if (n.op_type == "LSTM") return in == 4;  // X, W, R, B
  if (n.op_type == "Concat") return in >= 2;
  return false;
}

}  // namespace

std::vector<Violation> validate_model(const ModelSpec& m) {
  std::vector<Violation> out;
  auto add = [&](const std::string& kind, const std::string& subject, const std::string& detail) {
    out.push_back({kind, subject, detail});
  };

  if (m.ir_version < 1) add("BadModel", "ir_version", "ir_version must be >= 1");
  if (m.opset_imports.empty()) add("BadModel", "opset_import", "at least one opset import required");

  std::set<std::string> names;
  auto declare = [&](const std::string& name, const std::string& what) {
    if (!names.insert(name).second)
      add("DuplicateName", name, what + " name already declared");
  };

  for (const auto& t : m.graph.initializers) {
    declare(t.name, "initializer");
    if (t.dims.empty()) add("BadDims", t.name, "dims must be non-empty");
    for (long d : t.dims)
      if (d < 1) add("BadDims", t.name, "every dim must be >= 1");
    if (!t.data) {
      add("DataLengthMismatch", t.name, "initializer has no data");
    } else if (static_cast<long>(t.data->size()) != num_elements(t.dims)) {
      add("DataLengthMismatch", t.name,
          "data length " + std::to_string(t.data->size()) + " != product of dims " +
              std::to_string(num_elements(t.dims)));
    }
  }
  for (const auto& t : m.graph.graph_inputs) {
    declare(t.name, "graph input");
    if (t.dims.empty()) add("BadDims", t.name, "dims must be non-empty");
    for (long d : t.dims)
      if (d < 1) add("BadDims", t.name, "every dim must be >= 1");
  }

  // Walk nodes in listed order; an input must already be resolvable.
  std::set<std::string> available = names;
  for (const auto& n : m.graph.nodes) {
    if (!op_supported(n.op_type)) add("UnsupportedOp", n.name, "op_type '" + n.op_type + "'");
    if (!arity_ok(n))
      add("ArityMismatch", n.name,
          n.op_type + " with " + std::to_string(n.inputs.size()) + " inputs, " +
              std::to_string(n.outputs.size()) + " outputs");
    for (const auto& in : n.inputs) {
      if (!available.count(in)) {
        bool later = false;
        for (const auto& other : m.graph.nodes)
          for (const auto& o : other.outputs)
            if (o == in) later = true;
        if (later)
          add("TopologicalOrder", n.name, "input '" + in + "' produced by a later node");
        else
          add("DanglingInput", n.name, "input '" + in + "' resolves to nothing");
      }
    }
    for (const auto& o : n.outputs) {
      if (!names.insert(o).second)
        add("DuplicateName", o, "node output name already declared");
      available.insert(o);
    }
  }

  for (const auto& go : m.graph.graph_outputs) {
    bool produced = false;
    for (const auto& n : m.graph.nodes)
      for (const auto& o : n.outputs)
        if (o == go) produced = true;
    if (!produced) add("DanglingInput", go, "graph output not produced by any node");
  }
  return out;
}

std::map<std::string, std::vector<long>> infer_shapes(const ModelSpec& m) {
  std::map<std::string, std::vector<long>> shapes;
  for (const auto& t : m.graph.initializers) shapes[t.name] = t.dims;
  for (const auto& t : m.graph.graph_inputs) shapes[t.name] = t.dims;

  auto fail = [](const NodeSpec& n, const std::string& why) -> void {
    throw ShapeMismatch("node '" + n.name + "' (" + n.op_type + "): " + why);
  };
  auto dims_str = [](const std::vector<long>& d) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < d.size(); ++i) os << (i ? "x" : "") << d[i];
    os << ")";
    return os.str();
  };

  for (const auto& n : m.graph.nodes) {
    std::vector<std::vector<long>> in;
    for (const auto& name : n.inputs) in.push_back(shapes.at(name));
    std::vector<long> out;

    if (n.op_type == "MatMul") {
      if (in[0].size() != 2 || in[1].size() != 2 || in[0][1] != in[1][0])
        fail(n, "cannot multiply " + dims_str(in[0]) + " by " + dims_str(in[1]));
      out = {in[0][0], in[1][1]};
    } else if (n.op_type == "Gemm") {
      bool ta = attr_int(n, "transA", 0) != 0;
      bool tb = attr_int(n, "transB", 0) != 0;
      if (in[0].size() != 2 || in[1].size() != 2) fail(n, "Gemm inputs must be 2-D");
      long a0 = ta ? in[0][1] : in[0][0], a1 = ta ? in[0][0] : in[0][1];
      long b0 = tb ? in[1][1] : in[1][0], b1 = tb ? in[1][0] : in[1][1];
      if (a1 != b0)
        fail(n, "cannot multiply " + dims_str({a0, a1}) + " by " + dims_str({b0, b1}));
      out = {a0, b1};
      if (in.size() == 3) {
        const auto& c = in[2];
        bool ok = (c == out) || (c.size() == 1 && (c[0] == b1 || c[0] == 1)) ||
                  (c.size() == 2 && c[0] == 1 && c[1] == b1);
        if (!ok) fail(n, "bias " + dims_str(c) + " not broadcastable to " + dims_str(out));
      }
    } else if (n.op_type == "Add") {
      const auto& a = in[0];
      const auto& b = in[1];
      if (a == b) {
        out = a;
      } else if (b.size() == 1 && b[0] == 1) {
        out = a;  // scalar broadcast
      } else if (a.size() == 2 &&
                 ((b.size() == 1 && b[0] == a[1]) ||
                  (b.size() == 2 && b[0] == 1 && b[1] == a[1]))) {
        out = a;  // row/bias broadcast
      } else {
        fail(n, "cannot broadcast " + dims_str(b) + " onto " + dims_str(a));
      }
    } else if (n.op_type == "Relu" || n.op_type == "Sigmoid" || n.op_type == "Tanh") {
      out = in[0];
    } else if (n.op_type == "LSTM") {
      std::string dir = attr_string(n, "direction", "forward");
      long D = dir == "bidirectional" ? 2 : 1;
      long H = attr_int(n, "hidden_size", 0);
      if (H < 1) fail(n, "hidden_size attribute required");
      const auto& x = in[0];
      if (x.size() != 2) fail(n, "LSTM input must be (T x p)");
      long T = x[0], p = x[1];
      std::vector<long> w_want = {D, 4 * H, p};
      std::vector<long> r_want = {D, 4 * H, H};
      std::vector<long> b_want = {D, 8 * H};
      if (in[1] != w_want) fail(n, "W dims " + dims_str(in[1]) + " want " + dims_str(w_want));
      if (in[2] != r_want) fail(n, "R dims " + dims_str(in[2]) + " want " + dims_str(r_want));
      if (in[3] != b_want) fail(n, "B dims " + dims_str(in[3]) + " want " + dims_str(b_want));
      out = {T, D * H};
    } else if (n.op_type == "Concat") {
      long axis = attr_int(n, "axis", 0);
      out = in[0];
      if (axis < 0 || axis >= static_cast<long>(out.size())) fail(n, "bad concat axis");
      for (size_t i = 1; i < in.size(); ++i) {
        if (in[i].size() != out.size()) fail(n, "concat rank mismatch");
        for (size_t d = 0; d < out.size(); ++d)
          if (static_cast<long>(d) != axis && in[i][d] != out[d])
            fail(n, "concat dim mismatch at axis " + std::to_string(d));
        out[axis] += in[i][axis];
      }
    } else if (n.op_type == "Reshape") {
      out = attr_ints(n, "shape");
      if (out.empty()) fail(n, "shape attribute required");
      if (num_elements(out) != num_elements(in[0]))
        fail(n, "cannot reshape " + dims_str(in[0]) + " to " + dims_str(out));
    } else {
      fail(n, "unsupported op");
    }
    shapes[n.outputs[0]] = out;
  }
  return shapes;
}

double attr_double(const NodeSpec& n, const std::string& key, double dflt) {
  if (!n.attributes.contains(key)) return dflt;
  return n.attributes.at(key).get<double>();
}

long attr_int(const NodeSpec& n, const std::string& key, long dflt) {
  if (!n.attributes.contains(key)) return dflt;
  return n.attributes.at(key).get<long>();
}

std::string attr_string(const NodeSpec& n, const std::string& key, const std::string& dflt) {
  if (!n.attributes.contains(key)) return dflt;
  return n.attributes.at(key).get<std::string>();
}

std::vector<long> attr_ints(const NodeSpec& n, const std::string& key) {
  std::vector<long> out;
  if (!n.attributes.contains(key)) return out;
  for (const auto& v : n.attributes.at(key)) out.push_back(v.get<long>());
  return out;
}

}  // namespace replicheck
