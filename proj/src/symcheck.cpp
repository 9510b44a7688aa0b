#include "replicheck/symcheck.hpp"

#include <algorithm>
#include <cmath>

#include "replicheck/errors.hpp"
#include "replicheck/io.hpp"
#include "replicheck/rng.hpp"

namespace replicheck {

namespace {

Rational rat_of(double v) {
  if (v == 0.0) return Rational(0);
  int e = 0;
  double m = std::frexp(v, &e);
  auto mi = static_cast<long long>(std::llround(m * 9007199254740992.0));  // 2^53
  e -= 53;
  boost::multiprecision::cpp_int num = mi;
  if (e >= 0) return Rational(num << e);
  return Rational(num, boost::multiprecision::cpp_int(1) << (-e));
}

Poly poly_const(const Rational& c) {
  Poly p;
  if (c != 0) p[{}] = c;
  return p;
}

Poly poly_var(long id) {
  Poly p;
  p[{id}] = 1;
  return p;
}

Poly padd(const Poly& a, const Poly& b) {
  Poly r = a;
  for (const auto& [mono, c] : b) {
    Rational& slot = r[mono];
    slot += c;
    if (slot == 0) r.erase(mono);
  }
  return r;
}

Poly pmul(const Poly& a, const Poly& b) {
  Poly r;
  for (const auto& [ma, ca] : a) {
    for (const auto& [mb, cb] : b) {
      Monomial m;
      m.reserve(ma.size() + mb.size());
      std::merge(ma.begin(), ma.end(), mb.begin(), mb.end(), std::back_inserter(m));
      Rational& slot = r[m];
      slot += ca * cb;
      if (slot == 0) r.erase(m);
    }
  }
  return r;
}

long atom_id(std::vector<Atom>& atoms, const Atom& a) {
  for (size_t i = 0; i < atoms.size(); ++i) {
    const Atom& o = atoms[i];
    if (o.is_var != a.is_var) continue;
    if (a.is_var) {
      if (o.input_index == a.input_index && o.element == a.element)
        return static_cast<long>(i);
    } else if (o.func == a.func && o.arg == a.arg) {
      return static_cast<long>(i);
    }
  }
  atoms.push_back(a);
  return static_cast<long>(atoms.size()) - 1;
}

void require_valid(const ModelSpec& m) {
  auto v = validate_model(m);
  if (!v.empty())
    throw Error("symcheck: invalid model: " + v.front().kind + " on '" + v.front().subject + "'");
}

struct STensor {
  std::vector<long> dims;
  std::vector<Poly> vals;
};

size_t bias_index(size_t csize, long i, long j, long cols) {
  if (static_cast<long>(csize) == cols) return static_cast<size_t>(j);
  if (csize == 1) return 0;
  return static_cast<size_t>(i) * cols + j;
}

}  // namespace

SymExpansion expand(const ModelSpec& m, std::vector<Atom>& atoms, long max_terms) {
  require_valid(m);
  auto shapes = infer_shapes(m);
  SymExpansion ex;
  std::map<std::string, STensor> tensors;

  for (const auto& t : m.graph.initializers) {
    STensor st;
    st.dims = t.dims;
    for (double v : *t.data) st.vals.push_back(poly_const(rat_of(v)));
    tensors[t.name] = std::move(st);
  }
  for (size_t gi = 0; gi < m.graph.graph_inputs.size(); ++gi) {
    const auto& in = m.graph.graph_inputs[gi];
    STensor st;
    st.dims = in.dims;
    long n = num_elements(in.dims);
    for (long j = 0; j < n; ++j) {
      Atom a;
      a.is_var = true;
      a.input_index = static_cast<long>(gi);
      a.element = j;
      st.vals.push_back(poly_var(atom_id(atoms, a)));
    }
    tensors[in.name] = std::move(st);
  }

  auto charge = [&](const STensor& t) {
    for (const Poly& p : t.vals) ex.term_count += static_cast<long>(p.size());
    if (ex.term_count > max_terms)
      throw ExpansionTooLarge("symbolic expansion exceeds " + std::to_string(max_terms) +
                              " terms");
  };

  for (const auto& n : m.graph.nodes) {
    STensor out;
    out.dims = shapes.at(n.outputs[0]);
    out.vals.resize(static_cast<size_t>(num_elements(out.dims)));
    auto in = [&](size_t i) -> const STensor& { return tensors.at(n.inputs[i]); };

    if (n.op_type == "MatMul" || n.op_type == "Gemm") {
      const STensor& a = in(0);
      const STensor& b = in(1);
      bool ta = n.op_type == "Gemm" && attr_int(n, "transA", 0) != 0;
      bool tb = n.op_type == "Gemm" && attr_int(n, "transB", 0) != 0;
      long rows = ta ? a.dims[1] : a.dims[0];
      long k = ta ? a.dims[0] : a.dims[1];
      long cols = tb ? b.dims[0] : b.dims[1];
      Rational alpha = rat_of(attr_double(n, "alpha", 1.0));
      Rational beta = rat_of(attr_double(n, "beta", 1.0));
      const STensor* c = n.op_type == "Gemm" && n.inputs.size() == 3 ? &in(2) : nullptr;
      for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) {
          Poly acc;
          for (long x = 0; x < k; ++x) {
            const Poly& av = a.vals[ta ? static_cast<size_t>(x) * a.dims[1] + i
                                       : static_cast<size_t>(i) * a.dims[1] + x];
            const Poly& bv = b.vals[tb ? static_cast<size_t>(j) * b.dims[1] + x
                                       : static_cast<size_t>(x) * b.dims[1] + j];
            acc = padd(acc, pmul(av, bv));
          }
          if (alpha != 1) acc = pmul(poly_const(alpha), acc);
          if (c) {
            Poly cv = c->vals[bias_index(c->vals.size(), i, j, cols)];
            if (beta != 1) cv = pmul(poly_const(beta), cv);
            acc = padd(acc, cv);
          }
          out.vals[static_cast<size_t>(i) * cols + j] = std::move(acc);
        }
      }
    } else if (n.op_type == "Add") {
      const STensor& a = in(0);
      const STensor& b = in(1);
      long cols = a.dims.size() == 2 ? a.dims[1] : static_cast<long>(a.vals.size());
      for (size_t i = 0; i < a.vals.size(); ++i) {
        const Poly& bv = b.vals.size() == a.vals.size() ? b.vals[i]
                         : b.vals.size() == 1           ? b.vals[0]
                                      : b.vals[i % static_cast<size_t>(cols)];
        out.vals[i] = padd(a.vals[i], bv);
      }
    } else if (n.op_type == "Relu" || n.op_type == "Sigmoid" || n.op_type == "Tanh") {
      std::string f = n.op_type == "Relu" ? "relu" : n.op_type == "Sigmoid" ? "sigmoid" : "tanh";
      const STensor& a = in(0);
      for (size_t i = 0; i < a.vals.size(); ++i) {
        Atom at;
        at.is_var = false;
        at.func = f;
        at.arg = a.vals[i];
        out.vals[i] = poly_var(atom_id(atoms, at));
      }
    } else if (n.op_type == "Concat") {
      long axis = attr_int(n, "axis", 0);
      if (out.dims.size() == 1 || axis == 0) {
        size_t pos = 0;
        for (size_t i = 0; i < n.inputs.size(); ++i)
          for (const Poly& p : in(i).vals) out.vals[pos++] = p;
      } else {
        long rows = out.dims[0], cols = out.dims[1];
        for (long r = 0; r < rows; ++r) {
          long col = 0;
          for (size_t i = 0; i < n.inputs.size(); ++i) {
            const STensor& t = in(i);
            for (long cc = 0; cc < t.dims[1]; ++cc)
              out.vals[static_cast<size_t>(r) * cols + col + cc] =
                  t.vals[static_cast<size_t>(r) * t.dims[1] + cc];
            col += t.dims[1];
          }
        }
      }
    } else if (n.op_type == "Reshape") {
      out.vals = in(0).vals;
    } else {
      throw UnsupportedOp("symbolic expansion does not support " + n.op_type);
    }
    charge(out);
    tensors[n.outputs[0]] = std::move(out);
  }

  for (const auto& go : m.graph.graph_outputs) {
    const STensor& t = tensors.at(go);
    ex.output_dims.push_back(t.dims);
    ex.outputs.push_back(t.vals);
  }
  ex.atoms = atoms;
  return ex;
}

std::string poly_to_string(const Poly& p, const std::vector<Atom>& atoms) {
  if (p.empty()) return "0";
  std::string s;
  bool first = true;
  for (const auto& [mono, c] : p) {
    if (!first) s += " + ";
    first = false;
    s += c.str();
    for (long id : mono) {
      const Atom& a = atoms[static_cast<size_t>(id)];
      s += "*";
      if (a.is_var)
        s += "x" + std::to_string(a.input_index) + "[" + std::to_string(a.element) + "]";
      else
        s += a.func + "(" + poly_to_string(a.arg, atoms) + ")";
    }
  }
  return s;
}

std::vector<Rational> eval_rational(const ModelSpec& m, const std::vector<Rational>& input) {
  require_valid(m);
  auto shapes = infer_shapes(m);
  struct RTensor {
    std::vector<long> dims;
    std::vector<Rational> vals;
  };
  std::map<std::string, RTensor> tensors;
  for (const auto& t : m.graph.initializers) {
    RTensor rt;
    rt.dims = t.dims;
    for (double v : *t.data) rt.vals.push_back(rat_of(v));
    tensors[t.name] = std::move(rt);
  }
  size_t off = 0;
  for (const auto& in : m.graph.graph_inputs) {
    RTensor rt;
    rt.dims = in.dims;
    long n = num_elements(in.dims);
    if (off + static_cast<size_t>(n) > input.size())
      throw ShapeMismatch("eval_rational: input vector too short");
    rt.vals.assign(input.begin() + static_cast<long>(off), input.begin() + static_cast<long>(off) + n);
    off += static_cast<size_t>(n);
    tensors[in.name] = std::move(rt);
  }

  for (const auto& n : m.graph.nodes) {
    RTensor out;
    out.dims = shapes.at(n.outputs[0]);
    out.vals.resize(static_cast<size_t>(num_elements(out.dims)));
    auto in = [&](size_t i) -> const RTensor& { return tensors.at(n.inputs[i]); };
    if (n.op_type == "MatMul" || n.op_type == "Gemm") {
      const RTensor& a = in(0);
      const RTensor& b = in(1);
      bool ta = n.op_type == "Gemm" && attr_int(n, "transA", 0) != 0;
      bool tb = n.op_type == "Gemm" && attr_int(n, "transB", 0) != 0;
      long rows = ta ? a.dims[1] : a.dims[0];
      long k = ta ? a.dims[0] : a.dims[1];
      long cols = tb ? b.dims[0] : b.dims[1];
      Rational alpha = rat_of(attr_double(n, "alpha", 1.0));
      Rational beta = rat_of(attr_double(n, "beta", 1.0));
      const RTensor* c = n.op_type == "Gemm" && n.inputs.size() == 3 ? &in(2) : nullptr;
      for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) {
          Rational acc = 0;
          for (long x = 0; x < k; ++x)
            acc += a.vals[ta ? static_cast<size_t>(x) * a.dims[1] + i
                             : static_cast<size_t>(i) * a.dims[1] + x] *
                   b.vals[tb ? static_cast<size_t>(j) * b.dims[1] + x
                             : static_cast<size_t>(x) * b.dims[1] + j];
          acc *= alpha;
          if (c) acc += beta * c->vals[bias_index(c->vals.size(), i, j, cols)];
          out.vals[static_cast<size_t>(i) * cols + j] = std::move(acc);
        }
    } else if (n.op_type == "Add") {
      const RTensor& a = in(0);
      const RTensor& b = in(1);
      long cols = a.dims.size() == 2 ? a.dims[1] : static_cast<long>(a.vals.size());
      for (size_t i = 0; i < a.vals.size(); ++i) {
        const Rational& bv = b.vals.size() == a.vals.size() ? b.vals[i]
                             : b.vals.size() == 1           ? b.vals[0]
                                          : b.vals[i % static_cast<size_t>(cols)];
        out.vals[i] = a.vals[i] + bv;
      }
    } else if (n.op_type == "Relu") {
      const RTensor& a = in(0);
      for (size_t i = 0; i < a.vals.size(); ++i)
        out.vals[i] = a.vals[i] > 0 ? a.vals[i] : Rational(0);
    } else if (n.op_type == "Concat") {
      long axis = attr_int(n, "axis", 0);
      if (out.dims.size() == 1 || axis == 0) {
        size_t pos = 0;
        for (size_t i = 0; i < n.inputs.size(); ++i)
          for (const Rational& v : in(i).vals) out.vals[pos++] = v;
      } else {
        long rows = out.dims[0], cols = out.dims[1];
        for (long r = 0; r < rows; ++r) {
          long col = 0;
          for (size_t i = 0; i < n.inputs.size(); ++i) {
            const RTensor& t = in(i);
            for (long cc = 0; cc < t.dims[1]; ++cc)
              out.vals[static_cast<size_t>(r) * cols + col + cc] =
                  t.vals[static_cast<size_t>(r) * t.dims[1] + cc];
            col += t.dims[1];
          }
        }
      }
    } else if (n.op_type == "Reshape") {
      out.vals = in(0).vals;
    } else {
      throw UnsupportedOp("eval_rational does not support " + n.op_type);
    }
    tensors[n.outputs[0]] = std::move(out);
  }

  std::vector<Rational> result;
  for (const auto& go : m.graph.graph_outputs)
    for (const Rational& v : tensors.at(go).vals) result.push_back(v);
  return result;
}

Sl0Result equivalent_sl0(const ModelSpec& a, const ModelSpec& b, long max_terms,
                         std::uint64_t seed) {
  std::vector<Atom> atoms;
  SymExpansion ea = expand(a, atoms, max_terms);
  SymExpansion eb = expand(b, atoms, max_terms);
  if (ea.output_dims.size() != eb.output_dims.size())
    throw ShapeMismatch("equivalent_sl0: output arity differs");
  Sl0Result r;
  r.equivalent = true;
  for (size_t o = 0; o < ea.outputs.size(); ++o) {
    if (ea.outputs[o].size() != eb.outputs[o].size())
      throw ShapeMismatch("equivalent_sl0: output element counts differ");
    if (ea.outputs[o] != eb.outputs[o]) r.equivalent = false;
  }
  if (r.equivalent) return r;

  // Counterexample hunt: exact evaluation at random rational points. Only
  // possible when both graphs stay in the affine/ReLU fragment.
  long width = 0;
  for (const auto& in : a.graph.graph_inputs) width += num_elements(in.dims);
  Rng rng(seed);
  try {
    for (int attempt = 0; attempt < 100; ++attempt) {
      std::vector<Rational> input;
      input.reserve(static_cast<size_t>(width));
      for (long i = 0; i < width; ++i)
        input.emplace_back(rng.integer(-100, 100), rng.integer(1, 7));
      auto lhs = eval_rational(a, input);
      auto rhs = eval_rational(b, input);
      if (lhs != rhs) {
        r.witness = Sl0Witness{std::move(input), std::move(lhs), std::move(rhs)};
        break;
      }
    }
  } catch (const UnsupportedOp&) {
    // opaque activations beyond ReLU: verdict stands on canonical forms alone
  }
  return r;
}

std::vector<std::string> lower_sl2(const ModelSpec& m, long max_terms) {
  require_valid(m);
  auto shapes = infer_shapes(m);
  std::vector<std::string> code;
  std::map<std::string, std::vector<std::string>> names;  // tensor -> scalar value names
  long temp = 0;
  auto fresh = [&] { return "%" + std::to_string(temp++); };
  auto emit = [&](const std::string& line) {
    code.push_back(line);
    if (static_cast<long>(code.size()) > max_terms)
      throw ExpansionTooLarge("SL2 lowering exceeds " + std::to_string(max_terms) +
                              " instructions");
  };

  for (const auto& t : m.graph.initializers) {
    std::vector<std::string> v;
    for (double d : *t.data) v.push_back("c:" + format_double(d));
    names[t.name] = std::move(v);
  }
  for (size_t gi = 0; gi < m.graph.graph_inputs.size(); ++gi) {
    const auto& in = m.graph.graph_inputs[gi];
    std::vector<std::string> v;
    long n = num_elements(in.dims);
    for (long j = 0; j < n; ++j)
      v.push_back("in" + std::to_string(gi) + "[" + std::to_string(j) + "]");
    names[in.name] = std::move(v);
  }

  for (const auto& n : m.graph.nodes) {
    const auto& out_dims = shapes.at(n.outputs[0]);
    std::vector<std::string> out(static_cast<size_t>(num_elements(out_dims)));
    auto in = [&](size_t i) -> const std::vector<std::string>& { return names.at(n.inputs[i]); };
    auto in_dims = [&](size_t i) -> const std::vector<long>& {
      for (const auto& t : m.graph.initializers)
        if (t.name == n.inputs[i]) return t.dims;
      for (const auto& t : m.graph.graph_inputs)
        if (t.name == n.inputs[i]) return t.dims;
      return shapes.at(n.inputs[i]);
    };

    if (n.op_type == "MatMul" || n.op_type == "Gemm") {
      const auto& a = in(0);
      const auto& b = in(1);
      const auto& ad = in_dims(0);
      const auto& bd = in_dims(1);
      bool ta = n.op_type == "Gemm" && attr_int(n, "transA", 0) != 0;
      bool tb = n.op_type == "Gemm" && attr_int(n, "transB", 0) != 0;
      long rows = ta ? ad[1] : ad[0];
      long k = ta ? ad[0] : ad[1];
      long cols = tb ? bd[0] : bd[1];
      double alpha = attr_double(n, "alpha", 1.0);
      double beta = attr_double(n, "beta", 1.0);
      const std::vector<std::string>* c =
          n.op_type == "Gemm" && n.inputs.size() == 3 ? &in(2) : nullptr;
      for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) {
          std::string acc;
          for (long x = 0; x < k; ++x) {
            const std::string& av = a[ta ? static_cast<size_t>(x) * ad[1] + i
                                         : static_cast<size_t>(i) * ad[1] + x];
            const std::string& bv = b[tb ? static_cast<size_t>(j) * bd[1] + x
                                         : static_cast<size_t>(x) * bd[1] + j];
            std::string prod = fresh();
            emit(prod + " = mul " + av + " " + bv);
            if (acc.empty()) {
              acc = prod;
            } else {
              std::string s = fresh();
              emit(s + " = add " + acc + " " + prod);
              acc = s;
            }
          }
          if (alpha != 1.0) {
            std::string s = fresh();
            emit(s + " = mul c:" + format_double(alpha) + " " + acc);
            acc = s;
          }
          if (c) {
            std::string cv = (*c)[bias_index(c->size(), i, j, cols)];
            if (beta != 1.0) {
              std::string s = fresh();
              emit(s + " = mul c:" + format_double(beta) + " " + cv);
              cv = s;
            }
            std::string s = fresh();
            emit(s + " = add " + acc + " " + cv);
            acc = s;
          }
          out[static_cast<size_t>(i) * cols + j] = acc;
        }
    } else if (n.op_type == "Add") {
      const auto& a = in(0);
      const auto& b = in(1);
      const auto& ad = in_dims(0);
      long cols = ad.size() == 2 ? ad[1] : static_cast<long>(a.size());
      for (size_t i = 0; i < a.size(); ++i) {
        const std::string& bv = b.size() == a.size() ? b[i]
                                : b.size() == 1      ? b[0]
                                                     : b[i % static_cast<size_t>(cols)];
        std::string s = fresh();
        emit(s + " = add " + a[i] + " " + bv);
        out[i] = s;
      }
    } else if (n.op_type == "Relu" || n.op_type == "Sigmoid" || n.op_type == "Tanh") {
      std::string f = n.op_type == "Relu" ? "relu" : n.op_type == "Sigmoid" ? "sigmoid" : "tanh";
      const auto& a = in(0);
      for (size_t i = 0; i < a.size(); ++i) {
        std::string s = fresh();
        emit(s + " = " + f + " " + a[i]);
        out[i] = s;
      }
    } else if (n.op_type == "Concat") {
      long axis = attr_int(n, "axis", 0);
      if (out_dims.size() == 1 || axis == 0) {
        size_t pos = 0;
        for (size_t i = 0; i < n.inputs.size(); ++i)
          for (const auto& v : in(i)) out[pos++] = v;
      } else {
        long rows = out_dims[0], cols = out_dims[1];
        for (long r = 0; r < rows; ++r) {
          long col = 0;
          for (size_t i = 0; i < n.inputs.size(); ++i) {
            const auto& t = in(i);
            const auto& td = in_dims(i);
            for (long cc = 0; cc < td[1]; ++cc)
              out[static_cast<size_t>(r) * cols + col + cc] =
                  t[static_cast<size_t>(r) * td[1] + cc];
            col += td[1];
          }
        }
      }
    } else if (n.op_type == "Reshape") {
      out = in(0);
    } else {
      throw UnsupportedOp("SL2 lowering does not support " + n.op_type);
    }
    names[n.outputs[0]] = std::move(out);
  }

  for (size_t o = 0; o < m.graph.graph_outputs.size(); ++o) {
    const auto& v = names.at(m.graph.graph_outputs[o]);
    for (size_t j = 0; j < v.size(); ++j)
      code.push_back("out" + std::to_string(o) + "[" + std::to_string(j) + "] = " + v[j]);
  }
  return code;
}

bool equal_sl2(const ModelSpec& a, const ModelSpec& b, long max_terms) {
  return lower_sl2(a, max_terms) == lower_sl2(b, max_terms);
}

}  // namespace replicheck
