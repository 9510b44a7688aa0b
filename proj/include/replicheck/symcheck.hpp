#ifndef REPLICHECK_SYMCHECK_HPP
#define REPLICHECK_SYMCHECK_HPP

#include <boost/multiprecision/cpp_int.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "replicheck/mlmd.hpp"

namespace replicheck {

using Rational = boost::multiprecision::cpp_rational;

// Canonical polynomial over atom ids: monomial (sorted id list with
// repetition) -> exact rational coefficient. Atoms are input variables or
// opaque activation applications; sums are flat, constants folded, so equal
// maps <=> identical SL0 expressions.
using Monomial = std::vector<long>;
using Poly = std::map<Monomial, Rational>;

struct Atom {
  bool is_var = true;
  long input_index = 0;   // positional graph input
  long element = 0;       // flattened element within the input tensor
  std::string func;       // activation atoms: relu / sigmoid / tanh
  Poly arg;
};

struct SymExpansion {
  std::vector<std::vector<long>> output_dims;  // one per graph output
  std::vector<std::vector<Poly>> outputs;      // flattened elements
  std::vector<Atom> atoms;                     // shared id space
  long term_count = 0;
};

// Expands every output element into a closed symbolic expression. Affine ops
// and unary activations only; LSTM is rejected (UnsupportedOp). Atom ids are
// drawn from (and appended to) the shared table so two expansions can be
// compared directly.
SymExpansion expand(const ModelSpec& m, std::vector<Atom>& atoms,
                    long max_terms = 100000);

std::string poly_to_string(const Poly& p, const std::vector<Atom>& atoms);

struct Sl0Witness {
  std::vector<Rational> input;  // flattened over graph inputs
  std::vector<Rational> lhs, rhs;
};

struct Sl0Result {
  bool equivalent = false;
  std::optional<Sl0Witness> witness;  // present when inequivalent and the
                                      // graphs are affine/ReLU (exactly evaluable)
};

Sl0Result equivalent_sl0(const ModelSpec& a, const ModelSpec& b,
                         long max_terms = 100000, std::uint64_t seed = 1);

// Exact rational evaluation; affine ops + ReLU only (throws UnsupportedOp on
// sigmoid/tanh). Input is the flattened concatenation of graph inputs.
std::vector<Rational> eval_rational(const ModelSpec& m,
                                    const std::vector<Rational>& input);

// Canonical three-address lowering in the graph's stated evaluation order;
// node and tensor names are alpha-renamed, constants printed by value.
std::vector<std::string> lower_sl2(const ModelSpec& m, long max_terms = 100000);

// Instruction-for-instruction equality of the lowerings (no commutativity).
bool equal_sl2(const ModelSpec& a, const ModelSpec& b, long max_terms = 100000);

}  // namespace replicheck

#endif
