#include "replicheck/numerics.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <vector>

#include "replicheck/errors.hpp"

namespace replicheck {

bool is_float(Repr r) {
  switch (r) {
    case Repr::FP64:
    case Repr::FP32:
    case Repr::FP16:
    case Repr::BF16:
      return true;
    default:
      return false;
  }
}

bool is_int(Repr r) { return !is_float(r); }

int int_width(Repr r) {
  switch (r) {
    case Repr::INT16: return 16;
    case Repr::INT14: return 14;
    case Repr::INT12: return 12;
    case Repr::INT10: return 10;
    default: throw Error("int_width: not an INT representation");
  }
}

int mantissa_bits(Repr r) {
  switch (r) {
    case Repr::FP64: return 53;
    case Repr::FP32: return 24;
    case Repr::FP16: return 11;
    case Repr::BF16: return 8;
    default: throw Error("mantissa_bits: not an FP representation");
  }
}

int exponent_bits(Repr r) {
  switch (r) {
    case Repr::FP64: return 11;
    case Repr::FP32: return 8;
    case Repr::FP16: return 5;
    case Repr::BF16: return 8;  // same dynamic range as FP32
    default: throw Error("exponent_bits: not an FP representation");
  }
}

std::string to_string(Repr r) {
  switch (r) {
    case Repr::FP64: return "fp64";
    case Repr::FP32: return "fp32";
    case Repr::FP16: return "fp16";
    case Repr::BF16: return "bf16";
    case Repr::INT16: return "int16";
    case Repr::INT14: return "int14";
    case Repr::INT12: return "int12";
    case Repr::INT10: return "int10";
  }
  return "?";
}

Repr repr_from_string(std::string_view s) {
  std::string l(s);
  for (auto& c : l) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (l == "fp64") return Repr::FP64;
  if (l == "fp32") return Repr::FP32;
  if (l == "fp16") return Repr::FP16;
  if (l == "bf16") return Repr::BF16;
  if (l == "int16") return Repr::INT16;
  if (l == "int14") return Repr::INT14;
  if (l == "int12") return Repr::INT12;
  if (l == "int10") return Repr::INT10;
  throw Error("unknown representation: " + std::string(s));
}

std::string to_string(AccMode m) {
  switch (m) {
    case AccMode::NaiveLTR: return "naive";
    case AccMode::Pairwise: return "pairwise";
    case AccMode::Kahan: return "kahan";
  }
  return "?";
}

AccMode acc_mode_from_string(std::string_view s) {
  if (s == "naive") return AccMode::NaiveLTR;
  if (s == "pairwise") return AccMode::Pairwise;
  if (s == "kahan") return AccMode::Kahan;
  throw Error("unknown accumulation mode: " + std::string(s));
}

namespace {

// Round-to-nearest-even onto the float grid with p significand bits and
// normal exponent range [emin, emax]. Gradual underflow below 2^emin,
// +-infinity beyond the largest finite value.
double round_to_grid(double v, int p, int emin, int emax, ExecFlags* flags) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  int e = std::ilogb(v);
  int q = std::max(e, emin) - (p - 1);
  double rounded = std::nearbyint(std::ldexp(v, -q));  // ties to even
  double result = std::ldexp(rounded, q);
  double max_finite = std::ldexp(2.0 - std::ldexp(1.0, 1 - p), emax);
  if (std::fabs(result) > max_finite) {
    if (flags) flags->overflow++;
    return std::copysign(INFINITY, v);
  }
  return result;
}

double truncate_bf16(double v, ExecFlags* flags) {
  double f32 = round_to_grid(v, 24, -126, 127, flags);
  float f = static_cast<float>(f32);
  std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  bits &= 0xFFFF0000u;
  double out = static_cast<double>(std::bit_cast<float>(bits));
  if (flags && std::isinf(out) && std::isfinite(v) && std::isfinite(f32)) flags->overflow++;
  return out;
}

}  // namespace

double round_to(Repr r, double v, ExecFlags* flags) {
  switch (r) {
    case Repr::FP64:
      return v;
    case Repr::FP32:
      return round_to_grid(v, 24, -126, 127, flags);
    case Repr::FP16:
      return round_to_grid(v, 11, -14, 15, flags);
    case Repr::BF16:
      return truncate_bf16(v, flags);
    default:
      throw Error("round_to: INT representations use quantize");
  }
}

double fp_op(Repr r, char op, double a, double b, ExecFlags* flags) {
  double exact;
  switch (op) {
    case '+': exact = a + b; break;
    case '-': exact = a - b; break;
    case '*': exact = a * b; break;
    case '/': exact = a / b; break;
    default: throw Error(std::string("fp_op: unknown op ") + op);
  }
  if (r == Repr::FP64) {
    if (flags && std::isinf(exact) && std::isfinite(a) && std::isfinite(b)) flags->overflow++;
    return exact;
  }
  return round_to(r, exact, flags);
}

std::int64_t quantize(const QuantParams& q, double v, ExecFlags* flags) {
  double scaled = std::nearbyint(v / q.scale);
  double lo = -std::ldexp(1.0, q.width - 1);
  double hi = std::ldexp(1.0, q.width - 1) - 1.0;
  if (scaled < lo || scaled > hi || !std::isfinite(scaled)) {
    if (flags) flags->saturated++;
    scaled = std::isnan(scaled) ? 0.0 : std::min(std::max(scaled, lo), hi);
  }
  return static_cast<std::int64_t>(scaled);
}

double dequantize(const QuantParams& q, std::int64_t i) {
  return static_cast<double>(i) * q.scale;
}

QuantParams calibrate(int width, double maxabs) {
  double levels = std::ldexp(1.0, width - 1) - 1.0;
  double m = maxabs > 0.0 ? maxabs : 1.0;
  return QuantParams{m / levels, width};
}

namespace {

double pairwise_sum(Repr r, std::span<const double> xs, ExecFlags* flags) {
  if (xs.size() == 1) return xs[0];
  size_t mid = xs.size() / 2;
  double lo = pairwise_sum(r, xs.first(mid), flags);
  double hi = pairwise_sum(r, xs.subspan(mid), flags);
  return fp_op(r, '+', lo, hi, flags);
}

}  // namespace

double accumulate(Repr r, AccMode mode, std::span<const double> xs, ExecFlags* flags) {
  if (xs.empty()) throw Error("accumulate: empty input");
  switch (mode) {
    case AccMode::NaiveLTR: {
      double s = xs[0];
      for (size_t i = 1; i < xs.size(); ++i) s = fp_op(r, '+', s, xs[i], flags);
      return s;
    }
    case AccMode::Pairwise:
      return pairwise_sum(r, xs, flags);
    case AccMode::Kahan: {
      // Kahan-Babuska-Neumaier: the compensation also captures the case where
      // the incoming term is larger than the running sum.
      double sum = xs[0];
      double c = 0.0;
      for (size_t i = 1; i < xs.size(); ++i) {
        double x = xs[i];
        double t = fp_op(r, '+', sum, x, flags);
        if (std::fabs(sum) >= std::fabs(x)) {
          c = fp_op(r, '+', c, fp_op(r, '+', fp_op(r, '-', sum, t, flags), x, flags), flags);
        } else {
          c = fp_op(r, '+', c, fp_op(r, '+', fp_op(r, '-', x, t, flags), sum, flags), flags);
        }
        sum = t;
      }
      return fp_op(r, '+', sum, c, flags);
    }
  }
  throw Error("accumulate: bad mode");
}

double transcendental(Repr r, std::string_view f, double x, ExecFlags* flags) {
  if (f == "relu") return x > 0.0 ? x : 0.0;
  double y;
  if (f == "exp") {
    y = std::exp(x);
  } else if (f == "tanh") {
    y = std::tanh(x);
  } else if (f == "sigmoid") {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    throw Error("transcendental: unknown function " + std::string(f));
  }
  if (r == Repr::FP64) {
    if (flags && std::isinf(y) && std::isfinite(x)) flags->overflow++;
    return y;
  }
  return round_to(r, y, flags);
}

}  // namespace replicheck
