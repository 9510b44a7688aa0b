#ifndef REPLICHECK_NUMERICS_HPP
#define REPLICHECK_NUMERICS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace replicheck {

// Machine number representations emulated by the toolkit. All values are
// carried in FP64 doubles that are fixed points of round_to(r, .) for their
// representation; INT kinds live on a quantization grid instead.
enum class Repr {
  FP64,
  FP32,
  FP16,
  BF16,
  INT16,
  INT14,
  INT12,
  INT10,
};

bool is_float(Repr r);
bool is_int(Repr r);
int int_width(Repr r);       // INT kinds only
int mantissa_bits(Repr r);   // FP kinds, counting the implicit bit
int exponent_bits(Repr r);
std::string to_string(Repr r);
Repr repr_from_string(std::string_view s);  // throws Error on unknown name

enum class AccMode { NaiveLTR, Pairwise, Kahan };
std::string to_string(AccMode m);
AccMode acc_mode_from_string(std::string_view s);

// Overflow / saturation counters threaded through an execution. Functions
// taking a Flags pointer accept nullptr when the caller does not care.
struct ExecFlags {
  long overflow = 0;
  long saturated = 0;
};

// Round-to-nearest-even of v into r's grid, with overflow to +-infinity and
// gradual underflow. BF16 truncates the FP32 encoding's low 16 mantissa bits
// instead of rounding. FP kinds only.
double round_to(Repr r, double v, ExecFlags* flags = nullptr);

// One of {+,-,*,/} computed exactly in FP64 then rounded into r. FP64 carries
// at least 2p+2 mantissa bits relative to every narrower format, so the
// double rounding is innocuous for these four operations.
double fp_op(Repr r, char op, double a, double b, ExecFlags* flags = nullptr);

// Symmetric per-tensor quantization, zero point fixed at 0.
struct QuantParams {
  double scale = 1.0;  // > 0
  int width = 16;      // b bits, values saturate to [-2^(b-1), 2^(b-1)-1]
};

std::int64_t quantize(const QuantParams& q, double v, ExecFlags* flags = nullptr);
double dequantize(const QuantParams& q, std::int64_t i);

// scale = maxabs / (2^(b-1) - 1); a tiny floor keeps all-zero tensors usable.
QuantParams calibrate(int width, double maxabs);

// Sum of xs under the chosen operation ordering, every partial result rounded
// into r. Kahan is the Kahan-Babuska-Neumaier compensated form (sum and
// compensation both kept in r, final result sum + compensation).
double accumulate(Repr r, AccMode mode, std::span<const double> xs,
                  ExecFlags* flags = nullptr);

// relu exactly; exp/tanh/sigmoid evaluated with the host FP64 function then
// rounded into r. This is the toolkit's canonical scalar approximation.
double transcendental(Repr r, std::string_view f, double x,
                      ExecFlags* flags = nullptr);

}  // namespace replicheck

#endif
