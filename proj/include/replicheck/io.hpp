#ifndef REPLICHECK_IO_HPP
#define REPLICHECK_IO_HPP

#include <string>
#include <vector>

namespace replicheck {

// Row-major dense matrix of FP64 values; the batch/prediction carrier.
struct Matrix {
  long rows = 0;
  long cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(long r, long c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
  double& at(long r, long c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(long r, long c) const { return data[static_cast<size_t>(r) * cols + c]; }
  bool operator==(const Matrix&) const = default;
};

// Shortest decimal form that round-trips the exact FP64 value.
std::string format_double(double v);

std::string read_file(const std::string& path);  // throws Error on I/O failure
void write_file(const std::string& path, const std::string& content);

// One sample per row, comma separated, no header.
Matrix read_csv(const std::string& path);
void write_csv(const std::string& path, const Matrix& m);

}  // namespace replicheck

#endif
