#include "replicheck/io.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "replicheck/errors.hpp"

namespace replicheck {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write file: " + path);
  f << content;
  if (!f) throw IoError("write failed: " + path);
}

Matrix read_csv(const std::string& path) {
  std::string text = read_file(path);
  Matrix m;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    long cols = 0;
    while (std::getline(ls, cell, ',')) {
      const char* begin = cell.c_str();
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) throw Error("bad number '" + cell + "' in " + path);
      m.data.push_back(v);
      cols++;
    }
    if (m.rows == 0) {
      m.cols = cols;
    } else if (cols != m.cols) {
      throw Error("ragged CSV row in " + path);
    }
    m.rows++;
  }
  return m;
}

void write_csv(const std::string& path, const Matrix& m) {
  std::ostringstream os;
  for (long r = 0; r < m.rows; ++r) {
    for (long c = 0; c < m.cols; ++c) {
      if (c) os << ',';
      os << format_double(m.at(r, c));
    }
    os << '\n';
  }
  write_file(path, os.str());
}

}  // namespace replicheck
