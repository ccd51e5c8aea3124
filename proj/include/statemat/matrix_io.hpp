#pragma once

#include <string>
#include <vector>

#include "statemat/layout.hpp"

namespace statemat {

// Row-major CSV, one matrix row per line, shortest round-trip decimal.
void write_matrix_csv(const Mat& a, const std::string& path);
Mat read_matrix_csv(const std::string& path);

// `<stem>.csv` plus `<stem>.json` with the labels and block map.
void write_system_matrix(const SystemMatrix& a, const std::string& stem);
SystemMatrix read_system_matrix(const std::string& stem);

// One matrix per line, flattened row-major, prefixed by the row index.
// Entries are referenced as "<file>#<row>".
class MatrixPackWriter {
 public:
  MatrixPackWriter(const std::string& path, const StateLayout& layout);
  // Returns the reference for the appended matrix.
  std::string append(const Mat& a);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::string file_name_;
  std::size_t dim_ = 0;
  std::size_t rows_ = 0;
};

// Matrix `row` of a pack written by MatrixPackWriter.
Mat read_matrix_pack_row(const std::string& path, std::size_t row);

std::string format_double(double v);

}  // namespace statemat
