#include "statemat/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace statemat {

namespace {

std::vector<double> parse_row(const std::string& line, const std::string& path) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Io, "bad number '" + cell + "' in " + path);
    }
  }
  return out;
}

nlohmann::json layout_json(const StateLayout& layout) {
  nlohmann::json labels = nlohmann::json::array();
  for (std::size_t i = 0; i < layout.dim(); ++i) labels.push_back(layout.name(i));
  const auto m = layout.generator_count();
  return {
      {"generators", layout.generators()},
      {"labels", labels},
      {"blocks",
       {{"angle", {0, m}},
        {"speed", {m, 2 * m}},
        {"dpe_ddelta", {{"rows", {m, 2 * m}}, {"cols", {0, m}}}}}},
  };
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_matrix_csv(const Mat& a, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) os << ',';
      os << format_double(a(i, j));
    }
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::Io, "write failed: " + path);
}

Mat read_matrix_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_row(line, path));
    if (rows.back().size() != rows.front().size()) {
      throw Error(ErrorCode::Io, "ragged matrix in " + path);
    }
  }
  Mat a(static_cast<Eigen::Index>(rows.size()),
        rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return a;
}

void write_system_matrix(const SystemMatrix& a, const std::string& stem) {
  if (static_cast<std::size_t>(a.a.rows()) != a.layout.dim() ||
      a.a.rows() != a.a.cols()) {
    throw Error(ErrorCode::LabelMismatch, "matrix does not match its labels");
  }
  write_matrix_csv(a.a, stem + ".csv");
  nlohmann::json side = layout_json(a.layout);
  side["matrix"] = std::filesystem::path(stem + ".csv").filename().string();
  side["rows"] = a.a.rows();
  side["cols"] = a.a.cols();
  std::ofstream os(stem + ".json");
  if (!os) throw Error(ErrorCode::Io, "cannot write " + stem + ".json");
  os << side.dump(2) << '\n';
}

SystemMatrix read_system_matrix(const std::string& stem) {
  std::ifstream is(stem + ".json");
  if (!is) throw Error(ErrorCode::Io, "cannot read " + stem + ".json");
  nlohmann::json side;
  try {
    is >> side;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("bad sidecar: ") + e.what());
  }
  SystemMatrix out;
  out.layout = StateLayout(side.at("generators").get<std::vector<int>>());
  out.a = read_matrix_csv(stem + ".csv");
  if (static_cast<std::size_t>(out.a.rows()) != out.layout.dim()) {
    throw Error(ErrorCode::LabelMismatch, "sidecar does not match " + stem + ".csv");
  }
  return out;
}

MatrixPackWriter::MatrixPackWriter(const std::string& path,
                                   const StateLayout& layout)
    : path_(path),
      file_name_(std::filesystem::path(path).filename().string()),
      dim_(layout.dim()) {
  std::ofstream os(path_);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path_);
  os << "row";
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      os << ",a_" << layout.name(i) << "__" << layout.name(j);
    }
  }
  os << '\n';
}

std::string MatrixPackWriter::append(const Mat& a) {
  if (static_cast<std::size_t>(a.rows()) != dim_ || a.rows() != a.cols()) {
    throw Error(ErrorCode::LabelMismatch, "packed matrix size mismatch");
  }
  std::ofstream os(path_, std::ios::app);
  if (!os) throw Error(ErrorCode::Io, "cannot append to " + path_);
  os << rows_;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) os << ',' << format_double(a(i, j));
  }
  os << '\n';
  return file_name_ + "#" + std::to_string(rows_++);
}

Mat read_matrix_pack_row(const std::string& path, std::size_t row) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path);
  std::string line;
  std::getline(is, line);  // header
  for (std::size_t k = 0; std::getline(is, line); ++k) {
    if (k != row) continue;
    auto values = parse_row(line, path);
    const auto n2 = values.size() - 1;
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n2))));
    if (static_cast<std::size_t>(n * n) != n2) {
      throw Error(ErrorCode::Io, "packed row is not square in " + path);
    }
    Mat a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        a(i, j) = values[static_cast<std::size_t>(1 + i * n + j)];
      }
    }
    return a;
  }
  throw Error(ErrorCode::Io, "row " + std::to_string(row) + " missing in " + path);
}

}  // namespace statemat
