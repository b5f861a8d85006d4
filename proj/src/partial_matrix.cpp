#include "primepca/partial_matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "primepca/error.hpp"

namespace primepca::data {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_index(std::string_view s, long long& out) {
  s = trim(s);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& why) {
  std::ostringstream msg;
  msg << path.string() << ":" << line << ": " << why;
  throw ParseError(msg.str());
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  return out;
}

// Rows of comma-separated cells; NaN marks "NA"/empty cells.
std::vector<std::vector<double>> read_csv_cells(const std::filesystem::path& path,
                                                bool allow_missing) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view cell = trim(rest.substr(0, comma));
      double v = 0.0;
      if (cell.empty() || cell == "NA") {
        if (!allow_missing) fail(path, lineno, "missing value not allowed here");
        v = std::numeric_limits<double>::quiet_NaN();
      } else if (!parse_double(cell, v)) {
        fail(path, lineno, "malformed number '" + std::string(cell) + "'");
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      fail(path, lineno, "expected " + std::to_string(rows.front().size()) + " columns, found " +
                             std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

PartialMatrix::PartialMatrix() : PartialMatrix(Matrix(0, 0), Mask(0, 0)) {}

PartialMatrix::PartialMatrix(Matrix values, Mask mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  if (values_.rows() != mask_.rows() || values_.cols() != mask_.cols()) {
    throw InvalidArgument("PartialMatrix: values and mask shapes differ");
  }
  for (Index j = 0; j < values_.cols(); ++j) {
    for (Index i = 0; i < values_.rows(); ++i) {
      if (mask_(i, j) == 0) {
        values_(i, j) = 0.0;
      } else {
        mask_(i, j) = 1;
        if (!std::isfinite(values_(i, j))) {
          throw InvalidArgument("PartialMatrix: non-finite observed value at (" +
                                std::to_string(i) + ", " + std::to_string(j) + ")");
        }
      }
    }
  }
  build_index();
}

PartialMatrix PartialMatrix::fully_observed(Matrix values) {
  Mask mask = Mask::Ones(values.rows(), values.cols());
  return PartialMatrix(std::move(values), std::move(mask));
}

void PartialMatrix::build_index() {
  auto pattern = std::make_shared<linalg::SparsePattern>(linalg::SparsePattern::from_mask(mask_));
  auto vals = std::make_shared<std::vector<double>>(static_cast<std::size_t>(pattern->nnz()));
  for (Index i = 0; i < pattern->rows(); ++i) {
    const auto cols = pattern->row_cols(i);
    double* out = vals->data() + pattern->row_begin(i);
    for (std::size_t k = 0; k < cols.size(); ++k) out[k] = values_(i, cols[k]);
  }
  pattern_ = std::move(pattern);
  csr_values_ = std::move(vals);
}

PartialMatrix PartialMatrix::select_rows(std::span<const Index> rows) const {
  Matrix v(static_cast<Index>(rows.size()), cols());
  Mask m(static_cast<Index>(rows.size()), cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= this->rows()) {
      throw InvalidArgument("PartialMatrix::select_rows: row out of range");
    }
    v.row(static_cast<Index>(k)) = values_.row(rows[k]);
    m.row(static_cast<Index>(k)) = mask_.row(rows[k]);
  }
  return PartialMatrix(std::move(v), std::move(m));
}

PartialMatrix PartialMatrix::scaled(double c) const {
  return PartialMatrix(values_ * c, mask_);
}

RowIndexSets row_index_sets(const PartialMatrix& pm) {
  RowIndexSets sets;
  sets.observed.resize(static_cast<std::size_t>(pm.rows()));
  sets.missing.resize(static_cast<std::size_t>(pm.rows()));
  for (Index i = 0; i < pm.rows(); ++i) {
    auto& obs = sets.observed[static_cast<std::size_t>(i)];
    auto& mis = sets.missing[static_cast<std::size_t>(i)];
    for (Index j = 0; j < pm.cols(); ++j) (pm.observed(i, j) ? obs : mis).push_back(j);
  }
  return sets;
}

MatrixFormat parse_format(std::string_view name) {
  if (name == "dense-csv" || name == "csv") return MatrixFormat::dense_csv;
  if (name == "coordinate-triplet" || name == "triplet") return MatrixFormat::coordinate_triplet;
  throw InvalidArgument("unknown matrix format '" + std::string(name) +
                        "' (expected dense-csv or coordinate-triplet)");
}

PartialMatrix load_partial(const std::filesystem::path& path, MatrixFormat format) {
  if (format == MatrixFormat::dense_csv) {
    const auto cells = read_csv_cells(path, true);
    if (cells.empty()) fail(path, 1, "empty matrix");
    const auto n = static_cast<Index>(cells.size());
    const auto d = static_cast<Index>(cells.front().size());
    Matrix values = Matrix::Zero(n, d);
    Mask mask = Mask::Zero(n, d);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) {
        const double v = cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (!std::isnan(v)) {
          values(i, j) = v;
          mask(i, j) = 1;
        }
      }
    }
    return PartialMatrix(std::move(values), std::move(mask));
  }

  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  auto fields = [](const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  };
  if (!next_line()) fail(path, 1, "missing header line 'n d nnz'");
  const auto header = fields(line);
  long long n = 0, d = 0, nnz = 0;
  if (header.size() != 3 || !parse_index(header[0], n) || !parse_index(header[1], d) ||
      !parse_index(header[2], nnz) || n <= 0 || d <= 0 || nnz < 0 || nnz > n * d) {
    fail(path, lineno, "malformed header, expected 'n d nnz'");
  }
  Matrix values = Matrix::Zero(n, d);
  Mask mask = Mask::Zero(n, d);
  long long seen = 0;
  while (next_line()) {
    const auto f = fields(line);
    long long i = 0, j = 0;
    double v = 0.0;
    if (f.size() != 3 || !parse_index(f[0], i) || !parse_index(f[1], j) || !parse_double(f[2], v)) {
      fail(path, lineno, "malformed entry, expected 'row col value'");
    }
    if (i < 1 || i > n || j < 1 || j > d) fail(path, lineno, "coordinate out of range");
    if (mask(i - 1, j - 1) != 0) {
      fail(path, lineno, "duplicate coordinate (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    }
    mask(i - 1, j - 1) = 1;
    values(i - 1, j - 1) = v;
    ++seen;
  }
  if (seen != nnz) {
    fail(path, lineno, "header declares " + std::to_string(nnz) + " entries, found " +
                           std::to_string(seen));
  }
  return PartialMatrix(std::move(values), std::move(mask));
}

void save_partial(const PartialMatrix& pm, const std::filesystem::path& path, MatrixFormat format) {
  auto out = open_out(path);
  if (format == MatrixFormat::dense_csv) {
    for (Index i = 0; i < pm.rows(); ++i) {
      for (Index j = 0; j < pm.cols(); ++j) {
        if (j > 0) out << ',';
        out << (pm.observed(i, j) ? format_double(pm.values()(i, j)) : std::string("NA"));
      }
      out << '\n';
    }
  } else {
    out << pm.rows() << ' ' << pm.cols() << ' ' << pm.observed_count() << '\n';
    for (Index i = 0; i < pm.rows(); ++i) {
      for (Index j = 0; j < pm.cols(); ++j) {
        if (pm.observed(i, j)) {
          out << (i + 1) << ' ' << (j + 1) << ' ' << format_double(pm.values()(i, j)) << '\n';
        }
      }
    }
  }
  if (!out) throw ParseError("write failed: " + path.string());
}

Matrix load_dense(const std::filesystem::path& path, bool allow_missing) {
  const auto cells = read_csv_cells(path, allow_missing);
  if (cells.empty()) fail(path, 1, "empty matrix");
  Matrix m(static_cast<Index>(cells.size()), static_cast<Index>(cells.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

void save_dense(const Matrix& m, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << (std::isnan(m(i, j)) ? std::string("NA") : format_double(m(i, j)));
    }
    out << '\n';
  }
  if (!out) throw ParseError("write failed: " + path.string());
}

double observed_fraction(const PartialMatrix& pm) {
  const double total = static_cast<double>(pm.rows()) * static_cast<double>(pm.cols());
  return total > 0 ? static_cast<double>(pm.observed_count()) / total : 0.0;
}

Eigen::MatrixXi coobservation_counts(const PartialMatrix& pm) {
  const Index d = pm.cols();
  const auto& p = pm.pattern();
  const double density = observed_fraction(pm);
  if (density > 0.25) {
    // Dense Gram product; counts are small integers, exact in double.
    const Matrix omega = pm.mask().cast<double>();
    Matrix gram = Matrix::Zero(d, d);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(omega.transpose());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    return gram.array().round().cast<int>().matrix();
  }
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(d, d);
  for (Index i = 0; i < p.rows(); ++i) {
    const auto cols = p.row_cols(i);
    for (const auto j : cols) {
      int* cj = counts.col(j).data();
      for (const auto k : cols) ++cj[k];
    }
  }
  return counts;
}

PartialMatrix center_columns(const PartialMatrix& pm) {
  Matrix values = pm.values();
  for (Index j = 0; j < pm.cols(); ++j) {
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i < pm.rows(); ++i) {
      if (pm.observed(i, j)) {
        sum += values(i, j);
        ++count;
      }
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    for (Index i = 0; i < pm.rows(); ++i) {
      if (pm.observed(i, j)) values(i, j) -= mean;
    }
  }
  return PartialMatrix(std::move(values), pm.mask());
}

}  // namespace primepca::data
