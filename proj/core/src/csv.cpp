#include "bagp/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "bagp/error.hpp"

namespace bagp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Table read_table(std::istream& in, const std::string& source) {
  Table table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (first) {
      first = false;
      width = cells.size();
      double tmp = 0.0;
      const bool numeric = std::all_of(cells.begin(), cells.end(),
                                       [&](const std::string& c) { return parse_double(c, tmp); });
      if (!numeric) {
        table.header = std::move(cells);
        continue;
      }
    }
    if (cells.size() != width) {
      throw ValidationError(source + ": row " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " columns, expected " +
                            std::to_string(width));
    }
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      if (!parse_double(cells[c], row[c]) || !std::isfinite(row[c])) {
        throw ParseError(source + ": row " + std::to_string(line_no) + ", column " +
                         std::to_string(c + 1) + ": '" + cells[c] + "' is not a finite number");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(source + ": no data rows");
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return table;
}

RawDataset split_response(const Table& table) {
  if (table.values.cols() < 2) throw ValidationError("a dataset needs at least one input and a response");
  Eigen::Index response = table.values.cols() - 1;
  if (!table.header.empty()) {
    const auto it = std::find(table.header.begin(), table.header.end(), "y");
    if (it != table.header.end()) response = static_cast<Eigen::Index>(it - table.header.begin());
  }
  RawDataset d;
  d.X.resize(table.values.rows(), table.values.cols() - 1);
  for (Eigen::Index c = 0, k = 0; c < table.values.cols(); ++c) {
    if (c != response) d.X.col(k++) = table.values.col(c);
  }
  d.y = table.values.col(response);
  return d;
}

Normalization fit_normalization(const Matrix& X) {
  Normalization n;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    n.lower.push_back(X.col(c).minCoeff());
    n.upper.push_back(X.col(c).maxCoeff());
  }
  return n;
}

Matrix normalize(const Normalization& n, const Matrix& X, bool clamp) {
  Matrix out(X.rows(), X.cols());
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) row[static_cast<std::size_t>(c)] = X(i, c);
    const auto v = n.apply(row, clamp);
    for (Eigen::Index c = 0; c < X.cols(); ++c) out(i, c) = v[static_cast<std::size_t>(c)];
  }
  return out;
}

std::vector<std::string> input_header(std::size_t dimension) {
  std::vector<std::string> h;
  for (std::size_t d = 1; d <= dimension; ++d) h.push_back("x" + std::to_string(d));
  return h;
}

void write_table(std::ostream& out, const Matrix& values, const std::vector<std::string>& header) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols()) {
    throw ArgumentError("header length does not match the table width");
  }
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const auto old = out.precision(17);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << values(i, c);
    out << '\n';
  }
  out.precision(old);
}

void write_dataset(std::ostream& out, const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw ArgumentError("X and y have different lengths");
  Matrix values(X.rows(), X.cols() + 1);
  values << X, y;
  auto header = input_header(static_cast<std::size_t>(X.cols()));
  header.emplace_back("y");
  write_table(out, values, header);
}

}  // namespace bagp
