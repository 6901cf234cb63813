#pragma once

// Comma-separated datasets: one row per observation, inputs first and the
// response last. A header row is optional on input and always written.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bagp/basis.hpp"
#include "bagp/constraint.hpp"

namespace bagp {

struct Table {
  std::vector<std::string> header;
  /// Numeric cells, one row per record.
  Matrix values;
};

/// Parses a numeric table. Throws ParseError naming the row and column of
/// the first bad cell, and ValidationError for an empty input or ragged rows.
Table read_table(std::istream& in, const std::string& source = "input");

struct RawDataset {
  Matrix X;
  Vector y;
};

/// Splits a table into inputs and the response: the column headed "y" when
/// there is one, otherwise the last column.
RawDataset split_response(const Table& table);

/// Min-max bounds of each column of X.
Normalization fit_normalization(const Matrix& X);
Matrix normalize(const Normalization& n, const Matrix& X, bool clamp);

/// Header x1..xD,y and 17 significant digits.
void write_dataset(std::ostream& out, const Matrix& X, const Vector& y);
/// Header x1..xD (and the extra named columns) with 17 significant digits.
void write_table(std::ostream& out, const Matrix& values, const std::vector<std::string>& header);

std::vector<std::string> input_header(std::size_t dimension);

}  // namespace bagp
