#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "metaswitch/model.hpp"

namespace metaswitch {

/// Shortest decimal string that parses back to exactly `x`; "nan", "inf", "-inf" otherwise.
std::string format_number(double x);

/// One CSV field: a number, an integer, text, or empty.
using CsvCell = std::variant<std::monostate, double, long long, std::string>;

inline CsvCell cell(double x) { return x; }
inline CsvCell cell(int x) { return static_cast<long long>(x); }
inline CsvCell cell(long long x) { return x; }
inline CsvCell cell(std::size_t x) { return static_cast<long long>(x); }
inline CsvCell cell(std::string s) { return s; }
inline CsvCell cell(const char* s) { return std::string(s); }
inline CsvCell cell(const std::optional<double>& x) { return x ? CsvCell(*x) : CsvCell{}; }

/// Comma-separated writer with a fixed header; fields are never quoted, so text cells must not
/// contain commas or newlines.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  void row(const std::vector<CsvCell>& cells);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::ofstream out_;
};

/// Reads a CSV written by CsvWriter into its header and rows of raw fields.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

/// {"dim": n, "entries": [[re, im], ...]} with entries in row-major order.
nlohmann::json operator_to_json(const Operator& op);
Operator operator_from_json(const nlohmann::json& j);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Writes `j` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace metaswitch
