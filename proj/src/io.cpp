#include "metaswitch/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace metaswitch {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf.data(), end);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : path_(path), columns_(header.size()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::vector<CsvCell> cells;
  for (auto& h : header) cells.emplace_back(std::move(h));
  row(cells);
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
  if (cells.size() != columns_) {
    throw std::invalid_argument("csv row has " + std::to_string(cells.size()) + " fields, header " +
                                std::to_string(columns_));
  }
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) line += ',';
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) {
            line += format_number(v);
          } else if constexpr (std::is_same_v<T, long long>) {
            line += std::to_string(v);
          } else if constexpr (std::is_same_v<T, std::string>) {
            if (v.find_first_of(",\n") != std::string::npos) {
              throw std::invalid_argument("csv text field contains a separator: " + v);
            }
            line += v;
          }
        },
        cells[i]);
  }
  out_ << line << '\n';
  out_.flush();
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

nlohmann::json operator_to_json(const Operator& op) {
  if (op.rows() != op.cols()) throw std::invalid_argument("operator_to_json: matrix not square");
  nlohmann::json entries = nlohmann::json::array();
  for (Eigen::Index r = 0; r < op.rows(); ++r) {
    for (Eigen::Index c = 0; c < op.cols(); ++c) {
      entries.push_back({op(r, c).real(), op(r, c).imag()});
    }
  }
  return {{"dim", op.rows()}, {"entries", entries}};
}

Operator operator_from_json(const nlohmann::json& j) {
  const auto dim = j.at("dim").get<Eigen::Index>();
  const auto& entries = j.at("entries");
  if (dim < 1 || entries.size() != static_cast<std::size_t>(dim * dim)) {
    throw std::invalid_argument("operator_from_json: dim and entry count disagree");
  }
  Operator op(dim, dim);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c, ++k) {
      const auto& e = entries.at(k);
      if (e.size() != 2) throw std::invalid_argument("operator_from_json: entry is not [re, im]");
      op(r, c) = {e.at(0).get<double>(), e.at(1).get<double>()};
    }
  }
  return op;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace metaswitch
