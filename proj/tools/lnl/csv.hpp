#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lnl::cli {

/// RFC 4180 table: a header row plus data rows of equal width.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header; ParseError naming the column if absent.
  std::size_t column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text, const std::string& source = "csv");
CsvTable read_csv(const std::filesystem::path& path);

/// Strict decimal parse; ParseError naming `field` on junk or non-finite values.
double parse_number(const std::string& text, const std::string& field);

}  // namespace lnl::cli
