#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "crfconv/common.hpp"

namespace crfconv {

/// Line-by-line view over a text buffer with 1-based line numbers. Accepts
/// both \n and \r\n endings.
class LineReader {
public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line);
  std::size_t line_number() const { return line_; }

private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);

double parse_number(std::string_view token, std::size_t line);
std::size_t parse_count(std::string_view token, std::size_t line);

/// Splits on `sep` (' ' means any run of whitespace) and parses each field.
std::vector<double> parse_number_row(std::string_view line, char sep, std::size_t line_no);

/// Shortest decimal form that reads back to the same double.
void append_number(std::string& out, double v);
std::string format_number(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace crfconv
