#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "crfconv/cloud.hpp"
#include "crfconv/text.hpp"

namespace crfconv {

CloudFormat parse_cloud_format(std::string_view name) {
  if (name == "ply" || name == "ply-ascii") return CloudFormat::PlyAscii;
  if (name == "csv" || name == "csv-xyz") return CloudFormat::CsvXyz;
  throw std::invalid_argument("unknown cloud format '" + std::string(name) + "'");
}

CloudFormat cloud_format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".ply" ? CloudFormat::PlyAscii : CloudFormat::CsvXyz;
}

namespace {

PointCloud assemble(const std::vector<std::vector<double>>& rows, std::size_t columns,
                    const std::vector<std::size_t>& xyz, const std::vector<std::size_t>& feature_cols) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  PositionMatrix pos(n, 3);
  FeatureMatrix feat(n, static_cast<Eigen::Index>(feature_cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (r.size() != columns) throw ShapeError("internal: row width");
    for (int a = 0; a < 3; ++a) pos(i, a) = r[xyz[static_cast<std::size_t>(a)]];
    for (std::size_t f = 0; f < feature_cols.size(); ++f) feat(i, static_cast<Eigen::Index>(f)) = r[feature_cols[f]];
  }
  return PointCloud(std::move(pos), std::move(feat));
}

bool is_ply_scalar_type(std::string_view t) {
  static constexpr std::string_view kTypes[] = {"char",   "uchar",  "short",  "ushort", "int",    "uint",
                                                "float",  "double", "int8",   "uint8",  "int16",  "uint16",
                                                "int32",  "uint32", "float32", "float64"};
  return std::find(std::begin(kTypes), std::end(kTypes), t) != std::end(kTypes);
}

}  // namespace

PointCloud parse_csv_cloud(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    auto row = parse_number_row(line, ',', reader.line_number());
    if (row.size() < 3) {
      throw ParseError("expected at least 3 columns (x,y,z), found " + std::to_string(row.size()),
                       reader.line_number());
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw ParseError("inconsistent column count: expected " + std::to_string(width) + ", found " +
                           std::to_string(row.size()),
                       reader.line_number());
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 3; c < width; ++c) feature_cols.push_back(c);
  return assemble(rows, width, {0, 1, 2}, feature_cols);
}

PointCloud parse_ply_cloud(std::string_view text) {
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
  };
  std::vector<Element> elements;
  LineReader reader(text);
  std::string_view line;

  if (!reader.next(line) || trim(line) != "ply") throw ParseError("missing 'ply' magic", reader.line_number());
  bool saw_format = false;
  bool saw_end = false;
  while (reader.next(line)) {
    const auto tok = split_whitespace(line);
    if (tok.empty()) continue;
    const std::size_t ln = reader.line_number();
    if (tok[0] == "format") {
      if (tok.size() != 3) throw ParseError("malformed format line", ln);
      if (tok[1] != "ascii") throw ParseError("only ascii PLY is supported, found '" + std::string(tok[1]) + "'", ln);
      if (tok[2] != "1.0") throw ParseError("unsupported PLY version '" + std::string(tok[2]) + "'", ln);
      saw_format = true;
    } else if (tok[0] == "comment" || tok[0] == "obj_info") {
      continue;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element line", ln);
      Element e;
      e.name = std::string(tok[1]);
      e.count = parse_count(tok[2], ln);
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError("property before any element", ln);
      if (tok.size() >= 2 && tok[1] == "list") {
        if (elements.back().name == "vertex") throw ParseError("list properties on vertices are not supported", ln);
        elements.back().properties.emplace_back("<list>");
        continue;
      }
      if (tok.size() != 3) throw ParseError("malformed property line", ln);
      if (!is_ply_scalar_type(tok[1])) throw ParseError("unknown property type '" + std::string(tok[1]) + "'", ln);
      elements.back().properties.emplace_back(tok[2]);
    } else if (tok[0] == "end_header") {
      saw_end = true;
      break;
    } else {
      throw ParseError("unexpected header keyword '" + std::string(tok[0]) + "'", ln);
    }
  }
  if (!saw_format) throw ParseError("missing format line", reader.line_number());
  if (!saw_end) throw ParseError("missing end_header", reader.line_number());

  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> xyz(3, SIZE_MAX);
  std::vector<std::size_t> feature_cols;
  std::size_t width = 0;
  bool have_vertex = false;

  for (const auto& e : elements) {
    const bool vertex = e.name == "vertex";
    if (vertex) {
      have_vertex = true;
      width = e.properties.size();
      for (std::size_t c = 0; c < width; ++c) {
        const auto& p = e.properties[c];
        if (p == "x") xyz[0] = c;
        else if (p == "y") xyz[1] = c;
        else if (p == "z") xyz[2] = c;
        else feature_cols.push_back(c);
      }
      if (std::count(xyz.begin(), xyz.end(), SIZE_MAX) > 0) {
        throw ParseError("vertex element lacks x, y or z", reader.line_number());
      }
    }
    for (std::size_t r = 0; r < e.count; ++r) {
      do {
        if (!reader.next(line)) throw ParseError("unexpected end of file in element '" + e.name + "'", reader.line_number());
      } while (trim(line).empty());
      if (!vertex) continue;
      auto row = parse_number_row(line, ' ', reader.line_number());
      if (row.size() != width) {
        throw ParseError("expected " + std::to_string(width) + " values, found " + std::to_string(row.size()),
                         reader.line_number());
      }
      rows.push_back(std::move(row));
    }
  }
  if (!have_vertex) throw ParseError("no vertex element", reader.line_number());
  return assemble(rows, width, xyz, feature_cols);
}

std::string format_csv_cloud(const PointCloud& cloud) {
  std::string out;
  const auto& p = cloud.positions();
  const auto& f = cloud.features();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (int a = 0; a < 3; ++a) {
      if (a) out += ',';
      append_number(out, p(i, a));
    }
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      out += ',';
      append_number(out, f(i, c));
    }
    out += '\n';
  }
  return out;
}

std::string format_ply_cloud(const PointCloud& cloud) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  for (std::size_t c = 0; c < cloud.feature_dim(); ++c) out += "property double f" + std::to_string(c) + "\n";
  out += "end_header\n";
  const auto& p = cloud.positions();
  const auto& f = cloud.features();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (int a = 0; a < 3; ++a) {
      if (a) out += ' ';
      append_number(out, p(i, a));
    }
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      out += ' ';
      append_number(out, f(i, c));
    }
    out += '\n';
  }
  return out;
}

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format) {
  const std::string text = read_text_file(path);
  return format == CloudFormat::PlyAscii ? parse_ply_cloud(text) : parse_csv_cloud(text);
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  write_text_file(path, format == CloudFormat::PlyAscii ? format_ply_cloud(cloud) : format_csv_cloud(cloud));
}

}  // namespace crfconv
