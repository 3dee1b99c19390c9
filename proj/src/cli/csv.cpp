#include "cli/csv.hpp"

#include <cmath>

#include "crfconv/crf_discrete.hpp"
#include "crfconv/text.hpp"

namespace crfconv::cli {

std::string format_edge_list(const PointCloud& cloud, const NeighborGraph& graph) {
  const auto dist = edge_distances(cloud, graph);
  std::string out = "src,dst,distance\n";
  for (NodeIndex i = 0; i < graph.num_nodes(); ++i) {
    const auto nb = graph.neighbors(i);
    const std::size_t b = graph.edge_begin(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(nb[k]);
      out += ',';
      append_number(out, dist[b + k]);
      out += '\n';
    }
  }
  return out;
}

std::string format_matrix(const FeatureMatrix& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      append_number(out, m(r, c));
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix parse_matrix(std::string_view text) {
  std::vector<std::vector<double>> rows;
  LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    auto row = parse_number_row(line, ',', reader.line_number());
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("expected " + std::to_string(rows.front().size()) + " columns, found " + std::to_string(row.size()),
                       reader.line_number());
    }
    rows.push_back(std::move(row));
  }
  FeatureMatrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

FeatureMatrix read_probabilities(const std::filesystem::path& path) {
  FeatureMatrix p = parse_matrix(read_text_file(path));
  check_simplex_rows(p, kProbabilityRowTolerance, "probability");
  // Rows accepted above may be off by more than the label-field tolerance.
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double sum = p.row(i).sum();
    if (std::abs(sum - 1.0) > 1e-12) p.row(i) /= sum;
  }
  return p;
}

std::string format_labels(const std::vector<std::size_t>& labels) {
  std::string out;
  for (std::size_t l : labels) {
    out += std::to_string(l);
    out += '\n';
  }
  return out;
}

std::string format_trace(const std::vector<double>& energies) {
  std::string out = "step,energy\n";
  for (std::size_t t = 0; t < energies.size(); ++t) {
    out += std::to_string(t + 1);
    out += ',';
    append_number(out, energies[t]);
    out += '\n';
  }
  return out;
}

}  // namespace crfconv::cli
