#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "crfconv/cloud.hpp"

namespace crfconv::cli {

inline constexpr double kProbabilityRowTolerance = 1e-6;

/// Header "src,dst,distance", one line per directed edge.
std::string format_edge_list(const PointCloud& cloud, const NeighborGraph& graph);

/// Comma-separated rows without a header.
std::string format_matrix(const FeatureMatrix& m);
/// Inverse of format_matrix. Blank lines are skipped; ragged rows throw
/// ParseError with the line number.
FeatureMatrix parse_matrix(std::string_view text);

/// Probability rows; every row must sum to 1 within kProbabilityRowTolerance.
/// Rows that pass but are off by more than 1e-12 are rescaled to sum to 1.
FeatureMatrix read_probabilities(const std::filesystem::path& path);

/// One label per line.
std::string format_labels(const std::vector<std::size_t>& labels);

/// Header "step,energy", steps numbered from 1.
std::string format_trace(const std::vector<double>& energies);

}  // namespace crfconv::cli
