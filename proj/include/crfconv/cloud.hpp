#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "crfconv/common.hpp"

namespace crfconv {

/// Positions in 3D plus one feature row per point. Every value is finite.
class PointCloud {
public:
  PointCloud() : positions_(0, 3), features_(0, 0) {}
  PointCloud(PositionMatrix positions, FeatureMatrix features);

  /// Cloud with positions only (feature width 0).
  explicit PointCloud(PositionMatrix positions);

  std::size_t size() const { return static_cast<std::size_t>(positions_.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features_.cols()); }
  bool empty() const { return size() == 0; }

  const PositionMatrix& positions() const { return positions_; }
  const FeatureMatrix& features() const { return features_; }

  Eigen::Vector3d position(NodeIndex i) const { return positions_.row(static_cast<Eigen::Index>(i)); }

  /// Replaces the feature block; row count must match.
  void set_features(FeatureMatrix features);

private:
  PositionMatrix positions_;
  FeatureMatrix features_;
};

/// Directed adjacency in compressed rows. Node i's neighbors are listed in a
/// fixed order (for constructed graphs: ascending distance, ties by index).
class NeighborGraph {
public:
  NeighborGraph() = default;

  /// Throws InvariantError on self loops, duplicate or out-of-range indices,
  /// and negative or non-finite weights.
  explicit NeighborGraph(const std::vector<std::vector<NodeIndex>>& lists);
  NeighborGraph(const std::vector<std::vector<NodeIndex>>& lists,
                const std::vector<std::vector<double>>& weights);

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const { return indices_.size(); }
  bool has_weights() const { return weighted_; }

  std::span<const NodeIndex> neighbors(NodeIndex i) const {
    return {indices_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::span<const double> weights(NodeIndex i) const {
    return {weights_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t degree(NodeIndex i) const { return offsets_[i + 1] - offsets_[i]; }

  /// Offset of node i's first edge in the flat edge arrays.
  std::size_t edge_begin(NodeIndex i) const { return offsets_[i]; }
  std::span<const NodeIndex> flat_indices() const { return indices_; }
  std::span<const double> flat_weights() const { return weights_; }

  /// Same topology, new per-edge weights in flat edge order.
  NeighborGraph with_weights(std::vector<double> flat_weights) const;
  NeighborGraph without_weights() const;

  std::vector<std::vector<NodeIndex>> lists() const;

  /// Edge-wise equality of topology and weights.
  friend bool operator==(const NeighborGraph&, const NeighborGraph&) = default;

private:
  void validate() const;

  std::vector<std::size_t> offsets_{0};
  std::vector<NodeIndex> indices_;
  std::vector<double> weights_;
  bool weighted_ = false;
};

/// Farthest-point sample of a cloud.
struct SampleIndex {
  std::vector<NodeIndex> selected;
  double ratio = 1.0;
};

enum class CloudFormat { PlyAscii, CsvXyz };

/// Parses "ply" / "ply-ascii" / "csv" / "csv-xyz".
CloudFormat parse_cloud_format(std::string_view name);
/// Guesses the format from a file extension; defaults to CSV.
CloudFormat cloud_format_from_path(const std::filesystem::path& path);

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

PointCloud parse_csv_cloud(std::string_view text);
PointCloud parse_ply_cloud(std::string_view text);
std::string format_csv_cloud(const PointCloud& cloud);
std::string format_ply_cloud(const PointCloud& cloud);

/// The min(k, N-1) nearest other points of every node, ascending by distance,
/// ties by lower index.
NeighborGraph knn_graph(const PointCloud& cloud, std::size_t k);

/// Keeps distance ranks dil, 2*dil, ..., k*dil (1-indexed, self excluded).
NeighborGraph dilated_knn_graph(const PointCloud& cloud, std::size_t k, std::size_t dilation);

/// All other points with squared distance <= radius_sq, ascending by distance.
NeighborGraph radius_graph(const PointCloud& cloud, double radius_sq);

/// Greedy farthest point sampling of max(1, ceil(ratio*N)) points.
SampleIndex farthest_point_sample(const PointCloud& cloud, double ratio, NodeIndex seed_index);

inline constexpr std::size_t kDefaultInterpolationK = 3;
inline constexpr double kCoincidenceDistance = 1e-12;

/// Interpolation stencil of one fine point: coarse indices with convex weights.
struct InterpolationStencil {
  std::vector<NodeIndex> sources;
  std::vector<double> weights;
};

/// Inverse-squared-distance weights over the min(k, coarse.N) nearest coarse
/// points. A fine point within kCoincidenceDistance of a coarse point copies it.
std::vector<InterpolationStencil> interpolation_stencils(const PositionMatrix& coarse,
                                                         const PositionMatrix& fine,
                                                         std::size_t k = kDefaultInterpolationK);

FeatureMatrix knn_interpolate(const PointCloud& coarse, const PositionMatrix& fine_positions,
                              std::size_t k = kDefaultInterpolationK);

/// Euclidean distance of every edge, flat edge order.
std::vector<double> edge_distances(const PointCloud& cloud, const NeighborGraph& graph);

}  // namespace crfconv
