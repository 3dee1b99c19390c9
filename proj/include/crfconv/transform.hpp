#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crfconv/common.hpp"

namespace crfconv {

struct Activation {
  enum class Kind { Identity, Relu, LeakyRelu };

  Kind kind = Kind::Identity;
  double slope = 0.0;  // negative-side slope, LeakyRelu only

  static Activation identity() { return {}; }
  static Activation relu() { return {Kind::Relu, 0.0}; }
  static Activation leaky_relu(double slope = 0.1) { return {Kind::LeakyRelu, slope}; }

  double apply(double v) const;
  /// Derivative at v; 0 (relu) or slope (leaky) is used at v == 0.
  double derivative(double v) const;

  FeatureMatrix apply(const FeatureMatrix& m) const;

  /// "identity", "relu", "leaky-relu"; the slope is only kept for leaky-relu.
  static Activation parse(std::string_view name, double slope = 0.1);
  std::string name() const;

  friend bool operator==(const Activation&, const Activation&) = default;
};

/// One affine stage y = act(W x + b), W stored as out x in.
struct AffineLayer {
  Matrix weight;
  Vector bias;
  Activation activation;
};

/// Chain of affine stages applied to every row of a feature matrix. An empty
/// chain is the identity for any width.
class PointwiseTransform {
public:
  PointwiseTransform() = default;
  explicit PointwiseTransform(std::vector<AffineLayer> layers);

  static PointwiseTransform identity() { return {}; }
  /// Single linear stage y = W x, no bias, identity activation.
  static PointwiseTransform linear(Matrix weight);

  bool is_identity() const { return layers_.empty(); }
  const std::vector<AffineLayer>& layers() const { return layers_; }

  /// nullopt for the identity chain.
  std::optional<std::size_t> input_dim() const;
  std::size_t output_dim(std::size_t input_width) const;

  FeatureMatrix apply(const FeatureMatrix& input) const;

  /// Pre-activation values of every stage, for the backward pass.
  struct Trace {
    std::vector<FeatureMatrix> inputs;
    std::vector<FeatureMatrix> pre_activations;
    FeatureMatrix output;
  };
  Trace forward(const FeatureMatrix& input) const;

  struct LayerGradient {
    Matrix weight;
    Vector bias;
  };
  struct Gradient {
    FeatureMatrix input;
    std::vector<LayerGradient> layers;
  };
  Gradient backward(const Trace& trace, const FeatureMatrix& upstream) const;

  /// Parameters in a fixed order: per layer, W row-major then b.
  std::size_t num_parameters() const;
  Vector flatten_parameters() const;
  void assign_parameters(const Vector& flat);
  static Vector flatten(const std::vector<LayerGradient>& grads);

private:
  void validate() const;

  std::vector<AffineLayer> layers_;
};

using NamedTransforms = std::vector<std::pair<std::string, PointwiseTransform>>;

/// Text weight-file format:
///
///   # comment
///   transform <name> <num_layers>
///   layer <in> <out> <identity|relu|leaky-relu> [slope]
///   <out lines of in weights>     (row-major W)
///   <one line of out biases>
///
/// Blank lines and '#' comments are ignored between records.
NamedTransforms parse_transforms(std::string_view text);
std::string format_transforms(const NamedTransforms& transforms);
NamedTransforms read_transforms(const std::filesystem::path& path);
void write_transforms(const NamedTransforms& transforms, const std::filesystem::path& path);

/// Looks up a transform by name; nullopt when absent.
std::optional<PointwiseTransform> find_transform(const NamedTransforms& transforms, std::string_view name);

}  // namespace crfconv
