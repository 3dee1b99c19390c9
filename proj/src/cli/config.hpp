#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crfconv/cloud.hpp"
#include "crfconv/crf_continuous.hpp"

namespace crfconv::cli {

inline constexpr const char* kOutputDirEnv = "CRFCONV_OUTPUT_DIR";

/// Everything a command needs. Loaded from a JSON file, then the output-dir
/// environment variable, then command-line flags (later sources win).
struct RunConfig {
  struct Input {
    std::optional<std::filesystem::path> cloud;
    std::optional<CloudFormat> format;  // guessed from the extension when unset
    std::optional<std::filesystem::path> probabilities;
  } input;

  struct Output {
    std::filesystem::path dir = ".";
    CloudFormat format = CloudFormat::CsvXyz;
  } output;

  struct Graph {
    std::size_t k = 16;
    std::size_t dilation = 1;
    /// Euclidean radius; selects the radius graph instead of kNN.
    std::optional<double> radius;
    /// Farthest-point subsampling before graph construction (build-graph only).
    double sample_ratio = 1.0;
  } graph;

  struct Crf {
    std::size_t steps = 10;
    Schedule schedule = Schedule::Jacobi;
    double epsilon = kDefaultCompatEpsilon;
    /// Factor c of C = c^T c + eps I. Unset means the exact identity.
    std::optional<Matrix> compat_factor;
    std::string activation = "leaky-relu";
    double slope = 0.1;
    double tol = 0.0;
    /// Transform file with optional entries "unary" and "projection".
    std::optional<std::filesystem::path> transforms;
  } crf;

  struct Discrete {
    std::size_t steps = 5;
    std::string compat = "potts-complement";
    std::optional<std::filesystem::path> compat_file;
    std::optional<std::filesystem::path> kernel;
  } discrete;

  struct Diffusion {
    double c = 0.5;
    std::size_t steps = 20;
  } diffusion;

  struct Fixture {
    std::string kind = "three-cluster";
    std::size_t points = 300;
    double noise = 0.3;
  } fixture;

  std::vector<std::size_t> sweep_steps{1, 2, 5, 10, 20, 50};
  bool check_exact = false;
  std::uint64_t seed = 0;
  int threads = 0;

  /// Enforces the constraints of every referenced module.
  void validate() const;

  CrfConfig crf_config(std::size_t feature_dim) const;
};

/// Parses the JSON config text. Unknown keys and wrongly typed values throw
/// std::invalid_argument naming the offending key path.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies kOutputDirEnv when it is set and non-empty.
void apply_environment(RunConfig& cfg);

}  // namespace crfconv::cli
