#include "cli/config.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>

#include "crfconv/text.hpp"
#include "json.hpp"

namespace crfconv::cli {

using nlohmann::json;

namespace {

/// A JSON object whose keys must all be consumed.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(where() + " must be an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (const json* v = find(key)) out = convert<T>(*v, key);
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    if (const json* v = find(key); v && !v->is_null()) out = convert<T>(*v, key);
  }

  void number_or_inf(const std::string& key, double& out) {
    const json* v = find(key);
    if (!v) return;
    if (v->is_string()) {
      const auto s = v->get<std::string>();
      if (s != "inf" && s != "infinity") throw std::invalid_argument(path(key) + " must be a number or \"inf\"");
      out = std::numeric_limits<double>::infinity();
      return;
    }
    out = convert<double>(*v, key);
  }

  Section child(const std::string& key) {
    const json* v = find(key);
    static const json empty = json::object();
    return Section(v ? *v : empty, path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw std::invalid_argument("unknown config key '" + path(it.key()) + "'");
    }
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  template <class T>
  T convert(const json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, std::filesystem::path>) {
        return std::filesystem::path(v.get<std::string>());
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("");
        return v.get<bool>();
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_integer() || v.get<long long>() < 0) throw std::invalid_argument("");
        return v.get<T>();
      } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
        if (!v.is_array()) throw std::invalid_argument("");
        T out;
        for (const json& x : v) out.push_back(convert<std::size_t>(x, key));
        return out;
      } else {
        return v.get<T>();
      }
    } catch (const std::exception&) {
      throw std::invalid_argument("config key '" + path(key) + "' has the wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Matrix parse_matrix(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) throw std::invalid_argument("'" + key + "' must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = v[0].is_array() ? static_cast<Eigen::Index>(v[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::invalid_argument("'" + key + "' rows must all have the same length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) throw std::invalid_argument("'" + key + "' entries must be numbers");
      m(r, c) = x.get<double>();
    }
  }
  return m;
}

}  // namespace

void RunConfig::validate() const {
  if (graph.k == 0 && !graph.radius) throw InvariantError("graph.k must be positive");
  if (graph.dilation == 0) throw InvariantError("graph.dilation must be positive");
  if (graph.radius && !(std::isfinite(*graph.radius) && *graph.radius > 0.0)) {
    throw InvariantError("graph.radius must be finite and positive");
  }
  if (!(graph.sample_ratio > 0.0 && graph.sample_ratio <= 1.0)) throw InvariantError("graph.sample_ratio must lie in (0, 1]");
  if (crf.steps == 0) throw InvariantError("crf.steps must be positive");
  if (!(std::isfinite(crf.epsilon) && crf.epsilon > 0.0)) throw InvariantError("crf.epsilon must be finite and positive");
  if (std::isnan(crf.tol) || crf.tol < 0.0) throw InvariantError("crf.tol must be >= 0");
  if (!std::isfinite(crf.slope)) throw InvariantError("crf.slope must be finite");
  Activation::parse(crf.activation, crf.slope);
  if (crf.compat_factor) {
    if (crf.compat_factor->rows() != crf.compat_factor->cols()) throw ShapeError("crf.compat_factor must be square");
    if (!crf.compat_factor->allFinite()) throw InvariantError("crf.compat_factor contains NaN or Inf");
  }
  if (discrete.steps == 0) throw InvariantError("discrete.steps must be positive");
  if (!discrete.compat_file && discrete.compat != "identity" && discrete.compat != "potts-complement") {
    throw InvariantError("discrete.compat must be 'identity' or 'potts-complement'");
  }
  if (!(std::isfinite(diffusion.c) && diffusion.c > 0.0 && diffusion.c <= 1.0)) {
    throw InvariantError("diffusion.c must lie in (0, 1]");
  }
  if (fixture.kind != "three-cluster" && fixture.kind != "two-cluster" && fixture.kind != "two-node") {
    throw InvariantError("fixture.kind must be 'three-cluster', 'two-cluster' or 'two-node'");
  }
  if (fixture.points < 2) throw InvariantError("fixture.points must be at least 2");
  if (!(std::isfinite(fixture.noise) && fixture.noise >= 0.0)) throw InvariantError("fixture.noise must be >= 0");
  if (sweep_steps.empty()) throw InvariantError("sweep.steps must not be empty");
  for (std::size_t t : sweep_steps) {
    if (t == 0) throw InvariantError("sweep.steps entries must be positive");
  }
  if (threads < 0) throw InvariantError("threads must be >= 0");
}

CrfConfig RunConfig::crf_config(std::size_t feature_dim) const {
  CrfConfig c;
  c.steps = crf.steps;
  c.schedule = crf.schedule;
  c.convergence_tol = crf.tol;
  c.readout = Activation::parse(crf.activation, crf.slope);
  if (crf.compat_factor) {
    if (static_cast<std::size_t>(crf.compat_factor->cols()) != feature_dim) {
      throw ShapeError("crf.compat_factor has " + std::to_string(crf.compat_factor->cols()) +
                       " columns but features have width " + std::to_string(feature_dim));
    }
    c.compat = CompatibilityMatrix::from_factor(*crf.compat_factor, crf.epsilon);
  }
  return c;
}

RunConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(root, "");

  {
    Section s = top.child("input");
    s.get("cloud", cfg.input.cloud);
    std::optional<std::string> fmt;
    s.get("format", fmt);
    if (fmt) cfg.input.format = parse_cloud_format(*fmt);
    s.get("probabilities", cfg.input.probabilities);
    s.finish();
  }
  {
    Section s = top.child("output");
    s.get("dir", cfg.output.dir);
    std::optional<std::string> fmt;
    s.get("format", fmt);
    if (fmt) cfg.output.format = parse_cloud_format(*fmt);
    s.finish();
  }
  {
    Section s = top.child("graph");
    s.get("k", cfg.graph.k);
    s.get("dilation", cfg.graph.dilation);
    s.get("radius", cfg.graph.radius);
    s.get("sample_ratio", cfg.graph.sample_ratio);
    s.finish();
  }
  {
    Section s = top.child("crf");
    s.get("steps", cfg.crf.steps);
    std::optional<std::string> schedule;
    s.get("schedule", schedule);
    if (schedule) cfg.crf.schedule = parse_schedule(*schedule);
    s.get("epsilon", cfg.crf.epsilon);
    if (const json* f = s.find("compat_factor"); f && !f->is_null()) {
      cfg.crf.compat_factor = parse_matrix(*f, s.path("compat_factor"));
    }
    s.get("activation", cfg.crf.activation);
    s.get("slope", cfg.crf.slope);
    s.number_or_inf("tol", cfg.crf.tol);
    s.get("transforms", cfg.crf.transforms);
    s.finish();
  }
  {
    Section s = top.child("discrete");
    s.get("steps", cfg.discrete.steps);
    s.get("compat", cfg.discrete.compat);
    s.get("compat_file", cfg.discrete.compat_file);
    s.get("kernel", cfg.discrete.kernel);
    s.finish();
  }
  {
    Section s = top.child("diffusion");
    s.get("c", cfg.diffusion.c);
    s.get("steps", cfg.diffusion.steps);
    s.finish();
  }
  {
    Section s = top.child("fixture");
    s.get("kind", cfg.fixture.kind);
    s.get("points", cfg.fixture.points);
    s.get("noise", cfg.fixture.noise);
    s.finish();
  }
  {
    Section s = top.child("sweep");
    s.get("steps", cfg.sweep_steps);
    s.finish();
  }
  top.get("check_exact", cfg.check_exact);
  top.get("seed", cfg.seed);
  top.get("threads", cfg.threads);
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

void apply_environment(RunConfig& cfg) {
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) cfg.output.dir = dir;
}

}  // namespace crfconv::cli
