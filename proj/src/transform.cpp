#include "crfconv/transform.hpp"

#include <cmath>

#include "crfconv/text.hpp"

namespace crfconv {

double Activation::apply(double v) const {
  switch (kind) {
    case Kind::Identity: return v;
    case Kind::Relu: return v > 0.0 ? v : 0.0;
    case Kind::LeakyRelu: return v > 0.0 ? v : slope * v;
  }
  return v;
}

double Activation::derivative(double v) const {
  switch (kind) {
    case Kind::Identity: return 1.0;
    case Kind::Relu: return v > 0.0 ? 1.0 : 0.0;
    case Kind::LeakyRelu: return v > 0.0 ? 1.0 : slope;
  }
  return 1.0;
}

FeatureMatrix Activation::apply(const FeatureMatrix& m) const {
  if (kind == Kind::Identity) return m;
  return m.unaryExpr([this](double v) { return apply(v); });
}

Activation Activation::parse(std::string_view name, double slope) {
  if (name == "identity" || name == "linear") return identity();
  if (name == "relu") return relu();
  if (name == "leaky-relu" || name == "leaky_relu") {
    if (!std::isfinite(slope)) throw InvariantError("leaky-relu slope must be finite");
    return leaky_relu(slope);
  }
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string Activation::name() const {
  switch (kind) {
    case Kind::Identity: return "identity";
    case Kind::Relu: return "relu";
    case Kind::LeakyRelu: return "leaky-relu";
  }
  return "identity";
}

PointwiseTransform::PointwiseTransform(std::vector<AffineLayer> layers) : layers_(std::move(layers)) { validate(); }

PointwiseTransform PointwiseTransform::linear(Matrix weight) {
  Vector bias = Vector::Zero(weight.rows());
  return PointwiseTransform({AffineLayer{std::move(weight), std::move(bias), Activation::identity()}});
}

void PointwiseTransform::validate() const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw ShapeError("layer " + std::to_string(l) + ": bias length does not match output width");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw ShapeError("layer " + std::to_string(l) + ": input width does not chain with the previous layer");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw InvariantError("layer " + std::to_string(l) + ": parameters must be finite");
    }
  }
}

std::optional<std::size_t> PointwiseTransform::input_dim() const {
  if (layers_.empty()) return std::nullopt;
  return static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t PointwiseTransform::output_dim(std::size_t input_width) const {
  if (layers_.empty()) return input_width;
  return static_cast<std::size_t>(layers_.back().weight.rows());
}

FeatureMatrix PointwiseTransform::apply(const FeatureMatrix& input) const { return forward(input).output; }

PointwiseTransform::Trace PointwiseTransform::forward(const FeatureMatrix& input) const {
  if (auto in = input_dim(); in && *in != static_cast<std::size_t>(input.cols())) {
    throw ShapeError("transform expects width " + std::to_string(*in) + ", got " + std::to_string(input.cols()));
  }
  Trace t;
  FeatureMatrix current = input;
  for (const auto& layer : layers_) {
    t.inputs.push_back(current);
    FeatureMatrix pre = current * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    current = layer.activation.apply(pre);
    t.pre_activations.push_back(std::move(pre));
  }
  t.output = std::move(current);
  return t;
}

PointwiseTransform::Gradient PointwiseTransform::backward(const Trace& trace, const FeatureMatrix& upstream) const {
  Gradient g;
  g.layers.resize(layers_.size());
  FeatureMatrix grad = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const auto& pre = trace.pre_activations[l];
    FeatureMatrix dpre = grad;
    if (layer.activation.kind != Activation::Kind::Identity) {
      for (Eigen::Index i = 0; i < dpre.rows(); ++i) {
        for (Eigen::Index j = 0; j < dpre.cols(); ++j) dpre(i, j) *= layer.activation.derivative(pre(i, j));
      }
    }
    g.layers[l].weight = dpre.transpose() * trace.inputs[l];
    g.layers[l].bias = dpre.colwise().sum().transpose();
    grad = dpre * layer.weight;
  }
  g.input = std::move(grad);
  return g;
}

std::size_t PointwiseTransform::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Vector PointwiseTransform::flatten_parameters() const {
  Vector v(static_cast<Eigen::Index>(num_parameters()));
  Eigen::Index at = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) v(at++) = l.weight(r, c);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) v(at++) = l.bias(r);
  }
  return v;
}

void PointwiseTransform::assign_parameters(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_parameters()) throw ShapeError("parameter count mismatch");
  Eigen::Index at = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat(at++);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat(at++);
  }
  validate();
}

Vector PointwiseTransform::flatten(const std::vector<LayerGradient>& grads) {
  Eigen::Index total = 0;
  for (const auto& g : grads) total += g.weight.size() + g.bias.size();
  Vector v(total);
  Eigen::Index at = 0;
  for (const auto& g : grads) {
    for (Eigen::Index r = 0; r < g.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.weight.cols(); ++c) v(at++) = g.weight(r, c);
    }
    for (Eigen::Index r = 0; r < g.bias.size(); ++r) v(at++) = g.bias(r);
  }
  return v;
}

namespace {

// Next line that is neither blank nor a comment.
bool next_record(LineReader& reader, std::string_view& line) {
  while (reader.next(line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    line = t;
    return true;
  }
  return false;
}

}  // namespace

NamedTransforms parse_transforms(std::string_view text) {
  NamedTransforms out;
  LineReader reader(text);
  std::string_view line;
  while (next_record(reader, line)) {
    auto tok = split_whitespace(line);
    if (tok.size() != 3 || tok[0] != "transform") {
      throw ParseError("expected 'transform <name> <num_layers>'", reader.line_number());
    }
    const std::string name(tok[1]);
    const std::size_t num_layers = parse_count(tok[2], reader.line_number());
    std::vector<AffineLayer> layers;
    for (std::size_t l = 0; l < num_layers; ++l) {
      if (!next_record(reader, line)) throw ParseError("unexpected end of file in transform '" + name + "'", reader.line_number());
      tok = split_whitespace(line);
      if ((tok.size() != 4 && tok.size() != 5) || tok[0] != "layer") {
        throw ParseError("expected 'layer <in> <out> <activation> [slope]'", reader.line_number());
      }
      const std::size_t ln = reader.line_number();
      const auto in = static_cast<Eigen::Index>(parse_count(tok[1], ln));
      const auto outw = static_cast<Eigen::Index>(parse_count(tok[2], ln));
      const double slope = tok.size() == 5 ? parse_number(tok[4], ln) : 0.1;
      Activation act;
      try {
        act = Activation::parse(tok[3], slope);
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), ln);
      }
      AffineLayer layer{Matrix(outw, in), Vector(outw), act};
      for (Eigen::Index r = 0; r < outw; ++r) {
        if (!next_record(reader, line)) throw ParseError("missing weight row", reader.line_number());
        const auto row = parse_number_row(line, ' ', reader.line_number());
        if (static_cast<Eigen::Index>(row.size()) != in) {
          throw ParseError("weight row has " + std::to_string(row.size()) + " values, expected " + std::to_string(in),
                           reader.line_number());
        }
        for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = row[static_cast<std::size_t>(c)];
      }
      if (outw > 0) {
        if (!next_record(reader, line)) throw ParseError("missing bias row", reader.line_number());
        const auto row = parse_number_row(line, ' ', reader.line_number());
        if (static_cast<Eigen::Index>(row.size()) != outw) {
          throw ParseError("bias row has " + std::to_string(row.size()) + " values, expected " + std::to_string(outw),
                           reader.line_number());
        }
        for (Eigen::Index r = 0; r < outw; ++r) layer.bias(r) = row[static_cast<std::size_t>(r)];
      }
      layers.push_back(std::move(layer));
    }
    try {
      out.emplace_back(name, PointwiseTransform(std::move(layers)));
    } catch (const std::invalid_argument& e) {
      throw ParseError("transform '" + name + "': " + e.what(), reader.line_number());
    }
  }
  return out;
}

std::string format_transforms(const NamedTransforms& transforms) {
  std::string out;
  for (const auto& [name, t] : transforms) {
    out += "transform " + name + " " + std::to_string(t.layers().size()) + "\n";
    for (const auto& l : t.layers()) {
      out += "layer " + std::to_string(l.weight.cols()) + " " + std::to_string(l.weight.rows()) + " " +
             l.activation.name();
      if (l.activation.kind == Activation::Kind::LeakyRelu) out += " " + format_number(l.activation.slope);
      out += "\n";
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
          if (c) out += ' ';
          append_number(out, l.weight(r, c));
        }
        out += '\n';
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
        if (r) out += ' ';
        append_number(out, l.bias(r));
      }
      if (l.bias.size()) out += '\n';
    }
  }
  return out;
}

NamedTransforms read_transforms(const std::filesystem::path& path) { return parse_transforms(read_text_file(path)); }

void write_transforms(const NamedTransforms& transforms, const std::filesystem::path& path) {
  write_text_file(path, format_transforms(transforms));
}

std::optional<PointwiseTransform> find_transform(const NamedTransforms& transforms, std::string_view name) {
  for (const auto& [n, t] : transforms) {
    if (n == name) return t;
  }
  return std::nullopt;
}

}  // namespace crfconv
