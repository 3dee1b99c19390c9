#include <gtest/gtest.h>

#include <random>

#include "cli/fixtures.hpp"
#include "crfconv/transform.hpp"
#include "oracles.hpp"

using namespace crfconv;

namespace {

PointwiseTransform random_chain(std::mt19937_64& rng, std::vector<std::size_t> widths) {
  std::vector<AffineLayer> layers;
  const Activation acts[] = {Activation::leaky_relu(0.1), Activation::identity(), Activation::relu()};
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    layers.push_back({cli::random_matrix(widths[l + 1], widths[l], rng), cli::random_matrix(widths[l + 1], 1, rng),
                      acts[l % 3]});
  }
  return PointwiseTransform(std::move(layers));
}

}  // namespace

TEST(Activation, ValuesAndNames) {
  const auto lr = Activation::leaky_relu(0.1);
  EXPECT_DOUBLE_EQ(lr.apply(-2.0), -0.2);
  EXPECT_EQ(lr.apply(3.0), 3.0);
  EXPECT_EQ(Activation::relu().apply(-1.0), 0.0);
  EXPECT_EQ(Activation::parse("leaky_relu", 0.2).slope, 0.2);
  EXPECT_EQ(Activation::parse("linear").kind, Activation::Kind::Identity);
  EXPECT_THROW(Activation::parse("tanh"), std::invalid_argument);
}

TEST(PointwiseTransform, IdentityPassesThrough) {
  const FeatureMatrix x{{1, -2}, {3, 4}};
  EXPECT_EQ(PointwiseTransform::identity().apply(x), x);
  EXPECT_EQ(PointwiseTransform::identity().output_dim(7), 7u);
}

TEST(PointwiseTransform, LinearLayer) {
  const auto t = PointwiseTransform::linear(Matrix{{1, 2}, {0, -1}, {3, 0}});
  const FeatureMatrix y = t.apply(FeatureMatrix{{1, 1}});
  EXPECT_EQ(y, (FeatureMatrix{{3, -1, 3}}));
  EXPECT_EQ(t.input_dim().value(), 2u);
  EXPECT_THROW(t.apply(FeatureMatrix::Zero(1, 3)), ShapeError);
}

TEST(PointwiseTransform, RejectsBrokenChains) {
  EXPECT_THROW(PointwiseTransform({{Matrix::Ones(2, 3), Vector::Zero(2), {}}, {Matrix::Ones(1, 3), Vector::Zero(1), {}}}),
               ShapeError);
  EXPECT_THROW(PointwiseTransform({{Matrix::Ones(2, 3), Vector::Zero(3), {}}}), ShapeError);
  Matrix bad = Matrix::Ones(1, 1);
  bad(0, 0) = NAN;
  EXPECT_THROW(PointwiseTransform::linear(bad), InvariantError);
}

TEST(PointwiseTransform, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 8; ++trial) {
    auto t = random_chain(rng, {3, 4, 2, 3});
    const FeatureMatrix x = cli::random_features(5, 3, rng);
    const FeatureMatrix up = cli::random_features(5, 3, rng);
    const auto grad = t.backward(t.forward(x), up);

    auto loss_x = [&](const Vector& v) { return (t.apply(oracle::unflat(v, 5, 3)).array() * up.array()).sum(); };
    EXPECT_LE(oracle::relative_error(oracle::flat(grad.input), oracle::central_difference(loss_x, oracle::flat(x), 1e-6)),
              1e-6);

    const Vector theta = t.flatten_parameters();
    auto loss_p = [&](const Vector& v) {
      auto copy = t;
      copy.assign_parameters(v);
      return (copy.apply(x).array() * up.array()).sum();
    };
    EXPECT_LE(oracle::relative_error(PointwiseTransform::flatten(grad.layers), oracle::central_difference(loss_p, theta, 1e-6)),
              1e-6);
  }
}

TEST(PointwiseTransform, ParameterRoundTrip) {
  std::mt19937_64 rng(2);
  auto t = random_chain(rng, {2, 3, 1});
  EXPECT_EQ(t.num_parameters(), 2u * 3 + 3 + 3 * 1 + 1);
  const Vector theta = t.flatten_parameters();
  auto u = random_chain(rng, {2, 3, 1});
  u.assign_parameters(theta);
  EXPECT_EQ(u.flatten_parameters(), theta);
  EXPECT_THROW(u.assign_parameters(Vector::Zero(3)), ShapeError);
}

TEST(TransformFile, RoundTripIsExact) {
  std::mt19937_64 rng(3);
  NamedTransforms named{{"unary", random_chain(rng, {3, 5, 3})},
                        {"projection", random_chain(rng, {3, 2})},
                        {"empty", PointwiseTransform::identity()}};
  const auto text = format_transforms(named);
  const auto back = parse_transforms(text);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < named.size(); ++i) {
    EXPECT_EQ(back[i].first, named[i].first);
    EXPECT_EQ(back[i].second.flatten_parameters(), named[i].second.flatten_parameters());
    ASSERT_EQ(back[i].second.layers().size(), named[i].second.layers().size());
    for (std::size_t l = 0; l < back[i].second.layers().size(); ++l) {
      EXPECT_EQ(back[i].second.layers()[l].activation.kind, named[i].second.layers()[l].activation.kind);
      EXPECT_EQ(back[i].second.layers()[l].activation.slope, named[i].second.layers()[l].activation.slope);
    }
  }
  EXPECT_EQ(format_transforms(back), text);
  EXPECT_TRUE(find_transform(back, "projection").has_value());
  EXPECT_FALSE(find_transform(back, "missing").has_value());
}

TEST(TransformFile, HandWrittenWithComments) {
  const auto named = parse_transforms(
      "# unary net\n"
      "transform unary 1\n"
      "layer 2 1 leaky-relu 0.2\n"
      "1 -1\n"
      "\n"
      "0.5\n");
  const auto y = named[0].second.apply(FeatureMatrix{{0, 2}});
  EXPECT_DOUBLE_EQ(y(0, 0), 0.2 * (-2 + 0.5));
}

TEST(TransformFile, ErrorsNameTheLine) {
  try {
    parse_transforms("transform t 1\nlayer 2 1 relu\n1 2 3\n0\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_transforms("transform t 1\nlayer 2 1 relu\n1 2\n"), ParseError);
  EXPECT_THROW(parse_transforms("layer 1 1 relu\n"), ParseError);
  EXPECT_THROW(parse_transforms("transform t 2\nlayer 2 1 relu\n1 2\n0\nlayer 2 1 relu\n1 1\n0\n"), ParseError);
}
