#include <ale/oracle.hpp>
#include <ale/synthetic.hpp>
#include <ale/verifier.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ale;

namespace {

const std::vector<double> kExampleActivations{1, 3, 1, 8, 2};

ModelBundle example_head()
{
  return make_bundle(Matrix(5, 1), synthetic::running_example_weights());
}

ActivationBounds topk_box(std::vector<std::size_t> fixed)
{
  return topk_bounds(fixed, kExampleActivations);
}

ActivationBounds random_box(std::mt19937_64& rng, std::size_t m)
{
  std::uniform_real_distribution<double> u(0.0, 9.0);
  ActivationBounds b{std::vector<double>(m), std::vector<double>(m)};
  for (std::size_t j = 0; j < m; ++j) {
    double x = u(rng), y = u(rng);
    if (x > y)
      std::swap(x, y);
    b.lower[j] = x;
    b.upper[j] = y;
  }
  return b;
}

} // namespace

TEST(MaxFavoring, ExampleTop1Box)
{
  const auto b = example_head();
  // Class 0 challenges the predicted class 1.
  EXPECT_EQ(max_favoring(topk_box({3}), b, 0, 1), (std::vector<double>{8, 8, 8, 8, 0}));
}

TEST(MaxFavoring, IdenticalRowsTakeEveryUpperBound)
{
  const auto b = make_bundle(Matrix(4, 1), Matrix(3, 4, 2.0));
  const ActivationBounds box{{0, 1, 2, 3}, {4, 5, 6, 7}};
  EXPECT_EQ(max_favoring(box, b, 2, 0), box.upper);
}

TEST(MaxFavoring, RejectsBadClassesAndShapes)
{
  const auto b = example_head();
  EXPECT_THROW(max_favoring(topk_box({3}), b, 2, 1), IndexError);
  const ActivationBounds short_box{{0, 0}, {1, 1}};
  EXPECT_THROW(max_favoring(short_box, b, 0, 1), DimensionError);
}

TEST(MaxFavoring, AgreesWithCornerEnumeration)
{
  std::mt19937_64 rng(21);
  for (int t = 0; t < 300; ++t) {
    const std::size_t m = 1 + t % 12;
    const auto bundle = synthetic::random_bundle(rng, {std::size_t(2 + t % 3), m, 2});
    const auto box = random_box(rng, m);
    const std::size_t c = t % bundle.num_classes;
    const auto corners = oracle::corner_oracle(box, bundle, c);
    for (std::size_t k = 0; k < bundle.num_classes; ++k) {
      if (k == c)
        continue;
      const auto v = max_favoring(box, bundle, k, c);
      const double gap = logit(v, bundle, k) - logit(v, bundle, c);
      ASSERT_NEAR(gap, corners.max_gap.at(k), 1e-9) << "trial " << t << " class " << k;
    }
  }
}

TEST(Verify, Top1IsUnverifiedWithWitness)
{
  const auto b = example_head();
  const auto r = verify(topk_box({3}), b, 1);
  EXPECT_FALSE(r.verified);
  EXPECT_EQ(r.unverified_classes, (std::vector<std::size_t>{0}));
  const auto& w = r.witnesses.at(0);
  EXPECT_EQ(w.activations, (std::vector<double>{8, 8, 8, 8, 0}));
  EXPECT_EQ(logits(w.activations, b), (std::vector<double>{216, 120}));
  EXPECT_DOUBLE_EQ(w.logit_gap, 96.0);
}

TEST(Verify, Top2IsVerified)
{
  const auto b = example_head();
  const auto box = topk_box({3, 1});
  EXPECT_TRUE(verify(box, b, 1).verified);
  const auto v = max_favoring(box, b, 0, 1);
  EXPECT_EQ(logits(v, b), (std::vector<double>{81, 95}));
}

TEST(Verify, PointBoxAtTheAnchorAlwaysVerifies)
{
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto bundle = synthetic::random_bundle(rng, {std::size_t(2 + t % 4), 6, 3});
    const auto z = synthetic::random_instance(rng, bundle, 2);
    const auto a = activations(z, bundle);
    const ActivationBounds point{a, a};
    EXPECT_TRUE(verify(point, bundle, predict(z, bundle)).verified) << t;
  }
}

TEST(Verify, TiesFollowLowestIndexArgmax)
{
  // Both classes score the same at every point of the box.
  const auto b = make_bundle(Matrix(2, 1), Matrix(2, 2, 1.0));
  const ActivationBounds box{{1, 1}, {2, 2}};
  EXPECT_TRUE(verify(box, b, 0).verified);
  const auto r = verify(box, b, 1);
  EXPECT_FALSE(r.verified);
  EXPECT_DOUBLE_EQ(r.witnesses.at(0).logit_gap, 0.0);
  EXPECT_EQ(predict_from_activations(r.witnesses.at(0).activations, b), 0u);
}

TEST(Verify, MarginOnlyRemovesVerifiedBoxes)
{
  const auto b = example_head();
  const auto box = topk_box({3, 1});
  EXPECT_TRUE(verify(box, b, 1, 13.9).verified);
  // Class 0 has the lower index, so the gap of 14 must be beaten strictly.
  EXPECT_FALSE(verify(box, b, 1, 14.0).verified);
}

TEST(Verify, WitnessesLieInTheBoxAndFlipTheClass)
{
  std::mt19937_64 rng(8);
  std::size_t unverified = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t m = 2 + t % 10;
    const auto bundle = synthetic::random_bundle(rng, {std::size_t(2 + t % 4), m, 2});
    const auto box = random_box(rng, m);
    const std::size_t c = t % bundle.num_classes;
    const auto r = verify(box, bundle, c);
    EXPECT_EQ(r.verified, r.unverified_classes.empty());
    EXPECT_EQ(r.verified, oracle::reference::verified(box, bundle, c, 0.0));
    for (const auto& [k, w] : r.witnesses) {
      ++unverified;
      EXPECT_TRUE(box.contains(w.activations, 0.0));
      EXPECT_NE(predict_from_activations(w.activations, bundle), c);
      EXPECT_NEAR(w.logit_gap, logit(w.activations, bundle, k) - logit(w.activations, bundle, c),
                  1e-12);
    }
  }
  EXPECT_GT(unverified, 0u);
}

TEST(Verify, TighterBoxesStayVerified)
{
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t checked = 0;
  for (int t = 0; t < 2000; ++t) {
    const std::size_t m = 2 + t % 8;
    const auto bundle = synthetic::random_bundle(rng, {3, m, 2});
    const auto outer = random_box(rng, m);
    const std::size_t c = t % 3;
    if (!verify(outer, bundle, c).verified)
      continue;
    ++checked;
    ActivationBounds inner = outer;
    for (std::size_t j = 0; j < m; ++j) {
      const double w = outer.upper[j] - outer.lower[j];
      inner.lower[j] += 0.5 * u(rng) * w;
      inner.upper[j] -= 0.5 * u(rng) * w;
    }
    EXPECT_TRUE(verify(inner, bundle, c).verified) << t;
  }
  EXPECT_GT(checked, 20u);
}
