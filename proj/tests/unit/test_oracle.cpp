#include <ale/oracle.hpp>
#include <ale/synthetic.hpp>

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

} // namespace

// ---------------------------------------------------------------------------
// corners

TEST(CornerOracle, ExampleTop1Box)
{
  const auto r = oracle::corner_oracle(topk_box({3}), example_head(), 1);
  EXPECT_DOUBLE_EQ(r.max_gap.at(0), 96.0);
  EXPECT_EQ(r.argmax.at(0), (std::vector<double>{8, 8, 8, 8, 0}));
  EXPECT_EQ(r.max_gap.count(1), 0u);
}

TEST(CornerOracle, DegenerateBoxIsThePoint)
{
  const auto b = example_head();
  const ActivationBounds point{kExampleActivations, kExampleActivations};
  const auto r = oracle::corner_oracle(point, b, 1);
  EXPECT_DOUBLE_EQ(r.max_gap.at(0), 47.0 - 115.0);
  EXPECT_EQ(r.argmax.at(0), kExampleActivations);
}

TEST(CornerOracle, RefusesLargeBoxes)
{
  const auto b = make_bundle(Matrix(25, 1), Matrix(2, 25, 1.0));
  const ActivationBounds box{std::vector<double>(25, 0.0), std::vector<double>(25, 1.0)};
  EXPECT_THROW(oracle::corner_oracle(box, b, 0), SizeLimitError);
}

TEST(CornerOracle, MatchesMaxFavoringOnTenPrototypes)
{
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int t = 0; t < 50; ++t) {
    const auto b = synthetic::random_bundle(rng, {3, 10, 2});
    ActivationBounds box{std::vector<double>(10), std::vector<double>(10)};
    for (std::size_t j = 0; j < 10; ++j) {
      box.lower[j] = u(rng);
      box.upper[j] = box.lower[j] + u(rng);
    }
    const auto r = oracle::corner_oracle(box, b, 2);
    for (std::size_t k : {0u, 1u}) {
      const auto v = max_favoring(box, b, k, 2);
      EXPECT_NEAR(logit(v, b, k) - logit(v, b, 2), r.max_gap.at(k), 1e-9);
    }
  }
}

// ---------------------------------------------------------------------------
// sampling

TEST(SampleOracle, VerifiedBoxNeverFlips)
{
  const auto rep = oracle::sample_oracle(topk_box({3, 1}), example_head(), 1, 10000, 1);
  EXPECT_EQ(rep.checked, 10000u);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_FALSE(rep.first_violation);
}

TEST(SampleOracle, UnverifiedBoxFlips)
{
  const auto box = topk_box({3});
  const auto rep = oracle::sample_oracle(box, example_head(), 1, 10000, 1);
  EXPECT_GT(rep.violations, 0u);
  ASSERT_TRUE(rep.first_violation);
  EXPECT_EQ(rep.first_violation->got, "0");
  // The counterexample activation vector from the running example lies in the box.
  const std::vector<double> counter{6, 7, 1, 8, 2};
  EXPECT_TRUE(box.contains(counter, 0.0));
  EXPECT_EQ(predict_from_activations(counter, example_head()), 0u);
}

TEST(SampleOracle, PointBoxNeverFlips)
{
  const ActivationBounds point{kExampleActivations, kExampleActivations};
  EXPECT_EQ(oracle::sample_oracle(point, example_head(), 1, 1000, 5).violations, 0u);
}

TEST(SampleOracle, DeterministicGivenSeed)
{
  const auto box = topk_box({3});
  const auto a = oracle::sample_oracle(box, example_head(), 1, 500, 9);
  const auto b = oracle::sample_oracle(box, example_head(), 1, 500, 9);
  EXPECT_EQ(a.violations, b.violations);
  EXPECT_EQ(a.first_violation->input, b.first_violation->input);
  EXPECT_THROW(oracle::sample_oracle(box, example_head(), 1, 0, 9), ValidationError);
}

// ---------------------------------------------------------------------------
// minimality

TEST(MinimalityOracle, SearchOutputsAreMinimal)
{
  const auto b = synthetic::running_example_bundle();
  const auto z = synthetic::running_example_instance();
  for (Paradigm p : {Paradigm::topk, Paradigm::triangle, Paradigm::hypersphere}) {
    SearchConfig cfg;
    cfg.paradigm = p;
    const auto r = explain(z, b, cfg);
    const auto rep = oracle::minimality_oracle(r.explanation, z, b, cfg);
    EXPECT_EQ(rep.violations, 0u) << to_string(p);
    EXPECT_EQ(rep.checked, r.explanation.size());
  }
}

TEST(MinimalityOracle, ForwardPassBeforePruningIsNotMinimal)
{
  const auto s = synthetic::well_separated_shape();
  std::mt19937_64 rng(3);
  const auto b = synthetic::corpus_bundle(rng, s);
  const auto zs = synthetic::corpus(b, s, 3);
  std::size_t flagged = 0, shrunk = 0;
  for (const auto& z : zs) {
    SearchConfig cfg;
    cfg.paradigm = Paradigm::triangle;
    cfg.record_trace = true;
    const auto r = spatial_ale(z, b, cfg);
    Explanation forward{Paradigm::triangle, {}, {}};
    for (const auto& ev : r.trace)
      if (ev.phase == TraceEvent::Phase::forward)
        forward.pairs.push_back(ev.pair);
    if (forward.size() > r.explanation.size()) {
      ++shrunk;
      flagged += oracle::minimality_oracle(forward, z, b, cfg).violations > 0;
    }
  }
  EXPECT_GT(shrunk, 0u);
  EXPECT_GT(flagged, 0u);
}

TEST(MinimalityOracle, Singletons)
{
  Anchor a;
  a.activations = kExampleActivations;
  a.distances = Matrix(1, 5);
  a.predicted = 1;
  SearchConfig cfg;
  const Explanation top1{Paradigm::topk, {3}, {}};
  // {3} alone is unverified, so it is not an input the oracle accepts.
  EXPECT_THROW(oracle::minimality_oracle(top1, a, example_head(), cfg), StateError);
  // The empty box favours class 0 by 27 sigma_max - 5 sigma_max = 202.6 and {3} by 96.
  // A bias of 300 on class 1 makes the empty set verify, so {3} is not minimal.
  const auto generous = make_bundle(Matrix(5, 1), synthetic::running_example_weights(), {}, {0, 300});
  EXPECT_EQ(oracle::minimality_oracle(top1, a, generous, cfg).violations, 1u);
  // A bias of 150 leaves the empty set unverified while {3} verifies: minimal.
  const auto tight = make_bundle(Matrix(5, 1), synthetic::running_example_weights(), {}, {0, 150});
  EXPECT_EQ(oracle::minimality_oracle(top1, a, tight, cfg).violations, 0u);
}

// ---------------------------------------------------------------------------
// containment

TEST(ContainmentOracle, RightTriangleInThePlane)
{
  const std::vector<double> c1{0, 0}, c2{5, 0};
  const auto rep = oracle::sphere_containment_oracle(c1, 3.0, c2, 4.0, 1000, 1);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_NEAR(rep.metrics.at("r3"), 2.4, 1e-12);
  // In the plane the meeting set is two points, 2 r3 apart.
  EXPECT_NEAR(rep.metrics.at("max_pairwise_distance"), 4.8, 1e-9);
}

TEST(ContainmentOracle, ThreeFourFive)
{
  // Centers 3 apart, radii 5 and 4: the meeting set is a circle of radius 4 around (3,0,0).
  const std::vector<double> c1{0, 0, 0}, c2{3, 0, 0};
  const auto rep = oracle::sphere_containment_oracle(c1, 5.0, c2, 4.0, 1000, 2);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_NEAR(rep.metrics.at("r3"), 4.0, 1e-12);
  EXPECT_GE(rep.metrics.at("max_pairwise_distance"), 7.98);
  EXPECT_LE(rep.metrics.at("max_pairwise_distance"), 8.0 + 1e-9);
  EXPECT_NEAR(rep.metrics.at("antipodal_distance"), 8.0, 1e-9);
}

TEST(ContainmentOracle, TangentSpheresMeetInOnePoint)
{
  const std::vector<double> c1{0, 0, 0}, c2{5, 0, 0};
  const auto rep = oracle::sphere_containment_oracle(c1, 2.0, c2, 3.0, 100, 3);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_EQ(rep.metrics.at("r3"), 0.0);
  EXPECT_EQ(rep.metrics.at("max_pairwise_distance"), 0.0);
}

TEST(ContainmentOracle, RandomEightDimensionalPairs)
{
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> c1(8), c2(8);
    for (std::size_t i = 0; i < 8; ++i) {
      c1[i] = 3.0 * g(rng);
      c2[i] = 3.0 * g(rng);
    }
    const double d = l2_distance(c1, c2);
    const double r1 = u(rng) * 2.0 * d;
    const double lo = std::abs(d - r1), hi = d + r1;
    const double r2 = lo + u(rng) * (hi - lo) * 0.999;
    const auto rep = oracle::sphere_containment_oracle(c1, r1, c2, r2, 1000, t);
    ASSERT_EQ(rep.violations, 0u) << t;
    EXPECT_GE(rep.metrics.at("max_pairwise_distance"), 0.9 * 2.0 * rep.metrics.at("r3"));
  }
}

TEST(ContainmentOracle, Errors)
{
  const std::vector<double> a{0, 0}, b{10, 0}, line{0}, far{1};
  EXPECT_THROW(oracle::sphere_containment_oracle(a, 1.0, b, 1.0, 10, 1), EmptyIntersectionError);
  EXPECT_THROW(oracle::sphere_containment_oracle(line, 1.0, far, 1.0, 10, 1), DimensionError);
}
