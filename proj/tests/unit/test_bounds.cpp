#include <ale/bounds.hpp>
#include <ale/synthetic.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ale;

namespace {

const std::vector<double> kExampleActivations{1, 3, 1, 8, 2};

// sigma(x) for epsilon = 1e-4, evaluated independently in double precision (Python math.log).
constexpr double kSigma13 = 0.07410027987561525;
constexpr double kSigma7 = 0.13351710701227676;

Explanation spatial(Paradigm p, std::vector<Pair> pairs)
{
  Explanation e;
  e.paradigm = p;
  e.pairs = std::move(pairs);
  return e;
}

std::vector<Pair> all_pairs(std::size_t L, std::size_t m)
{
  std::vector<Pair> out;
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t j = 0; j < m; ++j)
      out.push_back({l, j});
  return out;
}

ModelBundle line_bundle(std::vector<double> xs, double slack = 0.0)
{
  Matrix p(xs.size(), 1);
  for (std::size_t j = 0; j < xs.size(); ++j)
    p(j, 0) = xs[j];
  return make_bundle(std::move(p), Matrix(2, xs.size(), 1.0), {}, {}, slack);
}

} // namespace

// ---------------------------------------------------------------------------
// top-k

TEST(TopkBounds, SingleFixedPrototype)
{
  const std::size_t fixed[] = {3};
  const auto b = topk_bounds(fixed, kExampleActivations);
  EXPECT_EQ(b.lower, (std::vector<double>{0, 0, 0, 8, 0}));
  EXPECT_EQ(b.upper, (std::vector<double>{8, 8, 8, 8, 8}));
}

TEST(TopkBounds, TwoFixedPrototypes)
{
  const std::size_t fixed[] = {3, 1};
  const auto b = topk_bounds(fixed, kExampleActivations);
  EXPECT_EQ(b.lower, (std::vector<double>{0, 3, 0, 8, 0}));
  EXPECT_EQ(b.upper, (std::vector<double>{3, 3, 3, 8, 3}));
}

TEST(TopkBounds, EverythingFixedIsThePoint)
{
  const std::size_t fixed[] = {0, 1, 2, 3, 4};
  const auto b = topk_bounds(fixed, kExampleActivations);
  EXPECT_EQ(b.lower, kExampleActivations);
  EXPECT_EQ(b.upper, kExampleActivations);
}

TEST(TopkBounds, RejectsBadIndicesAndEmptySets)
{
  const std::size_t bad[] = {5};
  EXPECT_THROW(topk_bounds(bad, kExampleActivations), IndexError);
  EXPECT_THROW(topk_bounds(std::span<const std::size_t>{}, kExampleActivations), ValidationError);
}

// ---------------------------------------------------------------------------
// triangle

TEST(TriangleBounds, OneDimensionalHandComputation)
{
  const auto bundle = line_bundle({0.0, 10.0});
  Matrix dist = Matrix::from_rows({{3.0, 7.0}});
  const auto b = triangle_bounds(spatial(Paradigm::triangle, {{0, 0}}), dist, bundle, 1, 0.0);
  EXPECT_NEAR(b.lower[1], kSigma13, 1e-15);
  EXPECT_NEAR(b.upper[1], kSigma7, 1e-15);
  EXPECT_DOUBLE_EQ(b.lower[0], sigma(3.0, bundle.sigma));
  EXPECT_DOUBLE_EQ(b.upper[0], sigma(3.0, bundle.sigma));
}

TEST(TriangleBounds, ComponentOnAPrototypePinsEverything)
{
  std::mt19937_64 rng(2);
  const auto bundle = synthetic::random_bundle(rng, {2, 4, 3});
  LatentInstance z;
  z.components = Matrix(1, 3);
  for (std::size_t d = 0; d < 3; ++d)
    z.components(0, d) = bundle.prototypes(2, d);
  const Anchor a = make_anchor(z, bundle);
  const auto b = triangle_bounds(spatial(Paradigm::triangle, {{0, 2}}), a.distances, bundle, 1, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(b.lower[i], sigma(bundle.proto_dist(2, i), bundle.sigma));
    EXPECT_DOUBLE_EQ(b.upper[i], sigma(bundle.proto_dist(2, i), bundle.sigma));
  }
}

TEST(TriangleBounds, ContainTrueActivations)
{
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> coin(0, 1);
  for (int t = 0; t < 1000; ++t) {
    const auto bundle = synthetic::random_bundle(rng, {2, 4, 3});
    const auto z = synthetic::random_instance(rng, bundle, 2);
    const Anchor a = make_anchor(z, bundle);
    std::vector<Pair> pairs;
    for (const Pair& p : all_pairs(2, 4))
      if (coin(rng))
        pairs.push_back(p);
    const auto b = triangle_bounds(spatial(Paradigm::triangle, pairs), a.distances, bundle, 2,
                                   bundle.distance_slack);
    ASSERT_TRUE(b.contains(a.activations, 1e-9)) << "trial " << t;
  }
}

TEST(TriangleBounds, MissingDistanceIsReported)
{
  const auto bundle = line_bundle({0.0, 10.0});
  Matrix dist(1, 2, std::nan(""));
  EXPECT_THROW(triangle_bounds(spatial(Paradigm::triangle, {{0, 0}}), dist, bundle, 1, 0.0),
               ValidationError);
}

TEST(TriangleBounds, UncoveredComponentOpensEveryUpperBound)
{
  const auto bundle = line_bundle({0.0, 10.0});
  Matrix dist = Matrix::from_rows({{3.0, 7.0}, {1.0, 9.0}});
  const auto b = triangle_bounds(spatial(Paradigm::triangle, {{0, 0}}), dist, bundle, 2, 0.0);
  for (double u : b.upper)
    EXPECT_EQ(u, sigma_max(bundle.sigma));
  EXPECT_DOUBLE_EQ(b.lower[0], sigma(3.0, bundle.sigma));
}

// ---------------------------------------------------------------------------
// sphere geometry

TEST(HypersphereIntersect, SymmetricThreeFourFive)
{
  const std::vector<double> c1{0, 0}, c2{6, 0};
  const auto s = hypersphere_intersect(c1, 5, c2, 5, 0.0);
  EXPECT_DOUBLE_EQ(s.center[0], 3.0);
  EXPECT_DOUBLE_EQ(s.center[1], 0.0);
  EXPECT_DOUBLE_EQ(s.radius, 4.0);
}

TEST(HypersphereIntersect, Tangent)
{
  const std::vector<double> c1{0, 0}, c2{5, 0};
  const auto s = hypersphere_intersect(c1, 2, c2, 3, 0.0);
  EXPECT_DOUBLE_EQ(s.radius, 0.0);
  EXPECT_DOUBLE_EQ(s.center[0], 2.0);
  EXPECT_DOUBLE_EQ(s.center[1], 0.0);
}

TEST(HypersphereIntersect, SymmetricRootTwo)
{
  const std::vector<double> c1{0, 0}, c2{2, 0};
  const auto s = hypersphere_intersect(c1, std::sqrt(2.0), c2, std::sqrt(2.0), 0.0);
  EXPECT_NEAR(s.center[0], 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.center[1], 0.0);
  EXPECT_NEAR(s.radius, 1.0, 1e-15);
}

TEST(HypersphereIntersect, PlaneBehindTheFirstCenter)
{
  // The meeting circle lies on the far side of c1 from c2: offset -0.5 along the axis.
  const std::vector<double> c1{0, 0}, c2{2, 0};
  const double r1 = 1.0, r2 = std::sqrt(7.0);  // meeting points (-0.5, +-sqrt(0.75))
  const auto s = hypersphere_intersect(c1, r1, c2, r2, 0.0);
  EXPECT_NEAR(s.center[0], -0.5, 1e-15);
  EXPECT_NEAR(s.radius, std::sqrt(0.75), 1e-15);
}

TEST(HypersphereIntersect, Errors)
{
  const std::vector<double> c1{0, 0}, c2{10, 0}, c3{0, 0};
  EXPECT_THROW(hypersphere_intersect(c1, 1, c2, 1, 0.0), EmptyIntersectionError);
  EXPECT_THROW(hypersphere_intersect(c1, 1, c2, 20, 0.0), EmptyIntersectionError);
  EXPECT_THROW(hypersphere_intersect(c1, 1, c3, 1, 0.0), CoincidentCentersError);
}

TEST(HypersphereIntersect, RadiusNeverExceedsInputs)
{
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> c1(3), c2(3), z(3);
    for (std::size_t i = 0; i < 3; ++i) {
      c1[i] = g(rng);
      c2[i] = g(rng);
      z[i] = g(rng);
    }
    const auto s = hypersphere_intersect(c1, l2_distance(z, c1), c2, l2_distance(z, c2), 0.0);
    EXPECT_LE(s.radius, std::min(l2_distance(z, c1), l2_distance(z, c2)));
    EXPECT_NEAR(l2_distance(z, s.center), s.radius, 1e-9 * (1.0 + s.radius));
    (void)u;
  }
}

TEST(RefineSphere, FirstStepIsThePrototypeSphere)
{
  const std::vector<double> p{1, 2};
  const auto s = refine_sphere({}, p, 3.0, 0.0, 7);
  EXPECT_EQ(s.center, p);
  EXPECT_EQ(s.radius, 3.0);
  ASSERT_EQ(s.support.size(), 1u);
  EXPECT_EQ(s.support[0].prototype, 7u);
  EXPECT_EQ(s.chain.size(), 1u);
}

TEST(RefineSphere, SamePairTwiceKeepsTheSphere)
{
  const std::vector<double> p{1, 2};
  auto s = refine_sphere({}, p, 3.0, 0.0);
  s = refine_sphere(std::move(s), p, 3.0, 0.0);
  EXPECT_EQ(s.radius, 3.0);
  EXPECT_EQ(s.chain.size(), 1u);
  EXPECT_EQ(s.support.size(), 2u);
}

TEST(RefineSphere, SymmetricAnchor)
{
  const std::vector<double> z{1, 1}, pa{0, 0}, pb{2, 0};
  auto s = refine_sphere({}, pa, l2_distance(z, pa), 0.0);
  s = refine_sphere(std::move(s), pb, l2_distance(z, pb), 0.0);
  EXPECT_NEAR(s.center[0], 1.0, 1e-15);
  EXPECT_NEAR(s.center[1], 0.0, 1e-15);
  EXPECT_NEAR(s.radius, 1.0, 1e-15);
  EXPECT_NEAR(l2_distance(z, s.center), s.radius, 1e-15);
}

TEST(RefineSphere, RadiusNonIncreasingAndAnchorOnSurface)
{
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t D = 2 + t % 7;
    std::vector<double> z(D);
    for (double& x : z)
      x = g(rng);
    SphereState s;
    double last = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 6; ++k) {
      std::vector<double> p(D);
      for (double& x : p)
        x = 3.0 * g(rng);
      s = refine_sphere(std::move(s), p, l2_distance(z, p), 1e-6);
      EXPECT_LE(s.radius, last + 1e-6);
      EXPECT_LE(std::abs(l2_distance(z, s.center) - s.radius), 1e-6 * (1.0 + s.radius));
      last = s.radius;
    }
  }
}

// ---------------------------------------------------------------------------
// hypersphere bounds

TEST(HypersphereBounds, SinglePairMatchesTriangleWhenTheComponentIsCloser)
{
  std::mt19937_64 rng(21);
  for (int t = 0; t < 200; ++t) {
    const auto bundle = synthetic::random_bundle(rng, {2, 5, 3});
    const auto z = synthetic::random_instance(rng, bundle, 1);
    const Anchor a = make_anchor(z, bundle);
    const std::size_t j = t % 5;
    const auto tri = derive_bounds(spatial(Paradigm::triangle, {{0, j}}), a, bundle, 0.0);
    const auto hyp = derive_bounds(spatial(Paradigm::hypersphere, {{0, j}}), a, bundle, 0.0);
    for (std::size_t i = 0; i < 5; ++i) {
      const double r = a.distances(0, j);
      // Same lower end always; the upper end coincides when the anchor is no farther from
      // p_j than p_i is, and the ball is looser otherwise.
      EXPECT_NEAR(hyp.lower[i], tri.lower[i], 1e-12);
      if (r <= bundle.proto_dist(j, i))
        EXPECT_NEAR(hyp.upper[i], tri.upper[i], 1e-12);
      else
        EXPECT_GE(hyp.upper[i], tri.upper[i] - 1e-12);
    }
  }
}

TEST(HypersphereBounds, PinnedComponentIsExact)
{
  std::mt19937_64 rng(22);
  const auto bundle = synthetic::random_bundle(rng, {2, 4, 3});
  LatentInstance z;
  z.components = Matrix(1, 3);
  for (std::size_t d = 0; d < 3; ++d)
    z.components(0, d) = bundle.prototypes(1, d);
  const Anchor a = make_anchor(z, bundle);
  const auto b = derive_bounds(spatial(Paradigm::hypersphere, {{0, 1}}), a, bundle, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(b.lower[i], a.activations[i]);
    EXPECT_DOUBLE_EQ(b.upper[i], a.activations[i]);
  }
}

TEST(HypersphereBounds, ThreePairsOnOneComponentContainTheTruth)
{
  std::mt19937_64 rng(23);
  for (int t = 0; t < 1000; ++t) {
    const auto bundle = synthetic::random_bundle(rng, {2, 4, 3});
    const auto z = synthetic::random_instance(rng, bundle, 1);
    const Anchor a = make_anchor(z, bundle);
    const auto e = spatial(Paradigm::hypersphere, {{0, 0}, {0, 2}, {0, 3}});
    ASSERT_TRUE(derive_bounds(e, a, bundle, bundle.distance_slack).contains(a.activations, 1e-9));
  }
}

TEST(HypersphereBounds, CanBeWiderThanTriangle)
{
  // z on the far side of two spheres' meeting circle from p_i: the 3-4-5 ball around the
  // circle reaches closer to p_i than the triangle inequality allows.
  const double t = 20.0;
  Matrix protos = Matrix::from_rows({{0, 0}, {5, 0}, {-t, 0}});
  const auto bundle = make_bundle(std::move(protos), Matrix(2, 3, 1.0), {}, {}, 0.0);
  LatentInstance z;
  z.components = Matrix::from_rows({{1.8, 2.4}});  // distance 3 from p0, 4 from p1
  const Anchor a = make_anchor(z, bundle);
  const std::vector<Pair> pairs{{0, 0}, {0, 1}};
  const auto tri = derive_bounds(spatial(Paradigm::triangle, pairs), a, bundle, 0.0);
  const auto hyp = derive_bounds(spatial(Paradigm::hypersphere, pairs), a, bundle, 0.0);
  EXPECT_TRUE(hyp.contains(a.activations));
  EXPECT_GT(hyp.upper[2] - hyp.lower[2], tri.upper[2] - tri.lower[2]);
}

// ---------------------------------------------------------------------------
// shared properties

TEST(SpatialBounds, FullExplanationCollapsesToTheAnchor)
{
  std::mt19937_64 rng(31);
  for (Paradigm p : {Paradigm::triangle, Paradigm::hypersphere})
    for (int t = 0; t < 50; ++t) {
      const auto bundle = synthetic::random_bundle(rng, {3, 5, 4});
      const auto z = synthetic::random_instance(rng, bundle, 3);
      const Anchor a = make_anchor(z, bundle);
      const auto b = derive_bounds(spatial(p, all_pairs(3, 5)), a, bundle, 0.0);
      EXPECT_EQ(b.lower, a.activations);
      EXPECT_EQ(b.upper, a.activations);
    }
}

TEST(SpatialBounds, GrowthOnlyTightens)
{
  std::mt19937_64 rng(32);
  for (Paradigm p : {Paradigm::triangle, Paradigm::hypersphere})
    for (int t = 0; t < 300; ++t) {
      const auto bundle = synthetic::random_bundle(rng, {2, 5, std::size_t(1 + t % 4)});
      const auto z = synthetic::random_instance(rng, bundle, 3);
      const Anchor a = make_anchor(z, bundle);
      auto pairs = all_pairs(3, 5);
      std::shuffle(pairs.begin(), pairs.end(), rng);
      Explanation e = spatial(p, {});
      ActivationBounds prev{std::vector<double>(5, 0.0),
                            std::vector<double>(5, sigma_max(bundle.sigma))};
      for (const Pair& q : pairs) {
        e.pairs.push_back(q);
        const auto b = derive_bounds(e, a, bundle, bundle.distance_slack);
        for (std::size_t j = 0; j < 5; ++j) {
          ASSERT_GE(b.lower[j], prev.lower[j]);
          ASSERT_LE(b.upper[j], prev.upper[j]);
        }
        prev = b;
      }
    }
}

TEST(SpatialBounds, BuilderMatchesFromScratchDerivation)
{
  std::mt19937_64 rng(33);
  for (Paradigm p : {Paradigm::triangle, Paradigm::hypersphere})
    for (int t = 0; t < 100; ++t) {
      const auto bundle = synthetic::random_bundle(rng, {2, 6, 3});
      const auto z = synthetic::random_instance(rng, bundle, 4);
      const Anchor a = make_anchor(z, bundle);
      auto pairs = all_pairs(4, 6);
      std::shuffle(pairs.begin(), pairs.end(), rng);
      pairs.resize(12);
      SpatialBoundsBuilder builder(p, bundle, a.distances, 1e-6);
      Explanation e = spatial(p, {});
      for (const Pair& q : pairs) {
        builder.append(q);
        e.pairs.push_back(q);
        ASSERT_EQ(builder.bounds(), derive_bounds(e, a, bundle, 1e-6));
      }
      // Drop the middle pair of component 0's list and compare again.
      auto list = builder.component(0);
      if (list.size() >= 2) {
        const std::size_t gone = list[list.size() / 2];
        list.erase(list.begin() + std::ptrdiff_t(list.size() / 2));
        builder.assign(0, list);
        std::erase(e.pairs, Pair{0, gone});
        ASSERT_EQ(builder.bounds(), derive_bounds(e, a, bundle, 1e-6));
      }
    }
}

TEST(Explanation, ValidationCatchesBadShapes)
{
  Explanation e = spatial(Paradigm::triangle, {{0, 1}, {0, 1}});
  EXPECT_THROW(validate(e, 2, 3), ValidationError);
  e.pairs = {{2, 0}};
  EXPECT_THROW(validate(e, 2, 3), IndexError);
  e.pairs = {{1, 2}};
  EXPECT_NO_THROW(validate(e, 2, 3));
  e.prototypes = {1};
  EXPECT_THROW(validate(e, 2, 3), ValidationError);
}
