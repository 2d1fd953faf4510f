#pragma once

// Brute-force checks of the engine. Apart from model-core primitives (distances, sigma,
// logits) nothing here calls into bounds.hpp, verifier.hpp or search.hpp algorithms: the
// reference derivations below are written out directly so that a bug in the engine cannot
// hide behind the same bug in its checker.

#include <ale/bounds.hpp>
#include <ale/error.hpp>
#include <ale/model.hpp>
#include <ale/search.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ale::oracle {

struct Violation
{
  std::string input;
  std::string expected;
  std::string got;
};

struct OracleReport
{
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::optional<Violation> first_violation;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;

  void record(Violation v)
  {
    ++violations;
    if (!first_violation)
      first_violation = std::move(v);
  }
};

inline std::string format_vector(std::span<const double> v)
{
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i)
    os << (i ? ", " : "") << v[i];
  os << ']';
  return os.str();
}

inline constexpr std::size_t kMaxCornerPrototypes = 20;

struct CornerResult
{
  std::map<std::size_t, double> max_gap;                // h_k - h_c at the best corner
  std::map<std::size_t, std::vector<double>> argmax;    // the best corner itself
};

/// Exact maximum of h_k - h_c over the 2^m corners of the box, for every k != c.
inline CornerResult corner_oracle(const ActivationBounds& bounds, const ModelBundle& bundle,
                                  std::size_t c)
{
  const std::size_t m = bounds.size();
  if (m > kMaxCornerPrototypes)
    throw SizeLimitError("corner enumeration refuses m = " + std::to_string(m) + " > " +
                         std::to_string(kMaxCornerPrototypes));
  if (c >= bundle.num_classes)
    throw IndexError("class " + std::to_string(c) + " out of range");
  CornerResult out;
  std::vector<double> corner(m);
  const std::uint64_t count = std::uint64_t{1} << m;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (std::size_t j = 0; j < m; ++j)
      corner[j] = (mask >> j) & 1U ? bounds.upper[j] : bounds.lower[j];
    const auto h = logits(corner, bundle);
    for (std::size_t k = 0; k < bundle.num_classes; ++k) {
      if (k == c)
        continue;
      const double gap = h[k] - h[c];
      auto it = out.max_gap.find(k);
      if (it == out.max_gap.end() || gap > it->second) {
        out.max_gap[k] = gap;
        out.argmax[k] = corner;
      }
    }
  }
  return out;
}

/// Uniform samples inside the box; counts predictions that differ from c.
inline OracleReport sample_oracle(const ActivationBounds& bounds, const ModelBundle& bundle,
                                  std::size_t c, std::size_t n, std::uint64_t seed)
{
  if (n == 0)
    throw ValidationError("sample_oracle needs at least one sample");
  OracleReport rep;
  rep.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> a(bounds.size());
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double lo = bounds.lower[j], hi = bounds.upper[j];
      a[j] = std::min(hi, lo + unit(rng) * (hi - lo));
    }
    const auto h = logits(a, bundle);
    const std::size_t got = argmax_lowest(h);
    ++rep.checked;
    if (got != c)
      rep.record({format_vector(a), std::to_string(c), std::to_string(got)});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// reference bound derivations

namespace reference {

inline ActivationBounds topk(const std::vector<std::size_t>& fixed, const std::vector<double>& a,
                             double top)
{
  ActivationBounds b;
  b.lower.assign(a.size(), 0.0);
  double cap = fixed.empty() ? top : std::numeric_limits<double>::infinity();
  for (std::size_t j : fixed)
    cap = std::min(cap, a[j]);
  b.upper.assign(a.size(), cap);
  for (std::size_t j : fixed)
    b.lower[j] = b.upper[j] = a[j];
  return b;
}

struct Ball
{
  std::vector<double> c;
  double r;
};

inline double dist(const std::vector<double>& x, std::span<const double> y)
{
  return l2_distance(x, y);
}

/// Smallest ball around the meeting set of two sphere surfaces; nothing when no refinement
/// applies (coincident centers, or rounding-empty intersection where `cur` is the smaller).
inline std::optional<Ball> meet(const Ball& cur, std::span<const double> p, double rp,
                                double slack)
{
  const double d = dist(cur.c, p);
  if (d <= slack + kCoincidentRel * std::max(cur.r, rp))
    return std::nullopt;
  if (d > cur.r + rp + slack || d < std::abs(cur.r - rp) - slack) {
    if (rp >= cur.r)
      return std::nullopt;
    return Ball{{p.begin(), p.end()}, rp};
  }
  double s[3] = {d, cur.r, rp};
  std::sort(s, s + 3, [](double x, double y) { return x > y; });
  const double q = (s[0] + (s[1] + s[2])) * (s[2] - (s[0] - s[1])) * (s[2] + (s[0] - s[1])) *
                   (s[0] + (s[1] - s[2]));
  double r = 2.0 * (0.25 * std::sqrt(q > 0.0 ? q : 0.0)) / d;
  r = std::min(r, std::min(cur.r, rp));
  const double x = (d * d + cur.r * cur.r - rp * rp) / (2.0 * d);
  Ball out{cur.c, r};
  for (std::size_t i = 0; i < out.c.size(); ++i)
    out.c[i] = cur.c[i] + x * (p[i] - cur.c[i]) / d;
  return out;
}

/// Bounds of a spatial explanation, derived from scratch.
inline ActivationBounds spatial(const Explanation& e, const Matrix& distances,
                                const ModelBundle& bundle, double slack)
{
  const std::size_t L = distances.rows();
  const std::size_t m = bundle.num_prototypes();
  const double top = sigma(0.0, bundle.sigma);
  ActivationBounds b{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  bool open_component = false;
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<std::size_t> mine;
    for (const Pair& p : e.pairs)
      if (p.component == l)
        mine.push_back(p.prototype);
    if (mine.empty()) {
      open_component = true;
      continue;
    }
    std::vector<double> dlo(m, 0.0), dhi(m, std::numeric_limits<double>::infinity());
    auto clip = [&](std::size_t i, double lo, double hi) {
      dlo[i] = std::max(dlo[i], lo);
      dhi[i] = std::min(dhi[i], hi);
    };
    if (e.paradigm == Paradigm::triangle) {
      for (std::size_t j : mine) {
        const double dz = distances(l, j);
        for (std::size_t i = 0; i < m; ++i) {
          const double dp = bundle.proto_dist(j, i);
          clip(i, std::max(0.0, std::abs(dz - dp) - slack), dz + dp + slack);
        }
      }
    } else {
      std::optional<Ball> ball;
      for (std::size_t j : mine) {
        const auto pj = bundle.prototypes.row(j);
        std::optional<Ball> next;
        if (!ball)
          next = Ball{{pj.begin(), pj.end()}, distances(l, j)};
        else
          next = meet(*ball, pj, distances(l, j), slack);
        if (!next)
          continue;
        ball = next;
        for (std::size_t i = 0; i < m; ++i) {
          const double dc = dist(ball->c, bundle.prototypes.row(i));
          clip(i, std::max(0.0, dc - ball->r - slack), dc + ball->r + slack);
        }
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      double lo = sigma(dhi[i], bundle.sigma);
      double hi = sigma(dlo[i], bundle.sigma);
      if (std::find(mine.begin(), mine.end(), i) != mine.end())
        lo = hi = sigma(distances(l, i), bundle.sigma);
      b.lower[i] = std::max(b.lower[i], lo);
      b.upper[i] = std::max(b.upper[i], hi);
    }
  }
  if (open_component)
    std::fill(b.upper.begin(), b.upper.end(), top);
  return b;
}

inline ActivationBounds bounds(const Explanation& e, const Anchor& anchor,
                               const ModelBundle& bundle, double slack)
{
  if (e.paradigm == Paradigm::topk)
    return topk(e.prototypes, anchor.activations, sigma(0.0, bundle.sigma));
  return spatial(e, anchor.distances, bundle, slack);
}

/// Is c safe against every other class at that class's most favourable corner.
inline bool verified(const ActivationBounds& b, const ModelBundle& bundle, std::size_t c,
                     double margin)
{
  std::vector<double> v(b.size());
  for (std::size_t k = 0; k < bundle.num_classes; ++k) {
    if (k == c)
      continue;
    const auto wk = bundle.weights.row(k);
    const auto wc = bundle.weights.row(c);
    for (std::size_t j = 0; j < v.size(); ++j)
      v[j] = wk[j] - wc[j] >= 0.0 ? b.upper[j] : b.lower[j];
    const double hk = logit(v, bundle, k);
    const double hc = logit(v, bundle, c);
    const bool ok = k < c ? hc > hk + margin : hc >= hk + margin;
    if (!ok)
      return false;
  }
  return true;
}

} // namespace reference

inline std::string describe(const Explanation& e)
{
  std::ostringstream os;
  os << to_string(e.paradigm) << " {";
  if (is_spatial(e.paradigm))
    for (std::size_t i = 0; i < e.pairs.size(); ++i)
      os << (i ? ", " : "") << '(' << e.pairs[i].component << ',' << e.pairs[i].prototype << ')';
  else
    for (std::size_t i = 0; i < e.prototypes.size(); ++i)
      os << (i ? ", " : "") << e.prototypes[i];
  os << '}';
  return os.str();
}

/// Single-removal minimality: every element of a verified explanation must be necessary.
inline OracleReport minimality_oracle(const Explanation& e, const Anchor& anchor,
                                      const ModelBundle& bundle, const SearchConfig& cfg)
{
  const double slack = cfg.slack_for(bundle);
  const std::size_t c = anchor.predicted;
  if (!reference::verified(reference::bounds(e, anchor, bundle, slack), bundle, c, cfg.margin))
    throw StateError("minimality_oracle needs a verified explanation");
  OracleReport rep;
  for (std::size_t i = 0; i < e.size(); ++i) {
    Explanation smaller = e;
    if (is_spatial(e.paradigm))
      smaller.pairs.erase(smaller.pairs.begin() + static_cast<std::ptrdiff_t>(i));
    else
      smaller.prototypes.erase(smaller.prototypes.begin() + static_cast<std::ptrdiff_t>(i));
    ++rep.checked;
    if (reference::verified(reference::bounds(smaller, anchor, bundle, slack), bundle, c,
                            cfg.margin))
      rep.record({describe(e), "removing element " + std::to_string(i) + " unverifies",
                  "still verified without it"});
  }
  return rep;
}

inline OracleReport minimality_oracle(const Explanation& e, const LatentInstance& instance,
                                      const ModelBundle& bundle, const SearchConfig& cfg)
{
  return minimality_oracle(e, make_anchor(instance, bundle), bundle, cfg);
}

/// Samples the meeting set of two sphere surfaces and checks it lies in the ball returned
/// by hypersphere_intersect. Metrics: max pairwise sample distance, the distance between
/// an antipodal pair of the meeting set, and the engine's radius.
inline OracleReport sphere_containment_oracle(std::span<const double> c1, double r1,
                                              std::span<const double> c2, double r2,
                                              std::size_t n, std::uint64_t seed,
                                              double tol = 1e-9)
{
  const std::size_t D = c1.size();
  if (D < 2 || c2.size() != D)
    throw DimensionError("sphere containment sampling needs two centers of dimension >= 2");
  const double d = l2_distance(c1, c2);
  if (d == 0.0 || d > r1 + r2 || d < std::abs(r1 - r2))
    throw EmptyIntersectionError("the sphere surfaces do not meet");

  const Sphere h3 = hypersphere_intersect(c1, r1, c2, r2, 0.0);

  std::vector<double> axis(D);
  for (std::size_t i = 0; i < D; ++i)
    axis[i] = (c2[i] - c1[i]) / d;
  const double x = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
  const double rho = std::sqrt(std::max(0.0, r1 * r1 - x * x));
  std::vector<double> mid(D);
  for (std::size_t i = 0; i < D; ++i)
    mid[i] = c1[i] + x * axis[i];

  OracleReport rep;
  rep.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> samples;
  samples.reserve(n);
  const double scale = 1.0 + std::max({r1, r2, d});
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> g(D);
    double norm = 0.0;
    do {
      for (double& v : g)
        v = gauss(rng);
      double along = 0.0;
      for (std::size_t i = 0; i < D; ++i)
        along += g[i] * axis[i];
      for (std::size_t i = 0; i < D; ++i)
        g[i] -= along * axis[i];
      norm = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
    } while (norm < 1e-12);
    std::vector<double> pt(D);
    for (std::size_t i = 0; i < D; ++i)
      pt[i] = mid[i] + rho * g[i] / norm;

    ++rep.checked;
    const double on1 = std::abs(l2_distance(pt, c1) - r1);
    const double on2 = std::abs(l2_distance(pt, c2) - r2);
    const double to_c3 = l2_distance(pt, h3.center);
    if (on1 > tol * scale || on2 > tol * scale)
      rep.record({format_vector(pt), "point on both surfaces",
                  "off by " + std::to_string(std::max(on1, on2))});
    else if (to_c3 > h3.radius + tol)
      rep.record({format_vector(pt), "distance to C3 <= " + std::to_string(h3.radius),
                  std::to_string(to_c3)});
    samples.push_back(std::move(pt));
  }

  double widest = 0.0;
  for (std::size_t a = 0; a < samples.size(); ++a)
    for (std::size_t b = a + 1; b < samples.size(); ++b)
      widest = std::max(widest, l2_distance(samples[a], samples[b]));

  double antipodal = 0.0;
  if (!samples.empty()) {
    std::vector<double> opposite(D);
    for (std::size_t i = 0; i < D; ++i)
      opposite[i] = 2.0 * mid[i] - samples.front()[i];
    antipodal = l2_distance(samples.front(), opposite);
  }
  rep.metrics["max_pairwise_distance"] = widest;
  rep.metrics["antipodal_distance"] = antipodal;
  rep.metrics["r3"] = h3.radius;
  return rep;
}

} // namespace ale::oracle
