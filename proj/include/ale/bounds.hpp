#pragma once

// Turning an explanation into per-prototype activation intervals.
//
// Three paradigms are supported:
//  - top-k: the explanation is a set of prototypes whose activations are fixed; every
//    other activation is bounded above by the smallest fixed one.
//  - triangle: the explanation is a set of (component, prototype) pairs with known
//    distances; the triangle inequality through the prototype-prototype distance matrix
//    bounds every other distance on the same component.
//  - hypersphere: each component is located on the surface of a sphere obtained by
//    intersecting the spheres centred at its explained prototypes.
//
// Components without any pair contribute [0, sigma(0)] to every activation.

#include <ale/error.hpp>
#include <ale/model.hpp>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ale {

enum class Paradigm { topk, triangle, hypersphere };

inline std::string_view to_string(Paradigm p)
{
  switch (p) {
  case Paradigm::topk: return "topk";
  case Paradigm::triangle: return "triangle";
  case Paradigm::hypersphere: return "hypersphere";
  }
  return "?";
}

inline Paradigm parse_paradigm(std::string_view s)
{
  if (s == "topk" || s == "top-k")
    return Paradigm::topk;
  if (s == "triangle")
    return Paradigm::triangle;
  if (s == "hypersphere")
    return Paradigm::hypersphere;
  throw ValidationError("unknown paradigm '" + std::string(s) + "'");
}

inline bool is_spatial(Paradigm p) { return p != Paradigm::topk; }

struct Pair
{
  std::size_t component = 0;
  std::size_t prototype = 0;

  friend auto operator<=>(const Pair&, const Pair&) = default;
};

struct Explanation
{
  Paradigm paradigm = Paradigm::topk;
  std::vector<std::size_t> prototypes;  // top-k only, in insertion order
  std::vector<Pair> pairs;              // spatial paradigms only, in insertion order
  std::string instance_id;

  std::size_t size() const { return is_spatial(paradigm) ? pairs.size() : prototypes.size(); }

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

inline void validate(const Explanation& e, std::size_t num_components, std::size_t num_prototypes)
{
  if (is_spatial(e.paradigm)) {
    if (!e.prototypes.empty())
      throw ValidationError("spatial explanation must not carry a prototype set");
    std::vector<Pair> seen;
    seen.reserve(e.pairs.size());
    for (const Pair& p : e.pairs) {
      if (p.component >= num_components || p.prototype >= num_prototypes)
        throw IndexError("pair (" + std::to_string(p.component) + ", " +
                         std::to_string(p.prototype) + ") out of range for " +
                         std::to_string(num_components) + " components x " +
                         std::to_string(num_prototypes) + " prototypes");
      seen.push_back(p);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      throw ValidationError("explanation contains a duplicate pair");
  } else {
    if (!e.pairs.empty())
      throw ValidationError("top-k explanation must not carry a pair set");
    std::vector<std::size_t> seen = e.prototypes;
    for (std::size_t j : seen)
      if (j >= num_prototypes)
        throw IndexError("prototype " + std::to_string(j) + " out of range for " +
                         std::to_string(num_prototypes) + " prototypes");
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      throw ValidationError("explanation contains a duplicate prototype");
  }
}

struct ActivationBounds
{
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const { return lower.size(); }

  bool contains(std::span<const double> a, double tol = 0.0) const
  {
    for (std::size_t j = 0; j < a.size(); ++j)
      if (a[j] < lower[j] - tol || a[j] > upper[j] + tol)
        return false;
    return true;
  }

  friend bool operator==(const ActivationBounds&, const ActivationBounds&) = default;
};

/// Everything about the anchor instance the bound derivations need.
struct Anchor
{
  Matrix distances;             // L x m
  ActivationVector activations; // m
  std::size_t predicted = 0;

  std::size_t num_components() const { return distances.rows(); }
};

inline Anchor make_anchor(const LatentInstance& instance, const ModelBundle& bundle)
{
  Anchor a;
  a.distances = distance_matrix(instance, bundle);
  a.activations = activations_from_similarity(similarity_matrix(a.distances, bundle.sigma)).values;
  a.predicted = predict_from_activations(a.activations, bundle);
  return a;
}

// ---------------------------------------------------------------------------
// top-k

inline ActivationBounds topk_bounds(std::span<const std::size_t> fixed, std::span<const double> a)
{
  if (fixed.empty())
    throw ValidationError("top-k bounds need a nonempty prototype set");
  double floor = std::numeric_limits<double>::infinity();
  for (std::size_t j : fixed) {
    if (j >= a.size())
      throw IndexError("prototype " + std::to_string(j) + " out of range");
    floor = std::min(floor, a[j]);
  }
  ActivationBounds b{std::vector<double>(a.size(), 0.0), std::vector<double>(a.size(), floor)};
  for (std::size_t j : fixed) {
    b.lower[j] = a[j];
    b.upper[j] = a[j];
  }
  return b;
}

inline ActivationBounds topk_bounds(const Explanation& e, std::span<const double> a)
{
  if (e.paradigm != Paradigm::topk)
    throw ValidationError("topk_bounds called on a " + std::string(to_string(e.paradigm)) +
                          " explanation");
  return topk_bounds(e.prototypes, a);
}

// ---------------------------------------------------------------------------
// hypersphere geometry

struct Sphere
{
  std::vector<double> center;
  double radius = 0.0;
};

/// Smallest ball containing the intersection of the two sphere surfaces.
///
/// The center sits on the line C1 -> C2 at signed offset (d^2 + r1^2 - r2^2) / 2d from C1;
/// the radius is the height of the triangle (d, r1, r2) over the side d, computed with the
/// cancellation-free arrangement of Heron's formula.
inline Sphere hypersphere_intersect(std::span<const double> c1, double r1,
                                    std::span<const double> c2, double r2, double slack)
{
  if (c1.size() != c2.size())
    throw DimensionError("sphere centers of different dimension");
  const double d = l2_distance(c1, c2);
  if (d <= slack || d == 0.0)
    throw CoincidentCentersError("sphere centers are " + std::to_string(d) + " apart");
  if (d > r1 + r2 + slack || d < std::abs(r1 - r2) - slack)
    throw EmptyIntersectionError("spheres (r1=" + std::to_string(r1) + ", r2=" +
                                 std::to_string(r2) + ", d=" + std::to_string(d) +
                                 ") do not intersect");

  double a = d, b = r1, c = r2;
  if (a < b) std::swap(a, b);
  if (a < c) std::swap(a, c);
  if (b < c) std::swap(b, c);
  const double heron = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
  const double area = 0.25 * std::sqrt(std::max(0.0, heron));
  double r3 = 2.0 * area / d;
  r3 = std::min({r3, r1, r2});

  const double offset = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
  Sphere out;
  out.center.resize(c1.size());
  for (std::size_t i = 0; i < c1.size(); ++i)
    out.center[i] = c1[i] + offset * (c2[i] - c1[i]) / d;
  out.radius = r3;
  return out;
}

/// Location estimate of one latent component under the hypersphere paradigm.
struct SphereState
{
  struct Support
  {
    std::size_t prototype;
    double distance;
  };

  std::vector<double> center;
  double radius = std::numeric_limits<double>::infinity();
  std::vector<Support> support;
  /// Every sphere the state went through, oldest first. The anchor lies on each surface,
  /// so bounds may intersect the intervals derived from all of them.
  std::vector<Sphere> chain;

  bool unbounded() const { return center.empty(); }
};

/// Relative distance under which two centers count as coincident regardless of slack.
inline constexpr double kCoincidentRel = 1e-9;

/// One refinement step. `current` is null for the unbounded state. Returns the new sphere,
/// or nothing when the state stays as it is: coincident centers, or an intersection that
/// is empty only because of rounding and whose smaller input is the current sphere.
inline std::optional<Sphere> refine_step(const Sphere* current, std::span<const double> proto,
                                         double dist, double slack)
{
  if (current == nullptr)
    return Sphere{{proto.begin(), proto.end()}, dist};
  const double d = l2_distance(current->center, proto);
  if (d <= slack + kCoincidentRel * std::max(current->radius, dist))
    return std::nullopt;
  try {
    return hypersphere_intersect(current->center, current->radius, proto, dist, slack);
  } catch (const EmptyIntersectionError&) {
    if (dist >= current->radius)
      return std::nullopt;
    return Sphere{{proto.begin(), proto.end()}, dist};
  } catch (const CoincidentCentersError&) {
    return std::nullopt;
  }
}

/// Intersect the state with the sphere of radius `dist` around `proto`.
inline SphereState refine_sphere(SphereState state, std::span<const double> proto, double dist,
                                 double slack, std::size_t proto_index = 0)
{
  state.support.push_back({proto_index, dist});
  const Sphere current{state.center, state.radius};
  auto next = refine_step(state.unbounded() ? nullptr : &current, proto, dist, slack);
  if (!next)
    return state;
  state.center = next->center;
  state.radius = next->radius;
  state.chain.push_back(std::move(*next));
  return state;
}

// ---------------------------------------------------------------------------
// per-component derivations shared by the pure functions and the incremental builder

struct DistanceInterval
{
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

namespace detail {

/// Intersect `acc` with the triangle-inequality interval implied by d(z, p_j) = dist.
inline void triangle_tighten(std::span<DistanceInterval> acc, const ModelBundle& bundle,
                             std::size_t j, double dist, double slack)
{
  const auto pd = bundle.proto_dist.row(j);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double lo = std::max(0.0, std::abs(dist - pd[i]) - slack);
    const double hi = dist + pd[i] + slack;
    acc[i].lo = std::max(acc[i].lo, lo);
    acc[i].hi = std::min(acc[i].hi, hi);
  }
}

/// Intersect `acc` with the distance interval from every prototype to the ball `s`.
inline void sphere_tighten(std::span<DistanceInterval> acc, const ModelBundle& bundle,
                           const Sphere& s, double slack)
{
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double dc = l2_distance(s.center, bundle.prototypes.row(i));
    const double lo = std::max(0.0, dc - s.radius - slack);
    const double hi = dc + s.radius + slack;
    acc[i].lo = std::max(acc[i].lo, lo);
    acc[i].hi = std::min(acc[i].hi, hi);
  }
}

/// Max-aggregate per-component similarity intervals into activation bounds.
/// `lo_sim`/`hi_sim` are L x m; rows of uncovered components are ignored and replaced by
/// [0, sigma(0)].
inline ActivationBounds aggregate(const Matrix& lo_sim, const Matrix& hi_sim,
                                  const std::vector<bool>& covered, const SigmaParams& sig)
{
  const std::size_t m = lo_sim.cols();
  ActivationBounds b{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  bool any_uncovered = false;
  for (std::size_t l = 0; l < covered.size(); ++l) {
    if (!covered[l]) {
      any_uncovered = true;
      continue;
    }
    const auto lo = lo_sim.row(l);
    const auto hi = hi_sim.row(l);
    for (std::size_t j = 0; j < m; ++j) {
      b.lower[j] = std::max(b.lower[j], lo[j]);
      b.upper[j] = std::max(b.upper[j], hi[j]);
    }
  }
  if (any_uncovered)
    std::fill(b.upper.begin(), b.upper.end(), sigma_max(sig));
  return b;
}

} // namespace detail

/// Per-pair similarity intervals of one component from its distance intervals and the
/// prototypes it fixes exactly.
inline void component_similarities(std::span<const DistanceInterval> dist,
                                   std::span<const SphereState::Support> fixed,
                                   const SigmaParams& sig, std::span<double> lo_out,
                                   std::span<double> hi_out)
{
  for (std::size_t i = 0; i < dist.size(); ++i) {
    lo_out[i] = sigma(dist[i].hi, sig);
    hi_out[i] = sigma(dist[i].lo, sig);
  }
  for (const auto& f : fixed) {
    const double s = sigma(f.distance, sig);
    lo_out[f.prototype] = s;
    hi_out[f.prototype] = s;
  }
}

namespace detail {

inline std::vector<std::vector<SphereState::Support>>
group_by_component(const Explanation& e, const Matrix& distances, std::size_t num_components)
{
  std::vector<std::vector<SphereState::Support>> groups(num_components);
  for (const Pair& p : e.pairs) {
    if (p.component >= num_components || p.prototype >= distances.cols())
      throw IndexError("pair (" + std::to_string(p.component) + ", " +
                       std::to_string(p.prototype) + ") out of range");
    const double d = distances(p.component, p.prototype);
    if (std::isnan(d))
      throw ValidationError("no distance for pair (" + std::to_string(p.component) + ", " +
                            std::to_string(p.prototype) + ")");
    groups[p.component].push_back({p.prototype, d});
  }
  return groups;
}

} // namespace detail

/// Triangle-inequality bounds. `distances` is L x m; only entries of pairs in `e` are read
/// (NaN marks a missing distance).
inline ActivationBounds triangle_bounds(const Explanation& e, const Matrix& distances,
                                        const ModelBundle& bundle, std::size_t num_components,
                                        double slack)
{
  if (e.paradigm != Paradigm::triangle)
    throw ValidationError("triangle_bounds called on a " + std::string(to_string(e.paradigm)) +
                          " explanation");
  const std::size_t m = bundle.num_prototypes();
  const auto groups = detail::group_by_component(e, distances, num_components);
  Matrix lo(num_components, m), hi(num_components, m);
  std::vector<bool> covered(num_components, false);
  std::vector<DistanceInterval> acc(m);
  for (std::size_t l = 0; l < num_components; ++l) {
    if (groups[l].empty())
      continue;
    covered[l] = true;
    std::fill(acc.begin(), acc.end(), DistanceInterval{});
    for (const auto& s : groups[l])
      detail::triangle_tighten(acc, bundle, s.prototype, s.distance, slack);
    component_similarities(acc, groups[l], bundle.sigma, lo.row(l), hi.row(l));
  }
  return detail::aggregate(lo, hi, covered, bundle.sigma);
}

/// Replays a component's pairs, in order, into a sphere state.
inline SphereState build_sphere(std::span<const SphereState::Support> pairs,
                                const ModelBundle& bundle, double slack)
{
  SphereState s;
  for (const auto& p : pairs)
    s = refine_sphere(std::move(s), bundle.prototypes.row(p.prototype), p.distance, slack,
                      p.prototype);
  return s;
}

/// Sphere states for every component of a spatial explanation (unbounded when uncovered).
inline std::vector<SphereState> build_spheres(const Explanation& e, const Matrix& distances,
                                              const ModelBundle& bundle,
                                              std::size_t num_components, double slack)
{
  const auto groups = detail::group_by_component(e, distances, num_components);
  std::vector<SphereState> out(num_components);
  for (std::size_t l = 0; l < num_components; ++l)
    out[l] = build_sphere(groups[l], bundle, slack);
  return out;
}

/// Hypersphere bounds from refined sphere states (one per component).
inline ActivationBounds hypersphere_bounds(const Explanation& e,
                                           std::span<const SphereState> spheres,
                                           const ModelBundle& bundle,
                                           std::size_t num_components, double slack)
{
  if (e.paradigm != Paradigm::hypersphere)
    throw ValidationError("hypersphere_bounds called on a " +
                          std::string(to_string(e.paradigm)) + " explanation");
  if (spheres.size() != num_components)
    throw DimensionError("expected one sphere state per component");
  const std::size_t m = bundle.num_prototypes();
  std::vector<bool> covered(num_components, false);
  for (const Pair& p : e.pairs) {
    if (p.component >= num_components)
      throw IndexError("pair component " + std::to_string(p.component) + " out of range");
    covered[p.component] = true;
  }
  Matrix lo(num_components, m), hi(num_components, m);
  std::vector<DistanceInterval> acc(m);
  for (std::size_t l = 0; l < num_components; ++l) {
    if (!covered[l])
      continue;
    if (spheres[l].unbounded())
      throw ValidationError("missing sphere state for covered component " +
                            std::to_string(l));
    std::fill(acc.begin(), acc.end(), DistanceInterval{});
    for (const Sphere& s : spheres[l].chain)
      detail::sphere_tighten(acc, bundle, s, slack);
    component_similarities(acc, spheres[l].support, bundle.sigma, lo.row(l), hi.row(l));
  }
  return detail::aggregate(lo, hi, covered, bundle.sigma);
}

/// Convenience: bounds of any explanation against its anchor.
inline ActivationBounds derive_bounds(const Explanation& e, const Anchor& anchor,
                                      const ModelBundle& bundle, double slack)
{
  switch (e.paradigm) {
  case Paradigm::topk:
    // Nothing fixed says nothing: the empty set (single-class models) gets the universal box.
    if (e.prototypes.empty())
      return {std::vector<double>(anchor.activations.size(), 0.0),
              std::vector<double>(anchor.activations.size(), sigma_max(bundle.sigma))};
    return topk_bounds(e, anchor.activations);
  case Paradigm::triangle:
    return triangle_bounds(e, anchor.distances, bundle, anchor.num_components(), slack);
  case Paradigm::hypersphere: {
    const auto spheres =
      build_spheres(e, anchor.distances, bundle, anchor.num_components(), slack);
    return hypersphere_bounds(e, spheres, bundle, anchor.num_components(), slack);
  }
  }
  throw ValidationError("unknown paradigm");
}

// ---------------------------------------------------------------------------
// incremental derivation for the search loops

/// Keeps per-component intervals of a spatial explanation so that changing one component's
/// pair list only recomputes that component. Produces the same values as
/// triangle_bounds / hypersphere_bounds.
class SpatialBoundsBuilder
{
public:
  SpatialBoundsBuilder(Paradigm paradigm, const ModelBundle& bundle, const Matrix& distances,
                       double slack)
    : paradigm_(paradigm)
    , bundle_(&bundle)
    , distances_(&distances)
    , slack_(slack)
    , comps_(distances.rows())
    , lo_sim_(distances.rows(), bundle.num_prototypes())
    , hi_sim_(distances.rows(), bundle.num_prototypes())
  {
    if (!is_spatial(paradigm))
      throw ValidationError("SpatialBoundsBuilder needs a spatial paradigm");
  }

  std::size_t num_components() const { return comps_.size(); }

  const std::vector<std::size_t>& component(std::size_t l) const { return comps_[l].protos; }

  void append(Pair p)
  {
    auto list = comps_.at(p.component).protos;
    list.push_back(p.prototype);
    assign(p.component, std::move(list));
  }

  /// Replace the ordered prototype list of component `l`; the common prefix is reused.
  void assign(std::size_t l, std::vector<std::size_t> protos)
  {
    Component& c = comps_.at(l);
    std::size_t keep = 0;
    while (keep < c.protos.size() && keep < protos.size() && c.protos[keep] == protos[keep])
      ++keep;
    c.protos = std::move(protos);
    c.prefix.resize(keep);
    if (paradigm_ == Paradigm::hypersphere)
      c.spheres.resize(keep);

    const std::size_t m = bundle_->num_prototypes();
    for (std::size_t k = keep; k < c.protos.size(); ++k) {
      const std::size_t j = c.protos[k];
      const double dist = (*distances_)(l, j);
      std::vector<DistanceInterval> acc =
        k == 0 ? std::vector<DistanceInterval>(m) : c.prefix[k - 1];
      if (paradigm_ == Paradigm::triangle) {
        detail::triangle_tighten(acc, *bundle_, j, dist, slack_);
      } else {
        const std::optional<Sphere>& prev =
          k == 0 ? std::optional<Sphere>{} : c.spheres[k - 1];
        auto next = refine_step(prev ? &*prev : nullptr, bundle_->prototypes.row(j), dist, slack_);
        if (next) {
          detail::sphere_tighten(acc, *bundle_, *next, slack_);
          c.spheres.push_back(std::move(next));
        } else {
          c.spheres.push_back(prev);
        }
      }
      c.prefix.push_back(std::move(acc));
    }

    if (c.protos.empty())
      return;
    std::vector<SphereState::Support> fixed;
    fixed.reserve(c.protos.size());
    for (std::size_t j : c.protos)
      fixed.push_back({j, (*distances_)(l, j)});
    component_similarities(c.prefix.back(), fixed, bundle_->sigma, lo_sim_.row(l),
                           hi_sim_.row(l));
  }

  ActivationBounds bounds() const
  {
    std::vector<bool> covered(comps_.size());
    for (std::size_t l = 0; l < comps_.size(); ++l)
      covered[l] = !comps_[l].protos.empty();
    return detail::aggregate(lo_sim_, hi_sim_, covered, bundle_->sigma);
  }

  /// Current sphere of component `l`; empty when uncovered (hypersphere paradigm only).
  std::optional<Sphere> sphere(std::size_t l) const
  {
    const Component& c = comps_.at(l);
    return c.spheres.empty() ? std::nullopt : c.spheres.back();
  }

private:
  struct Component
  {
    std::vector<std::size_t> protos;
    std::vector<std::vector<DistanceInterval>> prefix;  // intervals after k+1 pairs
    std::vector<std::optional<Sphere>> spheres;         // hypersphere only, after k+1 pairs
  };

  Paradigm paradigm_;
  const ModelBundle* bundle_;
  const Matrix* distances_;
  double slack_;
  std::vector<Component> comps_;
  Matrix lo_sim_;
  Matrix hi_sim_;
};

} // namespace ale
