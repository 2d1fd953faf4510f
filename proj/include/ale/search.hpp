#pragma once

// Explanation search.
//
// topk_ale walks the prototypes by decreasing activation and returns the shortest verified
// prefix. spatial_ale grows a set of (component, prototype) pairs until the bounds it
// implies are verified, then prunes it back: pairs are tentatively removed, newest first,
// and put back (and marked as necessary) whenever their removal breaks verification.

#include <ale/bounds.hpp>
#include <ale/error.hpp>
#include <ale/model.hpp>
#include <ale/verifier.hpp>

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ale {

enum class PairStrategy { nearest_first, round_robin };
enum class InitStrategy { empty, nearest_per_component };

inline std::string_view to_string(PairStrategy s)
{
  return s == PairStrategy::nearest_first ? "nearest" : "round-robin";
}

inline std::string_view to_string(InitStrategy s)
{
  return s == InitStrategy::empty ? "empty" : "nearest-per-component";
}

inline PairStrategy parse_pair_strategy(std::string_view s)
{
  if (s == "nearest" || s == "nearest-first")
    return PairStrategy::nearest_first;
  if (s == "round-robin" || s == "roundrobin")
    return PairStrategy::round_robin;
  throw ValidationError("unknown pair strategy '" + std::string(s) + "'");
}

inline InitStrategy parse_init_strategy(std::string_view s)
{
  if (s == "empty")
    return InitStrategy::empty;
  if (s == "nearest-per-component" || s == "nearest")
    return InitStrategy::nearest_per_component;
  throw ValidationError("unknown init strategy '" + std::string(s) + "'");
}

using Clock = std::chrono::steady_clock;

struct SearchConfig
{
  Paradigm paradigm = Paradigm::topk;
  PairStrategy pair_strategy = PairStrategy::nearest_first;
  InitStrategy init_strategy = InitStrategy::empty;
  std::optional<double> slack;  // defaults to the bundle's distance_slack
  std::optional<std::size_t> max_pairs;
  double margin = 0.0;
  std::optional<Clock::time_point> deadline;
  bool record_trace = false;

  double slack_for(const ModelBundle& bundle) const { return slack.value_or(bundle.distance_slack); }
};

enum class SearchStatus { verified, unverified_at_cap, exhausted, timeout };

inline std::string_view to_string(SearchStatus s)
{
  switch (s) {
  case SearchStatus::verified: return "verified";
  case SearchStatus::unverified_at_cap: return "unverified_at_cap";
  case SearchStatus::exhausted: return "exhausted";
  case SearchStatus::timeout: return "timeout";
  }
  return "?";
}

struct TraceEvent
{
  enum class Phase { forward, backward };
  Phase phase;
  Pair pair;          // for top-k, pair.prototype holds the prototype and component is 0
  bool verified_after;
};

struct SearchResult
{
  Explanation explanation;
  VerifyResult verification;
  ActivationBounds bounds;
  SearchStatus status = SearchStatus::verified;
  std::size_t predicted = 0;
  std::size_t forward_size = 0;
  std::vector<TraceEvent> trace;
};

inline bool past(const std::optional<Clock::time_point>& deadline)
{
  return deadline && Clock::now() >= *deadline;
}

// ---------------------------------------------------------------------------
// top-k

/// Prototype indices by decreasing activation, lower index first on ties.
inline std::vector<std::size_t> activation_order(std::span<const double> a)
{
  std::vector<std::size_t> order(a.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x] > a[y]; });
  return order;
}

inline SearchResult topk_ale(const Anchor& anchor, const ModelBundle& bundle,
                             const SearchConfig& cfg, std::string instance_id = {})
{
  SearchResult r;
  r.predicted = anchor.predicted;
  r.explanation.paradigm = Paradigm::topk;
  r.explanation.instance_id = std::move(instance_id);
  const std::size_t c = anchor.predicted;

  std::vector<std::size_t> open;
  for (std::size_t k = 0; k < bundle.num_classes; ++k)
    if (k != c)
      open.push_back(k);

  const auto order = activation_order(anchor.activations);
  auto& chosen = r.explanation.prototypes;
  r.bounds = {std::vector<double>(bundle.num_prototypes(), 0.0),
              std::vector<double>(bundle.num_prototypes(), sigma_max(bundle.sigma))};
  // The empty prefix counts: a head that favours c over the whole universal box needs nothing.
  open = undominated(r.bounds, bundle, c, open, cfg.margin);
  while (!open.empty() && chosen.size() < order.size()) {
    if (past(cfg.deadline)) {
      r.status = SearchStatus::timeout;
      break;
    }
    chosen.push_back(order[chosen.size()]);
    r.bounds = topk_bounds(chosen, anchor.activations);
    // Prefix growth only shrinks the box, so classes already dominated stay dominated.
    open = undominated(r.bounds, bundle, c, open, cfg.margin);
    if (cfg.record_trace)
      r.trace.push_back({TraceEvent::Phase::forward, {0, chosen.back()}, open.empty()});
  }
  r.forward_size = chosen.size();
  r.verification = verify(r.bounds, bundle, c, cfg.margin);
  if (r.status != SearchStatus::timeout && !r.verification.verified)
    r.status = SearchStatus::exhausted;
  return r;
}

inline SearchResult topk_ale(const LatentInstance& instance, const ModelBundle& bundle,
                             const SearchConfig& cfg)
{
  return topk_ale(make_anchor(instance, bundle), bundle, cfg, instance.id);
}

// ---------------------------------------------------------------------------
// pair selection

/// Next pair to add. `used` is an L x m mask (row-major); `last_component` is the component
/// of the most recently added pair, if any.
inline std::optional<Pair> next_pair(PairStrategy strategy, const Matrix& distances,
                                     const std::vector<bool>& used,
                                     std::optional<std::size_t> last_component)
{
  const std::size_t L = distances.rows();
  const std::size_t m = distances.cols();
  auto nearest_in = [&](std::size_t l) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < m; ++j)
      if (!used[l * m + j] && (!best || distances(l, j) < distances(l, *best)))
        best = j;
    return best;
  };

  if (strategy == PairStrategy::round_robin) {
    const std::size_t start = last_component ? (*last_component + 1) % L : 0;
    for (std::size_t step = 0; step < L; ++step) {
      const std::size_t l = (start + step) % L;
      if (auto j = nearest_in(l))
        return Pair{l, *j};
    }
    return std::nullopt;
  }

  std::optional<Pair> best;
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t j = 0; j < m; ++j)
      if (!used[l * m + j] && (!best || distances(l, j) < distances(best->component, best->prototype)))
        best = Pair{l, j};
  return best;
}

/// Next pair for explanation `e`, or nothing when every pair is already in it.
inline std::optional<Pair> next_pair(PairStrategy strategy, const Matrix& distances,
                                     const Explanation& e)
{
  const std::size_t m = distances.cols();
  std::vector<bool> used(distances.rows() * m, false);
  for (const Pair& p : e.pairs)
    used.at(p.component * m + p.prototype) = true;
  std::optional<std::size_t> last;
  if (!e.pairs.empty())
    last = e.pairs.back().component;
  return next_pair(strategy, distances, used, last);
}

// ---------------------------------------------------------------------------
// spatial search

namespace detail {

inline std::vector<std::size_t> component_list(const std::vector<Pair>& pairs, std::size_t l,
                                               std::optional<std::size_t> skip = std::nullopt)
{
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].component == l && i != skip)
      out.push_back(pairs[i].prototype);
  return out;
}

inline SpatialBoundsBuilder make_builder(const Explanation& e, const Anchor& anchor,
                                         const ModelBundle& bundle, double slack)
{
  SpatialBoundsBuilder b(e.paradigm, bundle, anchor.distances, slack);
  for (std::size_t l = 0; l < anchor.num_components(); ++l) {
    auto list = component_list(e.pairs, l);
    if (!list.empty())
      b.assign(l, std::move(list));
  }
  return b;
}

struct PruneOutcome
{
  bool timed_out = false;
  std::size_t removed = 0;
};

/// One backward pass with marking. `e` must be verified on entry and stays verified.
inline PruneOutcome prune_pass(Explanation& e, SpatialBoundsBuilder& builder,
                               const ModelBundle& bundle, std::size_t c,
                               const SearchConfig& cfg, std::vector<TraceEvent>* trace)
{
  PruneOutcome out;
  std::vector<bool> marked(e.pairs.size(), false);
  while (true) {
    std::optional<std::size_t> idx;
    for (std::size_t i = e.pairs.size(); i-- > 0;)
      if (!marked[i]) {
        idx = i;
        break;
      }
    if (!idx)
      break;
    if (past(cfg.deadline)) {
      out.timed_out = true;
      break;
    }
    const Pair p = e.pairs[*idx];
    builder.assign(p.component, component_list(e.pairs, p.component, *idx));
    const bool still = verify(builder.bounds(), bundle, c, cfg.margin).verified;
    if (trace)
      trace->push_back({TraceEvent::Phase::backward, p, still});
    if (still) {
      e.pairs.erase(e.pairs.begin() + static_cast<std::ptrdiff_t>(*idx));
      marked.erase(marked.begin() + static_cast<std::ptrdiff_t>(*idx));
      ++out.removed;
    } else {
      builder.assign(p.component, component_list(e.pairs, p.component));
      marked[*idx] = true;
    }
  }
  return out;
}

} // namespace detail

/// Subset-minimizing backward pass. For the hypersphere paradigm, bounds are not monotone
/// under arbitrary removals (sphere chains are rebuilt in insertion order), so passes repeat
/// until one removes nothing.
inline Explanation backward_prune(Explanation e, const Anchor& anchor, const ModelBundle& bundle,
                                  const SearchConfig& cfg, bool* timed_out = nullptr,
                                  std::vector<TraceEvent>* trace = nullptr)
{
  if (!is_spatial(e.paradigm))
    throw ValidationError("backward_prune applies to spatial explanations");
  validate(e, anchor.num_components(), bundle.num_prototypes());
  const double slack = cfg.slack_for(bundle);
  auto builder = detail::make_builder(e, anchor, bundle, slack);
  if (!verify(builder.bounds(), bundle, anchor.predicted, cfg.margin).verified)
    throw StateError("backward_prune needs a verified explanation");
  if (timed_out)
    *timed_out = false;
  while (true) {
    const auto outcome = detail::prune_pass(e, builder, bundle, anchor.predicted, cfg, trace);
    if (outcome.timed_out) {
      if (timed_out)
        *timed_out = true;
      break;
    }
    if (e.paradigm != Paradigm::hypersphere || outcome.removed == 0)
      break;
  }
  return e;
}

inline Explanation backward_prune(const Explanation& e, const LatentInstance& instance,
                                  const ModelBundle& bundle, const SearchConfig& cfg)
{
  return backward_prune(e, make_anchor(instance, bundle), bundle, cfg);
}

inline SearchResult spatial_ale(const Anchor& anchor, const ModelBundle& bundle,
                                const SearchConfig& cfg, std::string instance_id = {})
{
  if (!is_spatial(cfg.paradigm))
    throw ValidationError("spatial_ale needs the triangle or hypersphere paradigm");
  SearchResult r;
  r.predicted = anchor.predicted;
  r.explanation.paradigm = cfg.paradigm;
  r.explanation.instance_id = std::move(instance_id);
  const std::size_t c = anchor.predicted;
  const std::size_t L = anchor.num_components();
  const std::size_t m = bundle.num_prototypes();
  const double slack = cfg.slack_for(bundle);
  auto* trace = cfg.record_trace ? &r.trace : nullptr;

  SpatialBoundsBuilder builder(cfg.paradigm, bundle, anchor.distances, slack);
  std::vector<bool> used(L * m, false);
  auto& pairs = r.explanation.pairs;
  auto add = [&](Pair p) {
    pairs.push_back(p);
    used[p.component * m + p.prototype] = true;
    builder.append(p);
  };

  if (cfg.init_strategy == InitStrategy::nearest_per_component)
    for (std::size_t l = 0; l < L; ++l) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < m; ++j)
        if (anchor.distances(l, j) < anchor.distances(l, best))
          best = j;
      add({l, best});
    }

  bool verified = verify(builder.bounds(), bundle, c, cfg.margin).verified;
  while (!verified) {
    if (past(cfg.deadline)) {
      r.status = SearchStatus::timeout;
      break;
    }
    if (cfg.max_pairs && pairs.size() >= *cfg.max_pairs) {
      r.status = SearchStatus::unverified_at_cap;
      break;
    }
    std::optional<std::size_t> last;
    if (!pairs.empty())
      last = pairs.back().component;
    const auto p = next_pair(cfg.pair_strategy, anchor.distances, used, last);
    if (!p) {
      r.status = SearchStatus::exhausted;
      break;
    }
    add(*p);
    verified = verify(builder.bounds(), bundle, c, cfg.margin).verified;
    if (trace)
      trace->push_back({TraceEvent::Phase::forward, *p, verified});
  }
  r.forward_size = pairs.size();

  if (verified) {
    bool timed_out = false;
    r.explanation = backward_prune(std::move(r.explanation), anchor, bundle, cfg, &timed_out, trace);
    if (timed_out)
      r.status = SearchStatus::timeout;
  }
  r.bounds = derive_bounds(r.explanation, anchor, bundle, slack);
  r.verification = verify(r.bounds, bundle, c, cfg.margin);
  return r;
}

inline SearchResult spatial_ale(const LatentInstance& instance, const ModelBundle& bundle,
                                const SearchConfig& cfg)
{
  return spatial_ale(make_anchor(instance, bundle), bundle, cfg, instance.id);
}

/// Dispatch on cfg.paradigm.
inline SearchResult explain(const Anchor& anchor, const ModelBundle& bundle,
                            const SearchConfig& cfg, std::string instance_id = {})
{
  if (cfg.paradigm == Paradigm::topk)
    return topk_ale(anchor, bundle, cfg, std::move(instance_id));
  return spatial_ale(anchor, bundle, cfg, std::move(instance_id));
}

inline SearchResult explain(const LatentInstance& instance, const ModelBundle& bundle,
                            const SearchConfig& cfg)
{
  validate(instance, bundle);
  return explain(make_anchor(instance, bundle), bundle, cfg, instance.id);
}

} // namespace ale
