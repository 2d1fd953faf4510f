#pragma once

// Sufficiency check of activation bounds against an affine decision head.
//
// For a challenger class k and the predicted class c, the box corner that favours k the
// most takes the upper bound wherever w_k >= w_c and the lower bound elsewhere. The
// prediction is safe against k iff c still wins at that corner. "Wins" follows the
// lowest-index tie-breaking of the predictor: c must be strictly ahead of a challenger with
// a smaller index and at least level with one with a larger index.

#include <ale/bounds.hpp>
#include <ale/error.hpp>
#include <ale/model.hpp>

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace ale {

struct Witness
{
  std::vector<double> activations;
  double logit_gap = 0.0;  // h_k - h_c at the witness
};

struct VerifyResult
{
  bool verified = true;
  std::vector<std::size_t> unverified_classes;  // ascending
  std::map<std::size_t, Witness> witnesses;
};

inline void check_class(std::size_t k, const ModelBundle& bundle)
{
  if (k >= bundle.num_classes)
    throw IndexError("class " + std::to_string(k) + " out of range for " +
                     std::to_string(bundle.num_classes) + " classes");
}

inline std::vector<double> max_favoring(const ActivationBounds& bounds, const ModelBundle& bundle,
                                        std::size_t k, std::size_t c)
{
  check_class(k, bundle);
  check_class(c, bundle);
  if (bounds.lower.size() != bundle.num_prototypes() ||
      bounds.upper.size() != bundle.num_prototypes())
    throw DimensionError("bounds do not match the number of prototypes");
  const auto wk = bundle.weights.row(k);
  const auto wc = bundle.weights.row(c);
  std::vector<double> v(bounds.size());
  for (std::size_t j = 0; j < v.size(); ++j)
    v[j] = wk[j] >= wc[j] ? bounds.upper[j] : bounds.lower[j];
  return v;
}

/// Does c (logit hc) beat k (logit hk) under lowest-index tie-breaking and margin `margin`.
inline bool dominates(double hc, double hk, std::size_t c, std::size_t k, double margin)
{
  return k < c ? hc > hk + margin : hc >= hk + margin;
}

inline VerifyResult verify(const ActivationBounds& bounds, const ModelBundle& bundle,
                           std::size_t c, double margin = 0.0)
{
  check_class(c, bundle);
  VerifyResult r;
  for (std::size_t k = 0; k < bundle.num_classes; ++k) {
    if (k == c)
      continue;
    auto v = max_favoring(bounds, bundle, k, c);
    const double hc = logit(v, bundle, c);
    const double hk = logit(v, bundle, k);
    if (!dominates(hc, hk, c, k, margin)) {
      r.verified = false;
      r.unverified_classes.push_back(k);
      r.witnesses.emplace(k, Witness{std::move(v), hk - hc});
    }
  }
  return r;
}

/// Verification restricted to `classes`; used by loops that only re-check what is still open.
inline std::vector<std::size_t> undominated(const ActivationBounds& bounds,
                                            const ModelBundle& bundle, std::size_t c,
                                            std::span<const std::size_t> classes, double margin)
{
  std::vector<std::size_t> open;
  for (std::size_t k : classes) {
    const auto v = max_favoring(bounds, bundle, k, c);
    if (!dominates(logit(v, bundle, c), logit(v, bundle, k), c, k, margin))
      open.push_back(k);
  }
  return open;
}

} // namespace ale
