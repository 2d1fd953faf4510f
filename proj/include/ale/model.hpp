#pragma once

// Prototype classifier core: similarity function, activation layer and the
// affine decision head. Everything here is a pure function of its inputs.

#include <ale/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ale {

/// Dense row-major matrix of doubles. Only what the engine needs.
class Matrix
{
public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
    : rows_(rows), cols_(cols), data_(rows * cols, fill)
  {
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows)
  {
    if (rows.empty())
      return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_)
        throw DimensionError("ragged matrix: row " + std::to_string(r) + " has " +
                             std::to_string(rows[r].size()) + " entries, expected " +
                             std::to_string(m.cols_));
      std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + r * m.cols_);
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<std::vector<double>> to_rows() const
  {
    std::vector<std::vector<double>> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      out[r].assign(row(r).begin(), row(r).end());
    return out;
  }

  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class SigmaKind { log_ratio };

/// sigma(x) = ln((x + 1) / (x + epsilon)); decreasing for epsilon < 1.
struct SigmaParams
{
  SigmaKind kind = SigmaKind::log_ratio;
  double epsilon = 1e-4;
};

inline constexpr double kDefaultDistanceSlack = 1e-6;
/// Dimension from which squared distances use compensated summation.
inline constexpr std::size_t kCompensatedSumDim = 1024;

struct ModelBundle
{
  std::size_t num_classes = 0;
  Matrix prototypes;  // m x D
  Matrix weights;     // C x m, row k is the logit of class k
  std::vector<double> biases;  // C
  SigmaParams sigma;
  Matrix proto_dist;  // m x m
  double distance_slack = kDefaultDistanceSlack;

  std::size_t num_prototypes() const { return prototypes.rows(); }
  std::size_t latent_dim() const { return prototypes.cols(); }
};

struct LatentInstance
{
  std::string id;
  Matrix components;  // L x D, row-major flattening of the H1 x W1 grid
  std::optional<std::size_t> label;
  std::size_t grid_height = 1;
  std::size_t grid_width = 1;
  // Attached by exporters that ran the reference model.
  std::optional<std::size_t> reference_prediction;
  std::optional<std::vector<double>> reference_activations;

  std::size_t num_components() const { return components.rows(); }
};

using ActivationVector = std::vector<double>;

inline double sigma(double x, const SigmaParams& params)
{
  if (!(x > 0.0))
    x = 0.0;
  if (std::isinf(x))
    return 0.0;
  // log1p of one correctly rounded quotient: accurate for large x and non-increasing between
  // adjacent doubles, so tighter distance intervals never widen similarity bounds.
  return std::log1p((1.0 - params.epsilon) / (x + params.epsilon));
}

/// Largest value sigma can take; the activation of a prototype nobody knows anything about
/// lies in [0, sigma_max].
inline double sigma_max(const SigmaParams& params) { return sigma(0.0, params); }

inline double squared_distance(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size())
    throw DimensionError("distance between vectors of size " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  double sum = 0.0;
  if (a.size() < kCompensatedSumDim) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double t = a[i] - b[i];
      sum += t * t;
    }
  } else {
    // Neumaier summation
    double comp = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double t = a[i] - b[i];
      const double term = t * t;
      const double s = sum + term;
      if (std::abs(sum) >= term)
        comp += (sum - s) + term;
      else
        comp += (term - s) + sum;
      sum = s;
    }
    sum += comp;
  }
  return sum > 0.0 ? sum : 0.0;
}

inline double l2_distance(std::span<const double> a, std::span<const double> b)
{
  return std::sqrt(squared_distance(a, b));
}

/// Pairwise prototype distances, computed with the same routine as latent distances.
inline Matrix prototype_distances(const Matrix& prototypes)
{
  const std::size_t m = prototypes.rows();
  Matrix out(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = l2_distance(prototypes.row(i), prototypes.row(j));
      out(i, j) = d;
      out(j, i) = d;
    }
  return out;
}

/// Shape and value checks. Throws ValidationError / DimensionError.
inline void validate(const ModelBundle& bundle)
{
  const std::size_t m = bundle.num_prototypes();
  if (m == 0 || bundle.latent_dim() == 0)
    throw ValidationError("bundle needs at least one prototype of dimension >= 1");
  if (bundle.num_classes == 0)
    throw ValidationError("bundle needs at least one class");
  if (bundle.weights.rows() != bundle.num_classes || bundle.weights.cols() != m)
    throw DimensionError("weights have shape " + std::to_string(bundle.weights.rows()) + "x" +
                         std::to_string(bundle.weights.cols()) + ", expected " +
                         std::to_string(bundle.num_classes) + "x" + std::to_string(m));
  if (bundle.biases.size() != bundle.num_classes)
    throw DimensionError("biases have length " + std::to_string(bundle.biases.size()) +
                         ", expected " + std::to_string(bundle.num_classes));
  if (!(bundle.sigma.epsilon > 0.0) || bundle.sigma.epsilon > 1.0)
    throw ValidationError("sigma epsilon must lie in (0, 1], got " +
                          std::to_string(bundle.sigma.epsilon));
  // Interval mapping relies on sigma being non-increasing.
  if (sigma(0.0, bundle.sigma) < sigma(1.0, bundle.sigma))
    throw ValidationError("sigma is not decreasing for the configured epsilon");
  if (!(bundle.distance_slack >= 0.0) || std::isnan(bundle.distance_slack))
    throw ValidationError("distance_slack must be nonnegative");
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(bundle.prototypes.data()) || !finite(bundle.weights.data()) ||
      !finite(bundle.biases))
    throw ValidationError("bundle contains non-finite values");
  if (bundle.proto_dist.rows() != m || bundle.proto_dist.cols() != m)
    throw DimensionError("proto_dist must be " + std::to_string(m) + "x" + std::to_string(m));
  for (std::size_t i = 0; i < m; ++i) {
    if (bundle.proto_dist(i, i) != 0.0)
      throw ValidationError("proto_dist has a nonzero diagonal at " + std::to_string(i));
    for (std::size_t j = i + 1; j < m; ++j)
      if (std::abs(bundle.proto_dist(i, j) - bundle.proto_dist(j, i)) > 1e-6)
        throw ValidationError("proto_dist is not symmetric at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
  }
}

/// Largest violation of d(i,k) <= d(i,j) + d(j,k) over all triples. O(m^3).
inline double triangle_inequality_excess(const Matrix& dist)
{
  const std::size_t m = dist.rows();
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k)
        worst = std::max(worst, dist(i, k) - dist(i, j) - dist(j, k));
  return worst;
}

inline void validate(const LatentInstance& instance, const ModelBundle& bundle)
{
  if (instance.num_components() == 0)
    throw ValidationError("instance '" + instance.id + "' has no components");
  if (instance.components.cols() != bundle.latent_dim())
    throw DimensionError("instance '" + instance.id + "' has component dimension " +
                         std::to_string(instance.components.cols()) + ", bundle expects " +
                         std::to_string(bundle.latent_dim()));
  for (double x : instance.components.data())
    if (!std::isfinite(x))
      throw ValidationError("instance '" + instance.id + "' has non-finite components");
  if (instance.label && *instance.label >= bundle.num_classes)
    throw IndexError("instance '" + instance.id + "' has label " +
                     std::to_string(*instance.label) + " outside [0, " +
                     std::to_string(bundle.num_classes) + ")");
}

/// L x m matrix of d(z_l, p_j).
inline Matrix distance_matrix(const LatentInstance& instance, const ModelBundle& bundle)
{
  if (instance.components.cols() != bundle.latent_dim())
    throw DimensionError("component dimension " + std::to_string(instance.components.cols()) +
                         " does not match prototype dimension " +
                         std::to_string(bundle.latent_dim()));
  const std::size_t L = instance.num_components();
  const std::size_t m = bundle.num_prototypes();
  Matrix out(L, m);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t j = 0; j < m; ++j)
      out(l, j) = l2_distance(instance.components.row(l), bundle.prototypes.row(j));
  return out;
}

inline Matrix similarity_matrix(const Matrix& distances, const SigmaParams& params)
{
  Matrix out(distances.rows(), distances.cols());
  for (std::size_t l = 0; l < distances.rows(); ++l)
    for (std::size_t j = 0; j < distances.cols(); ++j)
      out(l, j) = sigma(distances(l, j), params);
  return out;
}

inline Matrix similarity_matrix(const LatentInstance& instance, const ModelBundle& bundle)
{
  return similarity_matrix(distance_matrix(instance, bundle), bundle.sigma);
}

struct ActivationDetail
{
  Matrix similarities;               // L x m
  ActivationVector values;           // m
  std::vector<std::size_t> argmax;   // m, winning component per prototype (lowest on ties)
};

/// Column-wise max of a precomputed similarity matrix.
inline ActivationDetail activations_from_similarity(Matrix similarities)
{
  if (similarities.rows() == 0)
    throw DimensionError("similarity matrix has no rows");
  ActivationDetail out;
  const std::size_t m = similarities.cols();
  out.values.assign(m, -std::numeric_limits<double>::infinity());
  out.argmax.assign(m, 0);
  for (std::size_t l = 0; l < similarities.rows(); ++l)
    for (std::size_t j = 0; j < m; ++j)
      if (similarities(l, j) > out.values[j]) {
        out.values[j] = similarities(l, j);
        out.argmax[j] = l;
      }
  out.similarities = std::move(similarities);
  return out;
}

inline ActivationDetail activation_detail(const LatentInstance& instance,
                                          const ModelBundle& bundle)
{
  return activations_from_similarity(similarity_matrix(instance, bundle));
}

inline ActivationVector activations(const LatentInstance& instance, const ModelBundle& bundle)
{
  return activation_detail(instance, bundle).values;
}

/// Logit of class k: w_k . a + b_k.
inline double logit(std::span<const double> a, const ModelBundle& bundle, std::size_t k)
{
  double acc = bundle.biases[k];
  const auto w = bundle.weights.row(k);
  for (std::size_t j = 0; j < a.size(); ++j)
    acc += w[j] * a[j];
  return acc;
}

/// W a + b.
inline std::vector<double> logits(std::span<const double> a, const ModelBundle& bundle)
{
  if (a.size() != bundle.num_prototypes())
    throw DimensionError("activation vector has length " + std::to_string(a.size()) +
                         ", expected " + std::to_string(bundle.num_prototypes()));
  std::vector<double> out(bundle.num_classes);
  for (std::size_t k = 0; k < bundle.num_classes; ++k)
    out[k] = logit(a, bundle, k);
  return out;
}

/// Index of the largest score; the lowest index wins ties.
inline std::size_t argmax_lowest(std::span<const double> scores)
{
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best])
      best = k;
  return best;
}

inline std::size_t predict_from_activations(std::span<const double> a, const ModelBundle& bundle)
{
  const auto h = logits(a, bundle);
  return argmax_lowest(h);
}

inline std::size_t predict(const LatentInstance& instance, const ModelBundle& bundle)
{
  const auto a = activations(instance, bundle);
  return predict_from_activations(a, bundle);
}

/// Fills proto_dist from the prototypes and default biases; then validates.
inline ModelBundle make_bundle(Matrix prototypes, Matrix weights, SigmaParams sigma_params = {},
                               std::vector<double> biases = {},
                               double distance_slack = kDefaultDistanceSlack)
{
  ModelBundle b;
  b.num_classes = weights.rows();
  b.prototypes = std::move(prototypes);
  b.weights = std::move(weights);
  b.biases = biases.empty() ? std::vector<double>(b.num_classes, 0.0) : std::move(biases);
  b.sigma = sigma_params;
  b.proto_dist = prototype_distances(b.prototypes);
  b.distance_slack = distance_slack;
  validate(b);
  return b;
}

} // namespace ale
