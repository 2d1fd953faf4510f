#pragma once

// Generated models and latents: the two-class penguin example and seeded random corpora.

#include <ale/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace ale::synthetic {

// ---------------------------------------------------------------------------
// running example: 2 classes, 5 prototypes, a 2x2 latent grid

inline Matrix running_example_weights()
{
  return Matrix::from_rows({{10, 10, 7, 0, 0}, {0, 0, 5, 10, 15}});
}

/// Component x prototype similarities of the example image.
inline Matrix running_example_similarity()
{
  return Matrix::from_rows({{1, 0, 1, 0, 1}, {1, 3, 0, 1, 2}, {0, 1, 0, 2, 1}, {0, 0, 1, 8, 0}});
}

/// Distance at which sigma takes the value y (inverse of the log-ratio similarity).
inline double distance_for_similarity(double y, double epsilon)
{
  const double e = std::exp(y);
  return (1.0 - epsilon * e) / (e - 1.0);
}

inline constexpr std::size_t kRunningExampleDim = 6;

/// A bundle whose geometry reproduces the example: prototypes 0..3 sit on axes 0..3 at
/// distance 10 from the origin, prototype 4 sits half a unit from prototype 2 along axis 4.
inline ModelBundle running_example_bundle(double epsilon = 1e-4)
{
  Matrix protos(5, kRunningExampleDim);
  for (std::size_t j = 0; j < 4; ++j)
    protos(j, j) = 10.0;
  protos(4, 2) = 10.0;
  protos(4, 4) = 0.5;
  return make_bundle(std::move(protos), running_example_weights(), {SigmaKind::log_ratio, epsilon});
}

/// Latents whose activations are [1, 3, 1, 8, 2] under running_example_bundle.
inline LatentInstance running_example_instance(double epsilon = 1e-4)
{
  const auto x = [&](double y) { return distance_for_similarity(y, epsilon); };
  const ModelBundle b = running_example_bundle(epsilon);
  LatentInstance z;
  z.id = "penguin";
  z.grid_height = 2;
  z.grid_width = 2;
  z.components = Matrix(4, kRunningExampleDim);
  auto place = [&](std::size_t l, std::size_t j, double offset) {
    for (std::size_t d = 0; d < kRunningExampleDim; ++d)
      z.components(l, d) = b.prototypes(j, d);
    z.components(l, 5) += offset;
  };
  place(0, 0, x(1));
  place(1, 1, x(3));
  place(3, 3, x(8));
  // Component 2 sits at distance x(1) from prototype 2 and x(2) from prototype 4.
  const double s = 0.5, d1 = x(1), d2 = x(2);
  const double a = (d1 * d1 - d2 * d2 + s * s) / (2.0 * s);
  place(2, 2, std::sqrt(d1 * d1 - a * a));
  z.components(2, 4) = a;
  z.label = 1;
  return z;
}

// ---------------------------------------------------------------------------
// random models

struct BundleShape
{
  std::size_t classes = 2;
  std::size_t prototypes = 5;
  std::size_t dim = 2;
  double epsilon = 1e-4;
};

/// Gaussian prototypes, uniform weights in [-1, 1] and small random biases.
inline ModelBundle random_bundle(std::mt19937_64& rng, const BundleShape& shape)
{
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Matrix protos(shape.prototypes, shape.dim);
  for (std::size_t j = 0; j < shape.prototypes; ++j)
    for (std::size_t d = 0; d < shape.dim; ++d)
      protos(j, d) = gauss(rng);
  Matrix w(shape.classes, shape.prototypes);
  for (std::size_t k = 0; k < shape.classes; ++k)
    for (std::size_t j = 0; j < shape.prototypes; ++j)
      w(k, j) = unit(rng);
  std::vector<double> b(shape.classes);
  for (double& v : b)
    v = 0.1 * unit(rng);
  return make_bundle(std::move(protos), std::move(w), {SigmaKind::log_ratio, shape.epsilon},
                     std::move(b));
}

/// Components drawn near random prototypes (so similarities are not all tiny) with a few
/// background components.
inline LatentInstance random_instance(std::mt19937_64& rng, const ModelBundle& bundle,
                                      std::size_t components, const std::string& id = "z")
{
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, bundle.num_prototypes() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LatentInstance z;
  z.id = id;
  z.grid_height = components;
  z.components = Matrix(components, bundle.latent_dim());
  for (std::size_t l = 0; l < components; ++l) {
    const bool near = unit(rng) < 0.7;
    const std::size_t j = pick(rng);
    const double noise = near ? 0.3 * unit(rng) : 1.0;
    for (std::size_t d = 0; d < bundle.latent_dim(); ++d)
      z.components(l, d) = (near ? bundle.prototypes(j, d) : 0.0) + noise * gauss(rng);
  }
  return z;
}

// ---------------------------------------------------------------------------
// class-structured corpora

struct CorpusShape
{
  std::size_t classes = 5;
  std::size_t prototypes_per_class = 10;
  std::size_t grid_height = 4;
  std::size_t grid_width = 4;
  std::size_t dim = 32;
  std::size_t instances = 1000;
  double class_spread = 6.0;      // std of class centers
  double prototype_spread = 1.0;  // std of prototypes around their class center
  double part_noise = 0.02;       // std of a part component around its prototype
  double background_noise = 3.0;  // std of background components around the class center
  std::size_t parts = 4;          // components showing a prototype of the class
  double confusion = 0.25;        // chance that some parts come from another class
  double label_noise = 0.05;      // chance that the label names a random other class
  double epsilon = 1e-4;
};

/// ProtoPNet-style head: weight 1 to the class's own prototypes, -0.5 to all others.
inline ModelBundle corpus_bundle(std::mt19937_64& rng, const CorpusShape& s)
{
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t m = s.classes * s.prototypes_per_class;
  Matrix centers(s.classes, s.dim);
  for (double* p = &centers(0, 0); p != &centers(0, 0) + s.classes * s.dim; ++p)
    *p = s.class_spread * gauss(rng);
  Matrix protos(m, s.dim);
  Matrix w(s.classes, m, -0.5);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t k = j / s.prototypes_per_class;
    for (std::size_t d = 0; d < s.dim; ++d)
      protos(j, d) = centers(k, d) + s.prototype_spread * gauss(rng);
    w(k, j) = 1.0;
  }
  return make_bundle(std::move(protos), std::move(w), {SigmaKind::log_ratio, s.epsilon});
}

/// Class centers are not stored in the bundle; recover them as prototype means.
inline Matrix corpus_centers(const ModelBundle& b, const CorpusShape& s)
{
  Matrix c(s.classes, s.dim);
  for (std::size_t j = 0; j < b.num_prototypes(); ++j)
    for (std::size_t d = 0; d < s.dim; ++d)
      c(j / s.prototypes_per_class, d) += b.prototypes(j, d) / double(s.prototypes_per_class);
  return c;
}

/// Instance `index` of the corpus; its own RNG stream makes instances independent of order.
inline LatentInstance corpus_instance(const ModelBundle& b, const CorpusShape& s,
                                      const Matrix& centers, std::uint64_t seed,
                                      std::size_t index)
{
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_other(1, s.classes - 1);

  const std::size_t L = s.grid_height * s.grid_width;
  const std::size_t k = index % s.classes;
  LatentInstance z;
  z.id = "i" + std::to_string(index);
  z.grid_height = s.grid_height;
  z.grid_width = s.grid_width;
  z.components = Matrix(L, s.dim);

  std::vector<std::size_t> cells(L);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<std::size_t> own(s.prototypes_per_class);
  std::iota(own.begin(), own.end(), k * s.prototypes_per_class);
  std::shuffle(own.begin(), own.end(), rng);

  const std::size_t confuser = (k + pick_other(rng)) % s.classes;
  std::size_t borrowed = 0;
  if (unit(rng) < s.confusion)
    borrowed = 1 + std::min<std::size_t>(s.parts - 1, std::size_t(unit(rng) * s.parts));

  for (std::size_t i = 0; i < L; ++i) {
    const std::size_t l = cells[i];
    if (i < s.parts) {
      std::size_t j = own[i % own.size()];
      if (i < borrowed)
        j = confuser * s.prototypes_per_class + (own[i % own.size()] % s.prototypes_per_class);
      for (std::size_t d = 0; d < s.dim; ++d)
        z.components(l, d) = b.prototypes(j, d) + s.part_noise * gauss(rng);
    } else {
      for (std::size_t d = 0; d < s.dim; ++d)
        z.components(l, d) = centers(k, d) + s.background_noise * gauss(rng);
    }
  }
  z.label = k;
  if (unit(rng) < s.label_noise)
    z.label = (k + pick_other(rng)) % s.classes;
  return z;
}

inline std::vector<LatentInstance> corpus(const ModelBundle& b, const CorpusShape& s,
                                          std::uint64_t seed)
{
  const Matrix centers = corpus_centers(b, s);
  std::vector<LatentInstance> out;
  out.reserve(s.instances);
  for (std::size_t i = 0; i < s.instances; ++i)
    out.push_back(corpus_instance(b, s, centers, seed, i));
  return out;
}

/// Small, clearly separated model used where a nonempty forward pass must be prunable.
inline CorpusShape well_separated_shape()
{
  CorpusShape s;
  s.classes = 3;
  s.prototypes_per_class = 4;
  s.grid_height = 3;
  s.grid_width = 3;
  s.dim = 8;
  s.instances = 60;
  s.class_spread = 10.0;
  s.parts = 3;
  s.confusion = 0.2;
  s.label_noise = 0.0;
  return s;
}

} // namespace ale::synthetic
