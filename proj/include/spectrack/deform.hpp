#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "spectrack/common.hpp"
#include "spectrack/splat.hpp"

namespace spectrack {

// SE(2) motion: mean -> R(rotation) * mean + translation, covariance -> R Sigma R^T.
// Rotation is kept unwrapped.
struct RigidParams {
  Vec2 translation = Vec2::Zero();
  double rotation = 0.0;
};

struct SkinEntry {
  std::size_t control = 0;
  double weight = 0.0;
};
using SkinRow = std::vector<SkinEntry>;

// Control points moved directly by per-point offsets and rotations; Gaussians
// follow through normalised skinning weights (one row per Gaussian).
struct MorphField {
  std::vector<Vec2> control_points_rest;
  std::vector<Vec2> offsets;
  std::vector<double> rotations;
  std::vector<SkinRow> skin_weights;
  std::vector<std::vector<std::size_t>> neighbor_graph;

  std::size_t size() const { return control_points_rest.size(); }
};

using Deformation = std::variant<RigidParams, MorphField>;

inline constexpr std::size_t kDefaultSkinNeighbors = 4;
inline constexpr std::size_t kDefaultGraphNeighbors = 6;

// Farthest-point sampling over Gaussian means; the first point is a seeded uniform draw.
std::vector<Vec2> select_control_points(const Scene& scene, std::size_t count, std::uint64_t seed);

// Gaussian RBF weights over each mean's k nearest control points, normalised to sum 1.
// Ties in distance are broken by control index.
std::vector<SkinRow> compute_skin_weights(std::span<const Vec2> means,
                                          std::span<const Vec2> control_points, std::size_t k,
                                          double bandwidth);

// Median over control points of the distance to the nearest other control point.
double median_control_spacing(std::span<const Vec2> control_points);

// Symmetric closure of the k-nearest-neighbour graph over control points.
std::vector<std::vector<std::size_t>> build_neighbor_graph(std::span<const Vec2> control_points,
                                                           std::size_t k);

// Rest-state morph field for `scene` with the default skinning and graph choices.
// bandwidth defaults to median_control_spacing(control_points).
MorphField make_morph_field(const Scene& scene, std::vector<Vec2> control_points,
                            std::size_t skin_k = kDefaultSkinNeighbors,
                            std::optional<double> bandwidth = std::nullopt,
                            std::size_t graph_k = kDefaultGraphNeighbors);

Scene apply_deformation(const RigidParams& params, const Scene& scene);
Scene apply_deformation(const MorphField& field, const Scene& scene);
Scene apply_deformation(const Deformation& params, const Scene& scene);

// Flattened parameter order: rigid (tx, ty, theta); morph per control point (ox, oy, theta).
std::size_t parameter_count(const Deformation& params);
std::vector<double> flatten(const Deformation& params);
Deformation with_parameters(const Deformation& params, std::span<const double> values);

// Jacobian-transpose product of apply_deformation. mean_gradients holds dL/dmean per
// Gaussian; covariance_gradients (optional) holds dL/dSigma and is chained through the
// covariance rotation. Returns a flat gradient in parameter order.
std::vector<double> deformation_backward(const RigidParams& params, const Scene& scene,
                                         std::span<const Vec2> mean_gradients,
                                         std::span<const Mat2> covariance_gradients = {});
std::vector<double> deformation_backward(const MorphField& field, const Scene& scene,
                                         std::span<const Vec2> mean_gradients,
                                         std::span<const Mat2> covariance_gradients = {});
std::vector<double> deformation_backward(const Deformation& params, const Scene& scene,
                                         std::span<const Vec2> mean_gradients,
                                         std::span<const Mat2> covariance_gradients = {});

struct ArapResult {
  double energy = 0.0;
  std::vector<Vec2> offset_gradient;
};

// Pairwise distance preservation over graph edges i < j:
//   E = sum (|x_i - x_j| - |xbar_i - xbar_j|)^2, x = rest + offset, xbar = rest.
// A coincident deformed pair contributes a zero subgradient.
ArapResult arap_energy(const MorphField& field);

// One control point per line: rest_x rest_y offset_x offset_y rotation.
void write_morph_table(const MorphField& field, const std::filesystem::path& path);
// Reads rest positions, offsets and rotations; skinning and graph are left empty.
MorphField read_morph_table(const std::filesystem::path& path);

}  // namespace spectrack
