#include "spectrack/deform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "spectrack/parallel.hpp"

namespace spectrack {
namespace {

Mat2 rotation_matrix(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Mat2 rotation_derivative(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat2 r;
  r << -s, -c, c, -s;
  return r;
}

// R(theta) - I, written so that theta = 0 gives exact zeros.
Mat2 rotation_minus_identity(double theta) {
  const double s = std::sin(theta);
  const double h = std::sin(0.5 * theta);
  const double cm1 = -2.0 * h * h;
  Mat2 r;
  r << cm1, -s, s, cm1;
  return r;
}

Mat2 rotate_covariance(const Mat2& cov, double theta) {
  if (theta == 0.0) return cov;
  const Mat2 r = rotation_matrix(theta);
  Mat2 out = r * cov * r.transpose();
  const double off = 0.5 * (out(0, 1) + out(1, 0));
  out(0, 1) = off;
  out(1, 0) = off;
  return out;
}

// sum_ab G_ab * d(R Sigma R^T)/dtheta_ab
double covariance_rotation_gradient(const Mat2& grad, const Mat2& cov, double theta) {
  const Mat2 r = rotation_matrix(theta);
  const Mat2 dr = rotation_derivative(theta);
  const Mat2 d = dr * cov * r.transpose() + r * cov * dr.transpose();
  return (grad.array() * d.array()).sum();
}

void check_gradient_lengths(const Scene& scene, std::span<const Vec2> mean_gradients,
                            std::span<const Mat2> covariance_gradients) {
  if (mean_gradients.size() != scene.size()) {
    throw ShapeError("deformation_backward: expected " + std::to_string(scene.size()) +
                     " mean gradients, got " + std::to_string(mean_gradients.size()));
  }
  if (!covariance_gradients.empty() && covariance_gradients.size() != scene.size()) {
    throw ShapeError("deformation_backward: covariance gradient count mismatch");
  }
}

void check_morph(const MorphField& field, const Scene& scene) {
  const std::size_t n = field.size();
  if (field.offsets.size() != n || field.rotations.size() != n) {
    throw ShapeError("morph field: offsets/rotations do not match control point count");
  }
  if (field.skin_weights.size() != scene.size()) {
    throw ShapeError("morph field: " + std::to_string(field.skin_weights.size()) +
                     " skin rows for " + std::to_string(scene.size()) + " Gaussians");
  }
  for (const auto& row : field.skin_weights) {
    for (const auto& e : row) {
      if (e.control >= n) throw ShapeError("morph field: skin weight references unknown control point");
    }
  }
}

}  // namespace

std::vector<Vec2> select_control_points(const Scene& scene, std::size_t count, std::uint64_t seed) {
  const std::size_t n = scene.size();
  if (count == 0 || count > n) {
    throw std::invalid_argument("select_control_points: count " + std::to_string(count) +
                                " not in [1, " + std::to_string(n) + "]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<Vec2> chosen;
  chosen.reserve(count);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t next = pick(rng);
  for (std::size_t c = 0; c < count; ++c) {
    const Vec2 point = scene.gaussians[next].mean;
    chosen.push_back(point);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], (scene.gaussians[i].mean - point).squaredNorm());
    }
    next = static_cast<std::size_t>(std::max_element(nearest.begin(), nearest.end()) - nearest.begin());
  }
  return chosen;
}

std::vector<SkinRow> compute_skin_weights(std::span<const Vec2> means,
                                          std::span<const Vec2> control_points, std::size_t k,
                                          double bandwidth) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("compute_skin_weights: bandwidth must be positive");
  if (k == 0 || k > control_points.size()) {
    throw std::invalid_argument("compute_skin_weights: k must lie in [1, control point count]");
  }
  std::vector<SkinRow> rows(means.size());
  const double inv_two_b2 = 1.0 / (2.0 * bandwidth * bandwidth);
  for (std::size_t i = 0; i < means.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> dist(control_points.size());
    for (std::size_t j = 0; j < control_points.size(); ++j) {
      dist[j] = {(means[i] - control_points[j]).squaredNorm(), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    const double d_min = dist[0].first;
    SkinRow row(k);
    double total = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
      // Shifted by the nearest distance so far-away means never underflow to all zeros.
      const double w = std::exp(-(dist[m].first - d_min) * inv_two_b2);
      row[m] = {dist[m].second, w};
      total += w;
    }
    for (auto& e : row) e.weight /= total;
    rows[i] = std::move(row);
  }
  return rows;
}

double median_control_spacing(std::span<const Vec2> control_points) {
  const std::size_t n = control_points.size();
  if (n < 2) return 1.0;
  std::vector<double> spacing(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) spacing[i] = std::min(spacing[i], (control_points[i] - control_points[j]).norm());
    }
  }
  std::sort(spacing.begin(), spacing.end());
  const double median = n % 2 == 1 ? spacing[n / 2] : 0.5 * (spacing[n / 2 - 1] + spacing[n / 2]);
  return median > 0.0 ? median : 1.0;
}

std::vector<std::vector<std::size_t>> build_neighbor_graph(std::span<const Vec2> control_points,
                                                           std::size_t k) {
  const std::size_t n = control_points.size();
  const std::size_t kk = std::min(k, n == 0 ? 0 : n - 1);
  std::vector<std::vector<std::size_t>> graph(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dist.push_back({(control_points[i] - control_points[j]).squaredNorm(), j});
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    for (std::size_t m = 0; m < kk; ++m) {
      graph[i].push_back(dist[m].second);
      graph[dist[m].second].push_back(i);
    }
  }
  for (auto& nbrs : graph) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return graph;
}

MorphField make_morph_field(const Scene& scene, std::vector<Vec2> control_points, std::size_t skin_k,
                            std::optional<double> bandwidth, std::size_t graph_k) {
  MorphField field;
  std::vector<Vec2> means;
  means.reserve(scene.size());
  for (const auto& g : scene.gaussians) means.push_back(g.mean);
  const double b = bandwidth.value_or(median_control_spacing(control_points));
  field.skin_weights =
      compute_skin_weights(means, control_points, std::min(skin_k, control_points.size()), b);
  field.neighbor_graph = build_neighbor_graph(control_points, graph_k);
  field.offsets.assign(control_points.size(), Vec2::Zero());
  field.rotations.assign(control_points.size(), 0.0);
  field.control_points_rest = std::move(control_points);
  return field;
}

Scene apply_deformation(const RigidParams& params, const Scene& scene) {
  Scene out = scene;
  const double c = std::cos(params.rotation);
  const double s = std::sin(params.rotation);
  for (auto& g : out.gaussians) {
    const Vec2 m = g.mean;
    g.mean = Vec2(c * m.x() - s * m.y() + params.translation.x(),
                  s * m.x() + c * m.y() + params.translation.y());
    g.covariance = rotate_covariance(g.covariance, params.rotation);
  }
  return out;
}

Scene apply_deformation(const MorphField& field, const Scene& scene) {
  check_morph(field, scene);
  std::vector<Mat2> rot_minus_id(field.size());
  for (std::size_t j = 0; j < field.size(); ++j) rot_minus_id[j] = rotation_minus_identity(field.rotations[j]);

  Scene out = scene;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Vec2 mu = scene.gaussians[i].mean;
    Vec2 disp = Vec2::Zero();
    double angle = 0.0;
    for (const auto& e : field.skin_weights[i]) {
      const Vec2 local = mu - field.control_points_rest[e.control];
      disp += e.weight * (rot_minus_id[e.control] * local + field.offsets[e.control]);
      angle += e.weight * field.rotations[e.control];
    }
    out.gaussians[i].mean = mu + disp;
    out.gaussians[i].covariance = rotate_covariance(scene.gaussians[i].covariance, angle);
  }
  return out;
}

Scene apply_deformation(const Deformation& params, const Scene& scene) {
  return std::visit([&](const auto& p) { return apply_deformation(p, scene); }, params);
}

std::size_t parameter_count(const Deformation& params) {
  if (const auto* m = std::get_if<MorphField>(&params)) return 3 * m->size();
  return 3;
}

std::vector<double> flatten(const Deformation& params) {
  if (const auto* r = std::get_if<RigidParams>(&params)) {
    return {r->translation.x(), r->translation.y(), r->rotation};
  }
  const auto& m = std::get<MorphField>(params);
  std::vector<double> out;
  out.reserve(3 * m.size());
  for (std::size_t j = 0; j < m.size(); ++j) {
    out.push_back(m.offsets[j].x());
    out.push_back(m.offsets[j].y());
    out.push_back(m.rotations[j]);
  }
  return out;
}

Deformation with_parameters(const Deformation& params, std::span<const double> values) {
  if (values.size() != parameter_count(params)) {
    throw ShapeError("with_parameters: expected " + std::to_string(parameter_count(params)) +
                     " values, got " + std::to_string(values.size()));
  }
  if (std::holds_alternative<RigidParams>(params)) {
    RigidParams r;
    r.translation = Vec2(values[0], values[1]);
    r.rotation = values[2];
    return r;
  }
  MorphField m = std::get<MorphField>(params);
  for (std::size_t j = 0; j < m.size(); ++j) {
    m.offsets[j] = Vec2(values[3 * j], values[3 * j + 1]);
    m.rotations[j] = values[3 * j + 2];
  }
  return m;
}

std::vector<double> deformation_backward(const RigidParams& params, const Scene& scene,
                                         std::span<const Vec2> mean_gradients,
                                         std::span<const Mat2> covariance_gradients) {
  check_gradient_lengths(scene, mean_gradients, covariance_gradients);
  const Mat2 dr = rotation_derivative(params.rotation);
  Vec2 dt = Vec2::Zero();
  double dtheta = 0.0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    dt += mean_gradients[i];
    dtheta += mean_gradients[i].dot(dr * scene.gaussians[i].mean);
    if (!covariance_gradients.empty()) {
      dtheta += covariance_rotation_gradient(covariance_gradients[i], scene.gaussians[i].covariance,
                                             params.rotation);
    }
  }
  return {dt.x(), dt.y(), dtheta};
}

std::vector<double> deformation_backward(const MorphField& field, const Scene& scene,
                                         std::span<const Vec2> mean_gradients,
                                         std::span<const Mat2> covariance_gradients) {
  check_morph(field, scene);
  check_gradient_lengths(scene, mean_gradients, covariance_gradients);
  std::vector<Mat2> dr(field.size());
  for (std::size_t j = 0; j < field.size(); ++j) dr[j] = rotation_derivative(field.rotations[j]);

  std::vector<double> grad(3 * field.size(), 0.0);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Vec2 mu = scene.gaussians[i].mean;
    const Vec2 g = mean_gradients[i];
    double cov_term = 0.0;
    if (!covariance_gradients.empty()) {
      double angle = 0.0;
      for (const auto& e : field.skin_weights[i]) angle += e.weight * field.rotations[e.control];
      cov_term = covariance_rotation_gradient(covariance_gradients[i], scene.gaussians[i].covariance, angle);
    }
    for (const auto& e : field.skin_weights[i]) {
      const std::size_t j = e.control;
      grad[3 * j] += e.weight * g.x();
      grad[3 * j + 1] += e.weight * g.y();
      grad[3 * j + 2] += e.weight * (g.dot(dr[j] * (mu - field.control_points_rest[j])) + cov_term);
    }
  }
  return grad;
}

std::vector<double> deformation_backward(const Deformation& params, const Scene& scene,
                                         std::span<const Vec2> mean_gradients,
                                         std::span<const Mat2> covariance_gradients) {
  return std::visit(
      [&](const auto& p) { return deformation_backward(p, scene, mean_gradients, covariance_gradients); },
      params);
}

ArapResult arap_energy(const MorphField& field) {
  const std::size_t n = field.size();
  if (field.offsets.size() != n || field.neighbor_graph.size() != n) {
    throw ShapeError("arap_energy: graph/offsets do not match control point count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : field.neighbor_graph[i]) {
      const auto& back = field.neighbor_graph.at(j);
      if (std::find(back.begin(), back.end(), i) == back.end()) {
        throw std::invalid_argument("arap_energy: neighbor graph is not symmetric");
      }
    }
  }
  ArapResult result;
  result.offset_gradient.assign(n, Vec2::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : field.neighbor_graph[i]) {
      if (j <= i) continue;
      const Vec2 rest = field.control_points_rest[i] - field.control_points_rest[j];
      const Vec2 cur = rest + field.offsets[i] - field.offsets[j];
      const double len = cur.norm();
      const double diff = len - rest.norm();
      result.energy += diff * diff;
      if (len > 0.0) {
        const Vec2 g = (2.0 * diff / len) * cur;
        result.offset_gradient[i] += g;
        result.offset_gradient[j] -= g;
      }
    }
  }
  return result;
}

void write_morph_table(const MorphField& field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "# rest_x rest_y offset_x offset_y rotation\n";
  char buf[160];
  for (std::size_t j = 0; j < field.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g\n", field.control_points_rest[j].x(),
                  field.control_points_rest[j].y(), field.offsets[j].x(), field.offsets[j].y(),
                  field.rotations[j]);
    out << buf;
  }
}

MorphField read_morph_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  MorphField field;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double rx, ry, ox, oy, th;
    if (!(ss >> rx >> ry >> ox >> oy >> th)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
    }
    field.control_points_rest.emplace_back(rx, ry);
    field.offsets.emplace_back(ox, oy);
    field.rotations.push_back(th);
  }
  return field;
}

}  // namespace spectrack
