/*
 * Copyright 2026 The NLD Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "analysis/export.hpp"

#include <cmath>
#include <ostream>

#include "common/error.hpp"

namespace nld::analysis {

using nlohmann::json;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double grid_coord(double lo, double hi, std::size_t i, std::size_t n) {
  if (i + 1 == n) return hi;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

template <class RowFn>
void for_each_grid_point(const Plane& plane, const GridSpec& grid, RowFn&& row) {
  grid.validate();
  for (std::size_t i = 0; i < grid.u_res; ++i) {
    const double u = grid_coord(grid.u_min, grid.u_max, i, grid.u_res);
    for (std::size_t j = 0; j < grid.v_res; ++j) {
      const double v = grid_coord(grid.v_min, grid.v_max, j, grid.v_res);
      row(u, v, plane.point(u, v));
    }
  }
}

}  // namespace

std::vector<double> Plane::point(double u, double v) const {
  std::vector<double> p(origin.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = origin[i] + u * b1[i] + v * b2[i];
  return p;
}

std::pair<double, double> Plane::project(std::span<const double> vector) const {
  return {dot(vector, b1), dot(vector, b2)};
}

Plane plane_through_points(std::span<const double> m1, std::span<const double> m2, std::span<const double> m3) {
  const std::size_t n = m1.size();
  if (m2.size() != n || m3.size() != n) throw Error(ErrorCode::ShapeMismatch, "plane points differ in dimension");
  if (n < 2) throw Error(ErrorCode::DegeneratePoints, "a plane needs at least two dimensions");
  Plane plane;
  plane.origin.assign(m1.begin(), m1.end());
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = m2[i] - m1[i];
    b[i] = m3[i] - m1[i];
  }
  const double na = std::sqrt(dot(a, a));
  if (na < 1e-10) throw Error(ErrorCode::DegeneratePoints, "first two points coincide");
  for (double& x : a) x /= na;
  const double proj = dot(b, a);
  for (std::size_t i = 0; i < n; ++i) b[i] -= proj * a[i];
  const double nb = std::sqrt(dot(b, b));
  if (nb < 1e-10) throw Error(ErrorCode::DegeneratePoints, "points are collinear");
  for (double& x : b) x /= nb;
  plane.b1 = std::move(a);
  plane.b2 = std::move(b);
  return plane;
}

Plane native_plane() { return Plane{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}; }

void GridSpec::validate() const {
  if (u_res < 2 || v_res < 2) throw Error(ErrorCode::InvalidArgument, "grid resolution must be at least 2 per axis");
  if (!(u_max > u_min) || !(v_max > v_min)) throw Error(ErrorCode::InvalidArgument, "grid bounds are empty");
}

void export_energy_grid(const PointFn& energy, const Plane& plane, const GridSpec& grid, std::ostream& csv) {
  csv << "u,v,E\n";
  const auto precision = csv.precision(17);
  for_each_grid_point(plane, grid, [&](double u, double v, const std::vector<double>& z) {
    csv << u << ',' << v << ',' << energy(z) << '\n';
  });
  csv.precision(precision);
}

void export_drift_grid(const VectorFn& drift, const Plane& plane, const GridSpec& grid, std::ostream& csv) {
  csv << "u,v,du,dv\n";
  const auto precision = csv.precision(17);
  std::vector<double> field(plane.origin.size());
  for_each_grid_point(plane, grid, [&](double u, double v, const std::vector<double>& z) {
    drift(z, field);
    const auto [du, dv] = plane.project(field);
    csv << u << ',' << v << ',' << du << ',' << dv << '\n';
  });
  csv.precision(precision);
}

json landscape_sidecar(ExportKind kind, const Plane& plane, const GridSpec& grid) {
  json j;
  j["kind"] = kind == ExportKind::Energy ? "energy" : "drift";
  j["columns"] = kind == ExportKind::Energy ? json{"u", "v", "E"} : json{"u", "v", "du", "dv"};
  j["plane"] = {{"origin", plane.origin}, {"basis", {plane.b1, plane.b2}}};
  j["bounds"] = {{"u", {grid.u_min, grid.u_max}}, {"v", {grid.v_min, grid.v_max}}};
  j["resolution"] = {grid.u_res, grid.v_res};
  j["rows"] = grid.u_res * grid.v_res;
  return j;
}

PointFn model_energy_fn(const model::NldModel& model) {
  return [&model](std::span<const double> z) { return model.energy(z, false); };
}

VectorFn model_drift_fn(const model::NldModel& model) {
  return [&model](std::span<const double> z, std::span<double> out) {
    const std::size_t d = model.latent_dim();
    std::vector<double> state(model.state_dim(), 0.0), drift(model.state_dim());
    std::copy(z.begin(), z.end(), state.begin());
    model.prior_drift(state, 0.0, drift);
    const std::size_t offset = model.mode() == model::Mode::Underdamped ? d : 0;
    std::copy(drift.begin() + static_cast<std::ptrdiff_t>(offset),
              drift.begin() + static_cast<std::ptrdiff_t>(offset + d), out.begin());
  };
}

void write_segmentation_csv(std::span<const int> predicted, std::span<const int> truth, std::ostream& csv) {
  if (!truth.empty() && truth.size() != predicted.size()) {
    throw Error(ErrorCode::LengthMismatch, "true labels differ in length from predictions");
  }
  csv << "step,predicted_label,true_label\n";
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    csv << k << ',' << predicted[k] << ',';
    if (!truth.empty()) csv << truth[k];
    csv << '\n';
  }
}

}  // namespace nld::analysis
