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

#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "model/model.hpp"

namespace nld::analysis {

/// Affine 2-D chart origin + u b1 + v b2 with orthonormal b1, b2.
struct Plane {
  std::vector<double> origin;
  std::vector<double> b1;
  std::vector<double> b2;

  std::vector<double> point(double u, double v) const;
  /// Orthogonal projection of a displacement onto (b1, b2).
  std::pair<double, double> project(std::span<const double> vector) const;
};

/// Origin m1 and Gram-Schmidt on (m2 - m1, m3 - m1). Throws DegeneratePoints
/// when the points are collinear within 1e-10.
Plane plane_through_points(std::span<const double> m1, std::span<const double> m2, std::span<const double> m3);

/// The coordinate plane of a 2-D latent space.
Plane native_plane();

struct GridSpec {
  double u_min = -1.0, u_max = 1.0;
  double v_min = -1.0, v_max = 1.0;
  std::size_t u_res = 50, v_res = 50;

  void validate() const;
};

enum class ExportKind { Energy, Drift };

using PointFn = std::function<double(std::span<const double>)>;
using VectorFn = std::function<void(std::span<const double>, std::span<double>)>;

/// Rows (u, v, E) with u varying slowest.
void export_energy_grid(const PointFn& energy, const Plane& plane, const GridSpec& grid, std::ostream& csv);
/// Rows (u, v, du, dv): the field at each grid point projected onto the plane.
void export_drift_grid(const VectorFn& drift, const Plane& plane, const GridSpec& grid, std::ostream& csv);

nlohmann::json landscape_sidecar(ExportKind kind, const Plane& plane, const GridSpec& grid);

/// Position-space fields of a model: the bias-free energy, and the prior
/// drift on positions (for underdamped models the momentum drift at p = 0,
/// i.e. the force -grad E).
PointFn model_energy_fn(const model::NldModel& model);
VectorFn model_drift_fn(const model::NldModel& model);

/// Segmentation CSV: step,predicted_label,true_label (true_label blank when
/// unknown).
void write_segmentation_csv(std::span<const int> predicted, std::span<const int> truth, std::ostream& csv);

}  // namespace nld::analysis
