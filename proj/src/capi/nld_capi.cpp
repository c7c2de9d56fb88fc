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

#include "nld/nld.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "analysis/export.hpp"
#include "analysis/landscape.hpp"
#include "analysis/segment.hpp"
#include "common/error.hpp"
#include "data/markov.hpp"
#include "model/train.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

struct nld_dataset {
  nld::data::SequenceDataset data;
};

struct nld_model {
  nld::model::NldModel model;
  nld::model::RunConfig run;
};

struct nld_report {
  nld::analysis::WellReport report;
  double merge_tol = 1e-2;
  nld::analysis::FlowOptions flow;
};

namespace {

thread_local std::string g_last_error;

nld_status to_status(nld::ErrorCode code) {
  using nld::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return NLD_ERR_INVALID_ARGUMENT;
    case ErrorCode::ShapeMismatch: return NLD_ERR_SHAPE_MISMATCH;
    case ErrorCode::NonScalarRoot: return NLD_ERR_NON_SCALAR_ROOT;
    case ErrorCode::LengthMismatch: return NLD_ERR_LENGTH_MISMATCH;
    case ErrorCode::NotConverged: return NLD_ERR_NOT_CONVERGED;
    case ErrorCode::CholeskyFailure: return NLD_ERR_CHOLESKY_FAILURE;
    case ErrorCode::NonFinite: return NLD_ERR_NON_FINITE;
    case ErrorCode::SingularDiffusion: return NLD_ERR_SINGULAR_DIFFUSION;
    case ErrorCode::TooManySkips: return NLD_ERR_TOO_MANY_SKIPS;
    case ErrorCode::NonPositiveDefiniteHessian: return NLD_ERR_NON_PD_HESSIAN;
    case ErrorCode::UnassignedSample: return NLD_ERR_UNASSIGNED_SAMPLE;
    case ErrorCode::DegeneratePoints: return NLD_ERR_DEGENERATE_POINTS;
    case ErrorCode::Config: return NLD_ERR_CONFIG;
    case ErrorCode::Io: return NLD_ERR_IO;
  }
  return NLD_ERR_INTERNAL;
}

template <class F>
nld_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return NLD_OK;
  } catch (const nld::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("Config: ") + e.what();
    return NLD_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NLD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return NLD_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw nld::Error(nld::ErrorCode::InvalidArgument, what);
}

json parse_options(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw nld::Error(nld::ErrorCode::Config, "options must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw nld::Error(nld::ErrorCode::Config, std::string("options are not valid JSON: ") + e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nld::analysis::FlowOptions flow_options(const json& o) {
  nld::analysis::FlowOptions flow;
  flow.step = o.value("flow_step", flow.step);
  flow.tolerance = o.value("flow_tol", flow.tolerance);
  flow.max_iters = o.value("flow_max_iters", flow.max_iters);
  return flow;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw nld::Error(nld::ErrorCode::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

extern "C" {

const char* nld_last_error(void) { return g_last_error.c_str(); }

const char* nld_status_name(nld_status status) {
  switch (status) {
    case NLD_OK: return "OK";
    case NLD_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case NLD_ERR_SHAPE_MISMATCH: return "ShapeMismatch";
    case NLD_ERR_NON_SCALAR_ROOT: return "NonScalarRoot";
    case NLD_ERR_LENGTH_MISMATCH: return "LengthMismatch";
    case NLD_ERR_NOT_CONVERGED: return "NotConverged";
    case NLD_ERR_CHOLESKY_FAILURE: return "CholeskyFailure";
    case NLD_ERR_NON_FINITE: return "NonFinite";
    case NLD_ERR_SINGULAR_DIFFUSION: return "SingularDiffusion";
    case NLD_ERR_TOO_MANY_SKIPS: return "TooManySkips";
    case NLD_ERR_NON_PD_HESSIAN: return "NonPositiveDefiniteHessian";
    case NLD_ERR_UNASSIGNED_SAMPLE: return "UnassignedSample";
    case NLD_ERR_DEGENERATE_POINTS: return "DegeneratePoints";
    case NLD_ERR_CONFIG: return "Config";
    case NLD_ERR_IO: return "Io";
    case NLD_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

const char* nld_version(void) { return "1.0.0"; }

void nld_string_free(char* s) { delete[] s; }

nld_status nld_dataset_generate(int experiment, size_t n_sequences, size_t length, uint64_t emission_seed,
                                uint64_t seed, nld_dataset** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    const auto spec = nld::data::experiment_config(experiment, emission_seed);
    auto* ds = new nld_dataset{nld::data::generate_dataset(spec, n_sequences, length, seed)};
    ds->data.experiment = experiment;
    *out = ds;
  });
}

nld_status nld_dataset_load(const char* path, nld_dataset** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new nld_dataset{nld::data::read_dataset(path)};
  });
}

nld_status nld_dataset_save(const nld_dataset* dataset, const char* dir) {
  return guarded([&] {
    require(dataset != nullptr && dir != nullptr, "null argument");
    nld::data::write_dataset(dataset->data, dir);
  });
}

size_t nld_dataset_size(const nld_dataset* dataset) { return dataset ? dataset->data.sequences.size() : 0; }

int nld_dataset_has_states(const nld_dataset* dataset) { return dataset && dataset->data.has_states() ? 1 : 0; }

void nld_dataset_free(nld_dataset* dataset) { delete dataset; }

nld_status nld_model_create(const char* config_json, nld_model** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    const auto run = nld::model::parse_run_config(parse_options(config_json));
    *out = new nld_model{nld::model::NldModel(run.model, run.train.seed), run};
  });
}

nld_status nld_model_load(const char* checkpoint_path, nld_model** out) {
  return guarded([&] {
    require(checkpoint_path != nullptr && out != nullptr, "null argument");
    std::ifstream in(checkpoint_path, std::ios::binary);
    if (!in) throw nld::Error(nld::ErrorCode::Io, std::string("cannot open checkpoint ") + checkpoint_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw nld::Error(nld::ErrorCode::Io, std::string("checkpoint is not valid JSON: ") + e.what());
    }
    auto model = nld::model::model_from_json(j);
    nld::model::RunConfig run;
    if (j.contains("train")) run = nld::model::parse_run_config(j.at("train"));
    run.model = model.config();
    *out = new nld_model{std::move(model), run};
  });
}

nld_status nld_model_save(const nld_model* model, const char* checkpoint_path, const char* extra_json) {
  return guarded([&] {
    require(model != nullptr && checkpoint_path != nullptr, "null argument");
    json extra = parse_options(extra_json);
    extra["train"] = nld::model::to_json(model->run);
    nld::model::save_checkpoint(model->model, checkpoint_path, extra);
  });
}

void nld_model_free(nld_model* model) { delete model; }

nld_status nld_model_info(const nld_model* model, char** out_json) {
  return guarded([&] {
    require(model != nullptr && out_json != nullptr, "null argument");
    const auto& m = model->model;
    json j;
    j["mode"] = nld::model::to_string(m.mode());
    j["latent_dim"] = m.latent_dim();
    j["state_dim"] = m.state_dim();
    j["obs_dim"] = m.config().obs_dim;
    j["gamma"] = m.gamma();
    j["beta"] = m.beta();
    j["mass"] = m.mass();
    j["parameters"] = m.params().scalar_count();
    j["config"] = nld::model::to_json(model->run);
    *out_json = copy_string(j.dump());
  });
}

nld_status nld_model_train(nld_model* model, const nld_dataset* dataset, const char* history_csv_path) {
  return guarded([&] {
    require(model != nullptr && dataset != nullptr, "null argument");
    nld::model::TrainHistory history;
    std::ofstream csv;
    if (history_csv_path != nullptr) csv = open_output(history_csv_path);
    try {
      history = nld::model::train(model->model, dataset->data, model->run.train);
    } catch (...) {
      if (csv.is_open()) history.write_csv(csv);
      throw;
    }
    if (csv.is_open()) history.write_csv(csv);
  });
}

nld_status nld_model_shift_energy(nld_model* model, double delta) {
  return guarded([&] {
    require(model != nullptr, "null model");
    model->model.shift_energy(delta);
  });
}

nld_status nld_model_prior_drift(const nld_model* model, const double* state, size_t state_dim, double t,
                                 double* out_drift) {
  return guarded([&] {
    require(model != nullptr && state != nullptr && out_drift != nullptr, "null argument");
    model->model.prior_drift(std::span<const double>(state, state_dim), t, std::span<double>(out_drift, state_dim));
  });
}

nld_status nld_model_energy(const nld_model* model, const double* z, size_t dim, double* out_energy) {
  return guarded([&] {
    require(model != nullptr && z != nullptr && out_energy != nullptr, "null argument");
    if (dim != model->model.latent_dim()) throw nld::Error(nld::ErrorCode::ShapeMismatch, "energy input dimension");
    *out_energy = model->model.energy(std::span<const double>(z, dim), false);
  });
}

nld_status nld_analyze(const nld_model* model, const char* options_json, nld_report** out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "null argument");
    const json o = parse_options(options_json);
    nld::analysis::AnalysisOptions opts;
    opts.n_starts = o.value("n_starts", opts.n_starts);
    opts.merge_tol = o.value("merge_tol", opts.merge_tol);
    opts.flow = flow_options(o);
    opts.sampling.n_samples = o.value("n_samples", opts.sampling.n_samples);
    opts.sampling.burn_in = o.value("burn_in", opts.sampling.burn_in);
    opts.sampling.thin = o.value("thin", opts.sampling.thin);
    opts.sampling.dt = o.value("dt", model->run.train.dt);
    opts.sampling.seed = o.value("seed", std::uint64_t{0});
    auto* report = new nld_report{nld::analysis::analyze(model->model, opts), opts.merge_tol, opts.flow};
    *out = report;
  });
}

nld_status nld_report_json(const nld_report* report, char** out_json) {
  return guarded([&] {
    require(report != nullptr && out_json != nullptr, "null argument");
    json j = report->report.to_json();
    j["merge_tol"] = report->merge_tol;
    *out_json = copy_string(j.dump(2));
  });
}

size_t nld_report_num_minima(const nld_report* report) { return report ? report->report.minima.size() : 0; }

size_t nld_report_weights(const nld_report* report, int which, double* out, size_t capacity) {
  if (report == nullptr) return 0;
  const std::vector<double>* w = nullptr;
  switch (which) {
    case 0: w = &report->report.weights_sampling; break;
    case 1: w = &report->report.weights_zeroth; break;
    case 2: w = &report->report.weights_second; break;
    default: return 0;
  }
  for (size_t i = 0; i < w->size() && i < capacity && out != nullptr; ++i) out[i] = (*w)[i];
  return w->size();
}

void nld_report_free(nld_report* report) { delete report; }

nld_status nld_segment(const nld_model* model, const nld_report* report, const nld_dataset* dataset,
                       const char* out_dir, const char* options_json, char** out_summary_json) {
  return guarded([&] {
    require(model != nullptr && report != nullptr && dataset != nullptr, "null argument");
    if (dataset->data.sequences.empty()) throw nld::Error(nld::ErrorCode::InvalidArgument, "dataset is empty");
    const json o = parse_options(options_json);
    const double dt = o.value("dt", model->run.train.dt);
    const double merge_tol = o.value("merge_tol", report->merge_tol);
    const auto flow = o.contains("flow_step") || o.contains("flow_tol") ? flow_options(o) : report->flow;
    const bool has_truth = dataset->data.has_states();
    const auto& minima = report->report.minima;

    json summary;
    summary["n_sequences"] = dataset->data.sequences.size();
    summary["n_minima"] = minima.size();
    json accuracies = json::array();
    json files = json::array();
    std::size_t unassigned = 0;
    std::vector<double> accs;
    for (std::size_t i = 0; i < dataset->data.sequences.size(); ++i) {
      const auto& seq = dataset->data.sequences[i];
      const auto seg = nld::analysis::segment_sequence(model->model, seq.observations, minima, dt, merge_tol, flow);
      unassigned += seg.unassigned;
      if (out_dir != nullptr) {
        const fs::path path = fs::path(out_dir) / ("seq_" + std::to_string(i) + ".csv");
        auto csv = open_output(path);
        nld::analysis::write_segmentation_csv(seg.labels, has_truth ? std::span<const int>(seq.states)
                                                                    : std::span<const int>(), csv);
        files.push_back(path.filename().string());
      }
      if (has_truth && !seg.labels.empty()) {
        std::size_t n_states = minima.size();
        for (int s : seq.states) n_states = std::max<std::size_t>(n_states, static_cast<std::size_t>(s) + 1);
        const double acc = nld::analysis::best_permutation_accuracy(seg.labels, seq.states, n_states).accuracy;
        accs.push_back(acc);
        accuracies.push_back(acc);
      } else {
        accuracies.push_back(nullptr);
      }
    }
    summary["accuracies"] = accuracies;
    summary["unassigned_steps"] = unassigned;
    summary["files"] = files;
    if (accs.empty()) {
      summary["mean_accuracy"] = nullptr;
      summary["std_accuracy"] = nullptr;
    } else {
      double mean = 0.0;
      for (double a : accs) mean += a;
      mean /= static_cast<double>(accs.size());
      double var = 0.0;
      for (double a : accs) var += (a - mean) * (a - mean);
      var = accs.size() > 1 ? var / static_cast<double>(accs.size() - 1) : 0.0;
      summary["mean_accuracy"] = mean;
      summary["std_accuracy"] = std::sqrt(var);
    }
    if (out_dir != nullptr) {
      auto out = open_output(fs::path(out_dir) / "summary.json");
      out << summary.dump(2) << '\n';
    }
    if (out_summary_json != nullptr) *out_summary_json = copy_string(summary.dump());
  });
}

nld_status nld_export_landscape(const nld_model* model, const nld_report* report, const char* options_json,
                                const char* csv_path) {
  return guarded([&] {
    require(model != nullptr && csv_path != nullptr, "null argument");
    const json o = parse_options(options_json);
    const std::string kind = o.value("kind", std::string("energy"));
    if (kind != "energy" && kind != "drift") throw nld::Error(nld::ErrorCode::Config, "kind must be energy or drift");
    const std::string plane_name =
        o.value("plane", std::string(model->model.latent_dim() == 2 ? "native" : "minima"));

    nld::analysis::Plane plane;
    if (plane_name == "native") {
      if (model->model.latent_dim() != 2) {
        throw nld::Error(nld::ErrorCode::Config, "the native plane needs a 2-D latent space");
      }
      plane = nld::analysis::native_plane();
    } else if (plane_name == "minima") {
      require(report != nullptr, "the minima plane needs an analysis report");
      const auto& minima = report->report.minima;
      if (minima.size() < 3) throw nld::Error(nld::ErrorCode::DegeneratePoints, "fewer than three minima");
      plane = nld::analysis::plane_through_points(minima[0].point, minima[1].point, minima[2].point);
    } else {
      throw nld::Error(nld::ErrorCode::Config, "plane must be native or minima");
    }

    nld::analysis::GridSpec grid;
    if (o.contains("bounds")) {
      const auto b = o.at("bounds").get<std::vector<double>>();
      if (b.size() != 4) throw nld::Error(nld::ErrorCode::Config, "bounds needs four numbers");
      grid.u_min = b[0];
      grid.u_max = b[1];
      grid.v_min = b[2];
      grid.v_max = b[3];
    } else if (report != nullptr && !report->report.minima.empty()) {
      double u_lo = 1e300, u_hi = -1e300, v_lo = 1e300, v_hi = -1e300;
      for (const auto& m : report->report.minima) {
        std::vector<double> rel(m.point.size());
        for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = m.point[i] - plane.origin[i];
        const auto [u, v] = plane.project(rel);
        u_lo = std::min(u_lo, u);
        u_hi = std::max(u_hi, u);
        v_lo = std::min(v_lo, v);
        v_hi = std::max(v_hi, v);
      }
      const double margin = std::max({1.0, 0.5 * (u_hi - u_lo), 0.5 * (v_hi - v_lo)});
      grid = {u_lo - margin, u_hi + margin, v_lo - margin, v_hi + margin};
    } else {
      grid = {-3.0, 3.0, -3.0, 3.0};
    }
    if (o.contains("resolution")) {
      const auto r = o.at("resolution").get<std::vector<std::size_t>>();
      if (r.size() != 2) throw nld::Error(nld::ErrorCode::Config, "resolution needs two integers");
      grid.u_res = r[0];
      grid.v_res = r[1];
    }
    grid.validate();

    const fs::path path(csv_path);
    auto csv = open_output(path);
    nld::analysis::ExportKind export_kind;
    if (kind == "energy") {
      nld::analysis::export_energy_grid(nld::analysis::model_energy_fn(model->model), plane, grid, csv);
      export_kind = nld::analysis::ExportKind::Energy;
    } else {
      nld::analysis::export_drift_grid(nld::analysis::model_drift_fn(model->model), plane, grid, csv);
      export_kind = nld::analysis::ExportKind::Drift;
    }
    json sidecar = nld::analysis::landscape_sidecar(export_kind, plane, grid);
    sidecar["plane_name"] = plane_name;
    sidecar["csv"] = path.filename().string();
    auto side = open_output(fs::path(path.string() + ".json"));
    side << sidecar.dump(2) << '\n';
  });
}

}  // extern "C"
