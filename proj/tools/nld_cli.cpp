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

// nld: command-line front end over the C API.
//
//   nld generate --experiment 1 --sequences 200 --length 200 --seed 1 --out data/
//   nld train    --config run.json --dataset data/ --out runs/a
//   nld analyze  --checkpoint runs/a
//   nld segment  --checkpoint runs/a --dataset test/ --out runs/a/segments
//   nld export   --checkpoint runs/a --plane minima --out runs/a/plane.csv
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nld/nld.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CliFailure {
  int exit_code;
  std::string message;
};

int exit_code_for(nld_status status) {
  switch (status) {
    case NLD_OK: return kExitOk;
    case NLD_ERR_CONFIG:
    case NLD_ERR_INVALID_ARGUMENT: return kExitUsage;
    default: return kExitRuntime;
  }
}

void check(nld_status status) {
  if (status != NLD_OK) throw CliFailure{exit_code_for(status), nld_last_error()};
}

[[noreturn]] void usage_error(const std::string& message) { throw CliFailure{kExitUsage, message}; }

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using DatasetPtr = std::unique_ptr<nld_dataset, Deleter<nld_dataset, nld_dataset_free>>;
using ModelPtr = std::unique_ptr<nld_model, Deleter<nld_model, nld_model_free>>;
using ReportPtr = std::unique_ptr<nld_report, Deleter<nld_report, nld_report_free>>;

std::string take_string(char* s) {
  std::string out(s);
  nld_string_free(s);
  return out;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// FNV-1a over the compact dump of a JSON value (keys are sorted by nlohmann).
std::string config_hash(const json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) usage_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    usage_error(path.string() + " is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliFailure{kExitRuntime, "cannot write " + path.string()};
  out << text;
}

fs::path checkpoint_file(const fs::path& path) {
  return fs::is_directory(path) ? path / "checkpoint.json" : path;
}

ModelPtr load_model(const fs::path& path) {
  nld_model* m = nullptr;
  check(nld_model_load(checkpoint_file(path).string().c_str(), &m));
  return ModelPtr(m);
}

DatasetPtr load_dataset(const fs::path& path) {
  nld_dataset* d = nullptr;
  check(nld_dataset_load(path.string().c_str(), &d));
  return DatasetPtr(d);
}

json analysis_options(std::uint64_t seed, std::size_t n_starts) {
  return json{{"seed", seed}, {"n_starts", n_starts}};
}

ReportPtr run_analysis(const nld_model* model, const json& options) {
  nld_report* r = nullptr;
  check(nld_analyze(model, options.dump().c_str(), &r));
  return ReportPtr(r);
}

json report_json(const nld_report* report) {
  char* text = nullptr;
  check(nld_report_json(report, &text));
  return json::parse(take_string(text));
}

std::vector<double> report_weights(const nld_report* report, int which) {
  std::vector<double> w(nld_report_num_minima(report));
  nld_report_weights(report, which, w.data(), w.size());
  return w;
}

json manifest(const std::string& command, const json& config, std::uint64_t seed, const json& artifacts,
              const std::string& started) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["config_hash"] = config_hash(config);
  m["seed"] = seed;
  m["artifacts"] = artifacts;
  m["timestamps"] = {{"started", started}, {"finished", timestamp()}};
  m["versions"] = {{"nld", nld_version()}, {"manifest", 1}};
  return m;
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  int experiment = 1;
  std::size_t sequences = 200;
  std::size_t length = 200;
  std::uint64_t seed = 0;
  std::uint64_t emission_seed = 0;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  const std::string started = timestamp();
  nld_dataset* raw = nullptr;
  check(nld_dataset_generate(a.experiment, a.sequences, a.length, a.emission_seed, a.seed, &raw));
  DatasetPtr ds(raw);
  check(nld_dataset_save(ds.get(), a.out.c_str()));
  const json config{{"experiment", a.experiment},
                    {"sequences", a.sequences},
                    {"length", a.length},
                    {"emission_seed", a.emission_seed}};
  const json artifacts{{"header", "header.json"}, {"dataset", "dataset.jsonl"}};
  write_text(fs::path(a.out) / "manifest.json",
             manifest("generate", config, a.seed, artifacts, started).dump(2) + "\n");
  std::cout << "wrote " << a.sequences << " sequences of length " << a.length << " to " << a.out << "\n";
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string dataset;
  std::string out;
  std::string mode;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
};

int train_one(const json& config, const std::string& dataset_path, const fs::path& out_dir) {
  const std::string started = timestamp();
  fs::create_directories(out_dir);
  DatasetPtr ds = load_dataset(dataset_path);
  if (nld_dataset_size(ds.get()) == 0) usage_error("dataset " + dataset_path + " is empty");
  nld_model* raw = nullptr;
  check(nld_model_create(config.dump().c_str(), &raw));
  ModelPtr model(raw);
  const fs::path loss = out_dir / "loss.csv";
  const fs::path checkpoint = out_dir / "checkpoint.json";
  check(nld_model_train(model.get(), ds.get(), loss.string().c_str()));
  check(nld_model_save(model.get(), checkpoint.string().c_str(), nullptr));

  char* info = nullptr;
  check(nld_model_info(model.get(), &info));
  const json resolved = json::parse(take_string(info)).at("config");
  const json artifacts{{"dataset", fs::absolute(dataset_path).string()},
                       {"checkpoint", "checkpoint.json"},
                       {"loss_history", "loss.csv"}};
  write_text(out_dir / "manifest.json",
             manifest("train", resolved, resolved.value("seed", std::uint64_t{0}), artifacts, started).dump(2) +
                 "\n");
  std::cout << "trained " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const TrainArgs& a) {
  json config = read_json_file(a.config);
  if (!config.is_object()) usage_error("config must be a JSON object");
  if (!a.mode.empty()) config["mode"] = a.mode;
  if (a.seeds.size() <= 1) {
    if (!a.seeds.empty()) config["seed"] = a.seeds.front();
    return train_one(config, a.dataset, a.out);
  }

  // One child process per seed, at most `jobs` at a time, each in its own directory.
  std::size_t running = 0;
  int worst = kExitOk;
  auto reap = [&] {
    int status = 0;
    if (::wait(&status) > 0) {
      --running;
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : kExitRuntime;
      worst = std::max(worst, code);
    }
  };
  for (std::uint64_t seed : a.seeds) {
    while (running >= std::max<std::size_t>(1, a.jobs)) reap();
    json seeded = config;
    seeded["seed"] = seed;
    const fs::path dir = fs::path(a.out) / ("seed_" + std::to_string(seed));
    std::cout.flush();
    const pid_t pid = ::fork();
    if (pid < 0) throw CliFailure{kExitRuntime, "fork failed"};
    if (pid == 0) {
      int code = kExitRuntime;
      try {
        code = train_one(seeded, a.dataset, dir);
      } catch (const CliFailure& f) {
        std::cerr << "error (seed " << seed << "): " << f.message << "\n";
        code = f.exit_code;
      }
      std::cout.flush();
      std::_Exit(code);
    }
    ++running;
  }
  while (running > 0) reap();
  return worst;
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeArgs {
  std::string checkpoint;
  std::string out;
  std::string rank_by;
  std::string dataset;
  std::vector<double> target;
  std::uint64_t seed = 0;
  std::size_t n_starts = 200;
};

std::vector<double> ranking_target(const AnalyzeArgs& a) {
  if (!a.target.empty()) return a.target;
  if (a.dataset.empty()) usage_error("--rank-by needs --target or --dataset");
  const fs::path dir = fs::is_directory(a.dataset) ? fs::path(a.dataset) : fs::path(a.dataset).parent_path();
  const json header = read_json_file(dir / "header.json");
  if (!header.contains("stationary")) usage_error("dataset header has no stationary distribution");
  return header.at("stationary").get<std::vector<double>>();
}

double l1_or_inf(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) return std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s;
}

int cmd_rank(const AnalyzeArgs& a) {
  if (a.rank_by != "second-order") usage_error("--rank-by accepts only second-order");
  if (!fs::is_directory(a.checkpoint)) usage_error("--rank-by needs a directory of checkpoints");
  const std::vector<double> target = ranking_target(a);
  std::vector<fs::path> checkpoints;
  for (const auto& entry : fs::recursive_directory_iterator(a.checkpoint)) {
    if (entry.is_regular_file() && entry.path().filename() == "checkpoint.json") checkpoints.push_back(entry.path());
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  if (checkpoints.empty()) usage_error("no checkpoint.json under " + a.checkpoint);

  struct Row {
    std::string path;
    std::size_t n_minima = 0;
    double l1_second = 0, l1_zeroth = 0, l1_sampling = 0;
  };
  std::vector<Row> rows;
  for (const auto& path : checkpoints) {
    ModelPtr model = load_model(path);
    ReportPtr report = run_analysis(model.get(), analysis_options(a.seed, a.n_starts));
    rows.push_back(Row{fs::relative(path, a.checkpoint).string(), nld_report_num_minima(report.get()),
                       l1_or_inf(report_weights(report.get(), 2), target),
                       l1_or_inf(report_weights(report.get(), 1), target),
                       l1_or_inf(report_weights(report.get(), 0), target)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) { return x.l1_second < y.l1_second; });

  std::ostringstream csv;
  csv << std::setprecision(10) << "rank,checkpoint,n_minima,l1_second,l1_zeroth,l1_sampling\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv << i + 1 << ',' << rows[i].path << ',' << rows[i].n_minima << ',' << rows[i].l1_second << ','
        << rows[i].l1_zeroth << ',' << rows[i].l1_sampling << '\n';
  }
  const fs::path out = a.out.empty() ? fs::path(a.checkpoint) / "ranking.csv" : fs::path(a.out);
  write_text(out, csv.str());
  std::cout << csv.str();
  return kExitOk;
}

int cmd_analyze(const AnalyzeArgs& a) {
  if (!a.rank_by.empty()) return cmd_rank(a);
  const std::string started = timestamp();
  ModelPtr model = load_model(a.checkpoint);
  const json options = analysis_options(a.seed, a.n_starts);
  ReportPtr report = run_analysis(model.get(), options);
  const json rep = report_json(report.get());
  const fs::path base = fs::is_directory(a.checkpoint) ? fs::path(a.checkpoint) : fs::path(a.checkpoint).parent_path();
  const fs::path out = a.out.empty() ? base / "report.json" : fs::path(a.out);
  write_text(out, rep.dump(2) + "\n");
  const json artifacts{{"checkpoint", fs::absolute(checkpoint_file(a.checkpoint)).string()},
                       {"report", out.filename().string()}};
  write_text(fs::path(out.string() + ".manifest.json"),
             manifest("analyze", options, a.seed, artifacts, started).dump(2) + "\n");
  std::cout << "minima: " << rep.at("n_minima") << "\n"
            << "weights_sampling: " << rep.at("weights_sampling").dump() << "\n"
            << "weights_zeroth:   " << rep.at("weights_zeroth").dump() << "\n"
            << "weights_second:   " << rep.at("weights_second").dump() << "\n";
  return kExitOk;
}

// ---- segment ----------------------------------------------------------------

struct SegmentArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t n_starts = 200;
};

int cmd_segment(const SegmentArgs& a) {
  const std::string started = timestamp();
  DatasetPtr ds = load_dataset(a.dataset);
  if (nld_dataset_size(ds.get()) == 0) usage_error("dataset " + a.dataset + " is empty");
  ModelPtr model = load_model(a.checkpoint);
  const json options = analysis_options(a.seed, a.n_starts);
  ReportPtr report = run_analysis(model.get(), options);
  char* text = nullptr;
  check(nld_segment(model.get(), report.get(), ds.get(), a.out.c_str(), nullptr, &text));
  const json summary = json::parse(take_string(text));
  json artifacts{{"summary", "summary.json"}, {"sequences", summary.at("files")}};
  write_text(fs::path(a.out) / "manifest.json",
             manifest("segment", options, a.seed, artifacts, started).dump(2) + "\n");
  std::cout << "sequences: " << summary.at("n_sequences") << ", minima: " << summary.at("n_minima") << "\n";
  if (summary.at("mean_accuracy").is_null()) {
    std::cout << "accuracy: n/a (no ground-truth states)\n";
  } else {
    std::cout << std::fixed << std::setprecision(4)
              << "accuracy: " << summary.at("mean_accuracy").get<double>() << " +/- "
              << summary.at("std_accuracy").get<double>() << "\n";
  }
  return kExitOk;
}

// ---- export -----------------------------------------------------------------

struct ExportArgs {
  std::string checkpoint;
  std::string out;
  std::string plane;
  bool quiver = false;
  std::vector<double> bounds;
  std::vector<std::size_t> resolution{50, 50};
  std::uint64_t seed = 0;
  std::size_t n_starts = 200;
};

int cmd_export(const ExportArgs& a) {
  const std::string started = timestamp();
  ModelPtr model = load_model(a.checkpoint);
  json options{{"kind", a.quiver ? "drift" : "energy"}};
  if (!a.plane.empty()) options["plane"] = a.plane;
  if (!a.bounds.empty()) options["bounds"] = a.bounds;
  if (a.resolution.size() == 1) {
    options["resolution"] = {a.resolution[0], a.resolution[0]};
  } else {
    options["resolution"] = a.resolution;
  }
  ReportPtr report;
  if (a.plane != "native") {
    nld_report* r = nullptr;
    const nld_status s = nld_analyze(model.get(), analysis_options(a.seed, a.n_starts).dump().c_str(), &r);
    if (s == NLD_OK) {
      report.reset(r);
    } else if (a.plane == "minima") {
      check(s);
    }
  }
  check(nld_export_landscape(model.get(), report.get(), options.dump().c_str(), a.out.c_str()));
  const fs::path out(a.out);
  const json artifacts{{"grid", out.filename().string()}, {"sidecar", out.filename().string() + ".json"}};
  write_text(fs::path(a.out + ".manifest.json"), manifest("export", options, a.seed, artifacts, started).dump(2) + "\n");
  std::cout << "wrote " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural Langevin Dynamics: train latent energy landscapes on sequence data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(nld_version()));

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Sample a synthetic hidden-Markov dataset");
  g->add_option("--experiment", gen.experiment, "1: uniform chain, 2: reversible chain (0.45, 0.35, 0.20)")
      ->check(CLI::IsMember({1, 2}));
  g->add_option("--sequences", gen.sequences, "Number of sequences")->check(CLI::PositiveNumber);
  g->add_option("--length", gen.length, "Steps per sequence")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Seed of the walks and emission noise");
  g->add_option("--emission-seed", gen.emission_seed, "Seed of the emission means (shared by train and test sets)");
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Fit a model to a dataset");
  t->add_option("--config", tr.config, "Training config JSON")->required()->check(CLI::ExistingFile);
  t->add_option("--dataset", tr.dataset, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--mode", tr.mode, "overdamped | underdamped | nsde-baseline (overrides the config)");
  t->add_option("--seed", tr.seeds, "Seed(s); several seeds train into <out>/seed_<s>")->delimiter(',');
  t->add_option("--jobs", tr.jobs, "Parallel training processes for multiple seeds")->check(CLI::PositiveNumber);

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Minima and stationary weights of a trained energy");
  a->add_option("--checkpoint", an.checkpoint, "Checkpoint file or run directory")->required();
  a->add_option("--out", an.out, "Report path (default <run>/report.json; ranking.csv with --rank-by)");
  a->add_option("--rank-by", an.rank_by, "Rank every checkpoint under a directory; only 'second-order'");
  a->add_option("--dataset", an.dataset, "Dataset whose stationary distribution is the ranking target");
  a->add_option("--target", an.target, "Explicit ranking target distribution")->delimiter(',');
  a->add_option("--seed", an.seed, "Seed of the stationary sampler");
  a->add_option("--n-starts", an.n_starts, "Gradient-flow starts for the minimum search");

  SegmentArgs sg;
  auto* s = app.add_subcommand("segment", "Label every time step with its energy well");
  s->add_option("--checkpoint", sg.checkpoint, "Checkpoint file or run directory")->required();
  s->add_option("--dataset", sg.dataset, "Dataset directory")->required();
  s->add_option("--out", sg.out, "Output directory for per-sequence CSVs")->required();
  s->add_option("--seed", sg.seed, "Seed of the stationary sampler");
  s->add_option("--n-starts", sg.n_starts, "Gradient-flow starts for the minimum search");

  ExportArgs ex;
  auto* e = app.add_subcommand("export", "Write an energy or drift grid with a JSON sidecar");
  e->add_option("--checkpoint", ex.checkpoint, "Checkpoint file or run directory")->required();
  e->add_option("--out", ex.out, "CSV path")->required();
  e->add_option("--plane", ex.plane, "native (2-D latents) or minima")->check(CLI::IsMember({"native", "minima"}));
  e->add_flag("--quiver", ex.quiver, "Export projected drift vectors instead of energies");
  e->add_option("--bounds", ex.bounds, "u_min,u_max,v_min,v_max")->delimiter(',')->expected(4);
  e->add_option("--res", ex.resolution, "Grid resolution: n or nu,nv")->delimiter(',');
  e->add_option("--seed", ex.seed, "Seed of the stationary sampler");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*a) return cmd_analyze(an);
    if (*s) return cmd_segment(sg);
    if (*e) return cmd_export(ex);
  } catch (const CliFailure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& ex_) {
    std::cerr << "error: " << ex_.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
