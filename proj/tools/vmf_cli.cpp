// vmf: generate synthetic trajectories, train forecasters, evaluate them
// against the naive baselines and plot per-step errors.
//
// Exit codes: 0 ok, 2 bad config or malformed input, 3 unusable data,
// 4 checkpoint/data incompatibility.

#include "vmf/baselines.hpp"
#include "vmf/checkpoint.hpp"
#include "vmf/diffusion.hpp"
#include "vmf/errors.hpp"
#include "vmf/plot.hpp"
#include "vmf/report.hpp"
#include "vmf/train_config.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vmf;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCompat = 4;

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

std::string readFile(const fs::path& p, int code_on_failure) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CliError(code_on_failure, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void writeFile(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw CliError(kExitData, "cannot write " + p.string());
  out << text;
  if (!out) throw CliError(kExitData, "write failed for " + p.string());
}

// Explicit path wins; otherwise $VMF_CONFIG_DIR/<name> if it exists.
std::optional<fs::path> resolveConfig(const std::string& flag, const std::string& name) {
  if (!flag.empty()) return fs::path(flag);
  if (const char* dir = std::getenv("VMF_CONFIG_DIR")) {
    const fs::path p = fs::path(dir) / name;
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

json loadConfigJson(const std::optional<fs::path>& path) {
  if (!path) return json::object();
  try {
    return json::parse(readFile(*path, kExitConfig));
  } catch (const json::parse_error& e) {
    throw CliError(kExitConfig, path->string() + ": " + e.what());
  }
}

fs::path sibling(const fs::path& manifest, const std::string& suffix) {
  fs::path p = manifest;
  p.replace_extension(suffix);
  return p;
}

std::vector<TrajectoryRecord> loadData(const std::string& path) {
  try {
    return loadJsonl(path);
  } catch (const std::exception& e) {
    throw CliError(kExitData, e.what());
  }
}

std::vector<StateWindow> windowsFor(const std::vector<TrajectoryRecord>& records, int window,
                                    int stride, int observed, int max_gap, std::size_t limit) {
  auto windows = cleanAndSlice(records, window, stride, observed, max_gap);
  if (limit > 0 && windows.size() > limit) windows.resize(limit);
  if (windows.empty()) throw CliError(kExitData, "no valid windows");
  return windows;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> n, length;
};

int runGenerate(const GenerateArgs& a) {
  SyntheticConfig cfg;
  try {
    cfg = syntheticConfigFromJson(loadConfigJson(resolveConfig(a.config, "synthetic.json")));
    if (a.seed) cfg.seed = *a.seed;
    if (a.n) cfg.n_trajectories = *a.n;
    if (a.length) cfg.length = *a.length;
    cfg.validate();
  } catch (const ValidationError& e) {
    throw CliError(kExitConfig, e.what());
  }
  const auto records = generateSynthetic(cfg);
  if (const fs::path dir = fs::path(a.out).parent_path(); !dir.empty()) fs::create_directories(dir);
  try {
    saveJsonl(records, a.out);
  } catch (const std::exception& e) {
    throw CliError(kExitData, e.what());
  }

  std::map<std::string, std::pair<std::size_t, std::size_t>> per_class;
  std::size_t states = 0;
  for (const auto& r : records) {
    auto& [n, s] = per_class[r.class_label];
    ++n;
    s += r.states.size();
    states += r.states.size();
  }
  std::printf("wrote %zu trajectories (%zu states) to %s\n", records.size(), states, a.out.c_str());
  for (const auto& [label, ns] : per_class)
    std::printf("  %-10s %5zu trajectories %8zu states\n", label.c_str(), ns.first, ns.second);
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, config, out, model, resume;
  std::optional<int> epochs, batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::size_t limit = 0;
  int threads = 1;
};

int runTrain(const TrainArgs& a) {
  TrainConfig tc;
  std::optional<Checkpoint> resumed;
  try {
    json j = loadConfigJson(resolveConfig(a.config, "train.json"));
    if (!a.model.empty()) j["model"] = a.model;
    if (a.epochs) j["epochs"] = *a.epochs;
    if (a.batch_size) j["batch_size"] = *a.batch_size;
    if (a.lr) j["lr"] = *a.lr;
    if (a.seed) j["seed"] = *a.seed;
    tc = trainConfigFromJson(j);
  } catch (const ValidationError& e) {
    throw CliError(kExitConfig, e.what());
  }

  std::unique_ptr<Forecaster> model;
  json meta;
  if (!a.resume.empty()) {
    try {
      resumed = loadCheckpoint(a.resume);
      meta = resumed->meta;
      model = makeForecaster(meta.at("model"));
      tc.window = meta.at("window");
      tc.stride = meta.at("stride");
      tc.observed = meta.at("observed");
      tc.max_gap = meta.at("max_gap");
    } catch (const std::exception& e) {
      throw CliError(kExitConfig, "cannot resume from " + a.resume + ": " + e.what());
    }
  } else {
    model = makeForecaster(tc);
    meta = {{"model", model->configJson()}, {"window", tc.window},       {"stride", tc.stride},
            {"observed", tc.observed},      {"max_gap", tc.max_gap},     {"epochs_trained", 0},
            {"seed", tc.train.seed}};
  }

  const auto windows = windowsFor(loadData(a.data), tc.window, tc.stride, tc.observed,
                                  tc.max_gap, a.limit);
  ParameterStore initial;
  if (resumed) {
    initial = std::move(resumed->params);
  } else {
    model->initParameters(initial, windows, tc.train.seed);
  }

  TrainOptions opts = tc.train;
  // A resumed run continues with a fresh shuffle stream.
  if (initial.version() > 0) opts.seed = windowSeed(opts.seed, static_cast<std::size_t>(initial.version()));
  std::string loss_csv = "epoch,loss\n";
  const long first = meta.value("epochs_trained", 0L);
  const TrainResult result =
      train(*model, windows, std::move(initial), opts, [&](int epoch, double loss) {
        char line[64];
        std::snprintf(line, sizeof line, "%ld,%.9g\n", first + epoch + 1, loss);
        loss_csv += line;
        std::fprintf(stderr, "epoch %ld loss %.6f\n", first + epoch + 1, loss);
      });
  meta["epochs_trained"] = first + tc.train.epochs;

  if (const fs::path dir = fs::path(a.out).parent_path(); !dir.empty()) fs::create_directories(dir);
  saveCheckpoint({result.params, meta}, a.out);
  writeFile(sibling(a.out, ".loss.csv"), loss_csv);
  json effective = toJson(tc);
  effective["data"] = a.data;
  if (!a.resume.empty()) effective["resume"] = a.resume;
  writeFile(sibling(a.out, ".config.json"), effective.dump(2) + "\n");

  std::printf("trained %s on %zu windows for %d epochs\n", model->kind().c_str(), windows.size(),
              tc.train.epochs);
  if (!result.epoch_loss.empty()) std::printf("final loss %.6f\n", result.epoch_loss.back());
  std::printf("checkpoint %s\n", a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string data, out, baselines = "constant_pose,constant_velocity";
  std::vector<std::string> checkpoints;
  std::optional<int> window, observed, stride;
  std::uint64_t seed = 0;
  std::size_t limit = 0;
  int threads = 1;
};

std::vector<std::string> splitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int runEvaluate(const EvaluateArgs& a) {
  struct Loaded {
    std::string name;
    std::unique_ptr<Forecaster> model;
    ParameterStore params;
  };
  std::vector<Loaded> models;
  int window = 20, observed = 10, stride = 10, max_gap = kDefaultMaxGap;
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
    const std::string& path = a.checkpoints[i];
    try {
      Checkpoint ck = loadCheckpoint(path);
      auto model = makeForecaster(ck.meta.at("model"));
      if (i == 0) {
        window = ck.meta.at("window");
        observed = ck.meta.at("observed");
        stride = ck.meta.at("stride");
        max_gap = ck.meta.at("max_gap");
      }
      models.push_back({model->kind(), std::move(model), std::move(ck.params)});
    } catch (const CliError&) {
      throw;
    } catch (const std::exception& e) {
      throw CliError(kExitConfig, path + ": " + e.what());
    }
  }
  if (a.window) window = *a.window;
  if (a.observed) observed = *a.observed;
  if (a.stride) stride = *a.stride;
  if (observed < 2 || window <= observed || stride < 1)
    throw CliError(kExitConfig, "need 2 <= observed < window and stride >= 1");
  const int horizon = window - observed;

  // Duplicate kinds get the checkpoint file stem as their name.
  std::map<std::string, int> kind_count;
  for (const auto& m : models) ++kind_count[m.name];
  for (std::size_t i = 0; i < models.size(); ++i)
    if (kind_count[models[i].name] > 1) models[i].name = fs::path(a.checkpoints[i]).stem().string();

  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = *models[i].model;
    if (m.horizon() != horizon || m.observedSteps() != observed)
      throw CliError(kExitCompat, a.checkpoints[i] + ": model forecasts " +
                                      std::to_string(m.horizon()) + " steps from " +
                                      std::to_string(m.observedSteps()) + ", data windows have " +
                                      std::to_string(horizon) + " from " + std::to_string(observed));
  }

  const auto windows = windowsFor(loadData(a.data), window, stride, observed, max_gap, a.limit);
  std::vector<std::vector<Stated>> truth;
  std::vector<std::string> labels;
  for (const auto& w : windows) {
    truth.push_back(w.future);
    labels.push_back(w.class_label);
  }

  std::vector<std::pair<std::string, EvalReport>> reports;
  for (const auto& name : splitList(a.baselines)) {
    std::vector<std::vector<Stated>> preds;
    preds.reserve(windows.size());
    for (const auto& w : windows) {
      if (name == "constant_pose") {
        preds.push_back(constantPose(w.observed, horizon));
      } else if (name == "constant_velocity") {
        preds.push_back(constantVelocity(w.observed, horizon));
      } else {
        throw CliError(kExitConfig, "unknown baseline '" + name + "'");
      }
    }
    reports.emplace_back(name, evaluate(preds, truth, labels));
  }
  for (const auto& m : models)
    reports.emplace_back(m.name,
                         evaluate(m.model->forecast(m.params, windows, a.seed, a.threads), truth, labels));
  if (reports.empty()) throw CliError(kExitConfig, "nothing to evaluate");

  const fs::path out(a.out);
  for (const auto& [name, rep] : reports) {
    writeFile(out / (name + ".csv"), reportCsv(rep));
    writeFile(out / (name + ".json"), reportJson(rep).dump(2) + "\n");
  }
  writeFile(out / "comparison.csv", comparisonCsv(reports));
  writeFile(out / "comparison.txt", comparisonTable(reports));
  writeFile(out / "per_step.csv", perStepCsv(reports));
  const json effective = {{"data", a.data},       {"checkpoints", a.checkpoints},
                          {"baselines", splitList(a.baselines)},
                          {"window", window},     {"observed", observed},
                          {"stride", stride},     {"max_gap", max_gap},
                          {"seed", a.seed},       {"limit", a.limit},
                          {"windows", windows.size()}};
  writeFile(out / "evaluate.json", effective.dump(2) + "\n");

  std::printf("evaluated %zu windows\n%s", windows.size(), comparisonTable(reports).c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  std::string report, out, metrics = "pa_mpjpe,head_pos,gaze_pos,hand_pos,head_rot";
};

int runPlot(const PlotArgs& a) {
  std::vector<ReportSeries> series;
  std::vector<Metric> metrics;
  try {
    series = parseReportCsv(readFile(a.report, kExitConfig), fs::path(a.report).stem().string());
    metrics = parseMetricList(a.metrics);
  } catch (const ParseError& e) {
    throw CliError(kExitConfig, a.report + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CliError(kExitConfig, e.what());
  }
  writeFile(a.out, renderErrorChart(series, metrics));
  std::printf("wrote %s (%zu methods x %zu metrics)\n", a.out.c_str(), series.size(), metrics.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visuomotor forecasting: synthetic data, training, evaluation, plots"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write synthetic trajectories as JSONL");
  g->add_option("--config", gen.config, "Synthetic config JSON");
  g->add_option("--out", gen.out, "Output JSONL path")->required();
  g->add_option("--seed", gen.seed, "Override the config seed");
  g->add_option("--n", gen.n, "Override n_trajectories");
  g->add_option("--length", gen.length, "Override trajectory length");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a forecaster on JSONL trajectories");
  t->add_option("--data", tr.data, "Training JSONL")->required();
  t->add_option("--config", tr.config, "Training config JSON");
  t->add_option("--out", tr.out, "Checkpoint manifest path")->required();
  t->add_option("--model", tr.model, "diffusion or regression")
      ->check(CLI::IsMember({"diffusion", "regression"}));
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--lr", tr.lr);
  t->add_option("--seed", tr.seed);
  t->add_option("--limit", tr.limit, "Keep at most this many windows (0 = all)");
  t->add_option("--threads", tr.threads, "Accepted for symmetry; training is single-threaded")
      ->check(CLI::PositiveNumber);
  t->add_option("--resume", tr.resume, "Continue from this checkpoint");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Compare checkpoints and baselines on JSONL data");
  e->add_option("--data", ev.data, "Test JSONL")->required();
  e->add_option("--checkpoint", ev.checkpoints, "Checkpoint manifest (repeatable)");
  e->add_option("--baselines", ev.baselines, "Comma-separated baselines, empty for none");
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--seed", ev.seed, "Sampling seed");
  e->add_option("--threads", ev.threads)->check(CLI::PositiveNumber);
  e->add_option("--window", ev.window);
  e->add_option("--observed", ev.observed);
  e->add_option("--stride", ev.stride);
  e->add_option("--limit", ev.limit, "Keep at most this many windows (0 = all)");

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "Render per-step errors from a report CSV as SVG");
  p->add_option("--report", pl.report, "Report or per_step CSV")->required();
  p->add_option("--out", pl.out, "Output SVG")->required();
  p->add_option("--metrics", pl.metrics, "Comma-separated metric names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (g->parsed()) return runGenerate(gen);
    if (t->parsed()) return runTrain(tr);
    if (e->parsed()) return runEvaluate(ev);
    if (p->parsed()) return runPlot(pl);
  } catch (const CliError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return err.code;
  } catch (const ValidationError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitConfig;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
