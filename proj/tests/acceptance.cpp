// End-to-end acceptance checks A1..A9. Prints one PASS/FAIL line per
// criterion and exits non-zero if any fails. Pass criterion names (e.g.
// `acceptance A1 A7`) to run a subset.

#include "procrustes_oracle.hpp"
#include "test_util.hpp"

#include "vmf/baselines.hpp"
#include "vmf/benchmark.hpp"
#include "vmf/diffusion.hpp"
#include "vmf/metrics.hpp"
#include "vmf/report.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace vmf;
using namespace vmf::testing;

namespace {

// Tolerances and bounds, in the units named.
constexpr double kA1OracleTolMm = 1e-3;
constexpr double kA1RigidTolMm = 1e-6;
constexpr int kA1Pairs = 100;
constexpr int kA1Rotations = 1000000;
constexpr double kA1BudgetS = 60.0;
constexpr double kA2Tol = 1e-6;
constexpr double kA2BudgetS = 10.0;
constexpr int kA3Samples = 100000;
constexpr double kA3RelTol = 0.01;
constexpr double kA3BudgetS = 60.0;
constexpr double kA4RelTol = 1e-4;
constexpr int kA4Coords = 20;
constexpr double kA4BudgetS = 60.0;
constexpr double kA5VsVelocity = 0.20;
constexpr double kA5VsPose = 0.10;
constexpr double kA5BudgetS = 20.0 * 60.0;
constexpr double kA7TolM = 1e-9;

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome a1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst_oracle = 0.0, worst_rigid = 0.0;
  for (int i = 0; i < kA1Pairs; ++i) {
    std::array<Vector3, 8> src, dst;
    for (auto& p : src) p = randomVector(rng, 0.5);
    for (auto& p : dst) p = randomVector(rng, 0.5);
    Stated a, b;
    a.head.position = src[0];
    a.gaze = src[1];
    b.head.position = dst[0];
    b.gaze = dst[1];
    for (int j = 0; j < kNumJoints; ++j) {
      a.joints[j] = src[2 + j];
      b.joints[j] = dst[2 + j];
    }
    const double closed = paMpjpe(a, b);
    const double searched = bruteForceAlignedError(src, dst, 1000 + i, kA1Rotations);
    worst_oracle = std::max(worst_oracle, std::abs(closed - searched));
    worst_rigid = std::max(worst_rigid, paMpjpe(transformState(randomPose(rng, 3.0), b), b));
  }
  const double s = secondsSince(t0);
  return {worst_oracle < kA1OracleTolMm && worst_rigid < kA1RigidTolMm && s < kA1BudgetS,
          fmt("max |closed - oracle| %.3g mm, rigid copies %.3g mm, %.1f s", worst_oracle,
              worst_rigid, s)};
}

Outcome a2() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  double worst = 0.0, anchor = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto seq = randomSequence(rng, 20);
    const SE3d g = randomPose(rng, 10.0);
    std::vector<Stated> moved;
    for (const auto& s : seq) moved.push_back(transformState(g, s));
    const auto a = canonicalizeSequence(seq, 9);
    const auto b = canonicalizeSequence(moved, 9);
    for (std::size_t t = 0; t < a.size(); ++t) worst = std::max(worst, maxStateDiff(a[t], b[t]));
    anchor = std::max({anchor, a[9].head.position.cwiseAbs().maxCoeff(),
                       (a[9].head.rotation - Matrix3::Identity()).cwiseAbs().maxCoeff()});
  }
  const double s = secondsSince(t0);
  return {worst < kA2Tol && anchor < kA2Tol && s < kA2BudgetS,
          fmt("max diff %.3g, anchor deviation %.3g, %.2f s", worst, anchor, s)};
}

Outcome a3() {
  const auto t0 = Clock::now();
  const auto sched = buildSchedule(100, 1e-4, 0.02);
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> pick(0, 99);
  std::uniform_real_distribution<double> mag(0.5, 3.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const int k = pick(rng);
    Matrix x0(1, 1);
    x0(0, 0) = (gauss(rng) < 0 ? -1 : 1) * mag(rng);
    Matrix eps(1, 1);
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < kA3Samples; ++i) {
      eps(0, 0) = gauss(rng);
      const double x = forwardSample(x0, k, eps, sched)(0, 0);
      sum += x;
      sq += x * x;
    }
    const double mean = sum / kA3Samples;
    const double var = sq / kA3Samples - mean * mean;
    const double ab = sched.alpha_bar[k];
    const double want_mean = std::sqrt(ab) * x0(0, 0);
    worst = std::max({worst, std::abs(mean - want_mean) / std::abs(want_mean),
                      std::abs(var - (1.0 - ab)) / (1.0 - ab)});
  }
  const double s = secondsSince(t0);
  return {worst < kA3RelTol && s < kA3BudgetS,
          fmt("max relative error %.4f over 5 (x0, k), %.1f s", worst, s)};
}

Outcome a4() {
  const auto t0 = Clock::now();
  SyntheticConfig sc;
  sc.n_trajectories = 1;
  sc.length = 40;
  const auto data = cleanAndSlice(generateSynthetic(sc), 20, 10, 10);
  std::vector<const StateWindow*> batch;
  for (const auto& w : data) batch.push_back(&w);

  DiffusionConfig cfg = deskTrainConfig().diffusion;
  cfg.encoder.latent_dim = 16;
  cfg.encoder.n_heads = 2;
  cfg.denoiser.hidden = {32, 32};
  cfg.denoiser.time_dim = 8;
  const DiffusionForecaster model(cfg);
  ParameterStore store;
  model.initParameters(store, data, 5);
  const EncoderInputs in = makeEncoderInputs(batch, 10);
  const Matrix x0 = normalizeFutures(store, futureTargets(batch, 10));
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> pick(0, cfg.schedule.steps - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<int> steps;
  for (std::size_t i = 0; i < batch.size(); ++i) steps.push_back(pick(rng));
  Matrix eps(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = gauss(rng);
  const LossBuilder loss = [&](Tape& t, const ParameterStore& st) {
    return model.lossGraph(t, st, in, x0, steps, eps);
  };
  const auto r = checkGradients(store, loss, 2 * kA4Coords, 405);
  const double s = secondsSince(t0);
  return {r.checked >= kA4Coords && r.max_rel_error < kA4RelTol && s < kA4BudgetS,
          fmt("%.0f coordinates, max relative error %.3g, %.1f s", double(r.checked),
              r.max_rel_error, s)};
}

// A5 and A6 share one benchmark run.
struct BenchmarkRun {
  EvalReport pose, velocity, diffusion, regression;
  double seconds = 0.0;
};

const BenchmarkRun& benchmarkRun() {
  static const BenchmarkRun run = [] {
    BenchmarkRun out;
    const auto t0 = Clock::now();
    const auto split = standardBenchmark();
    std::vector<std::vector<Stated>> truth, pose, velocity;
    std::vector<std::string> labels;
    for (const auto& w : split.test) {
      truth.push_back(w.future);
      pose.push_back(constantPose(w.observed, static_cast<int>(w.future.size())));
      velocity.push_back(constantVelocity(w.observed, static_cast<int>(w.future.size())));
      labels.push_back(w.class_label);
    }
    out.pose = evaluate(pose, truth, labels);
    out.velocity = evaluate(velocity, truth, labels);
    for (const char* kind : {"diffusion", "regression"}) {
      const TrainConfig tc = deskTrainConfig(kind);
      const auto model = makeForecaster(tc);
      ParameterStore init;
      model->initParameters(init, split.train, tc.train.seed);
      const auto trained = train(*model, split.train, std::move(init), tc.train);
      const auto report = evaluate(model->forecast(trained.params, split.test, 0), truth, labels);
      (std::string(kind) == "diffusion" ? out.diffusion : out.regression) = report;
      std::printf("  %s trained, %.0f s elapsed\n", kind, secondsSince(t0));
      std::fflush(stdout);
    }
    out.seconds = secondsSince(t0);
    std::printf("%s", comparisonTable({{"constant_pose", out.pose},
                                       {"constant_velocity", out.velocity},
                                       {"regression", out.regression},
                                       {"diffusion", out.diffusion}})
                          .c_str());
    return out;
  }();
  return run;
}

Outcome a5() {
  const auto& r = benchmarkRun();
  const double d = r.diffusion.mean[kHandPos];
  const double reg = r.regression.mean[kHandPos];
  const double cv = r.velocity.mean[kHandPos];
  const double cp = r.pose.mean[kHandPos];
  const bool diffusion_ok = d <= (1.0 - kA5VsVelocity) * cv && d <= (1.0 - kA5VsPose) * cp;
  const bool regression_ok = reg < cv && reg < cp;
  std::string detail = fmt("hand mm: diffusion %.2f, regression %.2f, const-vel %.2f, const-pose %.2f",
                           d, reg, cv, cp);
  detail += fmt("; diffusion vs const-vel %+.1f%%, vs const-pose %+.1f%%; %.0f s",
                100.0 * (d / cv - 1.0), 100.0 * (d / cp - 1.0), r.seconds);
  return {diffusion_ok && regression_ok && r.seconds < kA5BudgetS, detail};
}

Outcome a6() {
  const auto& r = benchmarkRun().diffusion;
  const double first = r.per_step.front()[kHeadPos];
  const double last = r.per_step.back()[kHeadPos];
  return {last > first, fmt("head mm: step 1 %.2f, step %.0f %.2f", first,
                            double(r.per_step.size()), last)};
}

Outcome a7() {
  std::mt19937_64 rng(707);
  double worst_cv = 0.0, worst_cp = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Stated start = randomState(rng);
    const Vector3 head_step = randomVector(rng, 0.05), gaze_step = randomVector(rng, 0.05);
    std::array<Vector3, kNumJoints> joint_step;
    for (auto& j : joint_step) j = randomVector(rng, 0.05);
    const Matrix3 turn = axisAngle<double>(randomVector(rng).normalized(), 0.1);
    std::vector<Stated> seq;
    Matrix3 rot = start.head.rotation;
    for (int t = 0; t < 20; ++t) {
      Stated s = start;
      s.head.position += t * head_step;
      s.head.rotation = rot;
      s.gaze += t * gaze_step;
      for (int j = 0; j < kNumJoints; ++j) s.joints[j] += t * joint_step[j];
      seq.push_back(s);
      rot = turn * rot;
    }
    const auto cv = constantVelocity(std::span(seq).first(10), 10);
    for (int k = 0; k < 10; ++k) worst_cv = std::max(worst_cv, maxStateDiff(cv[k], seq[10 + k]));

    const std::vector<Stated> still(20, start);
    const auto cp = constantPose(std::span(still).first(10), 10);
    for (int k = 0; k < 10; ++k) worst_cp = std::max(worst_cp, maxStateDiff(cp[k], still[10 + k]));
  }
  return {worst_cv < kA7TolM && worst_cp < kA7TolM,
          fmt("const-vel max error %.3g m, const-pose max error %.3g m", worst_cv, worst_cp)};
}

TrajectoryRecord validRecord(std::mt19937_64& rng, int length) {
  TrajectoryRecord r;
  r.id = "fixture";
  r.class_label = "fixture";
  r.states = randomSequence(rng, length);
  r.valid.assign(length, true);
  r.visual_features = std::vector<Eigen::VectorXd>(length * 4 / 10 + 1, Eigen::VectorXd::Zero(kVisualDim));
  return r;
}

Outcome a8() {
  std::mt19937_64 rng(808);
  const auto full = validRecord(rng, 100);
  const std::size_t n_full = sliceWindows(full, 20, 10).size();

  // Each fixture masks a span and lists the window starts that must survive.
  struct Fixture {
    int first, last;
    std::set<std::size_t> starts;
  };
  const std::vector<Fixture> fixtures = {
      {30, 39, {0, 10, 40, 50, 60, 70, 80}},
      {0, 0, {10, 20, 30, 40, 50, 60, 70, 80}},
      {99, 99, {0, 10, 20, 30, 40, 50, 60, 70}},
      {45, 45, {0, 10, 20, 50, 60, 70, 80}},
      {19, 20, {30, 40, 50, 60, 70, 80}},
  };
  int matched = 0;
  for (const auto& f : fixtures) {
    auto r = full;
    for (int i = f.first; i <= f.last; ++i) r.valid[i] = false;
    std::set<std::size_t> starts;
    for (const auto& w : sliceWindows(r, 20, 10)) starts.insert(w.start);
    if (starts == f.starts) ++matched;
  }
  return {n_full == 9 && matched == static_cast<int>(fixtures.size()),
          fmt("%.0f windows from 100 valid states, %.0f/%.0f masked fixtures exact", double(n_full),
              matched, double(fixtures.size()))};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int runCli(const std::string& args) {
  const std::string cmd = "\"" VMF_CLI_PATH "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome a9() {
  const fs::path root = fs::temp_directory_path() / "vmf_acceptance_a9";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string data = (root / "data.jsonl").string();
  if (runCli("generate --out \"" + data + "\" --n 6 --length 60 --seed 9") != 0)
    return {false, "generate failed"};

  std::vector<std::string> files;
  bool identical = true;
  std::string mismatch;
  for (const char* model : {"diffusion", "regression"}) {
    for (const char* run : {"r1", "r2"}) {
      const fs::path dir = root / run;
      const std::string ck = (dir / (std::string(model) + ".json")).string();
      if (runCli("train --data \"" + data + "\" --model " + model + " --out \"" + ck +
                 "\" --epochs 3 --batch-size 8 --seed 5 --threads 1") != 0)
        return {false, std::string("train failed for ") + model};
      if (runCli("evaluate --data \"" + data + "\" --checkpoint \"" + ck + "\" --seed 5 --threads 1 --out \"" +
                 (dir / (std::string("eval_") + model)).string() + "\"") != 0)
        return {false, std::string("evaluate failed for ") + model};
    }
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "r1")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "r1");
    // Effective-config echoes embed the run's own paths, which differ by design.
    const std::string name = rel.filename().string();
    if (name.find(".config.json") != std::string::npos || name == "evaluate.json") continue;
    ++compared;
    if (slurp(entry.path()) != slurp(root / "r2" / rel)) {
      identical = false;
      mismatch = rel.string();
    }
  }
  std::string detail = std::to_string(compared) + " checkpoint/report files compared";
  if (!identical) detail += ", first difference in " + mismatch;
  return {identical && compared > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},
      {"A6", a6}, {"A7", a7}, {"A8", a8}, {"A9", a9}};
  const std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
