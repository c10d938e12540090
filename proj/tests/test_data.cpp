#include "test_util.hpp"

#include "vmf/data.hpp"
#include "vmf/errors.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

using namespace vmf;
using namespace vmf::testing;

namespace {

std::filesystem::path tempPath(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vmf_test_data_" + name);
}

bool sameState(const Stated& a, const Stated& b) {
  return a.head.position == b.head.position && a.head.rotation == b.head.rotation &&
         a.gaze == b.gaze && a.joints == b.joints;
}

bool sameRecord(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  if (a.id != b.id || a.fps != b.fps || a.class_label != b.class_label || a.valid != b.valid ||
      a.states.size() != b.states.size() ||
      a.visual_features.has_value() != b.visual_features.has_value())
    return false;
  for (std::size_t i = 0; i < a.states.size(); ++i)
    if (!sameState(a.states[i], b.states[i])) return false;
  if (a.visual_features) {
    if (a.visual_features->size() != b.visual_features->size()) return false;
    for (std::size_t i = 0; i < a.visual_features->size(); ++i)
      if ((*a.visual_features)[i] != (*b.visual_features)[i]) return false;
  }
  return true;
}

TrajectoryRecord randomRecord(std::mt19937_64& rng, std::size_t n, const std::string& id) {
  TrajectoryRecord r;
  r.id = id;
  r.fps = 10.0;
  r.class_label = "test";
  r.states = randomSequence(rng, n);
  r.valid.assign(n, true);
  return r;
}

// Velocity cross-correlation of both wrists against the gaze endpoint,
// pooled over trajectories and axes.
std::vector<double> wristGazeCorrelation(const std::vector<TrajectoryRecord>& recs, int max_lag) {
  std::vector<double> num(max_lag + 1), dg2(max_lag + 1), dw2(max_lag + 1);
  for (const auto& r : recs) {
    const std::size_t n = r.states.size();
    for (int w : {4, 5})
      for (int lag = 0; lag <= max_lag; ++lag)
        for (std::size_t t = 0; t + 1 + lag < n; ++t) {
          const Vector3 dg = r.states[t + 1].gaze - r.states[t].gaze;
          const Vector3 dw = r.states[t + 1 + lag].joints[w] - r.states[t + lag].joints[w];
          num[lag] += dg.dot(dw);
          dg2[lag] += dg.squaredNorm();
          dw2[lag] += dw.squaredNorm();
        }
  }
  std::vector<double> out(max_lag + 1);
  for (int lag = 0; lag <= max_lag; ++lag) out[lag] = num[lag] / std::sqrt(dg2[lag] * dw2[lag]);
  return out;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic") {
  SyntheticConfig cfg;
  cfg.n_trajectories = 5;
  cfg.length = 60;
  cfg.seed = 3;
  const auto a = generateSynthetic(cfg);
  const auto b = generateSynthetic(cfg);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(sameRecord(a[i], b[i]));
  cfg.seed = 4;
  const auto c = generateSynthetic(cfg);
  CHECK_FALSE(sameRecord(a[0], c[0]));
  for (const auto& r : a) CHECK_NOTHROW(validateRecord(r));
}

TEST_CASE("noise-free generator with a fixed goal settles") {
  SyntheticConfig cfg;
  cfg.n_trajectories = 3;
  cfg.length = 400;
  cfg.noise_std = 0.0;
  cfg.gaze_target_rate = 1e-12;
  for (const auto& r : generateSynthetic(cfg)) {
    const auto& s = r.states;
    const double late = maxStateDiff(s[s.size() - 1], s[s.size() - 2]);
    CHECK(late < 1e-9);
    CHECK(late <= maxStateDiff(s[20], s[19]) + 1e-15);
  }
}

TEST_CASE("wrist motion lags gaze motion by hand_lag") {
  // Frozen from tests/oracles/hand_lag_xcorr.py on the same generator output.
  SyntheticConfig cfg;
  cfg.n_trajectories = 100;
  cfg.length = 200;
  cfg.seed = 7;

  SUBCASE("hand_lag 5") {
    const auto c = wristGazeCorrelation(generateSynthetic(cfg), 15);
    const auto peak = std::max_element(c.begin(), c.end()) - c.begin();
    CHECK(peak == 5);
    CHECK(c[5] == doctest::Approx(0.270187).epsilon(1e-4));
    CHECK(c[4] == doctest::Approx(0.174904).epsilon(1e-4));
  }
  SUBCASE("hand_lag 8") {
    cfg.hand_lag = 8;
    const auto c = wristGazeCorrelation(generateSynthetic(cfg), 15);
    const auto peak = std::max_element(c.begin(), c.end()) - c.begin();
    CHECK(peak == 8);
    CHECK(c[8] == doctest::Approx(0.265523).epsilon(1e-4));
  }
}

TEST_CASE("generator respects the workspace bound and feature grid") {
  SyntheticConfig cfg;
  cfg.n_trajectories = 20;
  cfg.length = 101;
  cfg.workspace_extent = 1.7;
  for (const auto& r : generateSynthetic(cfg)) {
    for (const auto& s : r.states)
      for (const auto& p : s.points()) CHECK(p.cwiseAbs().maxCoeff() <= 1.7);
    REQUIRE(r.visual_features.has_value());
    // 100 steps at 10 fps is 10 s, so 41 frames at 4 fps.
    CHECK(r.visual_features->size() == 41);
    for (const auto& f : *r.visual_features) CHECK(f.size() == kVisualDim);
  }
}

TEST_CASE("synthetic config parsing") {
  const auto c = syntheticConfigFromJson({{"n_trajectories", 7}, {"hand_lag", 3}});
  CHECK(c.n_trajectories == 7);
  CHECK(c.hand_lag == 3);
  CHECK(syntheticConfigFromJson(toJson(c)).hand_lag == 3);
  CHECK_THROWS_WITH_AS(syntheticConfigFromJson({{"bogus", 1}}), doctest::Contains("bogus"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(syntheticConfigFromJson({{"n_trajectories", 0}}),
                       doctest::Contains("n_trajectories"), ValidationError);
  CHECK_THROWS_AS(syntheticConfigFromJson({{"noise_std", -0.1}}), ValidationError);
}

TEST_CASE("JSONL round trip") {
  std::mt19937_64 rng(11);
  std::vector<TrajectoryRecord> recs;
  for (int i = 0; i < 10; ++i) recs.push_back(randomRecord(rng, 5 + i, "r" + std::to_string(i)));
  recs[3].valid[2] = false;
  std::vector<Eigen::VectorXd> feats(2, Eigen::VectorXd::Random(kVisualDim));
  recs[4].visual_features = feats;

  const auto path = tempPath("roundtrip.jsonl");
  saveJsonl(recs, path);
  const auto back = loadJsonl(path);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(sameRecord(recs[i], back[i]));
  std::filesystem::remove(path);

  const auto j = toJson(recs[0]);
  CHECK(j.at("schema") == kSchemaVersion);
  CHECK(j.at("visual_features").is_null());
  CHECK(j.at("states")[0].at("head_R").size() == 9);
}

TEST_CASE("JSONL errors") {
  const auto path = tempPath("errors.jsonl");
  auto write = [&](const std::string& text) {
    std::ofstream(path) << text;
  };

  write("");
  CHECK(loadJsonl(path).empty());

  std::mt19937_64 rng(12);
  auto good = toJson(randomRecord(rng, 2, "good"));

  SUBCASE("five joints") {
    auto bad = good;
    bad["id"] = "five";
    auto joints = bad["states"][1]["joints"];
    joints.erase(joints.end() - 3, joints.end());
    bad["states"][1]["joints"] = joints;
    write(good.dump() + "\n" + bad.dump() + "\n");
    CHECK_THROWS_WITH_AS(loadJsonl(path), doctest::Contains("joints length 5 ≠ 6"),
                         ValidationError);
    CHECK_THROWS_WITH(loadJsonl(path), doctest::Contains("five"));
  }
  SUBCASE("unknown field") {
    auto bad = good;
    bad["mystery"] = 1;
    write(bad.dump() + "\n");
    CHECK_THROWS_WITH_AS(loadJsonl(path), doctest::Contains("mystery"), ParseError);
  }
  SUBCASE("malformed line reports its number") {
    write(good.dump() + "\n\n{not json\n");
    CHECK_THROWS_WITH_AS(loadJsonl(path), doctest::Contains(":3:"), ParseError);
  }
  SUBCASE("invariant violation names the record") {
    auto bad = good;
    bad["id"] = "skewed";
    bad["states"][0]["head_R"] = {2, 0, 0, 0, 1, 0, 0, 0, 1};
    write(bad.dump() + "\n");
    CHECK_THROWS_WITH_AS(loadJsonl(path), doctest::Contains("skewed"), ValidationError);
  }
  SUBCASE("valid mask length") {
    auto bad = good;
    bad["valid"] = {true};
    write(bad.dump() + "\n");
    CHECK_THROWS_AS(loadJsonl(path), ValidationError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("cleanImpute") {
  std::mt19937_64 rng(13);

  SUBCASE("all-valid record unchanged") {
    const auto r = randomRecord(rng, 12, "a");
    CHECK(sameRecord(cleanImpute(r), r));
  }

  SUBCASE("single gap filled at the midpoint") {
    auto r = randomRecord(rng, 3, "m");
    r.valid[1] = false;
    r.states[1] = Stated();  // garbage the imputation must overwrite
    const auto c = cleanImpute(r, 5);
    CHECK(c.valid[1]);
    const Stated& p = r.states[0];
    const Stated& q = r.states[2];
    CHECK((c.states[1].head.position - 0.5 * (p.head.position + q.head.position)).norm() < 1e-12);
    CHECK((c.states[1].gaze - 0.5 * (p.gaze + q.gaze)).norm() < 1e-12);
    CHECK((c.states[1].joints[4] - 0.5 * (p.joints[4] + q.joints[4])).norm() < 1e-12);
    const double half = rotationGeodesicAngle(p.head.rotation, q.head.rotation) / 2.0;
    CHECK(rotationGeodesicAngle(p.head.rotation, c.states[1].head.rotation) ==
          doctest::Approx(half).epsilon(1e-9));
    CHECK(rotationGeodesicAngle(c.states[1].head.rotation, q.head.rotation) ==
          doctest::Approx(half).epsilon(1e-9));
    CHECK(c.states[1].head.isValid());
  }

  SUBCASE("gap longer than max_gap stays masked") {
    const int max_gap = 4;
    auto r = randomRecord(rng, max_gap + 3, "g");
    for (int i = 1; i <= max_gap + 1; ++i) r.valid[i] = false;
    const auto c = cleanImpute(r, max_gap);
    for (int i = 1; i <= max_gap + 1; ++i) CHECK_FALSE(c.valid[i]);

    auto r2 = randomRecord(rng, max_gap + 2, "g2");
    for (int i = 1; i <= max_gap; ++i) r2.valid[i] = false;
    const auto c2 = cleanImpute(r2, max_gap);
    for (int i = 1; i <= max_gap; ++i) CHECK(c2.valid[i]);
  }

  SUBCASE("edge gaps have no right or left neighbor") {
    auto r = randomRecord(rng, 6, "e");
    r.valid[0] = false;
    r.valid[5] = false;
    const auto c = cleanImpute(r);
    CHECK_FALSE(c.valid[0]);
    CHECK_FALSE(c.valid[5]);
  }

  SUBCASE("idempotent") {
    auto r = randomRecord(rng, 30, "i");
    for (int i : {2, 3, 10, 20, 21, 22}) r.valid[i] = false;
    for (int i = 25; i < 30; ++i) r.valid[i] = false;
    const auto once = cleanImpute(r, 2);
    CHECK(sameRecord(cleanImpute(once, 2), once));
  }

  CHECK_THROWS_AS(cleanImpute(randomRecord(rng, 3, "x"), 0), std::invalid_argument);
}

TEST_CASE("sliceWindows counts") {
  std::mt19937_64 rng(14);
  CHECK(sliceWindows(randomRecord(rng, 100, "c"), 20, 10).size() == 9);
  CHECK(sliceWindows(randomRecord(rng, 20, "c"), 20, 10).size() == 1);
  CHECK(sliceWindows(randomRecord(rng, 19, "c"), 20, 10).empty());

  std::uniform_int_distribution<int> len(1, 80), win(2, 30), str(1, 12);
  for (int trial = 0; trial < 100; ++trial) {
    const int l = len(rng), w = win(rng), s = str(rng);
    const auto r = randomRecord(rng, l, "p");
    const std::size_t expected = l >= w ? (l - w) / s + 1 : 0;
    CHECK(sliceWindows(r, w, s).size() == expected);
    CHECK(windowCount(l, w, s) == expected);
  }
}

TEST_CASE("sliceWindows skips windows touching masked states") {
  std::mt19937_64 rng(15);
  auto r = randomRecord(rng, 100, "m");
  for (int i = 30; i <= 39; ++i) r.valid[i] = false;
  std::set<std::size_t> starts;
  for (const auto& w : sliceWindows(r, 20, 10)) starts.insert(w.start);
  // Starts 20 and 30 are the only ones whose span [s, s+19] meets 30..39.
  CHECK(starts == std::set<std::size_t>{0, 10, 40, 50, 60, 70, 80});
}

TEST_CASE("sliceWindows canonicalizes at the last observed step") {
  SyntheticConfig cfg;
  cfg.n_trajectories = 4;
  cfg.length = 100;
  const auto recs = generateSynthetic(cfg);
  for (const auto& r : recs) {
    for (const auto& w : sliceWindows(r, 20, 10)) {
      REQUIRE(w.observed.size() == 10);
      REQUIRE(w.future.size() == 10);
      CHECK(w.observed.back().head.position.norm() < 1e-6);
      CHECK((w.observed.back().head.rotation - Matrix3::Identity()).norm() < 1e-6);
      CHECK(w.source_id == r.id);
      CHECK(w.class_label == r.class_label);

      // Future states match the raw states in the anchor frame.
      const SE3d to_anchor = invert(r.states[w.start + 9].head);
      const Stated expect = transformState(to_anchor, r.states[w.start + 15]);
      CHECK(maxStateDiff(expect, w.future[5]) < 1e-9);

      // Visual feature from the frame nearest the anchor time.
      const double anchor_t = (w.start + 9) / r.fps;
      const auto frame = static_cast<std::size_t>(std::lround(anchor_t * kVisualFrameRate));
      CHECK(w.visual_feature == (*r.visual_features)[frame]);
    }
  }
}

TEST_CASE("cleanAndSlice on the default generator yields 19 windows per trajectory") {
  SyntheticConfig cfg;
  cfg.n_trajectories = 100;
  cfg.length = 200;
  const auto windows = cleanAndSlice(generateSynthetic(cfg), 20, 10, 10);
  CHECK(windows.size() == 1900);
  CHECK(windowCount(200, 20, 10) == 19);
}
