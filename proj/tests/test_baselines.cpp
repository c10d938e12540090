#include "test_util.hpp"

#include "vmf/baselines.hpp"
#include "vmf/errors.hpp"

#include <doctest.h>

#include <numbers>

using namespace vmf;
using namespace vmf::testing;

namespace {

// Positions advance by a fixed step and the head turns by a fixed relative
// rotation, so the sequence is exactly linear in the constant-velocity sense.
std::vector<Stated> linearSequence(std::mt19937_64& rng, std::size_t n) {
  const Stated start = randomState(rng);
  const Vector3 head_step = randomVector(rng, 0.05);
  const Vector3 gaze_step = randomVector(rng, 0.05);
  std::array<Vector3, kNumJoints> joint_step;
  for (auto& j : joint_step) j = randomVector(rng, 0.05);
  const Matrix3 turn = axisAngle<double>(randomVector(rng).normalized(), 0.07);
  std::vector<Stated> out;
  Matrix3 rot = start.head.rotation;
  for (std::size_t t = 0; t < n; ++t) {
    Stated s = start;
    s.head.position += static_cast<double>(t) * head_step;
    s.head.rotation = rot;
    s.gaze += static_cast<double>(t) * gaze_step;
    for (int j = 0; j < kNumJoints; ++j) s.joints[j] += static_cast<double>(t) * joint_step[j];
    out.push_back(s);
    rot = turn * rot;
  }
  return out;
}

}  // namespace

TEST_CASE("constant pose") {
  std::mt19937_64 rng(1);
  const auto obs = randomSequence(rng, 10);
  const auto f = constantPose(obs, 10);
  REQUIRE(f.size() == 10);
  for (const auto& s : f) CHECK(maxStateDiff(s, obs.back()) == 0.0);

  const std::vector<Stated> still(20, randomState(rng));
  const auto g = constantPose(std::span(still).first(10), 10);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) worst = std::max(worst, maxStateDiff(g[k], still[10 + k]));
  CHECK(worst < 1e-9);
  CHECK(constantPose(std::span(still).first(1), 3).size() == 3);
}

TEST_CASE("constant velocity") {
  SUBCASE("arithmetic progression") {
    std::vector<Stated> obs(2);
    obs[1].head.position = Vector3(0.1, 0, 0);
    for (auto& s : obs) s.gaze = gazeEndpoint(s.head, 1.0);
    const auto f = constantVelocity(obs, 5);
    for (int k = 1; k <= 5; ++k)
      CHECK((f[k - 1].head.position - Vector3(0.1 * (k + 1), 0, 0)).norm() < 1e-12);
  }
  SUBCASE("exact on linear trajectories") {
    std::mt19937_64 rng(2);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto seq = linearSequence(rng, 20);
      const auto f = constantVelocity(std::span(seq).first(10), 10);
      for (int k = 0; k < 10; ++k) worst = std::max(worst, maxStateDiff(f[k], seq[10 + k]));
    }
    CHECK(worst < 1e-9);
  }
  SUBCASE("equal last states reduce to constant pose") {
    std::mt19937_64 rng(3);
    auto obs = randomSequence(rng, 10);
    obs[8] = obs[9];
    const auto v = constantVelocity(obs, 10);
    const auto p = constantPose(obs, 10);
    for (int k = 0; k < 10; ++k) CHECK(maxStateDiff(v[k], p[k]) == 0.0);
  }
  SUBCASE("needs two observed states") {
    std::vector<Stated> one(1);
    CHECK_THROWS_AS(constantVelocity(one, 3), std::invalid_argument);
  }
  SUBCASE("rotations stay on SO(3)") {
    std::mt19937_64 rng(4);
    const auto obs = randomSequence(rng, 10);
    for (const auto& s : constantVelocity(obs, 10)) CHECK(s.head.isValid(1e-9));
  }
}

TEST_CASE("regression config") {
  RegressionConfig c;
  c.hidden = {32, 16};
  c.encoder.layers = 3;
  const auto back = regressionConfigFromJson(toJson(c));
  CHECK(back.hidden == c.hidden);
  CHECK(back.encoder.layers == 3);
  CHECK_THROWS_AS(regressionConfigFromJson({{"bogus", 1}}), ValidationError);
  CHECK_THROWS_AS(regressionConfigFromJson({{"hidden", {0}}}), ValidationError);
}

TEST_CASE("regression forecaster overfits one window") {
  SyntheticConfig sc;
  sc.n_trajectories = 1;
  sc.length = 20;
  const auto windows = cleanAndSlice(generateSynthetic(sc), 20, 10, 10);
  REQUIRE(windows.size() == 1);

  RegressionConfig cfg;
  cfg.encoder.latent_dim = 32;
  cfg.hidden = {64};
  const RegressionForecaster model(cfg);
  ParameterStore init;
  model.initParameters(init, windows, 5);

  TrainOptions opts;
  opts.epochs = 400;
  opts.batch_size = 1;
  opts.adam.lr = 1e-3;
  const auto res = train(model, windows, init, opts);
  CHECK(res.epoch_loss.back() < 1e-4);

  const auto a = model.forecast(res.params, windows, 1);
  const auto b = model.forecast(res.params, windows, 2);
  REQUIRE(a.size() == 1);
  REQUIRE(a[0].size() == 10);
  for (int k = 0; k < 10; ++k) {
    CHECK(maxStateDiff(a[0][k], b[0][k]) == 0.0);
    CHECK(a[0][k].head.isValid(1e-6));
  }

  ParameterStore empty;
  CHECK_THROWS(model.forecast(empty, windows, 1));
}
