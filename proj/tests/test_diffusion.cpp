#include "test_util.hpp"

#include "vmf/diffusion.hpp"
#include "vmf/errors.hpp"

#include <doctest.h>

#include <numeric>

using namespace vmf;
using namespace vmf::testing;

namespace {

std::vector<StateWindow> syntheticWindows(int trajectories, std::uint64_t seed = 1) {
  SyntheticConfig cfg;
  cfg.n_trajectories = trajectories;
  cfg.length = 60;
  cfg.seed = seed;
  return cleanAndSlice(generateSynthetic(cfg), 20, 10, 10);
}

// Twenty copies of one random state, windowed once.
StateWindow staticWindow(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TrajectoryRecord r;
  r.id = "static";
  r.class_label = "static";
  r.states.assign(20, randomState(rng));
  r.valid.assign(20, true);
  std::vector<Eigen::VectorXd> feats(9, Eigen::VectorXd::Constant(kVisualDim, 0.25));
  r.visual_features = feats;
  return sliceWindows(r, 20, 10).at(0);
}

DiffusionConfig smallConfig() {
  DiffusionConfig c;
  c.encoder.latent_dim = 16;
  c.encoder.n_heads = 2;
  c.denoiser.hidden = {32};
  c.denoiser.time_dim = 8;
  return c;
}

std::vector<const StateWindow*> pointers(const std::vector<StateWindow>& w) {
  std::vector<const StateWindow*> p;
  for (const auto& x : w) p.push_back(&x);
  return p;
}

}  // namespace

TEST_CASE("noise schedule") {
  const auto one = buildSchedule(1, 0.5, 0.5);
  CHECK(one.alpha_bar == std::vector<double>{0.5});

  const auto s = buildSchedule(100, 1e-4, 0.02);
  CHECK(s.steps() == 100);
  CHECK(s.beta.front() == 1e-4);
  CHECK(s.beta.back() == doctest::Approx(0.02).epsilon(1e-14));
  // Cumulative product from numpy: prod(1 - linspace(1e-4, 0.02, 100)).
  CHECK(s.alpha_bar.back() == doctest::Approx(0.3635632480554922).epsilon(1e-12));
  for (int k = 1; k < 100; ++k) CHECK(s.alpha_bar[k] < s.alpha_bar[k - 1]);

  CHECK_THROWS_AS(buildSchedule(10, 0.02, 1e-4), std::invalid_argument);
  CHECK_THROWS_AS(buildSchedule(10, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(buildSchedule(10, 0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(buildSchedule(0, 0.1, 0.2), std::invalid_argument);
}

TEST_CASE("alpha_bar is strictly decreasing for any valid schedule") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> steps(1, 500);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = 1e-5 + 0.5 * u(rng), b = 1e-5 + 0.5 * u(rng);
    const auto s = buildSchedule(steps(rng), std::min(a, b), std::max(a, b));
    CHECK(s.alpha_bar[0] < 1.0);
    for (int k = 1; k < s.steps(); ++k) CHECK(s.alpha_bar[k] < s.alpha_bar[k - 1]);
    CHECK(s.alpha_bar.back() > 0.0);
  }
}

TEST_CASE("forward sample") {
  const auto s = buildSchedule(100, 1e-4, 0.02);
  std::mt19937_64 rng(3);
  const Matrix x0 = Matrix::Random(2, 5);
  CHECK(forwardSample(x0, 10, Matrix::Zero(2, 5), s) == std::sqrt(s.alpha_bar[10]) * x0);

  NoiseSchedule ideal = s;
  ideal.alpha_bar[0] = 1.0;
  CHECK(forwardSample(x0, 0, Matrix::Random(2, 5), ideal) == x0);

  CHECK_THROWS_AS(forwardSample(x0, 100, x0, s), std::invalid_argument);
  CHECK_THROWS_AS(forwardSample(x0, -1, x0, s), std::invalid_argument);
  CHECK_THROWS_AS(forwardSample(x0, 3, Matrix::Zero(2, 4), s), ShapeError);
}

TEST_CASE("forward sample matches its closed-form marginal") {
  const auto s = buildSchedule(100, 1e-4, 0.02);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pick(0, 99);
  std::uniform_real_distribution<double> mag(1.0, 3.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 100000;
  for (int trial = 0; trial < 5; ++trial) {
    const int k = pick(rng);
    Matrix x0(1, 3);
    for (int c = 0; c < 3; ++c) x0(0, c) = (gauss(rng) < 0 ? -1 : 1) * mag(rng);
    Eigen::RowVector3d sum = Eigen::RowVector3d::Zero(), sq = Eigen::RowVector3d::Zero();
    Matrix eps(1, 3);
    std::vector<Matrix> draws;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) eps(0, c) = gauss(rng);
      const Matrix x = forwardSample(x0, k, eps, s);
      sum += x.row(0);
      sq += x.row(0).cwiseProduct(x.row(0));
    }
    const Eigen::RowVector3d mean = sum / n;
    const Eigen::RowVector3d var = sq / n - mean.cwiseProduct(mean);
    const double ab = s.alpha_bar[k];
    for (int c = 0; c < 3; ++c)
      CHECK(mean(c) == doctest::Approx(std::sqrt(ab) * x0(0, c)).epsilon(0.01));
    CHECK(var.mean() == doctest::Approx(1.0 - ab).epsilon(0.01));
  }
}

TEST_CASE("reverse step") {
  const auto s = buildSchedule(100, 1e-4, 0.02);
  const Matrix x = Matrix::Random(3, 4), e = Matrix::Random(3, 4), z = Matrix::Random(3, 4);
  const Matrix mu0 = (x - (s.beta[0] / std::sqrt(1.0 - s.alpha_bar[0])) * e) / std::sqrt(s.alpha[0]);
  CHECK((reverseStep(x, 0, e, z, s) - mu0).norm() < 1e-15);
  CHECK(reverseStep(x, 0, e, z, s) == reverseStep(x, 0, e, Matrix(), s));

  const Matrix r = reverseStep(x, 40, Matrix::Zero(3, 4), Matrix::Zero(3, 4), s);
  CHECK((r - x / std::sqrt(s.alpha[40])).norm() < 1e-15);
  const Matrix noisy = reverseStep(x, 40, Matrix::Zero(3, 4), z, s);
  CHECK((noisy - r - std::sqrt(s.beta[40]) * z).norm() < 1e-14);

  CHECK_THROWS_AS(reverseStep(x, 100, e, z, s), std::invalid_argument);
  CHECK_THROWS_AS(reverseStep(x, 5, e, Matrix::Zero(1, 1), s), ShapeError);
}

TEST_CASE("config JSON") {
  DiffusionConfig c;
  c.denoiser.input_skip = true;
  c.noise_draws = 3;
  c.schedule.beta_end = 0.05;
  const auto back = diffusionConfigFromJson(toJson(c));
  CHECK(toJson(back) == toJson(c));
  CHECK_THROWS_AS(diffusionConfigFromJson({{"bogus", 1}}), ValidationError);
  CHECK_THROWS_AS(diffusionConfigFromJson({{"noise_draws", 0}}), ValidationError);
  CHECK_THROWS_AS(diffusionConfigFromJson({{"denoiser", {{"hidden", nlohmann::json::array()}}}}),
                  ValidationError);
  CHECK_THROWS_AS(diffusionConfigFromJson({{"schedule", {{"beta_start", 0.5}, {"beta_end", 0.1}}}}),
                  ValidationError);
}

TEST_CASE("zero network gives unit denoising loss") {
  const DiffusionForecaster model({});
  const auto data = syntheticWindows(2);
  ParameterStore s;
  model.initParameters(s, data, 5);
  for (const auto& name : s.trainableNames()) s.get(name).matrix().setZero();
  const auto batch = pointers(data);
  REQUIRE(batch.size() == 10);
  std::mt19937_64 rng(6);
  double total = 0.0;
  const int calls = 1000;  // 10^4 window draws
  for (int i = 0; i < calls; ++i) {
    const auto r = model.denoisingLoss(s, batch, rng);
    CHECK(r.loss >= 0.0);
    total += r.loss;
  }
  const double mean = total / calls;
  CHECK(mean >= 0.97);
  CHECK(mean <= 1.03);
}

TEST_CASE("denoising loss gradients pass finite differences") {
  const auto data = syntheticWindows(1);
  const auto batch = pointers(data);
  for (int variant = 0; variant < 2; ++variant) {
    CAPTURE(variant);
    DiffusionConfig cfg = smallConfig();
    if (variant == 1) {
      cfg.encoder.visual_tokens = 8;
      cfg.encoder.query_residual = true;
      cfg.denoiser.input_skip = true;
    }
    const DiffusionForecaster model(cfg);
    ParameterStore s;
    model.initParameters(s, data, 7);
    const EncoderInputs in = makeEncoderInputs(batch, 10);
    const Matrix x0 = normalizeFutures(s, futureTargets(batch, 10));
    std::mt19937_64 rng(8);
    std::vector<int> steps;
    std::uniform_int_distribution<int> pick(0, 99);
    for (std::size_t i = 0; i < batch.size(); ++i) steps.push_back(pick(rng));
    Matrix eps(x0.rows(), x0.cols());
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = gauss(rng);

    const LossBuilder loss = [&](Tape& t, const ParameterStore& st) {
      return model.lossGraph(t, st, in, x0, steps, eps);
    };
    const auto r = checkGradients(s, loss, 20, 9);
    CAPTURE(r.worst);
    CHECK(r.checked == 20);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("several noise draws share one conditioning row") {
  DiffusionConfig cfg = smallConfig();
  const DiffusionForecaster model(cfg);
  const auto data = syntheticWindows(1);
  const auto batch = pointers(data);
  ParameterStore s;
  model.initParameters(s, data, 10);
  const EncoderInputs in = makeEncoderInputs(batch, 10);
  const Matrix x0 = normalizeFutures(s, futureTargets(batch, 10));
  const Eigen::Index b = x0.rows();

  std::mt19937_64 rng(11);
  Matrix eps = Matrix::Random(2 * b, x0.cols());
  Matrix x0x2(2 * b, x0.cols());
  std::vector<int> steps(2 * b);
  for (Eigen::Index r = 0; r < 2 * b; ++r) {
    x0x2.row(r) = x0.row(r / 2);
    steps[r] = static_cast<int>(r % 100);
  }
  Tape t;
  const double both = model.lossGraph(t, s, in, x0x2, steps, eps).value()(0, 0);

  // Same value as two separate single-draw losses, averaged.
  double separate = 0.0;
  for (int d = 0; d < 2; ++d) {
    Matrix e(b, x0.cols());
    std::vector<int> k(b);
    for (Eigen::Index r = 0; r < b; ++r) {
      e.row(r) = eps.row(2 * r + d);
      k[r] = steps[2 * r + d];
    }
    Tape t1;
    separate += 0.5 * model.lossGraph(t1, s, in, x0, k, e).value()(0, 0);
  }
  CHECK(both == doctest::Approx(separate).epsilon(1e-12));
  Tape t2;
  CHECK_THROWS_AS(model.lossGraph(t2, s, in, x0x2.topRows(b + 1), steps, eps.topRows(b + 1)),
                  ShapeError);
}

TEST_CASE("sampling is deterministic and decodes valid rotations") {
  const DiffusionForecaster model(smallConfig());
  const auto data = syntheticWindows(20);
  REQUIRE(data.size() >= 100);
  const std::vector<StateWindow> windows(data.begin(), data.begin() + 100);
  ParameterStore s;
  model.initParameters(s, windows, 12);

  const auto a = model.forecast(s, windows, 99);
  const auto b = model.forecast(s, windows, 99);
  const auto threaded = model.forecast(s, windows, 99, 3);
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j)
      same = same && maxStateDiff(a[i][j], b[i][j]) == 0.0 &&
             maxStateDiff(a[i][j], threaded[i][j]) == 0.0;
  CHECK(same);

  int valid = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (const auto& f : model.forecast(s, windows, seed)) {
      ++total;
      bool ok = f.size() == 10;
      for (const auto& st : f) ok = ok && st.head.isValid(1e-6) && st.allFinite();
      valid += ok;
    }
  CHECK(total == 1000);
  CHECK(valid == 1000);
}

TEST_CASE("training on one static window") {
  // Statistics are fitted on the single window, as in a run on that data
  // alone. The target offsets are all zero, so normalized targets are zero
  // and the stds sit at their 1 mm floor.
  DiffusionConfig cfg;
  cfg.noise_draws = 64;
  const DiffusionForecaster model(cfg);
  const std::vector<StateWindow> one{staticWindow(13)};
  ParameterStore init;
  model.initParameters(init, one, 14);

  TrainOptions opts;
  opts.epochs = 300;
  opts.batch_size = 1;
  opts.adam.lr = 1e-3;
  const auto res = train(model, one, init, opts);
  REQUIRE(res.epoch_loss.size() == 300);
  // Measured drop is about 35%. The ideal predictor x / sqrt(1 - alpha_bar)
  // needs a step-dependent gain of up to 100, which the MLP learns slowly.
  auto window_mean = [&](std::size_t from) {
    return std::accumulate(res.epoch_loss.begin() + from, res.epoch_loss.begin() + from + 25, 0.0) /
           25.0;
  };
  CHECK(window_mean(275) < 0.75 * window_mean(0));

  const auto samples = model.forecast(res.params, one, 15);
  double err = 0.0;
  int count = 0;
  for (const auto& st : samples[0]) {
    const auto p = st.points(), q = one[0].future[0].points();
    for (std::size_t j = 0; j < p.size(); ++j, ++count) err += (p[j] - q[j]).norm();
  }
  CHECK(err / count < 0.010);

  const auto none = train(model, one, init, {0, 1, {}, 0});
  CHECK(none.params == init);
  CHECK(none.epoch_loss.empty());
  CHECK_THROWS_AS(train(model, {}, init, opts), std::invalid_argument);
}
