#include "vmf/diffusion.hpp"

#include "vmf/errors.hpp"

#include <cmath>
#include <set>

namespace vmf {

using nlohmann::json;

NoiseSchedule buildSchedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("buildSchedule: T must be >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw std::invalid_argument("buildSchedule: need 0 < beta_start <= beta_end < 1, got " +
                                std::to_string(beta_start) + ", " + std::to_string(beta_end));
  NoiseSchedule s;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps);
  double prod = 1.0;
  for (int k = 0; k < steps; ++k) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(k) / (steps - 1);
    s.beta[k] = beta_start + f * (beta_end - beta_start);
    s.alpha[k] = 1.0 - s.beta[k];
    prod *= s.alpha[k];
    s.alpha_bar[k] = prod;
  }
  return s;
}

namespace {

void checkStep(int k, const NoiseSchedule& s, const char* who) {
  if (k < 0 || k >= s.steps())
    throw std::invalid_argument(std::string(who) + ": step " + std::to_string(k) +
                                " out of range [0, " + std::to_string(s.steps()) + ")");
}

}  // namespace

Matrix forwardSample(const Matrix& x0, int k, const Matrix& eps, const NoiseSchedule& schedule) {
  checkStep(k, schedule, "forwardSample");
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols())
    throw ShapeError("forwardSample: x0 " + shapeString(x0) + " vs eps " + shapeString(eps));
  const double ab = schedule.alpha_bar[k];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

Matrix reverseStep(const Matrix& xk, int k, const Matrix& eps_pred, const Matrix& z,
                   const NoiseSchedule& schedule) {
  checkStep(k, schedule, "reverseStep");
  if (xk.rows() != eps_pred.rows() || xk.cols() != eps_pred.cols())
    throw ShapeError("reverseStep: x " + shapeString(xk) + " vs eps " + shapeString(eps_pred));
  const double beta = schedule.beta[k];
  Matrix mean = (xk - (beta / std::sqrt(1.0 - schedule.alpha_bar[k])) * eps_pred) /
                std::sqrt(schedule.alpha[k]);
  if (k > 0) {
    if (z.rows() != xk.rows() || z.cols() != xk.cols())
      throw ShapeError("reverseStep: x " + shapeString(xk) + " vs z " + shapeString(z));
    mean += std::sqrt(beta) * z;
  }
  return mean;
}

// ---------------------------------------------------------------------------

json toJson(const DiffusionConfig& c) {
  return {{"encoder", toJson(c.encoder)},
          {"denoiser",
           {{"hidden", c.denoiser.hidden},
            {"time_dim", c.denoiser.time_dim},
            {"input_skip", c.denoiser.input_skip}}},
          {"schedule",
           {{"steps", c.schedule.steps},
            {"beta_start", c.schedule.beta_start},
            {"beta_end", c.schedule.beta_end}}},
          {"horizon", c.horizon},
          {"noise_draws", c.noise_draws},
          {"whiten_targets", c.whiten_targets}};
}

DiffusionConfig diffusionConfigFromJson(const json& j) {
  if (!j.is_object()) throw ValidationError("diffusion config must be an object");
  DiffusionConfig c;
  for (const auto& [k, v] : j.items())
    if (!std::set<std::string>{"encoder", "denoiser", "schedule", "horizon", "noise_draws", "whiten_targets"}.count(k))
      throw ValidationError("unknown diffusion field '" + k + "'");
  try {
    if (j.contains("encoder")) c.encoder = encoderConfigFromJson(j.at("encoder"), c.encoder);
    if (j.contains("denoiser")) {
      const auto& d = j.at("denoiser");
      for (const auto& [k, v] : d.items())
        if (k != "hidden" && k != "time_dim" && k != "input_skip")
          throw ValidationError("unknown denoiser field '" + k + "'");
      c.denoiser.hidden = d.value("hidden", c.denoiser.hidden);
      c.denoiser.time_dim = d.value("time_dim", c.denoiser.time_dim);
      c.denoiser.input_skip = d.value("input_skip", c.denoiser.input_skip);
    }
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      for (const auto& [k, v] : s.items())
        if (k != "steps" && k != "beta_start" && k != "beta_end")
          throw ValidationError("unknown schedule field '" + k + "'");
      c.schedule.steps = s.value("steps", c.schedule.steps);
      c.schedule.beta_start = s.value("beta_start", c.schedule.beta_start);
      c.schedule.beta_end = s.value("beta_end", c.schedule.beta_end);
    }
    c.horizon = j.value("horizon", c.horizon);
    c.noise_draws = j.value("noise_draws", c.noise_draws);
    c.whiten_targets = j.value("whiten_targets", c.whiten_targets);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("diffusion config: ") + e.what());
  }
  if (c.horizon < 1) throw ValidationError("field 'horizon': must be positive");
  if (c.noise_draws < 1) throw ValidationError("field 'noise_draws': must be positive");
  if (c.denoiser.hidden.empty()) throw ValidationError("field 'denoiser.hidden': must be non-empty");
  for (int h : c.denoiser.hidden)
    if (h < 1) throw ValidationError("field 'denoiser.hidden': widths must be positive");
  if (c.denoiser.time_dim < 2 || c.denoiser.time_dim % 2)
    throw ValidationError("field 'denoiser.time_dim': must be even and >= 2");
  try {
    buildSchedule(c.schedule.steps, c.schedule.beta_start, c.schedule.beta_end);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("field 'schedule': ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------

std::uint64_t windowSeed(std::uint64_t seed, std::size_t index) {
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ULL + index + 0x632be59bd9b4e019ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

DiffusionForecaster::DiffusionForecaster(DiffusionConfig cfg)
    : cfg_(std::move(cfg)),
      schedule_(buildSchedule(cfg_.schedule.steps, cfg_.schedule.beta_start,
                              cfg_.schedule.beta_end)),
      encoder_(cfg_.encoder, "enc.") {}

json DiffusionForecaster::configJson() const {
  json j = toJson(cfg_);
  j["model"] = kind();
  return j;
}

void DiffusionForecaster::initParameters(ParameterStore& store,
                                         const std::vector<StateWindow>& data,
                                         std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  encoder_.initParameters(store, rng);
  int fan_in = cfg_.horizon * kFutureWidth + cfg_.denoiser.time_dim + encoder_.config().conditioningSize();
  for (std::size_t i = 0; i < cfg_.denoiser.hidden.size(); ++i) {
    initAffine(store, "den.l" + std::to_string(i), fan_in, cfg_.denoiser.hidden[i], rng);
    fan_in = cfg_.denoiser.hidden[i];
  }
  initAffine(store, "den.out", fan_in, cfg_.horizon * kFutureWidth, rng);
  fitFutureStats(store, data, cfg_.horizon, cfg_.whiten_targets);
}

Var DiffusionForecaster::predictNoise(Tape& tape, const ParameterStore& store, Var x,
                                      std::span<const int> steps, Var cond) const {
  if (static_cast<Eigen::Index>(steps.size()) != x.rows())
    throw ShapeError("predictNoise: " + std::to_string(steps.size()) + " steps for " +
                     std::to_string(x.rows()) + " rows");
  Matrix temb(x.rows(), cfg_.denoiser.time_dim);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    checkStep(steps[r], schedule_, "predictNoise");
    temb.row(r) = sinusoidalEmbedding(steps[r], cfg_.denoiser.time_dim);
  }
  Var h = concatCols({x, tape.constant(std::move(temb)), cond});
  auto layer = [&](Var in, const std::string& name) {
    return addRow(matmul(in, tape.parameter(store, name + ".w")), tape.parameter(store, name + ".b"));
  };
  for (std::size_t i = 0; i < cfg_.denoiser.hidden.size(); ++i)
    h = smoothNonlinearity(layer(h, "den.l" + std::to_string(i)));
  Var out = layer(h, "den.out");
  if (cfg_.denoiser.input_skip) {
    Matrix skip = x.value();
    for (Eigen::Index r = 0; r < skip.rows(); ++r)
      skip.row(r) *= std::sqrt(1.0 - schedule_.alpha_bar[steps[r]]);
    // x is never a trainable input, so the skip is a constant offset
    out = out + tape.constant(std::move(skip));
  }
  return out;
}

Var DiffusionForecaster::lossGraph(Tape& tape, const ParameterStore& store,
                                   const EncoderInputs& inputs, const Matrix& x0,
                                   std::span<const int> steps, const Matrix& eps) const {
  if (inputs.batch == 0 || x0.rows() % inputs.batch != 0 || eps.rows() != x0.rows() ||
      eps.cols() != x0.cols())
    throw ShapeError("lossGraph: x0 " + shapeString(x0) + ", eps " + shapeString(eps) +
                     " for batch " + std::to_string(inputs.batch));
  Matrix noisy(x0.rows(), x0.cols());
  for (Eigen::Index r = 0; r < x0.rows(); ++r)
    noisy.row(r) = forwardSample(Matrix(x0.row(r)), steps[r], Matrix(eps.row(r)), schedule_);
  Var cond = encoder_.encode(tape, store, inputs);
  const Eigen::Index draws = x0.rows() / inputs.batch;
  if (draws > 1) {
    Matrix repeat = Matrix::Zero(x0.rows(), inputs.batch);
    for (Eigen::Index r = 0; r < x0.rows(); ++r) repeat(r, r / draws) = 1.0;
    cond = matmul(tape.constant(std::move(repeat)), cond);
  }
  const Var pred = predictNoise(tape, store, tape.constant(std::move(noisy)), steps, cond);
  return meanSquaredError(pred, tape.constant(eps));
}

Var DiffusionForecaster::batchLoss(Tape& tape, const ParameterStore& store,
                                   std::span<const StateWindow* const> batch,
                                   std::mt19937_64& rng) const {
  const EncoderInputs inputs = makeEncoderInputs(batch, cfg_.encoder.observed_steps);
  const Matrix targets = normalizeFutures(store, futureTargets(batch, cfg_.horizon));
  const int draws = cfg_.noise_draws;
  Matrix x0(targets.rows() * draws, targets.cols());
  for (Eigen::Index r = 0; r < x0.rows(); ++r) x0.row(r) = targets.row(r / draws);
  std::uniform_int_distribution<int> pick(0, schedule_.steps() - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<int> steps(x0.rows());
  for (auto& k : steps) k = pick(rng);
  Matrix eps(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = gauss(rng);
  return lossGraph(tape, store, inputs, x0, steps, eps);
}

DiffusionForecaster::LossAndGrad DiffusionForecaster::denoisingLoss(
    const ParameterStore& store, std::span<const StateWindow* const> batch,
    std::mt19937_64& rng) const {
  Tape tape;
  const Var loss = batchLoss(tape, store, batch, rng);
  LossAndGrad out;
  out.loss = loss.value()(0, 0);
  out.grads = tape.backward(loss, store);
  return out;
}

Matrix DiffusionForecaster::sampleNormalized(const ParameterStore& store, const Matrix& cond,
                                             std::span<const std::uint64_t> row_seeds) const {
  const Eigen::Index rows = cond.rows();
  if (static_cast<Eigen::Index>(row_seeds.size()) != rows)
    throw ShapeError("sampleNormalized: " + std::to_string(row_seeds.size()) + " seeds for " +
                     std::to_string(rows) + " rows");
  const Eigen::Index width = cfg_.horizon * kFutureWidth;
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(rows);
  for (auto s : row_seeds) rngs.emplace_back(s);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&]() {
    Matrix z(rows, width);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < width; ++c) z(r, c) = gauss(rngs[r]);
    return z;
  };

  Matrix x = draw();
  std::vector<int> steps(rows);
  for (int k = schedule_.steps() - 1; k >= 0; --k) {
    std::fill(steps.begin(), steps.end(), k);
    try {
      Tape tape;
      const Var eps = predictNoise(tape, store, tape.constant(x), steps, tape.constant(cond));
      const Matrix z = k > 0 ? draw() : Matrix();
      x = reverseStep(x, k, eps.value(), z, schedule_);
      if (!x.allFinite()) throw NumericError("non-finite sample");
    } catch (const NumericError& e) {
      throw NumericError("sampling failed at reverse step " + std::to_string(k) + ": " + e.what());
    }
  }
  return x;
}

std::vector<std::vector<Stated>> DiffusionForecaster::forecast(
    const ParameterStore& store, const std::vector<StateWindow>& windows, std::uint64_t seed,
    int threads) const {
  std::vector<std::vector<Stated>> out(windows.size());
  parallelChunks(windows.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<const StateWindow*> chunk;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = begin; i < end; ++i) {
      chunk.push_back(&windows[i]);
      seeds.push_back(windowSeed(seed, i));
    }
    const EncoderInputs inputs = makeEncoderInputs(chunk, cfg_.encoder.observed_steps);
    Matrix cond;
    {
      Tape tape;
      cond = encoder_.encode(tape, store, inputs).value();
    }
    const Matrix flat = denormalizeFutures(store, sampleNormalized(store, cond, seeds)) +
                        anchorRows(chunk, cfg_.horizon);
    for (std::size_t i = begin; i < end; ++i) {
      const Matrix future = ConstMatrixMap(flat.row(i - begin).data(), cfg_.horizon, kFutureWidth);
      out[i] = tensorToStates(future);
    }
  });
  return out;
}

}  // namespace vmf
