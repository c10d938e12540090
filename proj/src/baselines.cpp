#include "vmf/baselines.hpp"

#include "vmf/errors.hpp"

#include <set>

namespace vmf {

using nlohmann::json;

std::vector<Stated> constantPose(std::span<const Stated> observed, int horizon) {
  if (observed.empty()) throw std::invalid_argument("constantPose: no observed states");
  if (horizon < 0) throw std::invalid_argument("constantPose: negative horizon");
  return std::vector<Stated>(static_cast<std::size_t>(horizon), observed.back());
}

std::vector<Stated> constantVelocity(std::span<const Stated> observed, int horizon) {
  if (observed.size() < 2)
    throw std::invalid_argument("constantVelocity: needs at least 2 observed states, got " +
                                std::to_string(observed.size()));
  if (horizon < 0) throw std::invalid_argument("constantVelocity: negative horizon");
  const Stated& last = observed[observed.size() - 1];
  const Stated& prev = observed[observed.size() - 2];

  const bool same_rotation = last.head.rotation == prev.head.rotation;
  const Matrix3 rel = same_rotation ? Matrix3::Identity()
                                    : Matrix3(last.head.rotation * prev.head.rotation.transpose());

  std::vector<Stated> out;
  out.reserve(horizon);
  Matrix3 rel_pow = Matrix3::Identity();
  for (int k = 1; k <= horizon; ++k) {
    const double kk = static_cast<double>(k);
    Stated s;
    s.head.position = last.head.position + kk * (last.head.position - prev.head.position);
    s.gaze = last.gaze + kk * (last.gaze - prev.gaze);
    for (int j = 0; j < kNumJoints; ++j)
      s.joints[j] = last.joints[j] + kk * (last.joints[j] - prev.joints[j]);
    if (same_rotation) {
      s.head.rotation = last.head.rotation;
    } else {
      rel_pow = rel * rel_pow;
      s.head.rotation = projectToSO3(Matrix3(rel_pow * last.head.rotation));
    }
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------

json toJson(const RegressionConfig& c) {
  return {{"encoder", toJson(c.encoder)}, {"hidden", c.hidden}, {"horizon", c.horizon}};
}

RegressionConfig regressionConfigFromJson(const json& j) {
  if (!j.is_object()) throw ValidationError("regression config must be an object");
  RegressionConfig c;
  for (const auto& [k, v] : j.items())
    if (!std::set<std::string>{"encoder", "hidden", "horizon"}.count(k))
      throw ValidationError("unknown regression field '" + k + "'");
  try {
    if (j.contains("encoder")) c.encoder = encoderConfigFromJson(j.at("encoder"), c.encoder);
    c.hidden = j.value("hidden", c.hidden);
    c.horizon = j.value("horizon", c.horizon);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("regression config: ") + e.what());
  }
  if (c.horizon < 1) throw ValidationError("field 'horizon': must be positive");
  for (int h : c.hidden)
    if (h < 1) throw ValidationError("field 'hidden': widths must be positive");
  return c;
}

RegressionForecaster::RegressionForecaster(RegressionConfig cfg)
    : cfg_(std::move(cfg)), encoder_(cfg_.encoder, "reg.enc.") {}

json RegressionForecaster::configJson() const {
  json j = toJson(cfg_);
  j["model"] = kind();
  return j;
}

void RegressionForecaster::initParameters(ParameterStore& store,
                                          const std::vector<StateWindow>& data,
                                          std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  encoder_.initParameters(store, rng);
  int fan_in = encoder_.config().conditioningSize();
  for (std::size_t i = 0; i < cfg_.hidden.size(); ++i) {
    initAffine(store, "reg.head.l" + std::to_string(i), fan_in, cfg_.hidden[i], rng);
    fan_in = cfg_.hidden[i];
  }
  initAffine(store, "reg.head.out", fan_in, cfg_.horizon * kFutureWidth, rng);
  fitFutureStats(store, data, cfg_.horizon);
}

Var RegressionForecaster::predict(Tape& tape, const ParameterStore& store,
                                  const EncoderInputs& inputs) const {
  Var h = encoder_.encode(tape, store, inputs);
  auto layer = [&](Var in, const std::string& name) {
    return addRow(matmul(in, tape.parameter(store, name + ".w")), tape.parameter(store, name + ".b"));
  };
  for (std::size_t i = 0; i < cfg_.hidden.size(); ++i)
    h = smoothNonlinearity(layer(h, "reg.head.l" + std::to_string(i)));
  return layer(h, "reg.head.out");
}

Var RegressionForecaster::batchLoss(Tape& tape, const ParameterStore& store,
                                    std::span<const StateWindow* const> batch,
                                    std::mt19937_64&) const {
  const EncoderInputs inputs = makeEncoderInputs(batch, cfg_.encoder.observed_steps);
  const Matrix target = normalizeFutures(store, futureTargets(batch, cfg_.horizon));
  return meanSquaredError(predict(tape, store, inputs), tape.constant(target));
}

std::vector<std::vector<Stated>> RegressionForecaster::forecast(
    const ParameterStore& store, const std::vector<StateWindow>& windows, std::uint64_t,
    int threads) const {
  std::vector<std::vector<Stated>> out(windows.size());
  parallelChunks(windows.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<const StateWindow*> chunk;
    for (std::size_t i = begin; i < end; ++i) chunk.push_back(&windows[i]);
    Tape tape;
    const Matrix flat =
        denormalizeFutures(
            store, predict(tape, store, makeEncoderInputs(chunk, cfg_.encoder.observed_steps)).value()) +
        anchorRows(chunk, cfg_.horizon);
    for (std::size_t i = begin; i < end; ++i)
      out[i] = tensorToStates(ConstMatrixMap(flat.row(i - begin).data(), cfg_.horizon, kFutureWidth));
  });
  return out;
}

}  // namespace vmf
