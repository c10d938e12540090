#include "vmf/model.hpp"

#include "vmf/baselines.hpp"
#include "vmf/diffusion.hpp"
#include "vmf/errors.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

namespace vmf {

namespace {

constexpr double kStdFloor = 1e-3;
const std::string kMeanName = std::string(ParameterStore::kStatsPrefix) + "future_mean";
const std::string kStdName = std::string(ParameterStore::kStatsPrefix) + "future_std";
const std::string kWhitenName = std::string(ParameterStore::kStatsPrefix) + "future_whiten";
const std::string kColorName = std::string(ParameterStore::kStatsPrefix) + "future_color";

}  // namespace

Matrix futureToTensor(std::span<const Stated> states) {
  Matrix out(static_cast<Eigen::Index>(states.size()), kFutureWidth);
  for (Eigen::Index t = 0; t < out.rows(); ++t) {
    const Stated& s = states[t];
    out.row(t).segment<3>(0) = s.head.position.transpose();
    out.row(t).segment<6>(3) = rotationTo6D(s.head.rotation).transpose();
    out.row(t).segment<3>(9) = s.gaze.transpose();
    for (int j = 0; j < kNumJoints; ++j) out.row(t).segment<3>(12 + 3 * j) = s.joints[j].transpose();
  }
  return out;
}

std::vector<Stated> tensorToStates(const Matrix& future) {
  if (future.cols() != kFutureWidth)
    throw ShapeError("tensorToStates: expected width 30, got " + shapeString(future));
  std::vector<Stated> out(static_cast<std::size_t>(future.rows()));
  for (Eigen::Index t = 0; t < future.rows(); ++t) {
    Stated& s = out[t];
    s.head.position = future.row(t).segment<3>(0).transpose();
    const Eigen::Matrix<double, 6, 1> r6 = future.row(t).segment<6>(3).transpose();
    s.head.rotation = rotationFrom6D(r6);
    s.gaze = future.row(t).segment<3>(9).transpose();
    for (int j = 0; j < kNumJoints; ++j) s.joints[j] = future.row(t).segment<3>(12 + 3 * j).transpose();
  }
  return out;
}

Matrix flattenFutures(std::span<const StateWindow* const> windows, int horizon) {
  Matrix out(static_cast<Eigen::Index>(windows.size()), horizon * kFutureWidth);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const auto& fut = windows[i]->future;
    if (static_cast<int>(fut.size()) != horizon)
      throw ShapeError("window has " + std::to_string(fut.size()) + " future steps, model expects " +
                       std::to_string(horizon));
    const Matrix t = futureToTensor(fut);
    out.row(i) = ConstMatrixMap(t.data(), 1, t.size());
  }
  return out;
}

Matrix anchorRows(std::span<const StateWindow* const> windows, int horizon) {
  Matrix out(static_cast<Eigen::Index>(windows.size()), horizon * kFutureWidth);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const auto& obs = windows[i]->observed;
    if (obs.empty()) throw ShapeError("window has no observed states");
    const Matrix last = futureToTensor(std::span<const Stated>(&obs.back(), 1));
    out.row(i) = last.replicate(1, horizon);
  }
  return out;
}

Matrix futureTargets(std::span<const StateWindow* const> windows, int horizon) {
  return flattenFutures(windows, horizon) - anchorRows(windows, horizon);
}

void fitFutureStats(ParameterStore& store, const std::vector<StateWindow>& windows, int horizon,
                    bool whiten) {
  const Eigen::Index width = horizon * kFutureWidth;
  Matrix mean = Matrix::Zero(1, width);
  Matrix stdev = Matrix::Ones(1, width);
  Matrix centered;
  if (!windows.empty()) {
    std::vector<const StateWindow*> ptrs;
    for (const auto& w : windows) ptrs.push_back(&w);
    const Matrix flat = futureTargets(ptrs, horizon);
    mean = flat.colwise().mean();
    centered = flat.rowwise() - mean.row(0);
    stdev = (centered.array().square().colwise().sum() / static_cast<double>(flat.rows()))
                .sqrt()
                .max(kStdFloor);
  }
  store.set(kMeanName, mean);
  store.set(kStdName, stdev);
  if (!whiten) return;

  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(width, width);
  if (centered.rows() > 0)
    cov = (centered.transpose() * centered) / static_cast<double>(centered.rows());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd scale = eig.eigenvalues().cwiseMax(kStdFloor * kStdFloor).cwiseSqrt();
  const Eigen::MatrixXd& u = eig.eigenvectors();
  store.set(kWhitenName, Matrix(u * scale.cwiseInverse().asDiagonal()));
  store.set(kColorName, Matrix(scale.asDiagonal() * u.transpose()));
}

Matrix normalizeFutures(const ParameterStore& store, const Matrix& flat) {
  const auto mean = store.get(kMeanName).matrix();
  const auto sd = store.get(kStdName).matrix();
  if (flat.cols() != mean.cols())
    throw ShapeError("normalizeFutures: " + shapeString(flat) + " vs stats width " +
                     std::to_string(mean.cols()));
  if (store.contains(kWhitenName))
    return (flat.rowwise() - mean.row(0)) * store.get(kWhitenName).matrix();
  return (flat.rowwise() - mean.row(0)).array().rowwise() / sd.row(0).array();
}

Matrix denormalizeFutures(const ParameterStore& store, const Matrix& flat) {
  const auto mean = store.get(kMeanName).matrix();
  const auto sd = store.get(kStdName).matrix();
  if (flat.cols() != mean.cols())
    throw ShapeError("denormalizeFutures: " + shapeString(flat) + " vs stats width " +
                     std::to_string(mean.cols()));
  Matrix out = store.contains(kColorName) ? Matrix(flat * store.get(kColorName).matrix())
                                           : Matrix(flat.array().rowwise() * sd.row(0).array());
  return out.rowwise() + mean.row(0);
}

TrainResult train(const Forecaster& model, const std::vector<StateWindow>& data,
                  ParameterStore initial, const TrainOptions& opts,
                  const std::function<void(int, double)>& on_epoch) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (opts.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (opts.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");

  TrainResult result;
  result.params = std::move(initial);
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  long step = result.params.version();

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += opts.batch_size) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(opts.batch_size));
      std::vector<const StateWindow*> batch;
      batch.reserve(e - b);
      for (std::size_t i = b; i < e; ++i) batch.push_back(&data[order[i]]);
      Tape tape;
      const Var loss = model.batchLoss(tape, result.params, batch, rng);
      const Gradients grads = tape.backward(loss, result.params);
      adamwStep(result.params, grads, opts.adam, ++step);
      total += loss.value()(0, 0) * static_cast<double>(e - b);
    }
    const double mean = total / static_cast<double>(data.size());
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

void parallelChunks(std::size_t n, int threads,
                    const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t t = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, n);
  if (t == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  const std::size_t per = (n + t - 1) / t;
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t b = i * per, e = std::min(n, b + per);
    if (b >= e) break;
    pool.emplace_back([&, i, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

std::unique_ptr<Forecaster> makeForecaster(const nlohmann::json& config) {
  if (!config.is_object() || !config.contains("model") || !config.at("model").is_string())
    throw ValidationError("model config needs a string field 'model'");
  const auto kind = config.at("model").get<std::string>();
  nlohmann::json rest = config;
  rest.erase("model");
  if (kind == "diffusion")
    return std::make_unique<DiffusionForecaster>(diffusionConfigFromJson(rest));
  if (kind == "regression")
    return std::make_unique<RegressionForecaster>(regressionConfigFromJson(rest));
  throw ValidationError("field 'model': unknown model '" + kind + "'");
}

}  // namespace vmf
