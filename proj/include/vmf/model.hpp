#ifndef VMF_MODEL_HPP
#define VMF_MODEL_HPP

#include "vmf/data.hpp"
#include "vmf/tape.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace vmf {

/// Per-step future layout: head position (3), head rotation 6D (6), gaze
/// endpoint (3), joints (18).
inline constexpr int kFutureWidth = 30;

/// Horizon x 30 matrix of future states in the canonical frame.
Matrix futureToTensor(std::span<const Stated> states);
/// Inverse of futureToTensor; 6D rotations are decoded by Gram-Schmidt.
std::vector<Stated> tensorToStates(const Matrix& future);

/// Row-stacked flattened futures, B x (horizon * 30).
Matrix flattenFutures(std::span<const StateWindow* const> windows, int horizon);

/// The last observed state tiled over the horizon, B x (horizon * 30).
Matrix anchorRows(std::span<const StateWindow* const> windows, int horizon);
/// Learning target: flattened futures minus anchorRows. Predicting offsets
/// from the last observed state means an untrained model starts out near the
/// constant-pose forecast instead of the dataset mean.
Matrix futureTargets(std::span<const StateWindow* const> windows, int horizon);

/// Per-coordinate mean and standard deviation of futureTargets, stored as
/// "stats.future_mean" / "stats.future_std". With `whiten`, normalization
/// instead projects onto the principal axes of the targets and scales each
/// to unit variance (eigenvalues floored at the squared std floor).
void fitFutureStats(ParameterStore& store, const std::vector<StateWindow>& windows, int horizon,
                    bool whiten = false);
Matrix normalizeFutures(const ParameterStore& store, const Matrix& flat);
Matrix denormalizeFutures(const ParameterStore& store, const Matrix& flat);

/// Learned forecaster trained by minibatch gradient descent.
class Forecaster {
 public:
  virtual ~Forecaster() = default;

  virtual std::string kind() const = 0;
  virtual int horizon() const = 0;
  virtual int observedSteps() const = 0;
  virtual nlohmann::json configJson() const = 0;

  /// Fresh weights plus data statistics.
  virtual void initParameters(ParameterStore& store, const std::vector<StateWindow>& data,
                              std::uint64_t seed) const = 0;

  /// Scalar training loss over one minibatch.
  virtual Var batchLoss(Tape& tape, const ParameterStore& store,
                        std::span<const StateWindow* const> batch,
                        std::mt19937_64& rng) const = 0;

  /// One forecast per window. Results do not depend on `threads`.
  virtual std::vector<std::vector<Stated>> forecast(const ParameterStore& store,
                                                    const std::vector<StateWindow>& windows,
                                                    std::uint64_t seed, int threads = 1) const = 0;
};

/// Builds the forecaster described by a configJson() document.
std::unique_ptr<Forecaster> makeForecaster(const nlohmann::json& config);

struct TrainOptions {
  int epochs = 60;
  int batch_size = 64;
  AdamWOptions adam{};
  std::uint64_t seed = 0;
};

struct TrainResult {
  ParameterStore params;
  std::vector<double> epoch_loss;
};

/// Shuffled minibatch AdamW loop. The optimizer step count continues from
/// `initial.version()`. With zero epochs the parameters come back unchanged.
TrainResult train(const Forecaster& model, const std::vector<StateWindow>& data,
                  ParameterStore initial, const TrainOptions& opts,
                  const std::function<void(int epoch, double loss)>& on_epoch = nullptr);

/// Splits [0, n) into contiguous chunks and runs `fn(begin, end)` on up to
/// `threads` threads.
void parallelChunks(std::size_t n, int threads,
                    const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace vmf

#endif  // VMF_MODEL_HPP
