// Denoising diffusion over flattened future trajectories, conditioned on the
// encoder output. Diffusion steps are indexed k in [0, T).

#ifndef VMF_DIFFUSION_HPP
#define VMF_DIFFUSION_HPP

#include "vmf/encoder.hpp"
#include "vmf/model.hpp"

#include <json.hpp>

#include <random>
#include <vector>

namespace vmf {

struct NoiseSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  int steps() const { return static_cast<int>(beta.size()); }
};

/// Linearly spaced betas from beta_start to beta_end over T steps.
NoiseSchedule buildSchedule(int steps, double beta_start, double beta_end);

/// sqrt(alpha_bar[k]) * x0 + sqrt(1 - alpha_bar[k]) * eps
Matrix forwardSample(const Matrix& x0, int k, const Matrix& eps, const NoiseSchedule& schedule);

/// Posterior mean (1/sqrt(alpha_k)) (x_k - beta_k / sqrt(1 - alpha_bar_k) eps_pred),
/// plus sqrt(beta_k) * z for k > 0.
Matrix reverseStep(const Matrix& xk, int k, const Matrix& eps_pred, const Matrix& z,
                   const NoiseSchedule& schedule);

struct DenoiserConfig {
  std::vector<int> hidden = {256, 256};
  int time_dim = 32;
  // Adds sqrt(1 - alpha_bar[k]) * x to the network output, so the noise
  // estimate tracks the input at high noise levels without having to be
  // learned. Off means zero weights give a zero prediction.
  bool input_skip = false;
};

struct ScheduleConfig {
  int steps = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct DiffusionConfig {
  EncoderConfig encoder;
  DenoiserConfig denoiser;
  ScheduleConfig schedule;
  int horizon = 10;
  // (k, eps) pairs drawn per window in each training batch. The encoder runs
  // once per window and its output is shared by the draws.
  int noise_draws = 1;
  // Diffuse in whitened target coordinates. Trajectory coordinates are
  // strongly correlated, and after whitening the input skip is already the
  // best linear noise estimate.
  bool whiten_targets = false;
};

nlohmann::json toJson(const DiffusionConfig& c);
DiffusionConfig diffusionConfigFromJson(const nlohmann::json& j);

class DiffusionForecaster : public Forecaster {
 public:
  explicit DiffusionForecaster(DiffusionConfig cfg);

  std::string kind() const override { return "diffusion"; }
  int horizon() const override { return cfg_.horizon; }
  int observedSteps() const override { return cfg_.encoder.observed_steps; }
  nlohmann::json configJson() const override;

  const DiffusionConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const ConditioningEncoder& encoder() const { return encoder_; }

  void initParameters(ParameterStore& store, const std::vector<StateWindow>& data,
                      std::uint64_t seed) const override;

  /// eps_theta(x_k, k, c) for a batch: x is B x (horizon*30) in normalized
  /// units, one diffusion step per row.
  Var predictNoise(Tape& tape, const ParameterStore& store, Var x, std::span<const int> steps,
                   Var cond) const;

  /// Denoising loss for fixed steps and noise (normalized units). x0 may hold
  /// several consecutive rows per window; they share that window's condition.
  Var lossGraph(Tape& tape, const ParameterStore& store, const EncoderInputs& inputs,
                const Matrix& x0, std::span<const int> steps, const Matrix& eps) const;

  /// Draws k ~ U[0, T) per window and eps ~ N(0, I).
  Var batchLoss(Tape& tape, const ParameterStore& store, std::span<const StateWindow* const> batch,
                std::mt19937_64& rng) const override;

  struct LossAndGrad {
    double loss = 0;
    Gradients grads;
  };
  LossAndGrad denoisingLoss(const ParameterStore& store, std::span<const StateWindow* const> batch,
                            std::mt19937_64& rng) const;

  /// Reverse chain from N(0, I) for each conditioning row. Every row draws
  /// from its own stream seeded by `row_seeds`. Returns normalized samples.
  Matrix sampleNormalized(const ParameterStore& store, const Matrix& cond,
                          std::span<const std::uint64_t> row_seeds) const;

  std::vector<std::vector<Stated>> forecast(const ParameterStore& store,
                                            const std::vector<StateWindow>& windows,
                                            std::uint64_t seed, int threads = 1) const override;

 private:
  DiffusionConfig cfg_;
  NoiseSchedule schedule_;
  ConditioningEncoder encoder_;
};

/// Seed for window i of a forecast run.
std::uint64_t windowSeed(std::uint64_t seed, std::size_t index);

}  // namespace vmf

#endif  // VMF_DIFFUSION_HPP
