#ifndef VMF_BASELINES_HPP
#define VMF_BASELINES_HPP

#include "vmf/encoder.hpp"
#include "vmf/model.hpp"

#include <span>
#include <vector>

namespace vmf {

/// Repeats the last observed state for every future step.
std::vector<Stated> constantPose(std::span<const Stated> observed, int horizon);

/// Extrapolates the last observed transition: positions linearly, head
/// rotation by repeating the last relative rotation. Needs two observed
/// states.
std::vector<Stated> constantVelocity(std::span<const Stated> observed, int horizon);

struct RegressionConfig {
  EncoderConfig encoder;
  std::vector<int> hidden = {256};
  int horizon = 10;
};

nlohmann::json toJson(const RegressionConfig& c);
RegressionConfig regressionConfigFromJson(const nlohmann::json& j);

/// Conditioning encoder followed by a feed-forward head that maps c straight
/// to the flattened future, trained with mean squared error.
class RegressionForecaster : public Forecaster {
 public:
  explicit RegressionForecaster(RegressionConfig cfg);

  std::string kind() const override { return "regression"; }
  int horizon() const override { return cfg_.horizon; }
  int observedSteps() const override { return cfg_.encoder.observed_steps; }
  nlohmann::json configJson() const override;
  const RegressionConfig& config() const { return cfg_; }

  void initParameters(ParameterStore& store, const std::vector<StateWindow>& data,
                      std::uint64_t seed) const override;

  /// Normalized B x (horizon*30) prediction.
  Var predict(Tape& tape, const ParameterStore& store, const EncoderInputs& inputs) const;

  Var batchLoss(Tape& tape, const ParameterStore& store, std::span<const StateWindow* const> batch,
                std::mt19937_64& rng) const override;

  std::vector<std::vector<Stated>> forecast(const ParameterStore& store,
                                            const std::vector<StateWindow>& windows,
                                            std::uint64_t seed, int threads = 1) const override;

 private:
  RegressionConfig cfg_;
  ConditioningEncoder encoder_;
};

}  // namespace vmf

#endif  // VMF_BASELINES_HPP
