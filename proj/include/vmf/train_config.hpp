#ifndef VMF_TRAIN_CONFIG_HPP
#define VMF_TRAIN_CONFIG_HPP

#include "vmf/baselines.hpp"
#include "vmf/diffusion.hpp"
#include "vmf/model.hpp"

#include <json.hpp>

#include <memory>
#include <string>

namespace vmf {

/// Everything the `train` command needs: windowing, model and optimizer.
/// Defaults are a desk-scale setup; the reference setup trains for 400
/// epochs with batch size 384.
struct TrainConfig {
  std::string model = "diffusion";
  TrainOptions train{};
  int window = 20;
  int stride = 10;
  int observed = 10;
  int max_gap = kDefaultMaxGap;
  DiffusionConfig diffusion{};
  RegressionConfig regression{};

  int horizon() const { return window - observed; }
  void validate() const;
};

/// Parses a config object over the defaults; unknown fields are rejected.
/// Throws ValidationError naming the field.
TrainConfig trainConfigFromJson(const nlohmann::json& j);
nlohmann::json toJson(const TrainConfig& c);

/// The configured forecaster, with its observed/horizon lengths taken from
/// the windowing fields.
std::unique_ptr<Forecaster> makeForecaster(const TrainConfig& c);

}  // namespace vmf

#endif  // VMF_TRAIN_CONFIG_HPP
