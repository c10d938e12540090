#include "vmf/train_config.hpp"

#include "vmf/errors.hpp"

#include <set>

namespace vmf {

using nlohmann::json;

void TrainConfig::validate() const {
  auto fail = [](const char* field, const std::string& why) {
    throw ValidationError(std::string("field '") + field + "': " + why);
  };
  if (model != "diffusion" && model != "regression")
    fail("model", "must be 'diffusion' or 'regression', got '" + model + "'");
  if (train.epochs < 0) fail("epochs", "must be >= 0");
  if (train.batch_size < 1) fail("batch_size", "must be positive");
  if (!(train.adam.lr > 0)) fail("lr", "must be positive");
  if (!(train.adam.beta1 >= 0 && train.adam.beta1 < 1)) fail("beta1", "must be in [0, 1)");
  if (!(train.adam.beta2 >= 0 && train.adam.beta2 < 1)) fail("beta2", "must be in [0, 1)");
  if (!(train.adam.eps > 0)) fail("eps", "must be positive");
  if (!(train.adam.weight_decay >= 0)) fail("weight_decay", "must be >= 0");
  if (window < 2) fail("window", "must be >= 2");
  if (stride < 1) fail("stride", "must be positive");
  if (observed < 1 || observed >= window) fail("observed", "must be in [1, window)");
  if (max_gap < 1) fail("max_gap", "must be positive");
}

TrainConfig trainConfigFromJson(const json& j) {
  if (!j.is_object()) throw ValidationError("training config must be a JSON object");
  TrainConfig c;
  const std::set<std::string> known = {"model", "epochs", "batch_size", "lr", "beta1", "beta2",
                                       "eps", "weight_decay", "seed", "window", "stride",
                                       "observed", "max_gap", "diffusion", "regression"};
  const std::set<std::string> integral = {"epochs", "batch_size", "seed", "window",
                                          "stride", "observed", "max_gap"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ValidationError("unknown field '" + k + "'");
    if (integral.count(k) && !v.is_number_integer())
      throw ValidationError("field '" + k + "': expected an integer");
    if (k == "model" && !v.is_string()) throw ValidationError("field 'model': expected a string");
    if (!integral.count(k) && k != "model" && k != "diffusion" && k != "regression" && !v.is_number())
      throw ValidationError("field '" + k + "': expected a number");
  }
  if (j.contains("seed") && j.at("seed").get<long long>() < 0)
    throw ValidationError("field 'seed': must be non-negative");
  c.model = j.value("model", c.model);
  c.train.epochs = j.value("epochs", c.train.epochs);
  c.train.batch_size = j.value("batch_size", c.train.batch_size);
  c.train.adam.lr = j.value("lr", c.train.adam.lr);
  c.train.adam.beta1 = j.value("beta1", c.train.adam.beta1);
  c.train.adam.beta2 = j.value("beta2", c.train.adam.beta2);
  c.train.adam.eps = j.value("eps", c.train.adam.eps);
  c.train.adam.weight_decay = j.value("weight_decay", c.train.adam.weight_decay);
  c.train.seed = j.value("seed", c.train.seed);
  c.window = j.value("window", c.window);
  c.stride = j.value("stride", c.stride);
  c.observed = j.value("observed", c.observed);
  c.max_gap = j.value("max_gap", c.max_gap);
  if (j.contains("diffusion")) {
    json d = j.at("diffusion");
    c.diffusion = diffusionConfigFromJson(d);
  }
  if (j.contains("regression")) c.regression = regressionConfigFromJson(j.at("regression"));
  c.validate();
  return c;
}

json toJson(const TrainConfig& c) {
  return {{"model", c.model},
          {"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},
          {"lr", c.train.adam.lr},
          {"beta1", c.train.adam.beta1},
          {"beta2", c.train.adam.beta2},
          {"eps", c.train.adam.eps},
          {"weight_decay", c.train.adam.weight_decay},
          {"seed", c.train.seed},
          {"window", c.window},
          {"stride", c.stride},
          {"observed", c.observed},
          {"max_gap", c.max_gap},
          {"diffusion", toJson(c.diffusion)},
          {"regression", toJson(c.regression)}};
}

std::unique_ptr<Forecaster> makeForecaster(const TrainConfig& c) {
  c.validate();
  if (c.model == "diffusion") {
    DiffusionConfig d = c.diffusion;
    d.encoder.observed_steps = c.observed;
    d.horizon = c.horizon();
    return std::make_unique<DiffusionForecaster>(d);
  }
  RegressionConfig r = c.regression;
  r.encoder.observed_steps = c.observed;
  r.horizon = c.horizon();
  return std::make_unique<RegressionForecaster>(r);
}

}  // namespace vmf
