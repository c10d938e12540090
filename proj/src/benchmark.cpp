#include "vmf/benchmark.hpp"

#include <stdexcept>

namespace vmf {

SyntheticConfig benchmarkSyntheticConfig(std::uint64_t seed) {
  SyntheticConfig c;
  c.seed = seed;
  c.n_trajectories = 128;
  c.length = 200;
  return c;
}

BenchmarkSplit standardBenchmark(std::uint64_t seed, std::size_t train_windows,
                                 std::size_t test_windows) {
  const TrainConfig tc = deskTrainConfig();
  const SyntheticConfig sc = benchmarkSyntheticConfig(seed);
  const auto records = generateSynthetic(sc);
  const std::size_t per = windowCount(sc.length, tc.window, tc.stride);
  const std::size_t n_train = (train_windows + per - 1) / per;
  if (n_train >= records.size())
    throw std::invalid_argument("standardBenchmark: not enough trajectories for the split");

  const std::vector<TrajectoryRecord> train(records.begin(), records.begin() + n_train);
  const std::vector<TrajectoryRecord> test(records.begin() + n_train, records.end());
  BenchmarkSplit out;
  out.train = cleanAndSlice(train, tc.window, tc.stride, tc.observed, tc.max_gap);
  out.test = cleanAndSlice(test, tc.window, tc.stride, tc.observed, tc.max_gap);
  if (out.train.size() < train_windows || out.test.size() < test_windows)
    throw std::invalid_argument("standardBenchmark: split yields too few windows");
  out.train.resize(train_windows);
  out.test.resize(test_windows);
  return out;
}

TrainConfig deskTrainConfig(const std::string& model) {
  TrainConfig c;
  c.model = model;
  c.train.epochs = 100;
  for (EncoderConfig* e : {&c.diffusion.encoder, &c.regression.encoder}) {
    e->visual_tokens = 8;
    e->query_residual = true;
  }
  c.diffusion.denoiser.input_skip = true;
  c.diffusion.schedule.beta_start = 1e-3;
  c.diffusion.schedule.beta_end = 0.1;
  c.diffusion.noise_draws = 4;
  c.validate();
  return c;
}

}  // namespace vmf
