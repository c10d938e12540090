// Standard synthetic benchmark: a fixed train/test split of generated
// trajectories plus the desk-scale training setup evaluated on it.

#ifndef VMF_BENCHMARK_HPP
#define VMF_BENCHMARK_HPP

#include "vmf/train_config.hpp"

#include <cstdint>
#include <vector>

namespace vmf {

struct BenchmarkSplit {
  std::vector<StateWindow> train;
  std::vector<StateWindow> test;
};

inline constexpr std::uint64_t kBenchmarkSeed = 42;
inline constexpr std::size_t kBenchmarkTrainWindows = 2000;
inline constexpr std::size_t kBenchmarkTestWindows = 400;

/// Synthetic generator settings used by the benchmark.
SyntheticConfig benchmarkSyntheticConfig(std::uint64_t seed = kBenchmarkSeed);

/// Trajectories are split before windowing so no trajectory contributes to
/// both sides. Window lists are truncated to the requested sizes.
BenchmarkSplit standardBenchmark(std::uint64_t seed = kBenchmarkSeed,
                                 std::size_t train_windows = kBenchmarkTrainWindows,
                                 std::size_t test_windows = kBenchmarkTestWindows);

/// Desk-scale training configuration for `model` ("diffusion" or
/// "regression"). Matches configs/train.json.
TrainConfig deskTrainConfig(const std::string& model = "diffusion");

}  // namespace vmf

#endif  // VMF_BENCHMARK_HPP
