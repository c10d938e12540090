#ifndef VMF_DATA_HPP
#define VMF_DATA_HPP

#include "vmf/kinematics.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vmf {

inline constexpr int kVisualDim = 128;
/// Rate of the visual-feature grid, independent of the kinematic rate.
inline constexpr double kVisualFrameRate = 4.0;
inline constexpr int kSchemaVersion = 1;

/// A recorded (or synthesized) sequence of visuomotor states.
struct TrajectoryRecord {
  std::string id;
  double fps = 10.0;
  std::string class_label;
  std::vector<Stated> states;
  std::vector<bool> valid;
  /// Features on the kVisualFrameRate grid starting at t = 0.
  std::optional<std::vector<Eigen::VectorXd>> visual_features;

  std::size_t length() const { return states.size(); }
};

/// Canonicalized training/evaluation sample: observed steps then future steps,
/// both in the head frame of the last observed step.
struct StateWindow {
  std::vector<Stated> observed;
  std::vector<Stated> future;
  Eigen::VectorXd visual_feature = Eigen::VectorXd::Zero(kVisualDim);
  std::string source_id;
  std::string class_label;
  std::size_t start = 0;
};

struct SyntheticConfig {
  int n_trajectories = 100;
  int length = 200;
  std::uint64_t seed = 0;
  double fps = 10.0;
  double gaze_target_rate = 0.5;  // Hz
  int hand_lag = 5;               // steps
  double noise_std = 0.005;       // m
  double workspace_extent = 2.0;  // m, bound on every coordinate
  double gaze_length = kDefaultGazeLength;

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

/// Parses a config object; every field is optional, unknown fields are
/// rejected. Throws ValidationError naming the field.
SyntheticConfig syntheticConfigFromJson(const nlohmann::json& j);
nlohmann::json toJson(const SyntheticConfig& cfg);

/// Deterministic given cfg.seed. Trajectory i draws from its own stream
/// seeded by mixing cfg.seed with i.
std::vector<TrajectoryRecord> generateSynthetic(const SyntheticConfig& cfg);

// ---------------------------------------------------------------------------
// JSONL

/// Checks the record invariants. Throws ValidationError naming the record.
void validateRecord(const TrajectoryRecord& r);

nlohmann::json toJson(const TrajectoryRecord& r);
/// Throws ParseError for type/shape problems and unknown fields,
/// ValidationError for invariant violations.
TrajectoryRecord recordFromJson(const nlohmann::json& j);

std::vector<TrajectoryRecord> loadJsonl(const std::filesystem::path& path);
void saveJsonl(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Cleaning and windowing

inline constexpr int kDefaultMaxGap = 50;

/// Fills runs of invalid states of length <= max_gap that have valid
/// neighbors on both sides: positions linearly, head rotation by slerp.
TrajectoryRecord cleanImpute(const TrajectoryRecord& record, int max_gap = kDefaultMaxGap);

/// Number of windows that slice_windows would emit for an all-valid record.
std::size_t windowCount(std::size_t length, std::size_t window, std::size_t stride);

/// Windows starting at 0, stride, 2*stride, ...; windows touching an invalid
/// state are skipped. The first `observed` steps of each window are the
/// observation (default window / 2), the rest the future.
std::vector<StateWindow> sliceWindows(const TrajectoryRecord& record, std::size_t window,
                                      std::size_t stride, std::size_t observed = 0);

/// cleanImpute then sliceWindows over every record, in record order.
std::vector<StateWindow> cleanAndSlice(const std::vector<TrajectoryRecord>& records,
                                       std::size_t window, std::size_t stride,
                                       std::size_t observed, int max_gap = kDefaultMaxGap);

}  // namespace vmf

#endif  // VMF_DATA_HPP
