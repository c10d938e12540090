// Conditioning-feature encoder: per-modality projections, two cross-attention
// branches against the visual feature, and a transformer temporal encoder
// whose output is flattened into one vector per window.

#ifndef VMF_ENCODER_HPP
#define VMF_ENCODER_HPP

#include "vmf/data.hpp"
#include "vmf/tape.hpp"

#include <json.hpp>

#include <random>
#include <span>
#include <string>

namespace vmf {

struct EncoderConfig {
  int latent_dim = 64;
  int visual_dim = kVisualDim;
  int n_heads = 4;
  int visual_tokens = 1;
  int observed_steps = 10;
  int layers = 1;
  int ffn_multiplier = 2;
  // Adds both attention queries back onto the fused output. Off keeps the
  // fusion a pure sum of attended features; with one visual token that sum
  // ignores the kinematics entirely.
  bool query_residual = false;

  void validate() const;
  int conditioningSize() const { return observed_steps * latent_dim; }
};

nlohmann::json toJson(const EncoderConfig& c);
EncoderConfig encoderConfigFromJson(const nlohmann::json& j, EncoderConfig base = {});

inline constexpr int kHeadInputDim = 9;   // position + 6D rotation
inline constexpr int kGazeInputDim = 3;
inline constexpr int kArmInputDim = 3 * kNumJoints;

/// Row-stacked encoder inputs for a batch of windows: rows are
/// (window, observed step) in window-major order.
struct EncoderInputs {
  Matrix head;    // (B*tau) x 9
  Matrix gaze;    // (B*tau) x 3
  Matrix arm;     // (B*tau) x 18
  Matrix visual;  // B x visual_dim
  Eigen::Index batch = 0;
};

EncoderInputs makeEncoderInputs(std::span<const StateWindow* const> windows, int observed_steps);
EncoderInputs makeEncoderInputs(const std::vector<StateWindow>& windows, int observed_steps);

struct ModalityEmbeddings {
  Var head;
  Var gaze;
  Var arm;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization shared by all
/// learned affine maps.
void initAffine(ParameterStore& store, const std::string& name, int fan_in, int fan_out,
                std::mt19937_64& rng);

class ConditioningEncoder {
 public:
  explicit ConditioningEncoder(EncoderConfig cfg, std::string prefix = "enc.");

  const EncoderConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

  void initParameters(ParameterStore& store, std::mt19937_64& rng) const;

  /// f_h, f_g, f_u: affine map followed by the smooth nonlinearity, width d.
  ModalityEmbeddings encodeModalities(Tape& tape, const ParameterStore& store,
                                      const EncoderInputs& in) const;

  /// Sum of the head+gaze and head+gaze+arm cross-attention branches against
  /// the visual tokens. Returns (B*tau) x d.
  Var fuse(Tape& tape, const ParameterStore& store, const ModalityEmbeddings& k,
           Var visual) const;

  /// Pre-norm transformer over each window's tau fused rows, flattened to
  /// B x (tau*d).
  Var temporalEncode(Tape& tape, const ParameterStore& store, Var fused) const;

  /// Full path: inputs -> conditioning feature c, B x (tau*d).
  Var encode(Tape& tape, const ParameterStore& store, const EncoderInputs& in) const;

 private:
  Var affine(Tape& tape, const ParameterStore& store, Var x, const std::string& name) const;
  std::string p(const std::string& name) const { return prefix_ + name; }

  EncoderConfig cfg_;
  std::string prefix_;
};

}  // namespace vmf

#endif  // VMF_ENCODER_HPP
