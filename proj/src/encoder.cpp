#include "vmf/encoder.hpp"

#include "vmf/errors.hpp"

#include <cmath>
#include <set>

namespace vmf {

using nlohmann::json;

void EncoderConfig::validate() const {
  auto fail = [](const char* field, const std::string& why) {
    throw ValidationError(std::string("encoder field '") + field + "': " + why);
  };
  if (latent_dim < 1) fail("latent_dim", "must be positive");
  if (n_heads < 1 || latent_dim % n_heads != 0)
    fail("n_heads", "must divide latent_dim (" + std::to_string(latent_dim) + ")");
  if (visual_dim < 1) fail("visual_dim", "must be positive");
  if (visual_tokens < 1 || visual_dim % visual_tokens != 0)
    fail("visual_tokens", "must divide visual_dim (" + std::to_string(visual_dim) + ")");
  if (observed_steps < 1) fail("observed_steps", "must be positive");
  if (layers < 1) fail("layers", "must be positive");
  if (ffn_multiplier < 1) fail("ffn_multiplier", "must be positive");
}

json toJson(const EncoderConfig& c) {
  return {{"latent_dim", c.latent_dim},         {"visual_dim", c.visual_dim},
          {"n_heads", c.n_heads},               {"visual_tokens", c.visual_tokens},
          {"observed_steps", c.observed_steps}, {"layers", c.layers},
          {"ffn_multiplier", c.ffn_multiplier}, {"query_residual", c.query_residual}};
}

EncoderConfig encoderConfigFromJson(const json& j, EncoderConfig c) {
  if (!j.is_object()) throw ValidationError("encoder config must be an object");
  const std::set<std::string> known = {"latent_dim", "visual_dim", "n_heads", "visual_tokens",
                                       "observed_steps", "layers", "ffn_multiplier",
                                       "query_residual"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ValidationError("unknown encoder field '" + k + "'");
    if (k == "query_residual") {
      if (!v.is_boolean()) throw ValidationError("encoder field 'query_residual': expected a boolean");
      continue;
    }
    if (!v.is_number_integer()) throw ValidationError("encoder field '" + k + "': expected an integer");
  }
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.visual_dim = j.value("visual_dim", c.visual_dim);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.visual_tokens = j.value("visual_tokens", c.visual_tokens);
  c.observed_steps = j.value("observed_steps", c.observed_steps);
  c.layers = j.value("layers", c.layers);
  c.ffn_multiplier = j.value("ffn_multiplier", c.ffn_multiplier);
  c.query_residual = j.value("query_residual", c.query_residual);
  c.validate();
  return c;
}

EncoderInputs makeEncoderInputs(std::span<const StateWindow* const> windows, int observed_steps) {
  const auto b = static_cast<Eigen::Index>(windows.size());
  const Eigen::Index tau = observed_steps;
  EncoderInputs in;
  in.batch = b;
  in.head.resize(b * tau, kHeadInputDim);
  in.gaze.resize(b * tau, kGazeInputDim);
  in.arm.resize(b * tau, kArmInputDim);
  in.visual.resize(b, kVisualDim);
  for (Eigen::Index w = 0; w < b; ++w) {
    const StateWindow& win = *windows[w];
    if (static_cast<Eigen::Index>(win.observed.size()) != tau)
      throw ShapeError("window has " + std::to_string(win.observed.size()) +
                       " observed steps, encoder expects " + std::to_string(tau));
    if (win.visual_feature.size() != kVisualDim)
      throw ShapeError("visual feature length " + std::to_string(win.visual_feature.size()) +
                       " ≠ " + std::to_string(kVisualDim));
    for (Eigen::Index t = 0; t < tau; ++t) {
      const Stated& s = win.observed[t];
      const Eigen::Index r = w * tau + t;
      in.head.row(r) << s.head.position.transpose(), rotationTo6D(s.head.rotation).transpose();
      in.gaze.row(r) = s.gaze.transpose();
      for (int j = 0; j < kNumJoints; ++j) in.arm.block<1, 3>(r, 3 * j) = s.joints[j].transpose();
    }
    in.visual.row(w) = win.visual_feature.transpose();
  }
  return in;
}

EncoderInputs makeEncoderInputs(const std::vector<StateWindow>& windows, int observed_steps) {
  std::vector<const StateWindow*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return makeEncoderInputs(std::span<const StateWindow* const>(ptrs), observed_steps);
}

void initAffine(ParameterStore& store, const std::string& name, int fan_in, int fan_out,
                std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  Matrix b(1, fan_out);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
  store.set(name + ".w", w);
  store.set(name + ".b", b);
}

ConditioningEncoder::ConditioningEncoder(EncoderConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {
  cfg_.validate();
}

void ConditioningEncoder::initParameters(ParameterStore& store, std::mt19937_64& rng) const {
  const int d = cfg_.latent_dim;
  const int token_dim = cfg_.visual_dim / cfg_.visual_tokens;
  initAffine(store, p("f_head"), kHeadInputDim, d, rng);
  initAffine(store, p("f_gaze"), kGazeInputDim, d, rng);
  initAffine(store, p("f_arm"), kArmInputDim, d, rng);
  initAffine(store, p("f_proj"), 3 * d, 2 * d, rng);
  initAffine(store, p("xattn.q_hg"), 2 * d, d, rng);
  initAffine(store, p("xattn.q_hga"), 2 * d, d, rng);
  initAffine(store, p("xattn.k"), token_dim, d, rng);
  initAffine(store, p("xattn.v"), token_dim, d, rng);

  {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix pos(cfg_.observed_steps, d);
    for (Eigen::Index i = 0; i < pos.size(); ++i) pos.data()[i] = u(rng);
    store.set(p("temporal.pos"), pos);
  }
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string L = "temporal.l" + std::to_string(l) + ".";
    store.set(p(L + "ln1.g"), Matrix(Matrix::Ones(1, d)));
    store.set(p(L + "ln1.b"), Matrix(Matrix::Zero(1, d)));
    initAffine(store, p(L + "q"), d, d, rng);
    initAffine(store, p(L + "k"), d, d, rng);
    initAffine(store, p(L + "v"), d, d, rng);
    initAffine(store, p(L + "o"), d, d, rng);
    store.set(p(L + "ln2.g"), Matrix(Matrix::Ones(1, d)));
    store.set(p(L + "ln2.b"), Matrix(Matrix::Zero(1, d)));
    initAffine(store, p(L + "ff1"), d, cfg_.ffn_multiplier * d, rng);
    initAffine(store, p(L + "ff2"), cfg_.ffn_multiplier * d, d, rng);
  }
  store.set(p("temporal.ln_out.g"), Matrix(Matrix::Ones(1, d)));
  store.set(p("temporal.ln_out.b"), Matrix(Matrix::Zero(1, d)));
}

Var ConditioningEncoder::affine(Tape& tape, const ParameterStore& store, Var x,
                                const std::string& name) const {
  return addRow(matmul(x, tape.parameter(store, p(name + ".w"))),
                tape.parameter(store, p(name + ".b")));
}

ModalityEmbeddings ConditioningEncoder::encodeModalities(Tape& tape, const ParameterStore& store,
                                                         const EncoderInputs& in) const {
  return {smoothNonlinearity(affine(tape, store, tape.constant(in.head), "f_head")),
          smoothNonlinearity(affine(tape, store, tape.constant(in.gaze), "f_gaze")),
          smoothNonlinearity(affine(tape, store, tape.constant(in.arm), "f_arm"))};
}

Var ConditioningEncoder::fuse(Tape& tape, const ParameterStore& store, const ModalityEmbeddings& k,
                              Var visual) const {
  const Eigen::Index batch = visual.rows();
  const int tokens = cfg_.visual_tokens;
  const Var tok = reshape(visual, batch * tokens, cfg_.visual_dim / tokens);
  const Var keys = affine(tape, store, tok, "xattn.k");
  const Var values = affine(tape, store, tok, "xattn.v");

  const Var hg = concatCols({k.head, k.gaze});
  const Var hga = affine(tape, store, concatCols({k.head, k.gaze, k.arm}), "f_proj");
  const Var q_hg = affine(tape, store, hg, "xattn.q_hg");
  const Var q_hga = affine(tape, store, hga, "xattn.q_hga");

  const Eigen::Index tau = cfg_.observed_steps;
  const Var att_hg = attention(q_hg, keys, values, cfg_.n_heads, tau, tokens);
  const Var att_hga = attention(q_hga, keys, values, cfg_.n_heads, tau, tokens);
  if (cfg_.query_residual) return att_hg + att_hga + q_hg + q_hga;
  return att_hg + att_hga;
}

Var ConditioningEncoder::temporalEncode(Tape& tape, const ParameterStore& store, Var fused) const {
  const Eigen::Index tau = cfg_.observed_steps;
  const Eigen::Index d = cfg_.latent_dim;
  if (fused.cols() != d || fused.rows() % tau != 0)
    throw ShapeError("temporalEncode: input " + shapeString(fused.value()) +
                     " is not a stack of " + std::to_string(tau) + "-row sequences of width " +
                     std::to_string(d));
  const Eigen::Index batch = fused.rows() / tau;

  auto norm = [&](Var x, const std::string& name) {
    return addRow(mulRow(layerNormRows(x), tape.parameter(store, p(name + ".g"))),
                  tape.parameter(store, p(name + ".b")));
  };

  Var x = addTiled(fused, tape.parameter(store, p("temporal.pos")));
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string L = "temporal.l" + std::to_string(l) + ".";
    const Var h = norm(x, L + "ln1");
    const Var att = attention(affine(tape, store, h, L + "q"), affine(tape, store, h, L + "k"),
                              affine(tape, store, h, L + "v"), cfg_.n_heads, tau, tau);
    x = x + affine(tape, store, att, L + "o");
    const Var h2 = norm(x, L + "ln2");
    x = x + affine(tape, store, smoothNonlinearity(affine(tape, store, h2, L + "ff1")), L + "ff2");
  }
  x = norm(x, "temporal.ln_out");
  return reshape(x, batch, tau * d);
}

Var ConditioningEncoder::encode(Tape& tape, const ParameterStore& store,
                                const EncoderInputs& in) const {
  const ModalityEmbeddings k = encodeModalities(tape, store, in);
  const Var fused = fuse(tape, store, k, tape.constant(in.visual));
  return temporalEncode(tape, store, fused);
}

}  // namespace vmf
