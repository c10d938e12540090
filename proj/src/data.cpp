#include "vmf/data.hpp"

#include "vmf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace vmf {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct ActivityClass {
  const char* label;
  double goal_rate_scale;
};

constexpr std::array<ActivityClass, 3> kClasses = {{
    {"steady", 0.5},
    {"browsing", 1.0},
    {"active", 2.0},
}};

// Local body frame: x right, y up, z forward; the head rests at the origin.
constexpr double kGazeSmoothing = 0.35;
constexpr double kWristSmoothing = 0.35;
constexpr double kHeadSlewGain = 0.3;
constexpr double kHeadMaxRate = 2.0 * std::numbers::pi / 3.0;  // rad/s
constexpr double kHeadLean = 0.12;
constexpr double kHeadPosGain = 0.2;
constexpr double kTorsoYawGain = 0.1;

Matrix3 lookAt(const Vector3& dir) {
  const Vector3 z = dir.normalized();
  Vector3 x = Vector3::UnitY().cross(z);
  if (x.norm() < 1e-9) x = Vector3::UnitX();
  x.normalize();
  const Vector3 y = z.cross(x);
  Matrix3 r;
  r << x, y, z;
  return r;
}

double yawOf(const Matrix3& r) {
  const Vector3 f = r.col(2);
  return std::atan2(f.x(), f.z());
}

Vector3 sampleGoal(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(-0.45, 0.45), uy(-0.55, -0.05), uz(0.3, 0.65);
  const double x = ux(rng);
  const double y = uy(rng);
  const double z = uz(rng);
  return {x, y, z};
}

/// Fixed smooth map from head pose to a kVisualDim feature vector.
class VisualFeatureMap {
 public:
  VisualFeatureMap() : proj_(kVisualDim, 12), phase_(kVisualDim) {
    std::mt19937_64 rng(0x5eedf00dULL);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    for (Eigen::Index i = 0; i < proj_.rows(); ++i)
      for (Eigen::Index j = 0; j < proj_.cols(); ++j) proj_(i, j) = n(rng);
    for (Eigen::Index i = 0; i < phase_.size(); ++i) phase_(i) = u(rng);
  }

  Eigen::VectorXd operator()(const SE3d& head) const {
    Eigen::Matrix<double, 12, 1> x;
    x << head.position, head.rotation.reshaped();
    Eigen::VectorXd z = proj_ * x + phase_;
    return z.array().sin();
  }

 private:
  Eigen::MatrixXd proj_;
  Eigen::VectorXd phase_;
};

TrajectoryRecord generateOne(const SyntheticConfig& cfg, int index) {
  std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const ActivityClass& cls = kClasses[rng() % kClasses.size()];
  const double jump_prob =
      std::clamp(cfg.gaze_target_rate * cls.goal_rate_scale / cfg.fps, 0.0, 1.0);

  // Placement of the body frame in the world.
  const double e = cfg.workspace_extent;
  const double yaw0 = (2.0 * unit(rng) - 1.0) * std::numbers::pi;
  const Vector3 origin((2.0 * unit(rng) - 1.0) * 0.3 * e,
                       std::min(1.3 + 0.4 * unit(rng), 0.9 * e),
                       (2.0 * unit(rng) - 1.0) * 0.3 * e);
  const SE3d placement{origin, axisAngle<double>(Vector3::UnitY(), yaw0)};

  const double max_head_step = kHeadMaxRate / cfg.fps;
  const double noise = cfg.noise_std;
  static const VisualFeatureMap kFeatureMap;

  std::vector<Vector3> goals;
  goals.reserve(cfg.length);
  Vector3 goal = sampleGoal(rng);
  Vector3 gaze_point = goal;
  Vector3 head_pos = Vector3::Zero();
  Matrix3 head_rot = lookAt(gaze_point - head_pos);
  double torso_yaw = yawOf(head_rot);

  auto shoulders = [&](double yaw) {
    const Matrix3 ry = axisAngle<double>(Vector3::UnitY(), yaw);
    const Vector3 chest = head_pos + ry * Vector3(0.0, -0.25, -0.05);
    return std::pair<Vector3, Vector3>{chest + ry * Vector3(-0.18, 0.0, 0.0),
                                       chest + ry * Vector3(0.18, 0.0, 0.0)};
  };
  auto restPose = [&](const Vector3& shoulder, double yaw) {
    const Matrix3 ry = axisAngle<double>(Vector3::UnitY(), yaw);
    return Vector3(shoulder + ry * Vector3(0.0, -0.45, 0.15));
  };

  auto [ls0, rs0] = shoulders(torso_yaw);
  Vector3 lwrist = restPose(ls0, torso_yaw);
  Vector3 rwrist = restPose(rs0, torso_yaw);

  TrajectoryRecord rec;
  rec.id = "syn-" + std::to_string(cfg.seed) + "-" + std::to_string(index);
  rec.fps = cfg.fps;
  rec.class_label = cls.label;
  rec.states.reserve(cfg.length);
  std::vector<SE3d> local_heads;

  auto clampPoint = [e](Vector3 p) { return Vector3(p.cwiseMax(-e).cwiseMin(e)); };

  for (int t = 0; t < cfg.length; ++t) {
    if (t > 0 && unit(rng) < jump_prob) goal = sampleGoal(rng);
    goals.push_back(goal);

    gaze_point += kGazeSmoothing * (goal - gaze_point);

    // Head position leans toward the fixated point; noise is a random walk.
    const Vector3 head_target = kHeadLean * gaze_point;
    head_pos += kHeadPosGain * (head_target - head_pos);
    if (noise > 0) head_pos += 0.5 * noise * Vector3(gauss(rng), gauss(rng), gauss(rng));

    // Head slews toward the gaze direction with bounded angular velocity.
    const Matrix3 target_rot = lookAt(gaze_point - head_pos);
    const Eigen::AngleAxisd rel(target_rot * head_rot.transpose());
    const double step = std::min(kHeadSlewGain * rel.angle(), max_head_step);
    if (rel.angle() > 1e-12) head_rot = Eigen::AngleAxisd(step, rel.axis()) * head_rot;
    head_rot = projectToSO3(head_rot);

    torso_yaw += kTorsoYawGain * (yawOf(head_rot) - torso_yaw);
    const auto [ls, rs] = shoulders(torso_yaw);

    // The hand on the goal's side reaches for the goal seen hand_lag steps
    // ago; the other hand returns to rest.
    const Vector3 lagged = goals[std::max(0, t - cfg.hand_lag)];
    const bool right_reaches = lagged.x() >= 0.0;
    const Vector3 ltarget = right_reaches ? restPose(ls, torso_yaw) : lagged;
    const Vector3 rtarget = right_reaches ? lagged : restPose(rs, torso_yaw);
    lwrist += kWristSmoothing * (ltarget - lwrist);
    rwrist += kWristSmoothing * (rtarget - rwrist);

    Vector3 lw = lwrist, rw = rwrist;
    if (noise > 0) {
      lw += noise * Vector3(gauss(rng), gauss(rng), gauss(rng));
      rw += noise * Vector3(gauss(rng), gauss(rng), gauss(rng));
    }
    const Matrix3 ry = axisAngle<double>(Vector3::UnitY(), torso_yaw);
    const Vector3 lelbow = ls + 0.5 * (lw - ls) + ry * Vector3(-0.06, -0.12, 0.0);
    const Vector3 relbow = rs + 0.5 * (rw - rs) + ry * Vector3(0.06, -0.12, 0.0);

    const Vector3 gaze_dir = (gaze_point - head_pos).normalized();

    Stated s;
    s.head = {head_pos, head_rot};
    s.gaze = head_pos + cfg.gaze_length * gaze_dir;
    s.joint(Joint::LeftShoulder) = ls;
    s.joint(Joint::RightShoulder) = rs;
    s.joint(Joint::LeftElbow) = lelbow;
    s.joint(Joint::RightElbow) = relbow;
    s.joint(Joint::LeftWrist) = lw;
    s.joint(Joint::RightWrist) = rw;
    local_heads.push_back(s.head);

    Stated w = transformState(placement, s);
    w.head.position = clampPoint(w.head.position);
    w.gaze = clampPoint(w.gaze);
    for (auto& j : w.joints) j = clampPoint(j);
    rec.states.push_back(w);
  }
  rec.valid.assign(rec.states.size(), true);

  const auto frames =
      static_cast<std::size_t>(std::floor((cfg.length - 1) * kVisualFrameRate / cfg.fps)) + 1;
  std::vector<Eigen::VectorXd> features;
  features.reserve(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const auto step = std::min<std::size_t>(
        static_cast<std::size_t>(std::lround(k * cfg.fps / kVisualFrameRate)),
        local_heads.size() - 1);
    Eigen::VectorXd f = kFeatureMap(local_heads[step]);
    if (noise > 0)
      for (Eigen::Index i = 0; i < f.size(); ++i) f(i) += noise * gauss(rng);
    features.push_back(std::move(f));
  }
  rec.visual_features = std::move(features);
  return rec;
}

// ---------------------------------------------------------------------------
// JSON helpers

template <int N>
json vecJson(const Eigen::Matrix<double, N, 1>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

std::vector<double> numberArray(const json& j, const char* field, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": field '" + field + "' must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number())
      throw ParseError(where + ": field '" + field + "' must contain only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<double> fixedArray(const json& obj, const char* field, std::size_t n,
                               const std::string& where) {
  if (!obj.contains(field)) throw ParseError(where + ": missing field '" + field + "'");
  auto v = numberArray(obj.at(field), field, where);
  if (v.size() != n)
    throw ValidationError(where + ": " + field + " length " + std::to_string(v.size()) +
                          " ≠ " + std::to_string(n));
  return v;
}

void rejectUnknown(const json& obj, const std::set<std::string>& allowed,
                   const std::string& where) {
  for (const auto& [k, _] : obj.items())
    if (!allowed.count(k)) throw ParseError(where + ": unknown field '" + k + "'");
}

Stated stateFromJson(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": state must be an object");
  rejectUnknown(j, {"head_p", "head_R", "gaze", "joints"}, where);
  Stated s;
  const auto hp = fixedArray(j, "head_p", 3, where);
  const auto hr = fixedArray(j, "head_R", 9, where);
  const auto g = fixedArray(j, "gaze", 3, where);
  if (!j.contains("joints")) throw ParseError(where + ": missing field 'joints'");
  const auto jt = numberArray(j.at("joints"), "joints", where);
  if (jt.size() % 3 != 0)
    throw ValidationError(where + ": joints has " + std::to_string(jt.size()) +
                          " values, not a multiple of 3");
  if (jt.size() != 3 * kNumJoints)
    throw ValidationError(where + ": joints length " + std::to_string(jt.size() / 3) +
                          " ≠ " + std::to_string(kNumJoints));
  s.head.position = Vector3(hp[0], hp[1], hp[2]);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) s.head.rotation(r, c) = hr[3 * r + c];
  s.gaze = Vector3(g[0], g[1], g[2]);
  for (int i = 0; i < kNumJoints; ++i) s.joints[i] = Vector3(jt[3 * i], jt[3 * i + 1], jt[3 * i + 2]);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

void SyntheticConfig::validate() const {
  auto fail = [](const char* field, const char* why) {
    throw ValidationError(std::string("field '") + field + "': " + why);
  };
  if (n_trajectories < 1) fail("n_trajectories", "must be positive");
  if (length < 1) fail("length", "must be positive");
  if (!(fps > 0) || !std::isfinite(fps)) fail("fps", "must be positive");
  if (!(gaze_target_rate > 0) || !std::isfinite(gaze_target_rate))
    fail("gaze_target_rate", "must be positive");
  if (hand_lag < 1) fail("hand_lag", "must be positive");
  if (!(noise_std >= 0) || !std::isfinite(noise_std)) fail("noise_std", "must be >= 0");
  if (!(workspace_extent > 1.5) || !std::isfinite(workspace_extent))
    fail("workspace_extent", "must exceed 1.5 m to hold a standing person");
  if (!(gaze_length > 0) || !std::isfinite(gaze_length)) fail("gaze_length", "must be positive");
}

SyntheticConfig syntheticConfigFromJson(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  SyntheticConfig cfg;
  const std::set<std::string> known = {"n_trajectories", "length",    "seed",
                                       "fps",            "gaze_target_rate",
                                       "hand_lag",       "noise_std", "workspace_extent",
                                       "gaze_length"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ValidationError("unknown field '" + k + "'");
    const bool integral = k == "n_trajectories" || k == "length" || k == "seed" || k == "hand_lag";
    if (integral ? !v.is_number_integer() : !v.is_number())
      throw ValidationError("field '" + k + "': expected " +
                            (integral ? "an integer" : "a number"));
  }
  if (j.contains("seed") && j.at("seed").is_number_integer() && j.at("seed").get<long long>() < 0)
    throw ValidationError("field 'seed': must be non-negative");
  cfg.n_trajectories = j.value("n_trajectories", cfg.n_trajectories);
  cfg.length = j.value("length", cfg.length);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.fps = j.value("fps", cfg.fps);
  cfg.gaze_target_rate = j.value("gaze_target_rate", cfg.gaze_target_rate);
  cfg.hand_lag = j.value("hand_lag", cfg.hand_lag);
  cfg.noise_std = j.value("noise_std", cfg.noise_std);
  cfg.workspace_extent = j.value("workspace_extent", cfg.workspace_extent);
  cfg.gaze_length = j.value("gaze_length", cfg.gaze_length);
  cfg.validate();
  return cfg;
}

json toJson(const SyntheticConfig& cfg) {
  return {{"n_trajectories", cfg.n_trajectories},
          {"length", cfg.length},
          {"seed", cfg.seed},
          {"fps", cfg.fps},
          {"gaze_target_rate", cfg.gaze_target_rate},
          {"hand_lag", cfg.hand_lag},
          {"noise_std", cfg.noise_std},
          {"workspace_extent", cfg.workspace_extent},
          {"gaze_length", cfg.gaze_length}};
}

std::vector<TrajectoryRecord> generateSynthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::vector<TrajectoryRecord> out;
  out.reserve(cfg.n_trajectories);
  for (int i = 0; i < cfg.n_trajectories; ++i) out.push_back(generateOne(cfg, i));
  return out;
}

void validateRecord(const TrajectoryRecord& r) {
  const std::string where = "record '" + r.id + "'";
  if (!(r.fps > 0) || !std::isfinite(r.fps)) throw ValidationError(where + ": fps must be positive");
  if (r.valid.size() != r.states.size())
    throw ValidationError(where + ": valid length " + std::to_string(r.valid.size()) +
                          " ≠ states length " + std::to_string(r.states.size()));
  for (std::size_t i = 0; i < r.states.size(); ++i) {
    const Stated& s = r.states[i];
    if (!s.allFinite())
      throw ValidationError(where + ": state " + std::to_string(i) + " has non-finite values");
    if (!r.valid[i]) continue;
    if (!s.head.isValid())
      throw ValidationError(where + ": state " + std::to_string(i) +
                            " head rotation is not a proper rotation");
    if (!((s.gaze - s.head.position).norm() > 0))
      throw ValidationError(where + ": state " + std::to_string(i) +
                            " gaze endpoint coincides with head position");
  }
  if (r.visual_features) {
    for (std::size_t k = 0; k < r.visual_features->size(); ++k) {
      const auto& f = (*r.visual_features)[k];
      if (f.size() != kVisualDim)
        throw ValidationError(where + ": visual feature " + std::to_string(k) + " length " +
                              std::to_string(f.size()) + " ≠ " + std::to_string(kVisualDim));
      if (!f.allFinite())
        throw ValidationError(where + ": visual feature " + std::to_string(k) +
                              " has non-finite values");
    }
  }
}

json toJson(const TrajectoryRecord& r) {
  json states = json::array();
  for (const auto& s : r.states) {
    json hr = json::array();
    for (int row = 0; row < 3; ++row)
      for (int c = 0; c < 3; ++c) hr.push_back(s.head.rotation(row, c));
    json jt = json::array();
    for (const auto& p : s.joints)
      for (int c = 0; c < 3; ++c) jt.push_back(p(c));
    states.push_back({{"head_p", vecJson<3>(s.head.position)},
                      {"head_R", hr},
                      {"gaze", vecJson<3>(s.gaze)},
                      {"joints", jt}});
  }
  json valid = json::array();
  for (bool v : r.valid) valid.push_back(v);
  json features = nullptr;
  if (r.visual_features) {
    features = json::array();
    for (const auto& f : *r.visual_features) {
      json a = json::array();
      for (Eigen::Index i = 0; i < f.size(); ++i) a.push_back(f(i));
      features.push_back(std::move(a));
    }
  }
  return {{"schema", kSchemaVersion}, {"id", r.id},         {"fps", r.fps},
          {"class_label", r.class_label}, {"states", states}, {"valid", valid},
          {"visual_features", features}};
}

TrajectoryRecord recordFromJson(const json& j) {
  if (!j.is_object()) throw ParseError("record must be a JSON object");
  std::string where = "record";
  if (j.contains("id") && j.at("id").is_string()) where = "record '" + j.at("id").get<std::string>() + "'";
  rejectUnknown(j, {"schema", "id", "fps", "class_label", "states", "valid", "visual_features"},
                where);
  for (const char* f : {"schema", "id", "fps", "class_label", "states", "valid"})
    if (!j.contains(f)) throw ParseError(where + ": missing field '" + f + "'");
  if (!j.at("schema").is_number_integer() || j.at("schema").get<int>() != kSchemaVersion)
    throw ParseError(where + ": unsupported schema (expected " + std::to_string(kSchemaVersion) + ")");
  if (!j.at("id").is_string()) throw ParseError(where + ": field 'id' must be a string");
  if (!j.at("fps").is_number()) throw ParseError(where + ": field 'fps' must be a number");
  if (!j.at("class_label").is_string())
    throw ParseError(where + ": field 'class_label' must be a string");
  if (!j.at("states").is_array()) throw ParseError(where + ": field 'states' must be an array");
  if (!j.at("valid").is_array()) throw ParseError(where + ": field 'valid' must be an array");

  TrajectoryRecord r;
  r.id = j.at("id").get<std::string>();
  r.fps = j.at("fps").get<double>();
  r.class_label = j.at("class_label").get<std::string>();
  const auto& states = j.at("states");
  r.states.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i)
    r.states.push_back(stateFromJson(states[i], where + ": state " + std::to_string(i)));
  for (const auto& v : j.at("valid")) {
    if (!v.is_boolean()) throw ParseError(where + ": field 'valid' must contain booleans");
    r.valid.push_back(v.get<bool>());
  }
  if (j.contains("visual_features") && !j.at("visual_features").is_null()) {
    const auto& vf = j.at("visual_features");
    if (!vf.is_array()) throw ParseError(where + ": field 'visual_features' must be an array or null");
    std::vector<Eigen::VectorXd> feats;
    for (const auto& f : vf) {
      const auto vals = numberArray(f, "visual_features", where);
      feats.push_back(Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size()));
    }
    r.visual_features = std::move(feats);
  }
  validateRecord(r);
  return r;
}

std::vector<TrajectoryRecord> loadJsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<TrajectoryRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string prefix = path.string() + ":" + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(prefix + "malformed JSON: " + e.what());
    }
    try {
      out.push_back(recordFromJson(j));
    } catch (const ParseError& e) {
      throw ParseError(prefix + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(prefix + e.what());
    }
  }
  return out;
}

void saveJsonl(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) out << toJson(r).dump() << '\n';
}

// ---------------------------------------------------------------------------

TrajectoryRecord cleanImpute(const TrajectoryRecord& record, int max_gap) {
  if (max_gap < 1) throw std::invalid_argument("cleanImpute: max_gap must be >= 1");
  TrajectoryRecord out = record;
  const std::size_t n = out.states.size();
  std::size_t i = 0;
  while (i < n) {
    if (out.valid[i]) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < n && !out.valid[end]) ++end;
    const std::size_t gap = end - i;
    if (i > 0 && end < n && gap <= static_cast<std::size_t>(max_gap)) {
      const Stated& a = out.states[i - 1];
      const Stated& b = out.states[end];
      const Eigen::Quaterniond qa(a.head.rotation);
      const Eigen::Quaterniond qb(b.head.rotation);
      for (std::size_t k = i; k < end; ++k) {
        const double t = static_cast<double>(k - (i - 1)) / static_cast<double>(gap + 1);
        Stated s;
        s.head.position = (1 - t) * a.head.position + t * b.head.position;
        s.head.rotation = qa.slerp(t, qb).normalized().toRotationMatrix();
        s.gaze = (1 - t) * a.gaze + t * b.gaze;
        for (int j = 0; j < kNumJoints; ++j) s.joints[j] = (1 - t) * a.joints[j] + t * b.joints[j];
        out.states[k] = s;
        out.valid[k] = true;
      }
    }
    i = end;
  }
  return out;
}

std::size_t windowCount(std::size_t length, std::size_t window, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("windowCount: stride must be >= 1");
  if (window == 0 || window > length) return 0;
  return (length - window) / stride + 1;
}

std::vector<StateWindow> sliceWindows(const TrajectoryRecord& record, std::size_t window,
                                      std::size_t stride, std::size_t observed) {
  if (stride == 0) throw std::invalid_argument("sliceWindows: stride must be >= 1");
  if (observed == 0) observed = window / 2;
  if (window < 2 || observed < 1 || observed >= window)
    throw std::invalid_argument("sliceWindows: need 1 <= observed < window");
  std::vector<StateWindow> out;
  const std::size_t n = record.states.size();
  if (window > n) return out;

  // Prefix count of invalid states for O(1) window checks.
  std::vector<std::size_t> bad(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) bad[i + 1] = bad[i] + (record.valid[i] ? 0 : 1);

  for (std::size_t start = 0; start + window <= n; start += stride) {
    if (bad[start + window] != bad[start]) continue;
    const auto first = record.states.begin() + static_cast<std::ptrdiff_t>(start);
    const std::vector<Stated> raw(first, first + static_cast<std::ptrdiff_t>(window));
    auto canon = canonicalizeSequence(raw, observed - 1);

    StateWindow w;
    w.observed.assign(canon.begin(), canon.begin() + static_cast<std::ptrdiff_t>(observed));
    w.future.assign(canon.begin() + static_cast<std::ptrdiff_t>(observed), canon.end());
    w.source_id = record.id;
    w.class_label = record.class_label;
    w.start = start;
    if (record.visual_features && !record.visual_features->empty()) {
      const double anchor_time = static_cast<double>(start + observed - 1) / record.fps;
      const auto frame = std::min<std::size_t>(
          static_cast<std::size_t>(std::lround(anchor_time * kVisualFrameRate)),
          record.visual_features->size() - 1);
      w.visual_feature = (*record.visual_features)[frame];
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<StateWindow> cleanAndSlice(const std::vector<TrajectoryRecord>& records,
                                       std::size_t window, std::size_t stride,
                                       std::size_t observed, int max_gap) {
  std::vector<StateWindow> out;
  for (const auto& r : records) {
    auto w = sliceWindows(cleanImpute(r, max_gap), window, stride, observed);
    std::move(w.begin(), w.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace vmf
