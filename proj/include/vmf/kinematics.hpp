// Rigid-body math and the visuomotor state type.
//
// Everything here is templated on the scalar type in the Eigen fashion; the
// rest of the library works with the `double` aliases at the bottom.

#ifndef VMF_KINEMATICS_HPP
#define VMF_KINEMATICS_HPP

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vmf {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Rigid transform x -> rotation * x + position.
template <typename Scalar>
struct SE3Pose {
  Vec3<Scalar> position = Vec3<Scalar>::Zero();
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();

  static SE3Pose Identity() { return {}; }

  static SE3Pose Translation(const Vec3<Scalar>& p) {
    return {p, Mat3<Scalar>::Identity()};
  }

  static SE3Pose Rotation(const Mat3<Scalar>& r) {
    return {Vec3<Scalar>::Zero(), r};
  }

  /// True when the rotation block is orthonormal with unit determinant.
  bool isValid(Scalar tol = Scalar(1e-6)) const {
    if (!position.allFinite() || !rotation.allFinite()) return false;
    const Scalar ortho =
        (rotation.transpose() * rotation - Mat3<Scalar>::Identity()).norm();
    return ortho < tol && std::abs(rotation.determinant() - Scalar(1)) < tol;
  }
};

/// Order of the six upper-body joints.
enum class Joint : int {
  LeftShoulder = 0,
  RightShoulder = 1,
  LeftElbow = 2,
  RightElbow = 3,
  LeftWrist = 4,
  RightWrist = 5,
};

inline constexpr int kNumJoints = 6;

inline constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_wrist", "r_wrist"};

/// One timestep of head pose, gaze endpoint and upper-body joints.
template <typename Scalar>
struct VisuomotorState {
  SE3Pose<Scalar> head;
  Vec3<Scalar> gaze = Vec3<Scalar>::UnitZ();
  std::array<Vec3<Scalar>, kNumJoints> joints{};

  VisuomotorState() { joints.fill(Vec3<Scalar>::Zero()); }

  const Vec3<Scalar>& joint(Joint j) const { return joints[static_cast<int>(j)]; }
  Vec3<Scalar>& joint(Joint j) { return joints[static_cast<int>(j)]; }

  bool allFinite() const {
    if (!head.position.allFinite() || !head.rotation.allFinite() ||
        !gaze.allFinite())
      return false;
    for (const auto& j : joints)
      if (!j.allFinite()) return false;
    return true;
  }

  bool isValid() const {
    return allFinite() && head.isValid() && (gaze - head.position).norm() > 0;
  }

  /// Head position, gaze endpoint, then the six joints.
  std::array<Vec3<Scalar>, 2 + kNumJoints> points() const {
    std::array<Vec3<Scalar>, 2 + kNumJoints> out;
    out[0] = head.position;
    out[1] = gaze;
    for (int i = 0; i < kNumJoints; ++i) out[2 + i] = joints[i];
    return out;
  }
};

template <typename Scalar>
struct GazeRay {
  Vec3<Scalar> origin = Vec3<Scalar>::Zero();
  Vec3<Scalar> direction = Vec3<Scalar>::UnitZ();
  Scalar length = Scalar(1);
};

/// Head-frame axis that the gaze ray leaves along.
template <typename Scalar>
inline Vec3<Scalar> gazeForwardAxis() {
  return Vec3<Scalar>::UnitZ();
}

inline constexpr double kDefaultGazeLength = 1.0;

// ---------------------------------------------------------------------------
// SE(3) operations

/// Applies b first, then a.
template <typename Scalar>
SE3Pose<Scalar> compose(const SE3Pose<Scalar>& a, const SE3Pose<Scalar>& b) {
  return {a.rotation * b.position + a.position, a.rotation * b.rotation};
}

template <typename Scalar>
SE3Pose<Scalar> invert(const SE3Pose<Scalar>& a) {
  const Mat3<Scalar> rt = a.rotation.transpose();
  return {-(rt * a.position), rt};
}

template <typename Scalar>
Vec3<Scalar> applyToPoint(const SE3Pose<Scalar>& a, const Vec3<Scalar>& x) {
  return a.rotation * x + a.position;
}

template <typename Scalar>
SE3Pose<Scalar> operator*(const SE3Pose<Scalar>& a, const SE3Pose<Scalar>& b) {
  return compose(a, b);
}

template <typename Scalar>
Vec3<Scalar> operator*(const SE3Pose<Scalar>& a, const Vec3<Scalar>& x) {
  return applyToPoint(a, x);
}

/// Rotation of `angle` radians about `axis` (normalized internally).
template <typename Scalar>
Mat3<Scalar> axisAngle(const Vec3<Scalar>& axis, Scalar angle) {
  return Eigen::AngleAxis<Scalar>(angle, axis.normalized()).toRotationMatrix();
}

/// Nearest rotation in Frobenius norm, with the sign fixed so det = +1.
template <typename Scalar>
Mat3<Scalar> projectToSO3(const Mat3<Scalar>& m) {
  Eigen::JacobiSVD<Mat3<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3<Scalar> u = svd.matrixU();
  const Mat3<Scalar> v = svd.matrixV();
  Vec3<Scalar> d(Scalar(1), Scalar(1), (u * v.transpose()).determinant() < 0 ? Scalar(-1) : Scalar(1));
  return u * d.asDiagonal() * v.transpose();
}

// ---------------------------------------------------------------------------
// 6D rotation representation: the first two columns of R.

template <typename Scalar>
Eigen::Matrix<Scalar, 6, 1> rotationTo6D(const Mat3<Scalar>& r) {
  Eigen::Matrix<Scalar, 6, 1> out;
  out << r.col(0), r.col(1);
  return out;
}

/// Gram-Schmidt on the two columns, third column by cross product.
template <typename Scalar>
Mat3<Scalar> rotationFrom6D(const Eigen::Matrix<Scalar, 6, 1>& v) {
  Vec3<Scalar> a = v.template head<3>();
  Vec3<Scalar> b = v.template tail<3>();
  Vec3<Scalar> c0;
  const Scalar na = a.norm();
  if (!(na > Scalar(1e-12))) {
    c0 = Vec3<Scalar>::UnitX();
  } else {
    c0 = a / na;
  }
  Vec3<Scalar> c1 = b - c0.dot(b) * c0;
  Scalar nb = c1.norm();
  if (!(nb > Scalar(1e-12))) {
    // b is parallel to a (or zero): pick any vector orthogonal to c0.
    c1 = c0.unitOrthogonal();
  } else {
    c1 /= nb;
  }
  Mat3<Scalar> r;
  r.col(0) = c0;
  r.col(1) = c1;
  r.col(2) = c0.cross(c1);
  return r;
}

// ---------------------------------------------------------------------------
// Gaze geometry

template <typename Scalar>
Vec3<Scalar> gazeEndpoint(const SE3Pose<Scalar>& head, Scalar lambda) {
  if (!(lambda > Scalar(0)))
    throw std::invalid_argument("gazeEndpoint: gaze length must be positive");
  return head.position + lambda * (head.rotation * gazeForwardAxis<Scalar>());
}

template <typename Scalar>
GazeRay<Scalar> gazeRay(const SE3Pose<Scalar>& head, Scalar lambda) {
  if (!(lambda > Scalar(0)))
    throw std::invalid_argument("gazeRay: gaze length must be positive");
  return {head.position, head.rotation * gazeForwardAxis<Scalar>(), lambda};
}

/// Hit point of the ray with the plane, if it lies strictly in front of the
/// ray origin.
template <typename Scalar>
std::optional<Vec3<Scalar>> rayPlaneIntersection(const GazeRay<Scalar>& ray,
                                                 const Vec3<Scalar>& plane_point,
                                                 const Vec3<Scalar>& plane_normal) {
  const Scalar denom = ray.direction.dot(plane_normal);
  if (std::abs(denom) < Scalar(1e-9)) return std::nullopt;
  const Scalar s = (plane_point - ray.origin).dot(plane_normal) / denom;
  if (!(s > Scalar(0))) return std::nullopt;
  return ray.origin + s * ray.direction;
}

/// Geodesic distance on SO(3), in degrees.
template <typename Scalar>
Scalar rotationGeodesicAngle(const Mat3<Scalar>& a, const Mat3<Scalar>& b) {
  // atan2 of (2 sin, 2 cos) stays accurate near zero, unlike acos.
  const Mat3<Scalar> r = a.transpose() * b;
  const Vec3<Scalar> v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(v.norm(), r.trace() - Scalar(1)) * Scalar(180) / std::numbers::pi_v<Scalar>;
}

// ---------------------------------------------------------------------------
// Canonicalization

/// Applies t to the head pose and every point of the state.
template <typename Scalar>
VisuomotorState<Scalar> transformState(const SE3Pose<Scalar>& t,
                                       const VisuomotorState<Scalar>& s) {
  VisuomotorState<Scalar> out;
  out.head = compose(t, s.head);
  out.gaze = applyToPoint(t, s.gaze);
  for (int i = 0; i < kNumJoints; ++i) out.joints[i] = applyToPoint(t, s.joints[i]);
  return out;
}

/// Re-expresses every state in the head frame of states[anchor_index], so the
/// anchor head becomes the identity at the origin.
template <typename Scalar>
std::vector<VisuomotorState<Scalar>> canonicalizeSequence(
    std::span<const VisuomotorState<Scalar>> states, std::size_t anchor_index) {
  if (anchor_index >= states.size())
    throw std::invalid_argument("canonicalizeSequence: anchor index " +
                                std::to_string(anchor_index) + " out of range for " +
                                std::to_string(states.size()) + " states");
  const SE3Pose<Scalar> to_anchor = invert(states[anchor_index].head);
  std::vector<VisuomotorState<Scalar>> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(transformState(to_anchor, s));
  // Exact identity at the anchor rather than R^T R up to roundoff.
  out[anchor_index].head = SE3Pose<Scalar>::Identity();
  return out;
}

template <typename Scalar>
std::vector<VisuomotorState<Scalar>> canonicalizeSequence(
    const std::vector<VisuomotorState<Scalar>>& states, std::size_t anchor_index) {
  return canonicalizeSequence(std::span<const VisuomotorState<Scalar>>(states),
                              anchor_index);
}

using SE3d = SE3Pose<double>;
using Stated = VisuomotorState<double>;
using GazeRayd = GazeRay<double>;
using Vector3 = Vec3<double>;
using Matrix3 = Mat3<double>;

}  // namespace vmf

#endif  // VMF_KINEMATICS_HPP
