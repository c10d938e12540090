// Per-state forecast errors. Positions are reported in millimeters, the head
// rotation error in degrees.

#ifndef VMF_METRICS_HPP
#define VMF_METRICS_HPP

#include "vmf/kinematics.hpp"
#include "vmf/linalg.hpp"

#include <array>

namespace vmf {

inline constexpr double kMetersToMm = 1000.0;

/// Rotation R and translation t minimizing sum |R src_i + t - dst_i|^2.
/// No scaling.
template <typename Scalar, std::size_t N>
SE3Pose<Scalar> rigidAlign(const std::array<Vec3<Scalar>, N>& src,
                           const std::array<Vec3<Scalar>, N>& dst) {
  Vec3<Scalar> cs = Vec3<Scalar>::Zero(), cd = Vec3<Scalar>::Zero();
  for (std::size_t i = 0; i < N; ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= Scalar(N);
  cd /= Scalar(N);
  Mat3<Scalar> cov = Mat3<Scalar>::Zero();
  for (std::size_t i = 0; i < N; ++i) cov += (dst[i] - cd) * (src[i] - cs).transpose();
  const auto svd = svd3(cov);
  Vec3<Scalar> d(Scalar(1), Scalar(1),
                 (svd.u * svd.v.transpose()).determinant() < 0 ? Scalar(-1) : Scalar(1));
  const Mat3<Scalar> r = svd.u * d.asDiagonal() * svd.v.transpose();
  return {cd - r * cs, r};
}

/// Mean point distance over head position, gaze endpoint and the six joints
/// after rigid Procrustes alignment of pred onto gt, in mm.
template <typename Scalar>
Scalar paMpjpe(const VisuomotorState<Scalar>& pred, const VisuomotorState<Scalar>& gt) {
  const auto p = pred.points();
  const auto g = gt.points();
  const SE3Pose<Scalar> align = rigidAlign(p, g);
  Scalar total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (applyToPoint(align, p[i]) - g[i]).norm();
  return total / Scalar(p.size()) * Scalar(kMetersToMm);
}

/// Mean point distance without alignment, in mm.
template <typename Scalar>
Scalar mpjpe(const VisuomotorState<Scalar>& pred, const VisuomotorState<Scalar>& gt) {
  const auto p = pred.points();
  const auto g = gt.points();
  Scalar total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - g[i]).norm();
  return total / Scalar(p.size()) * Scalar(kMetersToMm);
}

template <typename Scalar>
struct PositionErrors {
  Scalar head;
  Scalar gaze;
  Scalar hand;  // mean of the two wrists
};

template <typename Scalar>
PositionErrors<Scalar> positionErrors(const VisuomotorState<Scalar>& pred,
                                      const VisuomotorState<Scalar>& gt) {
  const Scalar mm = Scalar(kMetersToMm);
  const Scalar lw = (pred.joint(Joint::LeftWrist) - gt.joint(Joint::LeftWrist)).norm();
  const Scalar rw = (pred.joint(Joint::RightWrist) - gt.joint(Joint::RightWrist)).norm();
  return {(pred.head.position - gt.head.position).norm() * mm, (pred.gaze - gt.gaze).norm() * mm,
          (lw + rw) / Scalar(2) * mm};
}

/// Geodesic head rotation error in degrees.
template <typename Scalar>
Scalar headRotationError(const VisuomotorState<Scalar>& pred, const VisuomotorState<Scalar>& gt) {
  return rotationGeodesicAngle(pred.head.rotation, gt.head.rotation);
}

}  // namespace vmf

#endif  // VMF_METRICS_HPP
