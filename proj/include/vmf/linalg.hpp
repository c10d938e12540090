#ifndef VMF_LINALG_HPP
#define VMF_LINALG_HPP

#include <Eigen/Dense>

namespace vmf {

template <typename Scalar>
struct Svd3 {
  Eigen::Matrix<Scalar, 3, 3> u;
  Eigen::Matrix<Scalar, 3, 1> singular;  // non-negative, descending
  Eigen::Matrix<Scalar, 3, 3> v;
};

/// Full singular value decomposition m = u * diag(singular) * v^T.
template <typename Derived>
Svd3<typename Derived::Scalar> svd3(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  static_assert(Derived::RowsAtCompileTime == 3 && Derived::ColsAtCompileTime == 3,
                "svd3 expects a 3x3 matrix");
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, 3, 3>> svd(
      m.eval(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

}  // namespace vmf

#endif  // VMF_LINALG_HPP
