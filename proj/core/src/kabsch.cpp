#include "dummf/kabsch.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include "dummf/error.hpp"

namespace dummf {

KabschResult kabsch_align(const Joints& a, const Joints& b) {
  if (a.rows() != b.rows() || a.rows() == 0) throw ShapeError("kabsch_align: point sets differ in size");
  const Eigen::RowVector3d ca = a.colwise().mean();
  const Eigen::RowVector3d cb = b.colwise().mean();
  const Joints pa = a.rowwise() - ca;
  const Joints pb = b.rowwise() - cb;
  const Eigen::Matrix3d h = pb.transpose() * pa;

  KabschResult r;
  if (h.cwiseAbs().maxCoeff() > 0) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double d = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
    Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
    s(2, 2) = d;
    r.rotation = svd.matrixV() * s * svd.matrixU().transpose();
  }
  r.translation = ca.transpose() - r.rotation * cb.transpose();
  const Joints moved = (b * r.rotation.transpose()).rowwise() + r.translation.transpose();
  r.residual = (moved - a).norm();
  return r;
}

}  // namespace dummf
