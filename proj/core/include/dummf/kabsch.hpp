#pragma once

#include <Eigen/Core>

#include "dummf/motion.hpp"

namespace dummf {

// Optimal proper rigid motion taking b onto a: a_i ~ R b_i + t.
// residual = Frobenius norm of (R b + t - a). Coincident inputs give R = I.
struct KabschResult {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double residual = 0.0;
};

KabschResult kabsch_align(const Joints& a, const Joints& b);

}  // namespace dummf
