#pragma once

#include <Eigen/Core>

namespace flowrec {

// reference point with derivatives through jerk, inertial frame
struct ReferenceSample {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();      // m
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();      // m/s
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();  // m/s^2
  Eigen::Vector3d jerk = Eigen::Vector3d::Zero();          // m/s^3
};

}  // namespace flowrec
