#pragma once

#include <Eigen/Dense>

namespace slipgait {

// Generalized coordinates: q = (p_x, p_z, phi, q_sk, q_sh, q_nsh, q_nsk).
// (p_x, p_z) is the world position of the hip point where the torso and both
// thighs meet, phi is the torso pitch (ccw positive, 0 = upright), followed by
// stance knee, stance hip, non-stance hip and non-stance knee joint angles.
// Hip angles are relative to the torso, knee angles relative to the thigh.
// All angles ccw positive; a straight leg hanging below the hip has all joint
// angles zero, so knee flexion is negative.
inline constexpr int kNumDof = 7;
inline constexpr int kNumActuated = 4;
inline constexpr int kStateDim = 2 * kNumDof;

enum Coord : int {
  kBaseX = 0,
  kBaseZ = 1,
  kPitch = 2,
  kStanceKnee = 3,
  kStanceHip = 4,
  kSwingHip = 5,
  kSwingKnee = 6,
};

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Vec14 = Eigen::Matrix<double, 14, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat77 = Eigen::Matrix<double, 7, 7>;
using Mat74 = Eigen::Matrix<double, 7, 4>;
using Mat47 = Eigen::Matrix<double, 4, 7>;
using Mat44 = Eigen::Matrix<double, 4, 4>;
using Mat45 = Eigen::Matrix<double, 4, 5>;
using Mat27 = Eigen::Matrix<double, 2, 7>;
using RowVec7 = Eigen::Matrix<double, 1, 7>;

/// Continuous state: generalized positions and velocities.
struct Configuration {
  Vec7 q = Vec7::Zero();
  Vec7 qd = Vec7::Zero();
};

/// Actuated joint selector: y_a = (q_sk, q_sh, q_nsh, q_nsk).
inline Vec4 actuated_angles(const Vec7& q) {
  return q.segment<4>(kStanceKnee);
}

inline Mat47 actuated_selector() {
  Mat47 s = Mat47::Zero();
  for (int i = 0; i < kNumActuated; ++i) s(i, kStanceKnee + i) = 1.0;
  return s;
}

}  // namespace slipgait
