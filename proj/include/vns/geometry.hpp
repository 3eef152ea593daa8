#pragma once

#include <cmath>

namespace vns {

// Planar pose; theta normalized to (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

inline Vec2 rotate(double theta, Vec2 v) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// p expressed in the frame given by pose -> enclosing frame.
inline Vec2 transform_point(const Pose2& pose, Vec2 p) {
  const Vec2 r = rotate(pose.theta, p);
  return {pose.x + r.x, pose.y + r.y};
}

// a then b: frame b expressed inside frame a, composed into the outer frame.
inline Pose2 compose(const Pose2& a, const Pose2& b) {
  const Vec2 t = transform_point(a, {b.x, b.y});
  return {t.x, t.y, normalize_angle(a.theta + b.theta)};
}

inline Pose2 inverse(const Pose2& p) {
  const Vec2 t = rotate(-p.theta, {-p.x, -p.y});
  return {t.x, t.y, normalize_angle(-p.theta)};
}

// Point from the enclosing frame expressed in the pose's local frame.
inline Vec2 world_to_local(const Pose2& pose, Vec2 p) {
  return rotate(-pose.theta, {p.x - pose.x, p.y - pose.y});
}

inline double hypot2(double dx, double dy) { return std::sqrt(dx * dx + dy * dy); }

inline double distance(Vec2 a, Vec2 b) { return hypot2(a.x - b.x, a.y - b.y); }

inline bool pose_equal(const Pose2& a, const Pose2& b) {
  return a.x == b.x && a.y == b.y && a.theta == b.theta;
}

inline bool pose_close(const Pose2& a, const Pose2& b, double eps) {
  return std::abs(a.x - b.x) <= eps && std::abs(a.y - b.y) <= eps &&
         std::abs(normalize_angle(a.theta - b.theta)) <= eps;
}

}  // namespace vns
