#include "vns/body_sim.hpp"

#include <algorithm>
#include <cmath>

namespace vns {

Vec2 Stimulus::position_at(double t) const {
  if (waypoints.empty()) return {0.0, 0.0};
  if (t <= waypoints.front().time) return waypoints.front().position;
  for (size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const auto& a = waypoints[i];
    const auto& b = waypoints[i + 1];
    if (t <= b.time) {
      const double span = b.time - a.time;
      const double u = span > 0.0 ? (t - a.time) / span : 1.0;
      return {a.position.x + u * (b.position.x - a.position.x),
              a.position.y + u * (b.position.y - a.position.y)};
    }
  }
  return waypoints.back().position;
}

std::map<NodeId, ModuleCommand> twist_to_module_commands(const BodyMap& body,
                                                         const std::map<NodeId, Pose2>& poses,
                                                         const PlanarTwist& twist) {
  const Pose2 brain_pose = poses.at(body.root());

  // Point velocity of each module in the brain frame: u_i = v + omega x r_i.
  std::map<NodeId, Vec2> brain_frame_vel;
  double max_speed = 0.0;
  for (NodeId id : body.tree.node_ids()) {
    const Pose2& pose = poses.at(id);
    const Vec2 r = world_to_local(brain_pose, {pose.x, pose.y});
    const Vec2 u{twist.vx - twist.omega * r.y, twist.vy + twist.omega * r.x};
    brain_frame_vel[id] = u;
    max_speed = std::max(max_speed, hypot2(u.x, u.y));
  }

  double scale = 1.0;
  if (max_speed > kVMax) scale = std::min(scale, kVMax / max_speed);
  if (std::abs(twist.omega) > kOmegaMax) scale = std::min(scale, kOmegaMax / std::abs(twist.omega));

  std::map<NodeId, ModuleCommand> commands;
  for (const auto& [id, u] : brain_frame_vel) {
    const Pose2& pose = poses.at(id);
    const double delta = normalize_angle(pose.theta - brain_pose.theta);
    const Vec2 local = rotate(-delta, {u.x * scale, u.y * scale});
    commands[id] = {local.x, local.y, twist.omega * scale};
  }
  return commands;
}

std::optional<StimulusReading> sense_stimulus(const Pose2& module_pose, Vec2 stimulus,
                                              double r_sense, double now) {
  const Vec2 local = world_to_local(module_pose, stimulus);
  const double dist = hypot2(local.x, local.y);
  if (dist > r_sense) return std::nullopt;
  return StimulusReading{dist, std::atan2(local.y, local.x), now};
}

std::set<LedSelection> closest_leds(const BodyMap& body, const std::map<NodeId, Pose2>& poses,
                                    const LedRing& ring, Vec2 stimulus, int k) {
  struct Candidate {
    double dist;
    NodeId node;
    int led;
  };
  std::vector<Candidate> candidates;
  for (NodeId id : body.tree.node_ids()) {
    const SubtreeDescription* sub = body.tree.find(id);
    if (sub->caps.led_count <= 0) continue;
    const Pose2& pose = poses.at(id);
    for (int led = 0; led < sub->caps.led_count; ++led) {
      const double angle = 2.0 * M_PI * static_cast<double>(led) / sub->caps.led_count;
      const Vec2 pos = transform_point(
          pose, {ring.radius * std::cos(angle), ring.radius * std::sin(angle)});
      candidates.push_back({distance(pos, stimulus), id, led});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.node != b.node) return a.node < b.node;
    return a.led < b.led;
  });

  std::set<LedSelection> out;
  const int take = std::min<int>(k, static_cast<int>(candidates.size()));
  for (int i = 0; i < take; ++i) out.insert({candidates[i].node, candidates[i].led});
  return out;
}

bool dock_feasible(const Pose2& gripper_pose, const Pose2& goal_pose, double eps_dist,
                   double eps_angle) {
  const double pos_err = hypot2(gripper_pose.x - goal_pose.x, gripper_pose.y - goal_pose.y);
  const double ang_err = std::abs(normalize_angle(gripper_pose.theta - goal_pose.theta));
  return pos_err <= eps_dist && ang_err <= eps_angle;
}

Pose2 dock_goal_pose(const Pose2& parent_module_world, PortId parent_port, PortId entry_port) {
  return compose(parent_module_world, mated_pose(parent_port, entry_port));
}

Pose2 integrate_pose(const Pose2& root_pose, const PlanarTwist& twist, double dt) {
  // Piecewise-constant twist applied as an exact rigid displacement so that
  // member poses derived from the tree cannot drift apart.
  const Vec2 dp = rotate(root_pose.theta, {twist.vx * dt, twist.vy * dt});
  return {root_pose.x + dp.x, root_pose.y + dp.y,
          normalize_angle(root_pose.theta + twist.omega * dt)};
}

}  // namespace vns
