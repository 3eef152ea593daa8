#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "vns/topology.hpp"

namespace vns {

constexpr double kVMax = 0.3;      // m/s per module
constexpr double kOmegaMax = 1.5;  // rad/s per module
constexpr int kLedCount = 12;
constexpr double kLedRadius = 0.085;

// Velocity command in the module's own frame; limits enforced by the caller
// through common-factor scaling so composites stay rigid.
struct ModuleCommand {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
};

struct StimulusReading {
  double distance = 0.0;
  double bearing = 0.0;  // radians in the sensing module's frame
  double sensed_at = 0.0;
};

struct LedRing {
  int count = kLedCount;
  double radius = kLedRadius;

  double angle_of(int led_index) const {
    return 2.0 * M_PI * static_cast<double>(led_index) / count;
  }
};

// Piecewise-linear moving stimulus; position is continuous in time.
struct Stimulus {
  struct Waypoint {
    double time = 0.0;
    Vec2 position;
  };
  std::vector<Waypoint> waypoints;

  Vec2 position_at(double t) const;
};

struct PlanarTwist {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
};

// Decomposes a brain-frame twist into per-module commands. When any module
// command would exceed limits the whole twist is scaled by one common factor.
std::map<NodeId, ModuleCommand> twist_to_module_commands(const BodyMap& body,
                                                         const std::map<NodeId, Pose2>& poses,
                                                         const PlanarTwist& twist);

std::optional<StimulusReading> sense_stimulus(const Pose2& module_pose, Vec2 stimulus,
                                              double r_sense, double now = 0.0);

struct LedSelection {
  NodeId node;
  int led_index;

  auto operator<=>(const LedSelection&) const = default;
};

// The k LEDs over the whole body closest to the stimulus; ties broken by
// ascending (node, led_index).
std::set<LedSelection> closest_leds(const BodyMap& body, const std::map<NodeId, Pose2>& poses,
                                    const LedRing& ring, Vec2 stimulus, int k);

bool dock_feasible(const Pose2& gripper_pose, const Pose2& goal_pose, double eps_dist,
                   double eps_angle);

// World pose the moving module must reach so that its entry port mates the
// target port.
Pose2 dock_goal_pose(const Pose2& parent_module_world, PortId parent_port, PortId entry_port);

// Per-component kinematic state: the root pose is authoritative, member poses
// derive from the tree. Free robots are one-node components.
struct ComponentMotion {
  Pose2 root_pose;
  PlanarTwist twist;  // brain-frame twist, piecewise constant between ticks
};

// Advances one component rigidly by dt under its brain-frame twist.
Pose2 integrate_pose(const Pose2& root_pose, const PlanarTwist& twist, double dt);

}  // namespace vns
