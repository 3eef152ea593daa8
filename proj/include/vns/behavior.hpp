#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vns/body_sim.hpp"
#include "vns/params.hpp"
#include "vns/topology.hpp"

namespace vns {

struct CapabilityRequirement {
  bool needs_wheels = false;
  int min_leds = 0;
  bool needs_stimulus_sensor = false;
  bool needs_gripper = false;

  bool satisfied_by(const Capabilities& caps) const {
    return (!needs_wheels || caps.has_wheels) && caps.led_count >= min_leds &&
           (!needs_stimulus_sensor || caps.has_stimulus_sensor) &&
           (!needs_gripper || caps.has_gripper);
  }

  bool operator==(const CapabilityRequirement&) const = default;
};

// A pre-programmed body shape: a tree of capability requirements with the
// ports each slot should dock on.
struct TemplateSlot {
  struct Child;

  CapabilityRequirement requirement;
  std::vector<Child> children;

  int slot_count() const;
  int depth() const;
};

struct TemplateSlot::Child {
  PortId via_port = 0;
  PortId child_entry_port = 0;
  TemplateSlot slot;
};

struct MorphologyTemplate {
  std::string name;
  TemplateSlot shape;

  int slot_count() const { return shape.slot_count(); }
};

// True when the concrete subtree realizes the slot tree: capabilities satisfy
// requirements and the child shapes match under some pairing (ports are not
// required to coincide; bodies keep whatever ports they were built with).
bool matches_template(const SubtreeDescription& sub, const TemplateSlot& slot);

enum class BehaviorMode { Forming, Idle, Pointing, Retreating, Recovering };

const char* behavior_mode_name(BehaviorMode mode);

// Engine-assigned docking objective for a navigating brain.
struct DockGoal {
  Pose2 module_goal;  // world pose the gripping module must reach
  NodeId host = kInvalidNode;
  PortId host_port = 0;
  PortId entry_port = 0;
};

struct BrainBehaviorState {
  BehaviorMode mode = BehaviorMode::Idle;
  std::optional<Vec2> stimulus_estimate;  // brain frame
  double estimate_time = -1.0e9;
  std::map<NodeId, StimulusReading> reports;  // latest reading per origin
  std::optional<DockGoal> goal;
  std::map<NodeId, std::uint32_t> led_masks;       // last commanded masks
  std::map<NodeId, ModuleCommand> last_commands;   // last commanded wheels
};

// Transforms collated readings into the brain frame via the knowledge pose
// chain and keeps the minimum-distance one. Origins not present in knowledge
// are skipped.
std::optional<Vec2> fuse_reports(const std::vector<std::pair<NodeId, StimulusReading>>& reports,
                                 const SubtreeDescription& knowledge);

struct BrainDecision {
  BrainBehaviorState next;
  PlanarTwist twist;
  bool light_leds = false;
};

// Stimulus FSM: Idle -> Pointing -> Retreating with hysteresis band h.
BrainDecision brain_decide(const BrainBehaviorState& bstate, std::optional<Vec2> fused,
                           double now, const Params& params);

// Rotate-then-translate go-to-pose; twist is in the navigating brain's frame.
PlanarTwist navigate_twist(const Pose2& own_pose, const Pose2& goal_pose, const Params& params);

struct RecruitAssignment {
  NodeId recruit = kInvalidNode;
  NodeId parent = kInvalidNode;
  PortId parent_port = 0;
  PortId entry_port = 0;
  int slot_index = 0;  // preorder index in the template
  Pose2 goal;          // world pose the recruit's module must reach
};

struct FormingState {
  MorphologyTemplate tmpl;
  std::map<int, NodeId> bindings;  // preorder slot index -> concrete node
  std::optional<RecruitAssignment> pending;
  std::set<int> reported_unfillable;
};

struct RecruitmentResult {
  FormingState next;
  std::vector<RecruitAssignment> assignments;
  bool complete = false;
  bool insufficient = false;
};

// Advertises the next unfilled slot's parent port and assigns the nearest
// capable free robot (ties by lower NodeId). One recruit per port at a time.
RecruitmentResult recruitment_step(const FormingState& fstate,
                                   const SubtreeDescription& knowledge,
                                   const std::vector<std::pair<NodeId, Pose2>>& free_pool,
                                   const std::map<NodeId, Pose2>& body_poses);

// Child node whose detachment splits the body into template_b (detached) and
// template_a (remainder); lowest matching NodeId wins.
NodeId split_plan(const SubtreeDescription& knowledge, const MorphologyTemplate& template_a,
                  const MorphologyTemplate& template_b);

// Original template with |failed| slots removed bottom-up from the deepest
// leaves (ties: latest preorder slot first). The root slot is never removed.
MorphologyTemplate recovery_target(const MorphologyTemplate& original,
                                   const std::set<NodeId>& failed,
                                   const std::vector<SubtreeDescription>& survivors);

// Surviving fragment root with the lowest NodeId leads the re-merge.
NodeId recovery_recruiter(const std::vector<SubtreeDescription>& survivors);

}  // namespace vns
