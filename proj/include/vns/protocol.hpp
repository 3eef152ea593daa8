#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vns/behavior.hpp"
#include "vns/body_sim.hpp"
#include "vns/params.hpp"
#include "vns/topology.hpp"

namespace vns {

enum class Role { Brain, Member };
enum class LinkDirection { ParentWard, ChildWard };

struct LinkState {
  PortId port = 0;
  NodeId peer = kInvalidNode;
  PortId peer_port = 0;  // learned at mating time
  LinkDirection direction = LinkDirection::ChildWard;
  double last_heartbeat_rx = 0.0;
  bool alive = true;
};

// --- messages -------------------------------------------------------------

struct Heartbeat {};

struct HopRecord {
  NodeId node = kInvalidNode;
  PortId parent_port = 0;
  PortId child_entry_port = 0;
  Pose2 pose;
};

// The single message passed up when a body cedes authority. entry/parent port
// identify the new physical joint; intermediate nodes append hop records.
struct MergeAnnounce {
  SubtreeDescription sub;
  PortId entry_port = 0;   // port on the ceding root
  PortId parent_port = 0;  // port on the attachment-point node
  std::vector<HopRecord> via_port_chain;
};

struct SplitNotice {
  NodeId detached_root = kInvalidNode;
};

struct SensorReport {
  NodeId origin = kInvalidNode;
  StimulusReading reading;
};

struct ActuatorCommand {
  NodeId target = kInvalidNode;
  ModuleCommand command;
};

struct LedCommand {
  NodeId target = kInvalidNode;
  std::uint32_t led_mask = 0;
};

struct DetachOrder {
  NodeId split_at = kInvalidNode;
};

// Root-ward authority handover for one hop: the sender's remaining subtree
// becomes a child branch of the receiver, with the edge pose inverted.
struct CedeHandover {
  SubtreeDescription sub;
  PortId parent_port = 0;       // receiver's port toward the sender
  PortId child_entry_port = 0;  // sender's port toward the receiver
  Pose2 pose;                   // sender frame in receiver frame
};

struct CedeOrder {
  NodeId new_local_root = kInvalidNode;
  CedeHandover handover;
};

using Message = std::variant<Heartbeat, MergeAnnounce, SplitNotice, SensorReport, ActuatorCommand,
                             LedCommand, DetachOrder, CedeOrder>;

const char* message_kind_name(const Message& msg);
bool is_structural(const Message& msg);  // topology-affecting kinds

struct MessageEnvelope {
  NodeId src = kInvalidNode;
  NodeId dst = kInvalidNode;
  PortId port = 0;  // sender's port
  Message payload;
  double send_time = 0.0;
};

// --- events and actions ---------------------------------------------------

struct MessageArrived {
  MessageEnvelope envelope;
};
struct PhysicalAttached {
  PortId port = 0;
  NodeId peer = kInvalidNode;
  PortId peer_port = 0;
  LinkDirection direction = LinkDirection::ChildWard;
};
struct PhysicalDetached {
  PortId port = 0;
};
struct TimerFired {};
struct SensorSampled {
  std::optional<StimulusReading> reading;
  Pose2 own_world_pose;  // idealized odometry supplied by the harness
};

using NodeEvent =
    std::variant<MessageArrived, PhysicalAttached, PhysicalDetached, TimerFired, SensorSampled>;

struct SetWheelCommand {
  ModuleCommand command;
};
struct SetLeds {
  std::uint32_t mask = 0;
};
struct ReleasePort {
  PortId port = 0;
};
struct GripPort {
  PortId port = 0;
};
struct BecomeBrain {};
struct CedeBrain {};

using LocalAction =
    std::variant<SetWheelCommand, SetLeds, ReleasePort, GripPort, BecomeBrain, CedeBrain>;

// --- node state -----------------------------------------------------------

struct NodeStats {
  std::uint64_t reports_forwarded = 0;
  std::uint64_t messages_rx = 0;
};

struct NodeState {
  NodeId id = kInvalidNode;
  Capabilities caps;
  Role role = Role::Brain;
  std::vector<LinkState> links;
  SubtreeDescription knowledge;  // self + descendants; knowledge.root == id
  NodeId brain_id_belief = kInvalidNode;
  double heartbeat_tx_due = 0.0;
  BrainBehaviorState behavior;
  NodeStats stats;

  const LinkState* parent_link() const;
  const LinkState* link_on_port(PortId port) const;
  const LinkState* link_to_peer(NodeId peer) const;
};

NodeState make_node(NodeId id, const Capabilities& caps, double first_heartbeat_due);

struct StepResult {
  NodeState next;
  std::vector<MessageEnvelope> outbox;
  std::vector<LocalAction> actions;
  std::vector<LinkState> detected_faults;   // links newly marked dead this step
  std::vector<std::string> violations;      // dropped/undeliverable inputs
};

// Pure protocol transition: event in, new state + outputs out.
StepResult node_step(const NodeState& state, const NodeEvent& event, double now,
                     const Params& params);

// --- named protocol operations (also used inside node_step) ----------------

Message build_merge_announce(const SubtreeDescription& ceding_knowledge, PortId entry_port,
                             PortId parent_port);

SubtreeDescription absorb_merge(const SubtreeDescription& knowledge, PortId via_child_port,
                                const MergeAnnounce& announce);

SubtreeDescription prune_split(const SubtreeDescription& knowledge, NodeId detached_root);

// Marks links silent for longer than timeout as dead and returns them.
std::vector<LinkState> detect_failures(NodeState& state, double now, double timeout);

struct CedeResult {
  NodeState next;
  std::vector<MessageEnvelope> outbox;
};

// Starts hop-by-hop authority transfer toward new_local_root.
CedeResult initiate_cede(const NodeState& brain_state, NodeId new_local_root, double now);

// Routes a target-addressed message one hop down the knowledge tree.
std::optional<MessageEnvelope> route_down(const NodeState& state, NodeId target,
                                          const Message& msg, double now);

}  // namespace vns
