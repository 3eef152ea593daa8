#pragma once

#include <map>
#include <optional>
#include <vector>

#include "vns/errors.hpp"
#include "vns/geometry.hpp"

namespace vns {

using NodeId = int;
using PortId = int;

constexpr NodeId kInvalidNode = -1;

// Fixed module geometry: uniform disks with evenly spaced perimeter ports.
constexpr int kPortCount = 8;
constexpr double kModuleDiameter = 0.17;
constexpr double kModuleRadius = kModuleDiameter / 2.0;

struct Capabilities {
  bool has_wheels = true;
  int led_count = 12;
  bool has_stimulus_sensor = true;
  bool has_gripper = true;

  bool operator==(const Capabilities&) const = default;
};

// Frame of port k in the module frame: on the perimeter, facing outward.
Pose2 port_frame(PortId port);

// Child-module frame in parent-module frame when child_port mates parent_port
// (port frames coincide, headings opposed).
Pose2 mated_pose(PortId parent_port, PortId child_port);

// A node's recursive knowledge of itself and all descendants.
struct SubtreeDescription {
  struct ChildLink;

  NodeId root = kInvalidNode;
  Capabilities caps;
  std::vector<ChildLink> children;  // kept sorted by via_port (canonical form)

  void insert_child(ChildLink link);
  int node_count() const;
  bool contains(NodeId id) const;
  const SubtreeDescription* find(NodeId id) const;
  SubtreeDescription* find(NodeId id);
  std::vector<NodeId> node_ids() const;
};

struct SubtreeDescription::ChildLink {
  PortId via_port = 0;          // port on this node
  PortId child_entry_port = 0;  // port on the child
  Pose2 relative_pose;          // child frame in this node's frame
  SubtreeDescription sub;
};

bool structurally_equal(const SubtreeDescription& a, const SubtreeDescription& b);

// Ground-truth connection topology of one composite body. The tree root is
// the single node unambiguously identifiable as the brain.
struct BodyMap {
  SubtreeDescription tree;

  NodeId root() const { return tree.root; }
  int node_count() const { return tree.node_count(); }
  bool contains(NodeId id) const { return tree.contains(id); }
};

BodyMap single_node_body(NodeId id, const Capabilities& caps = {});

BodyMap attach_subtree(const BodyMap& body, NodeId parent, PortId parent_port,
                       PortId child_entry_port, const SubtreeDescription& sub);

std::pair<BodyMap, SubtreeDescription> detach_subtree(const BodyMap& body, NodeId node);

BodyMap reroot(const BodyMap& body, NodeId new_root);

std::map<NodeId, Pose2> world_poses(const BodyMap& body, const Pose2& root_world_pose);

std::vector<Violation> validate(const BodyMap& body);

// Undirected edge set as ordered (min,max) id pairs; used by reroot checks.
std::vector<std::pair<NodeId, NodeId>> undirected_edges(const BodyMap& body);

// Ports of `node` not used by any tree edge.
std::vector<PortId> free_ports(const BodyMap& body, NodeId node);

// Depth of `node` below the root (root = 0); throws UnknownNode.
int depth_of(const BodyMap& body, NodeId node);

struct ParentEdge {
  NodeId parent = kInvalidNode;
  PortId parent_port = 0;
  PortId child_port = 0;
};

// Edge above `node`; nullopt when node is the root.
std::optional<ParentEdge> parent_edge_of(const BodyMap& body, NodeId node);

}  // namespace vns
