#include "vns/topology.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <utility>

namespace vns {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::UnknownParent: return "UnknownParent";
    case Errc::PortOccupied: return "PortOccupied";
    case Errc::DuplicateNodeId: return "DuplicateNodeId";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::CannotDetachRoot: return "CannotDetachRoot";
    case Errc::TimeTravel: return "TimeTravel";
    case Errc::LinkNotMated: return "LinkNotMated";
    case Errc::ProtocolViolation: return "ProtocolViolation";
    case Errc::UnknownOrigin: return "UnknownOrigin";
    case Errc::InsufficientRobots: return "InsufficientRobots";
    case Errc::NoValidSplit: return "NoValidSplit";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::MalformedTrace: return "MalformedTrace";
    case Errc::ScenarioError: return "ScenarioError";
    case Errc::IoError: return "IoError";
  }
  return "UnknownError";
}

Pose2 port_frame(PortId port) {
  const double angle = 2.0 * M_PI * static_cast<double>(port) / kPortCount;
  return {kModuleRadius * std::cos(angle), kModuleRadius * std::sin(angle),
          normalize_angle(angle)};
}

Pose2 mated_pose(PortId parent_port, PortId child_port) {
  const Pose2 flip{0.0, 0.0, M_PI};
  return compose(compose(port_frame(parent_port), flip), inverse(port_frame(child_port)));
}

void SubtreeDescription::insert_child(ChildLink link) {
  const auto pos = std::find_if(children.begin(), children.end(), [&](const ChildLink& c) {
    return c.via_port > link.via_port;
  });
  children.insert(pos, std::move(link));
}

int SubtreeDescription::node_count() const {
  int n = 1;
  for (const auto& c : children) n += c.sub.node_count();
  return n;
}

bool SubtreeDescription::contains(NodeId id) const { return find(id) != nullptr; }

const SubtreeDescription* SubtreeDescription::find(NodeId id) const {
  if (root == id) return this;
  for (const auto& c : children) {
    if (const auto* hit = c.sub.find(id)) return hit;
  }
  return nullptr;
}

SubtreeDescription* SubtreeDescription::find(NodeId id) {
  return const_cast<SubtreeDescription*>(std::as_const(*this).find(id));
}

std::vector<NodeId> SubtreeDescription::node_ids() const {
  std::vector<NodeId> ids;
  ids.push_back(root);
  for (const auto& c : children) {
    const auto sub_ids = c.sub.node_ids();
    ids.insert(ids.end(), sub_ids.begin(), sub_ids.end());
  }
  return ids;
}

bool structurally_equal(const SubtreeDescription& a, const SubtreeDescription& b) {
  if (a.root != b.root || !(a.caps == b.caps)) return false;
  if (a.children.size() != b.children.size()) return false;
  for (size_t i = 0; i < a.children.size(); ++i) {
    const auto& ca = a.children[i];
    const auto& cb = b.children[i];
    if (ca.via_port != cb.via_port || ca.child_entry_port != cb.child_entry_port) return false;
    if (!pose_equal(ca.relative_pose, cb.relative_pose)) return false;
    if (!structurally_equal(ca.sub, cb.sub)) return false;
  }
  return true;
}

BodyMap single_node_body(NodeId id, const Capabilities& caps) {
  BodyMap body;
  body.tree.root = id;
  body.tree.caps = caps;
  return body;
}

namespace {

void collect_used_ports(const SubtreeDescription& sub, NodeId id, std::vector<PortId>& out) {
  if (sub.root == id) {
    for (const auto& c : sub.children) out.push_back(c.via_port);
  }
  for (const auto& c : sub.children) {
    if (c.sub.root == id) out.push_back(c.child_entry_port);
    collect_used_ports(c.sub, id, out);
  }
}

// Locates the parent link record of `id`, or nullptr when id is the root.
const SubtreeDescription::ChildLink* find_parent_link(const SubtreeDescription& sub, NodeId id) {
  for (const auto& c : sub.children) {
    if (c.sub.root == id) return &c;
    if (const auto* hit = find_parent_link(c.sub, id)) return hit;
  }
  return nullptr;
}

}  // namespace

BodyMap attach_subtree(const BodyMap& body, NodeId parent, PortId parent_port,
                       PortId child_entry_port, const SubtreeDescription& sub) {
  BodyMap result = body;
  SubtreeDescription* host = result.tree.find(parent);
  if (host == nullptr) {
    throw VnsError(Errc::UnknownParent, "attach parent " + std::to_string(parent));
  }
  std::vector<PortId> used;
  collect_used_ports(result.tree, parent, used);
  if (std::find(used.begin(), used.end(), parent_port) != used.end()) {
    throw VnsError(Errc::PortOccupied,
                   "node " + std::to_string(parent) + " port " + std::to_string(parent_port));
  }
  for (NodeId id : sub.node_ids()) {
    if (result.tree.contains(id)) {
      throw VnsError(Errc::DuplicateNodeId, "node " + std::to_string(id));
    }
  }
  host->insert_child({parent_port, child_entry_port,
                      mated_pose(parent_port, child_entry_port), sub});
  return result;
}

std::pair<BodyMap, SubtreeDescription> detach_subtree(const BodyMap& body, NodeId node) {
  if (body.root() == node) {
    throw VnsError(Errc::CannotDetachRoot, "node " + std::to_string(node));
  }
  BodyMap remainder = body;

  std::optional<SubtreeDescription> detached;
  std::function<bool(SubtreeDescription&)> cut = [&](SubtreeDescription& sub) {
    for (auto it = sub.children.begin(); it != sub.children.end(); ++it) {
      if (it->sub.root == node) {
        detached = std::move(it->sub);
        sub.children.erase(it);
        return true;
      }
      if (cut(it->sub)) return true;
    }
    return false;
  };

  if (!cut(remainder.tree)) {
    throw VnsError(Errc::UnknownNode, "detach " + std::to_string(node));
  }
  return {std::move(remainder), std::move(*detached)};
}

BodyMap reroot(const BodyMap& body, NodeId new_root) {
  if (!body.contains(new_root)) {
    throw VnsError(Errc::UnknownNode, "reroot " + std::to_string(new_root));
  }
  if (body.root() == new_root) return body;

  // Path of node ids from old root down to new_root.
  std::vector<NodeId> path;
  std::function<bool(const SubtreeDescription&)> descend = [&](const SubtreeDescription& sub) {
    path.push_back(sub.root);
    if (sub.root == new_root) return true;
    for (const auto& c : sub.children) {
      if (descend(c.sub)) return true;
    }
    path.pop_back();
    return false;
  };
  descend(body.tree);

  // Flip one edge at a time, moving the root a single hop toward new_root.
  BodyMap current = body;
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    const NodeId child = path[i + 1];
    const auto* link = find_parent_link(current.tree, child);
    const PortId via = link->via_port;
    const PortId entry = link->child_entry_port;
    const Pose2 pose = link->relative_pose;

    auto [remainder, child_sub] = detach_subtree(current, child);
    SubtreeDescription flipped = std::move(child_sub);
    flipped.insert_child({entry, via, inverse(pose), remainder.tree});
    current.tree = std::move(flipped);
  }
  return current;
}

std::map<NodeId, Pose2> world_poses(const BodyMap& body, const Pose2& root_world_pose) {
  std::map<NodeId, Pose2> poses;
  std::function<void(const SubtreeDescription&, const Pose2&)> walk =
      [&](const SubtreeDescription& sub, const Pose2& pose) {
        poses[sub.root] = pose;
        for (const auto& c : sub.children) walk(c.sub, compose(pose, c.relative_pose));
      };
  walk(body.tree, root_world_pose);
  return poses;
}

std::vector<Violation> validate(const BodyMap& body) {
  std::vector<Violation> out;
  std::set<NodeId> seen;

  std::function<void(const SubtreeDescription&)> walk = [&](const SubtreeDescription& sub) {
    if (sub.root < 0) {
      out.push_back({Errc::ValidationError, "negative node id " + std::to_string(sub.root)});
    }
    if (!seen.insert(sub.root).second) {
      out.push_back({Errc::DuplicateNodeId, "node " + std::to_string(sub.root)});
    }
    std::set<PortId> used;
    for (const auto& c : sub.children) {
      if (c.via_port < 0 || c.via_port >= kPortCount) {
        out.push_back({Errc::ValidationError, "bad port index " + std::to_string(c.via_port)});
      }
      if (!used.insert(c.via_port).second) {
        out.push_back({Errc::PortOccupied, "node " + std::to_string(sub.root) + " port " +
                                               std::to_string(c.via_port)});
      }
      walk(c.sub);
    }
  };
  walk(body.tree);
  return out;
}

std::vector<std::pair<NodeId, NodeId>> undirected_edges(const BodyMap& body) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::function<void(const SubtreeDescription&)> walk = [&](const SubtreeDescription& sub) {
    for (const auto& c : sub.children) {
      edges.emplace_back(std::min(sub.root, c.sub.root), std::max(sub.root, c.sub.root));
      walk(c.sub);
    }
  };
  walk(body.tree);
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::vector<PortId> free_ports(const BodyMap& body, NodeId node) {
  std::vector<PortId> used;
  collect_used_ports(body.tree, node, used);
  std::vector<PortId> out;
  for (PortId p = 0; p < kPortCount; ++p) {
    if (std::find(used.begin(), used.end(), p) == used.end()) out.push_back(p);
  }
  return out;
}

std::optional<ParentEdge> parent_edge_of(const BodyMap& body, NodeId node) {
  std::optional<ParentEdge> out;
  std::function<void(const SubtreeDescription&)> walk = [&](const SubtreeDescription& sub) {
    for (const auto& c : sub.children) {
      if (c.sub.root == node) {
        out = ParentEdge{sub.root, c.via_port, c.child_entry_port};
        return;
      }
      walk(c.sub);
    }
  };
  walk(body.tree);
  return out;
}

int depth_of(const BodyMap& body, NodeId node) {
  int depth = -1;
  std::function<bool(const SubtreeDescription&, int)> walk =
      [&](const SubtreeDescription& sub, int d) {
        if (sub.root == node) {
          depth = d;
          return true;
        }
        for (const auto& c : sub.children) {
          if (walk(c.sub, d + 1)) return true;
        }
        return false;
      };
  if (!walk(body.tree, 0)) {
    throw VnsError(Errc::UnknownNode, "depth_of " + std::to_string(node));
  }
  return depth;
}

}  // namespace vns
