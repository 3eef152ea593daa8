#pragma once

#include <map>
#include <random>
#include <utility>
#include <vector>

#include "vns/protocol.hpp"
#include "vns/topology.hpp"

namespace vns::testing {

// Independent record of how a random body was built, used as the oracle side
// of structural comparisons.
struct BuiltBody {
  BodyMap body;
  std::map<NodeId, NodeId> parent_of;                     // child -> parent
  std::map<NodeId, std::pair<PortId, PortId>> ports_of;   // child -> (parent_port, entry_port)
};

inline BuiltBody make_random_body(std::mt19937& rng, int n, NodeId first_id = 0) {
  BuiltBody out;
  out.body = single_node_body(first_id);
  std::vector<NodeId> ids{first_id};
  for (int i = 1; i < n; ++i) {
    const NodeId child = first_id + i;
    while (true) {
      const NodeId parent = ids[rng() % ids.size()];
      const auto open = free_ports(out.body, parent);
      if (open.empty()) continue;
      const PortId parent_port = open[rng() % open.size()];
      const PortId entry_port = static_cast<PortId>(rng() % kPortCount);
      out.body = attach_subtree(out.body, parent, parent_port, entry_port,
                                single_node_body(child).tree);
      out.parent_of[child] = parent;
      out.ports_of[child] = {parent_port, entry_port};
      ids.push_back(child);
      break;
    }
  }
  return out;
}

// Synthesizes the quiescent distributed state for a ground-truth body: every
// node knows exactly its own subtree and holds links mirroring the tree edges.
inline std::map<NodeId, NodeState> states_for_body(const BodyMap& body, double now) {
  std::map<NodeId, NodeState> states;
  for (NodeId id : body.tree.node_ids()) {
    const SubtreeDescription* sub = body.tree.find(id);
    NodeState st = make_node(id, sub->caps, now + 0.1);
    st.knowledge = *sub;
    st.brain_id_belief = body.root();
    const auto edge = parent_edge_of(body, id);
    if (edge) {
      st.role = Role::Member;
      st.links.push_back({edge->child_port, edge->parent, edge->parent_port,
                          LinkDirection::ParentWard, now, true});
    }
    for (const auto& c : sub->children) {
      st.links.push_back({c.via_port, c.sub.root, c.child_entry_port, LinkDirection::ChildWard,
                          now, true});
    }
    states[id] = std::move(st);
  }
  return states;
}

}  // namespace vns::testing
