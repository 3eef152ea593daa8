#include "vns/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace vns {

const char* message_kind_name(const Message& msg) {
  struct Visitor {
    const char* operator()(const Heartbeat&) { return "Heartbeat"; }
    const char* operator()(const MergeAnnounce&) { return "MergeAnnounce"; }
    const char* operator()(const SplitNotice&) { return "SplitNotice"; }
    const char* operator()(const SensorReport&) { return "SensorReport"; }
    const char* operator()(const ActuatorCommand&) { return "ActuatorCommand"; }
    const char* operator()(const LedCommand&) { return "LedCommand"; }
    const char* operator()(const DetachOrder&) { return "DetachOrder"; }
    const char* operator()(const CedeOrder&) { return "CedeOrder"; }
  };
  return std::visit(Visitor{}, msg);
}

bool is_structural(const Message& msg) {
  return std::holds_alternative<MergeAnnounce>(msg) || std::holds_alternative<SplitNotice>(msg) ||
         std::holds_alternative<DetachOrder>(msg) || std::holds_alternative<CedeOrder>(msg);
}

const LinkState* NodeState::parent_link() const {
  for (const auto& l : links) {
    if (l.direction == LinkDirection::ParentWard && l.alive) return &l;
  }
  return nullptr;
}

const LinkState* NodeState::link_on_port(PortId port) const {
  for (const auto& l : links) {
    if (l.port == port) return &l;
  }
  return nullptr;
}

const LinkState* NodeState::link_to_peer(NodeId peer) const {
  for (const auto& l : links) {
    if (l.peer == peer) return &l;
  }
  return nullptr;
}

NodeState make_node(NodeId id, const Capabilities& caps, double first_heartbeat_due) {
  NodeState state;
  state.id = id;
  state.caps = caps;
  state.role = Role::Brain;
  state.knowledge.root = id;
  state.knowledge.caps = caps;
  state.brain_id_belief = id;
  state.heartbeat_tx_due = first_heartbeat_due;
  return state;
}

Message build_merge_announce(const SubtreeDescription& ceding_knowledge, PortId entry_port,
                             PortId parent_port) {
  MergeAnnounce announce;
  announce.sub = ceding_knowledge;
  announce.entry_port = entry_port;
  announce.parent_port = parent_port;
  return announce;
}

SubtreeDescription absorb_merge(const SubtreeDescription& knowledge, PortId via_child_port,
                                const MergeAnnounce& announce) {
  for (NodeId id : announce.sub.node_ids()) {
    if (knowledge.contains(id)) {
      throw VnsError(Errc::DuplicateNodeId, "announced node " + std::to_string(id));
    }
  }
  SubtreeDescription out = knowledge;
  if (announce.via_port_chain.empty()) {
    // This node is the attachment point; graft directly under the mated port.
    out.insert_child({via_child_port, announce.entry_port,
                      mated_pose(via_child_port, announce.entry_port), announce.sub});
  } else {
    const HopRecord& hop = announce.via_port_chain.front();
    SubtreeDescription* host = out.find(hop.node);
    if (host == nullptr) {
      throw VnsError(Errc::UnknownNode, "attachment node " + std::to_string(hop.node));
    }
    host->insert_child({hop.parent_port, hop.child_entry_port, hop.pose, announce.sub});
  }
  return out;
}

SubtreeDescription prune_split(const SubtreeDescription& knowledge, NodeId detached_root) {
  if (detached_root == knowledge.root) {
    throw VnsError(Errc::UnknownNode, "cannot prune own root");
  }
  SubtreeDescription out = knowledge;
  std::function<bool(SubtreeDescription&)> cut = [&](SubtreeDescription& sub) {
    for (auto it = sub.children.begin(); it != sub.children.end(); ++it) {
      if (it->sub.root == detached_root) {
        sub.children.erase(it);
        return true;
      }
      if (cut(it->sub)) return true;
    }
    return false;
  };
  if (!cut(out)) {
    throw VnsError(Errc::UnknownNode, "prune " + std::to_string(detached_root));
  }
  return out;
}

std::vector<LinkState> detect_failures(NodeState& state, double now, double timeout) {
  std::vector<LinkState> dead;
  for (auto& link : state.links) {
    if (link.alive && now - link.last_heartbeat_rx > timeout) {
      link.alive = false;
      dead.push_back(link);
    }
  }
  return dead;
}

namespace {

MessageEnvelope make_envelope(NodeId src, const LinkState& link, Message payload, double now) {
  return {src, link.peer, link.port, std::move(payload), now};
}

SubtreeDescription branch_removed(const SubtreeDescription& knowledge, NodeId branch_root) {
  SubtreeDescription out = knowledge;
  out.children.erase(
      std::remove_if(out.children.begin(), out.children.end(),
                     [&](const auto& c) { return c.sub.root == branch_root; }),
      out.children.end());
  return out;
}

// One hop of authority transfer: strip the branch toward `target`, hand the
// remainder over on that link, and flip the link parent-ward.
bool cede_toward(NodeState& state, NodeId target, double now,
                 std::vector<MessageEnvelope>& outbox) {
  const SubtreeDescription::ChildLink* branch = nullptr;
  for (const auto& c : state.knowledge.children) {
    if (c.sub.contains(target)) {
      branch = &c;
      break;
    }
  }
  if (branch == nullptr) return false;

  LinkState* link = nullptr;
  for (auto& l : state.links) {
    if (l.port == branch->via_port && l.direction == LinkDirection::ChildWard && l.alive) {
      link = &l;
      break;
    }
  }
  if (link == nullptr) return false;

  CedeOrder order;
  order.new_local_root = target;
  order.handover.sub = branch_removed(state.knowledge, branch->sub.root);
  order.handover.parent_port = link->peer_port;
  order.handover.child_entry_port = link->port;
  order.handover.pose = inverse(branch->relative_pose);

  state.knowledge = order.handover.sub;
  link->direction = LinkDirection::ParentWard;
  state.role = Role::Member;
  state.brain_id_belief = target;
  outbox.push_back(make_envelope(state.id, *link, std::move(order), now));
  return true;
}

}  // namespace

CedeResult initiate_cede(const NodeState& brain_state, NodeId new_local_root, double now) {
  if (brain_state.role != Role::Brain) {
    throw VnsError(Errc::ProtocolViolation, "cede initiated by non-brain");
  }
  if (!brain_state.knowledge.contains(new_local_root)) {
    throw VnsError(Errc::UnknownNode, "cede target " + std::to_string(new_local_root));
  }
  CedeResult result{brain_state, {}};
  if (new_local_root == brain_state.id) return result;
  if (!cede_toward(result.next, new_local_root, now, result.outbox)) {
    throw VnsError(Errc::ProtocolViolation, "no live link toward cede target");
  }
  return result;
}

std::optional<MessageEnvelope> route_down(const NodeState& state, NodeId target,
                                          const Message& msg, double now) {
  for (const auto& branch : state.knowledge.children) {
    if (!branch.sub.contains(target)) continue;
    for (const auto& link : state.links) {
      if (link.port == branch.via_port && link.direction == LinkDirection::ChildWard &&
          link.alive) {
        return make_envelope(state.id, link, msg, now);
      }
    }
  }
  return std::nullopt;
}

namespace {

struct StepContext {
  StepResult& result;
  const Params& params;
  double now;

  NodeState& state() { return result.next; }

  LinkState* mutable_link_to_peer(NodeId peer) {
    for (auto& l : state().links) {
      if (l.peer == peer) return &l;
    }
    return nullptr;
  }

  void send_on(const LinkState& link, Message msg) {
    result.outbox.push_back(make_envelope(state().id, link, std::move(msg), now));
  }
};

void handle_merge_announce(StepContext& ctx, const LinkState& link, const MergeAnnounce& a) {
  NodeState& st = ctx.state();
  try {
    st.knowledge = absorb_merge(st.knowledge, link.port, a);
  } catch (const VnsError& e) {
    if (e.code() == Errc::DuplicateNodeId && a.via_port_chain.empty()) {
      // Attempted self-merge (cycle): the attachment point refuses and lets
      // go of the port. A cycle always duplicates the attachment node's own
      // subtree, so it is caught here and never relayed.
      ctx.result.actions.push_back(ReleasePort{link.port});
      ctx.result.violations.push_back(std::string("merge rejected: ") + e.what());
    } else {
      ctx.result.violations.push_back(std::string("merge dropped: ") + e.what());
    }
    return;
  }
  const LinkState* parent = st.parent_link();
  if (st.role == Role::Member && parent != nullptr) {
    MergeAnnounce fwd = a;
    if (fwd.via_port_chain.empty()) {
      fwd.via_port_chain.push_back(
          {st.id, link.port, link.peer_port, mated_pose(link.port, link.peer_port)});
    } else {
      fwd.via_port_chain.push_back(
          {st.id, link.port, parent->port, mated_pose(parent->peer_port, parent->port)});
    }
    ctx.send_on(*parent, std::move(fwd));
  }
}

void handle_split_notice(StepContext& ctx, const SplitNotice& s) {
  NodeState& st = ctx.state();
  try {
    st.knowledge = prune_split(st.knowledge, s.detached_root);
  } catch (const VnsError& e) {
    ctx.result.violations.push_back(std::string("split notice dropped: ") + e.what());
    return;
  }
  const LinkState* parent = st.parent_link();
  if (st.role == Role::Member && parent != nullptr) ctx.send_on(*parent, s);
}

void handle_cede_order(StepContext& ctx, LinkState& link, const CedeOrder& order) {
  NodeState& st = ctx.state();
  if (link.direction != LinkDirection::ParentWard) {
    ctx.result.violations.push_back("cede order on non-parent link");
    return;
  }
  // Former parent becomes a child branch carrying its own remainder.
  link.direction = LinkDirection::ChildWard;
  st.knowledge.insert_child(
      {link.port, link.peer_port, order.handover.pose, order.handover.sub});

  if (order.new_local_root == st.id) {
    st.role = Role::Brain;
    st.brain_id_belief = st.id;
    ctx.result.actions.push_back(BecomeBrain{});
    return;
  }
  if (!cede_toward(st, order.new_local_root, ctx.now, ctx.result.outbox)) {
    ctx.result.violations.push_back("cede target unreachable from " + std::to_string(st.id));
  }
}

void prune_behavior_caches(NodeState& st) {
  for (auto it = st.behavior.reports.begin(); it != st.behavior.reports.end();) {
    if (!st.knowledge.contains(it->first)) it = st.behavior.reports.erase(it);
    else ++it;
  }
  for (auto it = st.behavior.led_masks.begin(); it != st.behavior.led_masks.end();) {
    if (!st.knowledge.contains(it->first)) it = st.behavior.led_masks.erase(it);
    else ++it;
  }
  for (auto it = st.behavior.last_commands.begin(); it != st.behavior.last_commands.end();) {
    if (!st.knowledge.contains(it->first)) it = st.behavior.last_commands.erase(it);
    else ++it;
  }
}

void handle_message(StepContext& ctx, const MessageEnvelope& env) {
  NodeState& st = ctx.state();
  LinkState* link = ctx.mutable_link_to_peer(env.src);
  if (link == nullptr || !link->alive) {
    ctx.result.violations.push_back("message on unknown link from " + std::to_string(env.src));
    return;
  }
  // Any arrival proves the peer alive.
  link->last_heartbeat_rx = std::max(link->last_heartbeat_rx, ctx.now);
  st.stats.messages_rx++;

  struct Visitor {
    StepContext& ctx;
    LinkState& link;

    void operator()(const Heartbeat&) {}
    void operator()(const MergeAnnounce& a) { handle_merge_announce(ctx, link, a); }
    void operator()(const SplitNotice& s) { handle_split_notice(ctx, s); }
    void operator()(const CedeOrder& c) { handle_cede_order(ctx, link, c); }

    void operator()(const SensorReport& r) {
      NodeState& st = ctx.state();
      if (st.role == Role::Brain) {
        if (st.knowledge.contains(r.origin)) {
          st.behavior.reports[r.origin] = r.reading;
        } else {
          ctx.result.violations.push_back("report from unknown origin " +
                                          std::to_string(r.origin));
        }
        return;
      }
      const LinkState* parent = st.parent_link();
      if (parent != nullptr) {
        ctx.send_on(*parent, r);
        st.stats.reports_forwarded++;
      }
    }

    void operator()(const ActuatorCommand& c) {
      NodeState& st = ctx.state();
      if (c.target == st.id) {
        ctx.result.actions.push_back(SetWheelCommand{c.command});
        return;
      }
      if (auto env2 = route_down(st, c.target, c, ctx.now)) {
        ctx.result.outbox.push_back(std::move(*env2));
      } else {
        ctx.result.violations.push_back("unroutable actuator command for " +
                                        std::to_string(c.target));
      }
    }

    void operator()(const LedCommand& l) {
      NodeState& st = ctx.state();
      if (l.target == st.id) {
        ctx.result.actions.push_back(SetLeds{l.led_mask});
        return;
      }
      if (auto env2 = route_down(st, l.target, l, ctx.now)) {
        ctx.result.outbox.push_back(std::move(*env2));
      } else {
        ctx.result.violations.push_back("unroutable led command for " + std::to_string(l.target));
      }
    }

    void operator()(const DetachOrder& d) {
      NodeState& st = ctx.state();
      if (d.split_at == st.id) {
        const LinkState* parent = st.parent_link();
        if (parent != nullptr) {
          ctx.result.actions.push_back(ReleasePort{parent->port});
        } else {
          ctx.result.violations.push_back("detach order at root");
        }
        return;
      }
      if (auto env2 = route_down(st, d.split_at, d, ctx.now)) {
        ctx.result.outbox.push_back(std::move(*env2));
      } else {
        ctx.result.violations.push_back("unroutable detach order for " +
                                        std::to_string(d.split_at));
      }
    }
  };
  std::visit(Visitor{ctx, *link}, env.payload);
}

void handle_attached(StepContext& ctx, const PhysicalAttached& e) {
  NodeState& st = ctx.state();
  if (st.link_on_port(e.port) != nullptr) {
    ctx.result.violations.push_back("attach on occupied port " + std::to_string(e.port));
    return;
  }
  st.links.push_back({e.port, e.peer, e.peer_port, e.direction, ctx.now, true});
  if (e.direction == LinkDirection::ParentWard) {
    // This node was the local root of the docking body; cede authority with a
    // single message up the new link.
    st.role = Role::Member;
    st.brain_id_belief = e.peer;
    ctx.result.actions.push_back(CedeBrain{});
    ctx.send_on(st.links.back(), build_merge_announce(st.knowledge, e.port, e.peer_port));
  }
}

void handle_detached(StepContext& ctx, const PhysicalDetached& e) {
  NodeState& st = ctx.state();
  const LinkState* link = st.link_on_port(e.port);
  if (link == nullptr) {
    ctx.result.violations.push_back("detach on empty port " + std::to_string(e.port));
    return;
  }
  const LinkState removed = *link;
  st.links.erase(std::remove_if(st.links.begin(), st.links.end(),
                                [&](const LinkState& l) { return l.port == e.port; }),
                 st.links.end());

  if (removed.direction == LinkDirection::ParentWard) {
    // Zero-discovery split: held knowledge is already the whole new body.
    st.role = Role::Brain;
    st.brain_id_belief = st.id;
    ctx.result.actions.push_back(BecomeBrain{});
    return;
  }

  try {
    st.knowledge = prune_split(st.knowledge, removed.peer);
  } catch (const VnsError& e2) {
    ctx.result.violations.push_back(std::string("detach prune failed: ") + e2.what());
    return;
  }
  prune_behavior_caches(st);
  const LinkState* parent = st.parent_link();
  if (st.role == Role::Member && parent != nullptr) {
    ctx.send_on(*parent, SplitNotice{removed.peer});
  }
}

void handle_timer(StepContext& ctx) {
  NodeState& st = ctx.state();
  if (ctx.now + 1e-12 >= st.heartbeat_tx_due) {
    for (const auto& link : st.links) {
      if (link.alive) ctx.send_on(link, Heartbeat{});
    }
    st.heartbeat_tx_due = ctx.now + ctx.params.heartbeat_period;
  }
  const auto dead = detect_failures(st, ctx.now, ctx.params.failure_timeout);
  for (const auto& link : dead) {
    ctx.result.detected_faults.push_back(link);
    ctx.result.actions.push_back(ReleasePort{link.port});
  }
}

void handle_sensor(StepContext& ctx, const SensorSampled& e) {
  NodeState& st = ctx.state();
  if (st.role == Role::Member) {
    if (e.reading) {
      const LinkState* parent = st.parent_link();
      if (parent != nullptr) ctx.send_on(*parent, SensorReport{st.id, *e.reading});
    }
    return;
  }

  if (e.reading) st.behavior.reports[st.id] = *e.reading;
  for (auto it = st.behavior.reports.begin(); it != st.behavior.reports.end();) {
    const bool stale = ctx.now - it->second.sensed_at > ctx.params.stale_age;
    if (stale || !st.knowledge.contains(it->first)) it = st.behavior.reports.erase(it);
    else ++it;
  }

  std::vector<std::pair<NodeId, StimulusReading>> reports(st.behavior.reports.begin(),
                                                          st.behavior.reports.end());
  const auto fused = fuse_reports(reports, st.knowledge);
  BrainDecision decision = brain_decide(st.behavior, fused, ctx.now, ctx.params);
  st.behavior = decision.next;

  PlanarTwist twist = decision.twist;
  if (st.behavior.goal) {
    twist = navigate_twist(e.own_world_pose, st.behavior.goal->module_goal, ctx.params);
    if (dock_feasible(e.own_world_pose, st.behavior.goal->module_goal, ctx.params.dock_eps_dist,
                      ctx.params.dock_eps_angle)) {
      ctx.result.actions.push_back(GripPort{st.behavior.goal->entry_port});
      twist = {};
    }
  }

  const BodyMap body{st.knowledge};
  const auto poses = world_poses(body, Pose2{});
  const auto commands = twist_to_module_commands(body, poses, twist);
  for (const auto& [target, cmd] : commands) {
    auto last = st.behavior.last_commands.find(target);
    const bool changed = last == st.behavior.last_commands.end() ||
                         !(last->second.vx == cmd.vx && last->second.vy == cmd.vy &&
                           last->second.omega == cmd.omega);
    if (!changed) continue;
    st.behavior.last_commands[target] = cmd;
    if (target == st.id) {
      ctx.result.actions.push_back(SetWheelCommand{cmd});
    } else if (auto env2 = route_down(st, target, ActuatorCommand{target, cmd}, ctx.now)) {
      ctx.result.outbox.push_back(std::move(*env2));
    } else {
      ctx.result.violations.push_back("unroutable actuator command for " + std::to_string(target));
    }
  }

  std::map<NodeId, std::uint32_t> masks;
  for (NodeId id : st.knowledge.node_ids()) masks[id] = 0;
  if (decision.light_leds && st.behavior.stimulus_estimate) {
    const auto lit =
        closest_leds(body, poses, LedRing{}, *st.behavior.stimulus_estimate, ctx.params.led_k);
    for (const auto& sel : lit) masks[sel.node] |= 1u << sel.led_index;
  }
  for (const auto& [target, mask] : masks) {
    auto prev = st.behavior.led_masks.find(target);
    const std::uint32_t before = prev == st.behavior.led_masks.end() ? 0u : prev->second;
    if (before == mask) continue;
    st.behavior.led_masks[target] = mask;
    if (target == st.id) {
      ctx.result.actions.push_back(SetLeds{mask});
    } else if (auto env2 = route_down(st, target, LedCommand{target, mask}, ctx.now)) {
      ctx.result.outbox.push_back(std::move(*env2));
    } else {
      ctx.result.violations.push_back("unroutable led command for " + std::to_string(target));
    }
  }
}

}  // namespace

StepResult node_step(const NodeState& state, const NodeEvent& event, double now,
                     const Params& params) {
  StepResult result;
  result.next = state;
  StepContext ctx{result, params, now};

  struct Visitor {
    StepContext& ctx;
    void operator()(const MessageArrived& e) { handle_message(ctx, e.envelope); }
    void operator()(const PhysicalAttached& e) { handle_attached(ctx, e); }
    void operator()(const PhysicalDetached& e) { handle_detached(ctx, e); }
    void operator()(const TimerFired&) { handle_timer(ctx); }
    void operator()(const SensorSampled& e) { handle_sensor(ctx, e); }
  };
  std::visit(Visitor{ctx}, event);
  return result;
}

}  // namespace vns
