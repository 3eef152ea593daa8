#include "vns/simnet.hpp"

#include <algorithm>
#include <cmath>

namespace vns {

namespace {

TraceFields envelope_fields(const MessageEnvelope& env, std::uint64_t eid) {
  TraceFields f;
  f["eid"] = eid;
  f["src"] = env.src;
  f["dst"] = env.dst;
  f["port"] = env.port;
  f["msg"] = message_kind_name(env.payload);
  struct Visitor {
    TraceFields& f;
    void operator()(const Heartbeat&) {}
    void operator()(const MergeAnnounce& a) {
      f["nodes"] = a.sub.node_count();
      f["chain"] = a.via_port_chain.size();
    }
    void operator()(const SplitNotice& s) { f["detached_root"] = s.detached_root; }
    void operator()(const SensorReport& r) { f["origin"] = r.origin; }
    void operator()(const ActuatorCommand& c) { f["target"] = c.target; }
    void operator()(const LedCommand& l) {
      f["target"] = l.target;
      f["mask"] = l.led_mask;
    }
    void operator()(const DetachOrder& d) { f["split_at"] = d.split_at; }
    void operator()(const CedeOrder& c) {
      f["new_local_root"] = c.new_local_root;
      f["nodes"] = c.handover.sub.node_count();
    }
  };
  std::visit(Visitor{f}, env.payload);
  return f;
}

const char* role_name(Role role) { return role == Role::Brain ? "Brain" : "Member"; }

}  // namespace

World::World(const Params& params, std::uint64_t seed, TraceWriter* trace)
    : params_(params), trace_(trace), rng_(seed) {
  schedule_event(params_.dt_phys, PhysicsTickEv{1});
  schedule_event(params_.dt_sense, SensorTickEv{1});
}

void World::add_robot(NodeId id, const Capabilities& caps, const Pose2& pose) {
  if (nodes_.count(id)) {
    throw VnsError(Errc::DuplicateNodeId, "robot " + std::to_string(id));
  }
  nodes_[id] = make_node(id, caps, clock_ + params_.heartbeat_period);
  components_.push_back({single_node_body(id, caps), pose, {}});
  rebuild_component_index();
  schedule_event(nodes_[id].heartbeat_tx_due, TimerEv{id});
}

void World::set_stimulus(Stimulus stimulus) { stimulus_ = std::move(stimulus); }

void World::schedule_event(double time, EventKind kind) {
  if (time < clock_ - 1e-12) {
    throw VnsError(Errc::TimeTravel, "event at " + std::to_string(time) + " before clock " +
                                         std::to_string(clock_));
  }
  queue_.push(Event{std::max(time, clock_), next_seq_++, std::move(kind)});
}

void World::schedule_action(double time, std::function<void(World&)> fn) {
  actions_.push_back(std::move(fn));
  schedule_event(time, ActionEv{actions_.size() - 1});
}

double World::uniform01() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

bool World::link_mated(NodeId a, NodeId b) const {
  const auto ia = component_index_.find(a);
  const auto ib = component_index_.find(b);
  if (ia == component_index_.end() || ib == component_index_.end()) return false;
  if (ia->second != ib->second) return false;
  const BodyMap& body = components_[ia->second].body;
  const auto edge = parent_edge_of(body, a);
  if (edge && edge->parent == b) return true;
  const auto edge2 = parent_edge_of(body, b);
  return edge2 && edge2->parent == a;
}

void World::transmit(const MessageEnvelope& envelope) {
  const std::uint64_t eid = next_eid_++;
  auto fields = envelope_fields(envelope, eid);
  if (!link_mated(envelope.src, envelope.dst)) {
    fields["reason"] = "unmated";
    if (trace_) trace_->write(clock_, "MsgDrop", std::move(fields));
    return;
  }
  if (trace_) trace_->write(clock_, "MsgSend", fields);
  if (is_structural(envelope.payload)) {
    structural_version_++;
  }
  if (params_.drop_probability > 0.0 && uniform01() < params_.drop_probability) {
    fields["reason"] = "lossy";
    if (trace_) trace_->write(clock_, "MsgDrop", std::move(fields));
    return;
  }
  if (is_structural(envelope.payload)) structural_in_flight_++;
  schedule_event(clock_ + params_.latency, DeliverEv{envelope, eid});
}

void World::run_until(double t_end) {
  if (t_end < clock_ - 1e-12) {
    throw VnsError(Errc::TimeTravel, "run_until into the past");
  }
  while (!queue_.empty() && queue_.top().time <= t_end) {
    const Event ev = queue_.top();
    queue_.pop();
    clock_ = ev.time;
    dispatch(ev);
  }
  clock_ = std::max(clock_, t_end);
}

void World::run_until_quiescent(double max_horizon) {
  while (structural_in_flight_ > 0 && !queue_.empty() && queue_.top().time <= max_horizon) {
    const Event ev = queue_.top();
    queue_.pop();
    clock_ = ev.time;
    dispatch(ev);
  }
}

void World::dispatch(const Event& event) {
  struct Visitor {
    World& w;

    void operator()(const DeliverEv& d) {
      if (is_structural(d.envelope.payload)) w.structural_in_flight_--;
      auto fields = envelope_fields(d.envelope, d.eid);
      if (w.failed_.count(d.envelope.dst)) {
        fields["reason"] = "dead_node";
        if (w.trace_) w.trace_->write(w.clock_, "MsgDrop", std::move(fields));
        return;
      }
      if (!w.link_mated(d.envelope.src, d.envelope.dst)) {
        fields["reason"] = "severed";
        if (w.trace_) w.trace_->write(w.clock_, "MsgDrop", std::move(fields));
        return;
      }
      if (w.trace_) w.trace_->write(w.clock_, "MsgDeliver", std::move(fields));
      w.dispatch_node_event(d.envelope.dst, MessageArrived{d.envelope});
    }

    void operator()(const TimerEv& t) {
      if (w.failed_.count(t.node) || !w.nodes_.count(t.node)) return;
      w.dispatch_node_event(t.node, TimerFired{});
      const double due = w.nodes_.at(t.node).heartbeat_tx_due;
      w.schedule_event(due > w.clock_ ? due : w.clock_ + w.params_.heartbeat_period,
                       TimerEv{t.node});
    }

    void operator()(const PhysicsTickEv& p) {
      w.physics_step(p.k);
      w.schedule_event(static_cast<double>(p.k + 1) * w.params_.dt_phys, PhysicsTickEv{p.k + 1});
    }

    void operator()(const SensorTickEv& s) {
      w.sensor_step();
      w.schedule_event(static_cast<double>(s.k + 1) * w.params_.dt_sense, SensorTickEv{s.k + 1});
    }

    void operator()(const ActionEv& a) { w.actions_.at(a.index)(w); }
  };
  std::visit(Visitor{*this}, event.kind);
}

void World::dispatch_node_event(NodeId id, const NodeEvent& event) {
  if (failed_.count(id) || !nodes_.count(id)) return;
  const NodeState& state = nodes_.at(id);
  const Role role_before = state.role;
  const BehaviorMode mode_before = state.behavior.mode;

  StepResult result = node_step(state, event, clock_, params_);
  nodes_[id] = result.next;

  for (const auto& v : result.violations) {
    if (trace_) trace_->write(clock_, "Command", {{"node", id}, {"name", "protocol_violation"},
                                                  {"detail", v}});
  }
  for (const auto& link : result.detected_faults) {
    if (trace_) trace_->write(clock_, "FaultDetected", {{"node", id}, {"peer", link.peer},
                                                        {"port", link.port}});
    structural_version_++;
  }
  for (const auto& action : result.actions) apply_action(id, action);
  for (const auto& env : result.outbox) transmit(env);

  const NodeState& after = nodes_.at(id);
  if (after.role != role_before) {
    if (trace_) trace_->write(clock_, "RoleChange", {{"node", id}, {"role", role_name(after.role)}});
    structural_version_++;
  }
  if (after.behavior.mode != mode_before) {
    if (trace_) trace_->write(clock_, "Command", {{"node", id}, {"name", "mode"},
                                                  {"value", behavior_mode_name(after.behavior.mode)}});
  }
}

void World::apply_action(NodeId id, const LocalAction& action) {
  struct Visitor {
    World& w;
    NodeId id;

    void operator()(const SetWheelCommand& a) {
      w.wheel_commands_[id] = a.command;
      const int ci = w.component_index_of(id);
      if (ci >= 0 && w.components_[ci].body.root() == id) {
        w.components_[ci].twist = {a.command.vx, a.command.vy, a.command.omega};
        if (w.trace_) {
          w.trace_->write(w.clock_, "Command",
                          {{"node", id}, {"name", "twist"}, {"vx", a.command.vx},
                           {"vy", a.command.vy}, {"omega", a.command.omega}});
        }
      }
    }

    void operator()(const SetLeds& a) {
      w.led_state_[id] = a.mask;
      if (w.trace_) w.trace_->write(w.clock_, "LedSet", {{"node", id}, {"mask", a.mask}});
    }

    void operator()(const ReleasePort& a) {
      const NodeState& st = w.nodes_.at(id);
      const LinkState* link = st.link_on_port(a.port);
      if (link == nullptr) return;
      const NodeId peer = link->peer;
      const int ci = w.component_index_of(id);
      if (ci < 0 || w.component_index_of(peer) != ci) return;  // already severed
      const auto edge = parent_edge_of(w.components_[ci].body, id);
      const NodeId child_root = (edge && edge->parent == peer) ? id : peer;
      w.perform_detach(child_root);
    }

    void operator()(const GripPort& a) {
      const NodeState& st = w.nodes_.at(id);
      if (!st.behavior.goal) return;
      const DockGoal goal = *st.behavior.goal;
      if (goal.entry_port != a.port) return;
      const int ci = w.component_index_of(id);
      const int hi = w.component_index_of(goal.host);
      if (ci < 0 || hi < 0 || ci == hi) return;
      if (w.components_[ci].body.root() != id) return;
      w.perform_dock(id, goal.entry_port, goal.host, goal.host_port);
    }

    void operator()(const BecomeBrain&) {
      const int ci = w.component_index_of(id);
      if (ci < 0) return;
      Component& comp = w.components_[ci];
      if (comp.body.root() != id) {
        // Authority transfer completed: re-express the ground truth from the
        // new root so poses keep matching distributed knowledge bit for bit.
        const Pose2 new_root_pose = w.true_pose(id);
        comp.body = reroot(comp.body, id);
        comp.root_pose = new_root_pose;
        comp.twist = {};
        w.rebuild_component_index();
        w.structural_version_++;
      }
    }

    void operator()(const CedeBrain&) {}
  };
  std::visit(Visitor{*this, id}, action);
}

void World::perform_dock(NodeId gripper, PortId entry_port, NodeId host, PortId host_port) {
  const int mi = component_index_of(gripper);
  const int hi = component_index_of(host);
  if (mi < 0 || hi < 0 || mi == hi) {
    throw VnsError(Errc::ScenarioError, "dock endpoints not in distinct components");
  }
  Component& moving = components_[mi];
  Component& target = components_[hi];
  if (moving.body.root() != gripper) {
    throw VnsError(Errc::ScenarioError, "gripper is not its component root");
  }
  const auto host_free = free_ports(target.body, host);
  if (std::find(host_free.begin(), host_free.end(), host_port) == host_free.end()) {
    throw VnsError(Errc::PortOccupied, "host port " + std::to_string(host_port));
  }

  target.body = attach_subtree(target.body, host, host_port, entry_port, moving.body.tree);
  components_.erase(components_.begin() + mi);
  rebuild_component_index();
  structural_version_++;

  if (trace_) {
    trace_->write(clock_, "Attach", {{"parent", host}, {"parent_port", host_port},
                                     {"child", gripper}, {"child_port", entry_port}});
  }
  if (nodes_.count(gripper)) nodes_[gripper].behavior.goal.reset();

  dispatch_node_event(host, PhysicalAttached{host_port, gripper, entry_port,
                                             LinkDirection::ChildWard});
  dispatch_node_event(gripper, PhysicalAttached{entry_port, host, host_port,
                                                LinkDirection::ParentWard});
}

void World::perform_detach(NodeId child_root) {
  const int ci = component_index_of(child_root);
  if (ci < 0) throw VnsError(Errc::UnknownNode, "detach " + std::to_string(child_root));
  Component& comp = components_[ci];
  const auto edge = parent_edge_of(comp.body, child_root);
  if (!edge) throw VnsError(Errc::CannotDetachRoot, "detach component root");

  const Pose2 child_pose = true_pose(child_root);
  auto [remainder, detached] = detach_subtree(comp.body, child_root);
  comp.body = std::move(remainder);
  components_.push_back({BodyMap{std::move(detached)}, child_pose, {}});
  rebuild_component_index();
  structural_version_++;

  if (trace_) {
    trace_->write(clock_, "Detach", {{"parent", edge->parent}, {"parent_port", edge->parent_port},
                                     {"child", child_root}, {"child_port", edge->child_port}});
  }
  dispatch_node_event(edge->parent, PhysicalDetached{edge->parent_port});
  dispatch_node_event(child_root, PhysicalDetached{edge->child_port});
}

void World::rebuild_component_index() {
  component_index_.clear();
  for (size_t i = 0; i < components_.size(); ++i) {
    for (NodeId id : components_[i].body.tree.node_ids()) {
      component_index_[id] = static_cast<int>(i);
    }
  }
}

void World::inject_fault(NodeId node) {
  if (!nodes_.count(node)) throw VnsError(Errc::UnknownNode, "fault " + std::to_string(node));
  if (failed_.count(node)) return;
  failed_.insert(node);
  structural_version_++;
  const int ci = component_index_of(node);
  if (ci >= 0 && components_[ci].body.root() == node) components_[ci].twist = {};
  if (trace_) trace_->write(clock_, "FaultInjected", {{"node", node}});
}

void World::begin_cede(NodeId brain, NodeId new_local_root) {
  const NodeState& state = node(brain);
  const Role before = state.role;
  CedeResult result = initiate_cede(state, new_local_root, clock_);
  nodes_[brain] = result.next;
  if (nodes_[brain].role != before && trace_) {
    trace_->write(clock_, "RoleChange", {{"node", brain}, {"role", role_name(nodes_[brain].role)}});
  }
  if (nodes_[brain].role != before) structural_version_++;
  for (const auto& env : result.outbox) transmit(env);
}

void World::order_detach(NodeId brain, NodeId split_at) {
  const NodeState& state = node(brain);
  auto env = route_down(state, split_at, DetachOrder{split_at}, clock_);
  if (!env) throw VnsError(Errc::UnknownNode, "detach target " + std::to_string(split_at));
  transmit(*env);
}

void World::assign_dock_goal(NodeId brain, const DockGoal& goal) {
  nodes_.at(brain).behavior.goal = goal;
}

void World::physics_step(std::int64_t k) {
  for (auto& comp : components_) {
    const NodeId root = comp.body.root();
    if (failed_.count(root)) continue;  // a dead brain drives nothing
    const PlanarTwist& tw = comp.twist;
    if (tw.vx == 0.0 && tw.vy == 0.0 && tw.omega == 0.0) continue;
    comp.root_pose = integrate_pose(comp.root_pose, tw, params_.dt_phys);
  }
  if (physics_observer_) physics_observer_(*this, clock_);
  if (params_.pose_snapshot_stride > 0 && k % params_.pose_snapshot_stride == 0) {
    snapshot_poses();
  }
}

void World::snapshot_poses() {
  if (!trace_) return;
  TraceFields f;
  auto poses = nlohmann::ordered_json::array();
  std::map<NodeId, Pose2> all;
  for (int i = 0; i < component_count(); ++i) {
    for (const auto& [id, pose] : component_poses(i)) all[id] = pose;
  }
  for (const auto& [id, pose] : all) {
    poses.push_back({id, pose.x, pose.y, pose.theta});
  }
  f["poses"] = std::move(poses);
  auto roots = nlohmann::ordered_json::array();
  for (const auto& comp : components_) roots.push_back(comp.body.root());
  f["roots"] = std::move(roots);
  if (has_stimulus()) {
    const Vec2 s = stimulus_at(clock_);
    f["stim"] = {s.x, s.y};
  } else {
    f["stim"] = nullptr;
  }
  trace_->write(clock_, "Pose", std::move(f));
}

void World::sensor_step() {
  const bool stim = has_stimulus();
  const Vec2 stim_pos = stim ? stimulus_at(clock_) : Vec2{};
  for (const auto& [id, state] : nodes_) {
    if (failed_.count(id)) continue;
    std::optional<StimulusReading> reading;
    if (stim && state.caps.has_stimulus_sensor) {
      reading = sense_stimulus(true_pose(id), stim_pos, params_.r_sense, clock_);
    }
    dispatch_node_event(id, SensorSampled{reading, true_pose(id)});
  }
  if (supervisor_) supervisor_(*this, clock_);
}

const NodeState& World::node(NodeId id) const {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) throw VnsError(Errc::UnknownNode, "node " + std::to_string(id));
  return it->second;
}

NodeState& World::mutable_node(NodeId id) {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) throw VnsError(Errc::UnknownNode, "node " + std::to_string(id));
  return it->second;
}

std::vector<NodeId> World::all_node_ids() const {
  std::vector<NodeId> ids;
  for (const auto& [id, _] : nodes_) ids.push_back(id);
  return ids;
}

int World::component_index_of(NodeId id) const {
  const auto it = component_index_.find(id);
  return it == component_index_.end() ? -1 : it->second;
}

std::map<NodeId, Pose2> World::component_poses(int index) const {
  const Component& comp = components_.at(index);
  return world_poses(comp.body, comp.root_pose);
}

Pose2 World::true_pose(NodeId id) const {
  const int ci = component_index_of(id);
  if (ci < 0) throw VnsError(Errc::UnknownNode, "pose of " + std::to_string(id));
  return component_poses(ci).at(id);
}

std::uint32_t World::led_mask(NodeId id) const {
  const auto it = led_state_.find(id);
  return it == led_state_.end() ? 0u : it->second;
}

void World::report_check(bool pass, const std::string& check, TraceFields fields) {
  fields["check"] = check;
  if (!pass) check_failures_++;
  if (trace_) {
    TraceFields ordered;
    ordered["check"] = check;
    for (auto& [k, v] : fields.items()) {
      if (k != "check") ordered[k] = std::move(v);
    }
    trace_->write(clock_, pass ? "CheckPass" : "CheckFail", std::move(ordered));
  }
}

bool World::check_quiescent_invariants() {
  bool all_ok = true;
  int live_components = 0;
  for (const auto& comp : components_) {
    const auto ids = comp.body.tree.node_ids();
    std::vector<NodeId> live;
    for (NodeId id : ids) {
      if (!failed_.count(id)) live.push_back(id);
    }
    if (live.empty()) continue;
    live_components++;

    std::vector<NodeId> brains;
    for (NodeId id : live) {
      if (nodes_.at(id).role == Role::Brain) brains.push_back(id);
    }
    const bool single = brains.size() == 1 && brains[0] == comp.body.root();
    if (!single) {
      all_ok = false;
      report_check(false, "single_brain",
                   {{"component_root", comp.body.root()}, {"brains", brains.size()}});
    }

    for (NodeId id : live) {
      const SubtreeDescription* truth = comp.body.tree.find(id);
      if (!structurally_equal(nodes_.at(id).knowledge, *truth)) {
        all_ok = false;
        report_check(false, "knowledge_consistency", {{"node", id}});
      }
    }
  }
  if (all_ok) {
    report_check(true, "knowledge_consistency", {{"components", live_components}});
    report_check(true, "single_brain", {{"components", live_components}});
  }
  report_check(true, "quiescence", {{"components", live_components}});
  return all_ok;
}

}  // namespace vns
