#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <variant>
#include <vector>

#include "vns/body_sim.hpp"
#include "vns/params.hpp"
#include "vns/protocol.hpp"
#include "vns/trace.hpp"

namespace vns {

struct LinkModel {
  double latency = 0.01;
  double drop_probability = 0.0;
};

// Seeded discrete-event world: single-threaded loop, single RNG stream,
// ground-truth bodies mirroring what the distributed protocol believes.
class World {
 public:
  World(const Params& params, std::uint64_t seed, TraceWriter* trace);

  void add_robot(NodeId id, const Capabilities& caps, const Pose2& pose);
  void set_stimulus(Stimulus stimulus);

  // --- simnet core ---------------------------------------------------------
  void schedule_action(double time, std::function<void(World&)> fn);
  void transmit(const MessageEnvelope& envelope);
  void run_until(double t_end);
  // Runs until no structural message is in flight (or the horizon passes).
  void run_until_quiescent(double max_horizon);

  // --- physical operations ---------------------------------------------------
  // Instant dock of the component rooted at `gripper` onto `host`.
  void dock(NodeId gripper, PortId entry_port, NodeId host, PortId host_port);
  // Severs the edge above `child`, creating a new component.
  void release_edge(NodeId child);
  void inject_fault(NodeId node);
  void begin_cede(NodeId brain, NodeId new_local_root);
  void order_detach(NodeId brain, NodeId split_at);
  void assign_dock_goal(NodeId brain, const DockGoal& goal);

  // --- hooks -----------------------------------------------------------------
  void set_supervisor(std::function<void(World&, double)> fn) { supervisor_ = std::move(fn); }
  void set_physics_observer(std::function<void(World&, double)> fn) {
    physics_observer_ = std::move(fn);
  }

  // --- inspection --------------------------------------------------------------
  double clock() const { return clock_; }
  const Params& params() const { return params_; }
  TraceWriter* trace() { return trace_; }
  const NodeState& node(NodeId id) const;
  NodeState& mutable_node(NodeId id);
  std::vector<NodeId> all_node_ids() const;
  bool failed(NodeId id) const { return failed_.count(id) > 0; }
  const std::set<NodeId>& failed_nodes() const { return failed_; }

  int component_count() const { return static_cast<int>(components_.size()); }
  int component_index_of(NodeId id) const;
  const BodyMap& component_body(int index) const { return components_.at(index).body; }
  Pose2 component_root_pose(int index) const { return components_.at(index).root_pose; }
  std::map<NodeId, Pose2> component_poses(int index) const;
  Pose2 true_pose(NodeId id) const;

  bool has_stimulus() const { return !stimulus_.waypoints.empty(); }
  Vec2 stimulus_at(double t) const { return stimulus_.position_at(t); }
  std::uint32_t led_mask(NodeId id) const;

  int structural_in_flight() const { return structural_in_flight_; }
  std::uint64_t structural_version() const { return structural_version_; }
  std::uint64_t check_failures() const { return check_failures_; }

  // Knowledge-consistency + single-brain checks; emits Check records and a
  // quiescence marker. Returns true when everything passed.
  bool check_quiescent_invariants();
  void report_check(bool pass, const std::string& check, TraceFields fields);

 private:
  struct Component {
    BodyMap body;
    Pose2 root_pose;
    PlanarTwist twist;
  };

  struct DeliverEv {
    MessageEnvelope envelope;
    std::uint64_t eid;
  };
  struct TimerEv {
    NodeId node;
  };
  struct PhysicsTickEv {
    std::int64_t k;
  };
  struct SensorTickEv {
    std::int64_t k;
  };
  struct ActionEv {
    std::size_t index;
  };
  using EventKind = std::variant<DeliverEv, TimerEv, PhysicsTickEv, SensorTickEv, ActionEv>;

  struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
  };
  struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  void schedule_event(double time, EventKind kind);
  void dispatch(const Event& event);
  void dispatch_node_event(NodeId id, const NodeEvent& event);
  void apply_action(NodeId id, const LocalAction& action);
  void perform_dock(NodeId gripper, PortId entry_port, NodeId host, PortId host_port);
  void perform_detach(NodeId child_root);
  void rebuild_component_index();
  bool link_mated(NodeId a, NodeId b) const;
  void physics_step(std::int64_t k);
  void sensor_step();
  void snapshot_poses();
  double uniform01();

  Params params_;
  TraceWriter* trace_;
  double clock_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_eid_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  std::vector<std::function<void(World&)>> actions_;

  std::map<NodeId, NodeState> nodes_;
  std::set<NodeId> failed_;
  std::vector<Component> components_;
  std::map<NodeId, int> component_index_;
  std::map<NodeId, ModuleCommand> wheel_commands_;
  std::map<NodeId, std::uint32_t> led_state_;
  Stimulus stimulus_;

  std::mt19937_64 rng_;
  int structural_in_flight_ = 0;
  std::uint64_t structural_version_ = 0;
  std::uint64_t check_failures_ = 0;

  std::function<void(World&, double)> supervisor_;
  std::function<void(World&, double)> physics_observer_;
};

}  // namespace vns
