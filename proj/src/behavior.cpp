#include "vns/behavior.hpp"

#include <algorithm>
#include <functional>
#include <limits>

namespace vns {

int TemplateSlot::slot_count() const {
  int n = 1;
  for (const auto& c : children) n += c.slot.slot_count();
  return n;
}

int TemplateSlot::depth() const {
  int d = 0;
  for (const auto& c : children) d = std::max(d, 1 + c.slot.depth());
  return d;
}

bool matches_template(const SubtreeDescription& sub, const TemplateSlot& slot) {
  if (!slot.requirement.satisfied_by(sub.caps)) return false;
  if (sub.children.size() != slot.children.size()) return false;

  const size_t n = sub.children.size();
  std::vector<bool> used(n, false);
  std::function<bool(size_t)> assign = [&](size_t i) {
    if (i == n) return true;
    for (size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      if (matches_template(sub.children[j].sub, slot.children[i].slot)) {
        used[j] = true;
        if (assign(i + 1)) return true;
        used[j] = false;
      }
    }
    return false;
  };
  return assign(0);
}

const char* behavior_mode_name(BehaviorMode mode) {
  switch (mode) {
    case BehaviorMode::Forming: return "Forming";
    case BehaviorMode::Idle: return "Idle";
    case BehaviorMode::Pointing: return "Pointing";
    case BehaviorMode::Retreating: return "Retreating";
    case BehaviorMode::Recovering: return "Recovering";
  }
  return "?";
}

std::optional<Vec2> fuse_reports(const std::vector<std::pair<NodeId, StimulusReading>>& reports,
                                 const SubtreeDescription& knowledge) {
  BodyMap body{knowledge};
  const auto poses = world_poses(body, Pose2{});

  // Min-distance fusion: the nearest module saw the stimulus best.
  const StimulusReading* best = nullptr;
  NodeId best_origin = kInvalidNode;
  for (const auto& [origin, reading] : reports) {
    if (poses.find(origin) == poses.end()) continue;
    if (best == nullptr || reading.distance < best->distance ||
        (reading.distance == best->distance && origin < best_origin)) {
      best = &reading;
      best_origin = origin;
    }
  }
  if (best == nullptr) return std::nullopt;

  const Pose2& origin_pose = poses.at(best_origin);
  const Vec2 local{best->distance * std::cos(best->bearing),
                   best->distance * std::sin(best->bearing)};
  return transform_point(origin_pose, local);
}

BrainDecision brain_decide(const BrainBehaviorState& bstate, std::optional<Vec2> fused,
                           double now, const Params& params) {
  BrainDecision out;
  out.next = bstate;
  BrainBehaviorState& st = out.next;

  if (fused) {
    st.stimulus_estimate = fused;
    st.estimate_time = now;
  }

  // Forming/Recovering are choreographed by the supervisor; the stimulus FSM
  // only runs in the reactive modes.
  if (st.mode == BehaviorMode::Forming || st.mode == BehaviorMode::Recovering) return out;

  const bool stale = !st.stimulus_estimate || (now - st.estimate_time) > params.stale_age;
  if (stale) {
    st.mode = BehaviorMode::Idle;
    st.stimulus_estimate.reset();
    return out;
  }

  const Vec2 est = *st.stimulus_estimate;
  const double d = hypot2(est.x, est.y);
  const double h = params.hysteresis;

  switch (st.mode) {
    case BehaviorMode::Idle:
      if (d <= params.r_retreat) st.mode = BehaviorMode::Retreating;
      else if (d <= params.r_point) st.mode = BehaviorMode::Pointing;
      break;
    case BehaviorMode::Pointing:
      if (d <= params.r_retreat) st.mode = BehaviorMode::Retreating;
      else if (d > params.r_point + h) st.mode = BehaviorMode::Idle;
      break;
    case BehaviorMode::Retreating:
      if (d >= params.r_retreat + h) st.mode = BehaviorMode::Pointing;
      break;
    default:
      break;
  }

  if (st.mode == BehaviorMode::Pointing) {
    out.light_leds = true;
  } else if (st.mode == BehaviorMode::Retreating) {
    out.light_leds = true;
    if (d > 1e-9) {
      const double ramp = std::clamp((params.r_retreat + h - d) / params.retreat_ramp, 0.0, 1.0);
      const double speed = kVMax * ramp;
      out.twist = {-speed * est.x / d, -speed * est.y / d, 0.0};
    }
  }
  return out;
}

PlanarTwist navigate_twist(const Pose2& own_pose, const Pose2& goal_pose, const Params& params) {
  const double dx = goal_pose.x - own_pose.x;
  const double dy = goal_pose.y - own_pose.y;
  const double dist = hypot2(dx, dy);
  const double pos_tol = params.dock_eps_dist * 0.5;

  PlanarTwist twist;
  if (dist > pos_tol) {
    const double heading = std::atan2(dy, dx);
    const double err = normalize_angle(heading - own_pose.theta);
    twist.omega = std::clamp(params.nav_k_omega * err, -kOmegaMax, kOmegaMax);
    if (std::abs(err) <= params.nav_align_tol) {
      // Translate along own heading with continuous pursuit correction.
      twist.vx = std::clamp(params.nav_k_v * dist, 0.0, kVMax);
    }
  } else {
    const double err = normalize_angle(goal_pose.theta - own_pose.theta);
    twist.omega = std::clamp(params.nav_k_omega * err, -kOmegaMax, kOmegaMax);
  }
  return twist;
}

namespace {

// Preorder walk pairing each slot with its parent slot index and ports.
struct SlotInfo {
  int index = 0;
  int parent_index = -1;
  PortId via_port = 0;
  PortId entry_port = 0;
  const TemplateSlot* slot = nullptr;
};

void collect_slots(const TemplateSlot& slot, int parent, PortId via, PortId entry, int& counter,
                   std::vector<SlotInfo>& out) {
  const int index = counter++;
  out.push_back({index, parent, via, entry, &slot});
  for (const auto& c : slot.children) {
    collect_slots(c.slot, index, c.via_port, c.child_entry_port, counter, out);
  }
}

std::vector<SlotInfo> flatten(const TemplateSlot& root) {
  std::vector<SlotInfo> slots;
  int counter = 0;
  collect_slots(root, -1, 0, 0, counter, slots);
  return slots;
}

}  // namespace

RecruitmentResult recruitment_step(const FormingState& fstate,
                                   const SubtreeDescription& knowledge,
                                   const std::vector<std::pair<NodeId, Pose2>>& free_pool,
                                   const std::map<NodeId, Pose2>& body_poses) {
  RecruitmentResult out;
  out.next = fstate;
  FormingState& st = out.next;

  const auto slots = flatten(fstate.tmpl.shape);
  if (st.bindings.empty()) st.bindings[0] = knowledge.root;

  // A pending assignment resolves once the recruit shows up in knowledge.
  if (st.pending) {
    if (knowledge.contains(st.pending->recruit)) {
      st.bindings[st.pending->slot_index] = st.pending->recruit;
      st.pending.reset();
    } else {
      return out;  // one recruit per port at a time
    }
  }

  // Next unfilled slot in preorder whose parent is already concrete.
  for (const auto& info : slots) {
    if (st.bindings.count(info.index)) continue;
    if (info.parent_index < 0 || !st.bindings.count(info.parent_index)) continue;

    const NodeId parent = st.bindings.at(info.parent_index);
    const auto pose_it = body_poses.find(parent);
    if (pose_it == body_poses.end()) return out;

    NodeId best = kInvalidNode;
    double best_dist = std::numeric_limits<double>::infinity();
    Pose2 best_pose;
    const Pose2 goal = dock_goal_pose(pose_it->second, info.via_port, info.entry_port);
    for (const auto& [id, pose] : free_pool) {
      const double d = hypot2(pose.x - goal.x, pose.y - goal.y);
      if (d < best_dist || (d == best_dist && id < best)) {
        best = id;
        best_dist = d;
        best_pose = pose;
      }
    }
    if (best == kInvalidNode) {
      out.insufficient = true;
      if (!st.reported_unfillable.count(info.index)) st.reported_unfillable.insert(info.index);
      return out;
    }

    RecruitAssignment assign;
    assign.recruit = best;
    assign.parent = parent;
    assign.parent_port = info.via_port;
    assign.entry_port = info.entry_port;
    assign.slot_index = info.index;
    assign.goal = goal;
    st.pending = assign;
    out.assignments.push_back(assign);
    return out;
  }

  out.complete = static_cast<int>(st.bindings.size()) == fstate.tmpl.slot_count();
  return out;
}

namespace {

SubtreeDescription without_child(const SubtreeDescription& sub, NodeId child_root) {
  SubtreeDescription out = sub;
  std::function<bool(SubtreeDescription&)> cut = [&](SubtreeDescription& s) {
    for (auto it = s.children.begin(); it != s.children.end(); ++it) {
      if (it->sub.root == child_root) {
        s.children.erase(it);
        return true;
      }
      if (cut(it->sub)) return true;
    }
    return false;
  };
  cut(out);
  return out;
}

}  // namespace

NodeId split_plan(const SubtreeDescription& knowledge, const MorphologyTemplate& template_a,
                  const MorphologyTemplate& template_b) {
  auto ids = knowledge.node_ids();
  std::sort(ids.begin(), ids.end());
  for (NodeId id : ids) {
    if (id == knowledge.root) continue;
    const SubtreeDescription* detached = knowledge.find(id);
    const SubtreeDescription remainder = without_child(knowledge, id);
    if (matches_template(*detached, template_b.shape) &&
        matches_template(remainder, template_a.shape)) {
      return id;
    }
  }
  throw VnsError(Errc::NoValidSplit,
                 "no single cut realizes " + template_a.name + " + " + template_b.name);
}

namespace {

// Path to the deepest removable leaf; ties resolved toward the latest
// preorder slot so shapes shrink from their far end first.
bool deepest_leaf_path(const TemplateSlot& slot, std::vector<size_t>& path,
                       std::vector<size_t>& best_path, int depth, int& best_depth,
                       int& preorder, int& best_preorder) {
  const int my_preorder = preorder++;
  if (slot.children.empty()) {
    if (depth > best_depth || (depth == best_depth && my_preorder > best_preorder)) {
      best_depth = depth;
      best_preorder = my_preorder;
      best_path = path;
    }
    return true;
  }
  for (size_t i = 0; i < slot.children.size(); ++i) {
    path.push_back(i);
    deepest_leaf_path(slot.children[i].slot, path, best_path, depth + 1, best_depth, preorder,
                      best_preorder);
    path.pop_back();
  }
  return false;
}

void remove_deepest_leaf(TemplateSlot& root) {
  std::vector<size_t> path, best_path;
  int best_depth = -1, preorder = 0, best_preorder = -1;
  deepest_leaf_path(root, path, best_path, 0, best_depth, preorder, best_preorder);
  if (best_path.empty()) return;  // root is the only slot; never removed
  TemplateSlot* parent = &root;
  for (size_t i = 0; i + 1 < best_path.size(); ++i) parent = &parent->children[best_path[i]].slot;
  parent->children.erase(parent->children.begin() + static_cast<long>(best_path.back()));
}

}  // namespace

MorphologyTemplate recovery_target(const MorphologyTemplate& original,
                                   const std::set<NodeId>& failed,
                                   const std::vector<SubtreeDescription>& survivors) {
  (void)survivors;
  MorphologyTemplate target = original;
  target.name = original.name + "-recovered";
  for (size_t i = 0; i < failed.size() && target.shape.slot_count() > 1; ++i) {
    remove_deepest_leaf(target.shape);
  }
  return target;
}

NodeId recovery_recruiter(const std::vector<SubtreeDescription>& survivors) {
  NodeId best = kInvalidNode;
  for (const auto& frag : survivors) {
    if (best == kInvalidNode || frag.root < best) best = frag.root;
  }
  return best;
}

}  // namespace vns
