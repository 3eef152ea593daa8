#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "test_util.hpp"
#include "vns/body_sim.hpp"

using namespace vns;
using vns::testing::make_random_body;

namespace {

Pose2 random_pose(std::mt19937& rng) {
  auto u = [&] { return (static_cast<double>(rng() % 20001) - 10000.0) / 10000.0; };
  return {2.0 * u(), 2.0 * u(), M_PI * u()};
}

// Independent selection oracle: flat scan over every LED of every module.
std::set<LedSelection> led_oracle(const BodyMap& body, const std::map<NodeId, Pose2>& poses,
                                  Vec2 stimulus, int k) {
  std::vector<std::tuple<double, NodeId, int>> all;
  for (NodeId id : body.tree.node_ids()) {
    const auto caps = body.tree.find(id)->caps;
    const Pose2& pose = poses.at(id);
    for (int led = 0; led < caps.led_count; ++led) {
      const double ang = 2.0 * M_PI * led / caps.led_count;
      const double lx = pose.x + kLedRadius * std::cos(pose.theta + ang);
      const double ly = pose.y + kLedRadius * std::sin(pose.theta + ang);
      const double dx = lx - stimulus.x;
      const double dy = ly - stimulus.y;
      all.emplace_back(dx * dx + dy * dy, id, led);
    }
  }
  std::sort(all.begin(), all.end());
  std::set<LedSelection> out;
  for (int i = 0; i < std::min<int>(k, static_cast<int>(all.size())); ++i) {
    out.insert({std::get<1>(all[i]), std::get<2>(all[i])});
  }
  return out;
}

}  // namespace

TEST_CASE("twist decomposition: pure translation gives one shared world velocity") {
  std::mt19937 rng(5);
  const auto built = make_random_body(rng, 5);
  const auto poses = world_poses(built.body, Pose2{0.2, -0.1, 0.4});
  const PlanarTwist twist{0.2, 0.05, 0.0};
  const auto cmds = twist_to_module_commands(built.body, poses, twist);
  const Pose2 brain = poses.at(built.body.root());
  const Vec2 want = rotate(brain.theta, {twist.vx, twist.vy});
  for (const auto& [id, cmd] : cmds) {
    const Vec2 world = rotate(poses.at(id).theta, {cmd.vx, cmd.vy});
    CHECK(world.x == doctest::Approx(want.x).epsilon(1e-12));
    CHECK(world.y == doctest::Approx(want.y).epsilon(1e-12));
    CHECK(cmd.omega == doctest::Approx(0.0));
  }
}

TEST_CASE("twist decomposition: pure rotation with module at r=(1,0)") {
  BodyMap body = single_node_body(0);
  SubtreeDescription leaf = single_node_body(1).tree;
  body.tree.insert_child({0, 4, Pose2{1.0, 0.0, 0.0}, leaf});
  const auto poses = world_poses(body, Pose2{});
  const double omega = 0.2;
  const auto cmds = twist_to_module_commands(body, poses, {0.0, 0.0, omega});
  CHECK(cmds.at(1).vx == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cmds.at(1).vy == doctest::Approx(omega).epsilon(1e-12));
  CHECK(hypot2(cmds.at(1).vx, cmds.at(1).vy) == doctest::Approx(std::abs(omega)));
}

TEST_CASE("twist decomposition: limit scaling keeps the twist field rigid") {
  std::mt19937 rng(9);
  for (int iter = 0; iter < 40; ++iter) {
    const auto built = make_random_body(rng, 5);
    const auto poses = world_poses(built.body, random_pose(rng));
    const PlanarTwist twist{0.9, -0.6, 2.4};  // over both limits
    const auto cmds = twist_to_module_commands(built.body, poses, twist);

    // d/dt |p_i - p_j|^2 must vanish for a twist field.
    std::map<NodeId, Vec2> world_vel;
    for (const auto& [id, cmd] : cmds) {
      world_vel[id] = rotate(poses.at(id).theta, {cmd.vx, cmd.vy});
      CHECK(hypot2(cmd.vx, cmd.vy) <= kVMax + 1e-9);
      CHECK(std::abs(cmd.omega) <= kOmegaMax + 1e-9);
    }
    for (const auto& [i, ui] : world_vel) {
      for (const auto& [j, uj] : world_vel) {
        const Pose2 pi = poses.at(i);
        const Pose2 pj = poses.at(j);
        const double ddt = (pi.x - pj.x) * (ui.x - uj.x) + (pi.y - pj.y) * (ui.y - uj.y);
        CHECK(std::abs(ddt) < 1e-12);
      }
    }

    // One common factor: commands proportional to the unscaled decomposition.
    const auto raw = twist_to_module_commands(built.body, poses, {twist.vx / 100.0,
                                                                  twist.vy / 100.0,
                                                                  twist.omega / 100.0});
    const NodeId root = built.body.root();
    const double s = cmds.at(root).omega / (raw.at(root).omega * 100.0);
    for (const auto& [id, cmd] : cmds) {
      CHECK(cmd.vx == doctest::Approx(raw.at(id).vx * 100.0 * s).epsilon(1e-9));
      CHECK(cmd.vy == doctest::Approx(raw.at(id).vy * 100.0 * s).epsilon(1e-9));
    }
  }
}

TEST_CASE("integrate: zero command holds poses, constant twist stays rigid") {
  const Pose2 start{0.4, 0.1, 0.3};
  CHECK(pose_equal(integrate_pose(start, {}, 0.05), start));

  std::mt19937 rng(13);
  const auto built = make_random_body(rng, 4);
  Pose2 root = start;
  const PlanarTwist twist{0.15, -0.1, 0.8};
  const auto initial = world_poses(built.body, root);
  for (int step = 0; step < 20; ++step) root = integrate_pose(root, twist, 0.05);
  const auto final_poses = world_poses(built.body, root);
  for (const auto& [i, pi] : initial) {
    for (const auto& [j, pj] : initial) {
      const double before = hypot2(pi.x - pj.x, pi.y - pj.y);
      const double after = hypot2(final_poses.at(i).x - final_poses.at(j).x,
                                  final_poses.at(i).y - final_poses.at(j).y);
      CHECK(std::abs(after - before) < 1e-6);
    }
  }
}

TEST_CASE("integrate: free robot covers v*t along its heading") {
  const double heading = 0.6;
  Pose2 pose{0.0, 0.0, heading};
  for (int i = 0; i < 40; ++i) pose = integrate_pose(pose, {0.3, 0.0, 0.0}, 0.05);
  CHECK(pose.x == doctest::Approx(0.6 * std::cos(heading)).epsilon(1e-12));
  CHECK(pose.y == doctest::Approx(0.6 * std::sin(heading)).epsilon(1e-12));
  CHECK(pose.theta == doctest::Approx(heading));
}

TEST_CASE("sense_stimulus: dead ahead, out of range, oracle agreement") {
  const auto hit = sense_stimulus(Pose2{}, {1.0, 0.0}, 2.0);
  REQUIRE(hit.has_value());
  CHECK(hit->distance == doctest::Approx(1.0));
  CHECK(hit->bearing == doctest::Approx(0.0));

  CHECK_FALSE(sense_stimulus(Pose2{}, {3.0, 0.0}, 2.0).has_value());

  std::mt19937 rng(31);
  for (int iter = 0; iter < 200; ++iter) {
    const Pose2 pose = random_pose(rng);
    const Vec2 stim{pose.x + (static_cast<double>(rng() % 100) / 50.0 - 1.0),
                    pose.y + (static_cast<double>(rng() % 100) / 50.0 - 1.0)};
    const auto reading = sense_stimulus(pose, stim, 10.0);
    REQUIRE(reading.has_value());
    // Independent frame oracle: rebuild the world point from the reading.
    const double wx = pose.x + reading->distance * std::cos(pose.theta + reading->bearing);
    const double wy = pose.y + reading->distance * std::sin(pose.theta + reading->bearing);
    CHECK(std::abs(wx - stim.x) < 1e-9);
    CHECK(std::abs(wy - stim.y) < 1e-9);
  }
}

TEST_CASE("sense_stimulus: rotation equivariance") {
  std::mt19937 rng(37);
  for (int iter = 0; iter < 100; ++iter) {
    const Pose2 pose = random_pose(rng);
    const Vec2 stim{0.8, -0.3};
    const double ang = M_PI * ((static_cast<double>(rng() % 200) / 100.0) - 1.0);
    const Pose2 rotated{pose.x * std::cos(ang) - pose.y * std::sin(ang),
                        pose.x * std::sin(ang) + pose.y * std::cos(ang),
                        normalize_angle(pose.theta + ang)};
    const Vec2 stim_rot = rotate(ang, stim);
    const auto a = sense_stimulus(pose, stim, 100.0);
    const auto b = sense_stimulus(rotated, stim_rot, 100.0);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(std::abs(a->distance - b->distance) < 1e-9);
    CHECK(std::abs(normalize_angle(a->bearing - b->bearing)) < 1e-9);
  }
}

TEST_CASE("closest_leds: single module, stimulus on +x, k=1") {
  const BodyMap solo = single_node_body(0);
  const std::map<NodeId, Pose2> poses{{0, Pose2{}}};
  const auto lit = closest_leds(solo, poses, LedRing{}, {1.0, 0.0}, 1);
  REQUIRE(lit.size() == 1);
  CHECK(lit.begin()->node == 0);
  CHECK(lit.begin()->led_index == 0);
}

TEST_CASE("closest_leds: all chosen LEDs can sit on a non-brain module") {
  BodyMap pair = attach_subtree(single_node_body(0), 0, 0, 4, single_node_body(1).tree);
  const auto poses = world_poses(pair, Pose2{});
  // Stimulus just beyond the member module.
  const Vec2 stim{poses.at(1).x + 0.5, 0.0};
  const auto lit = closest_leds(pair, poses, LedRing{}, stim, 3);
  REQUIRE(lit.size() == 3);
  for (const auto& sel : lit) CHECK(sel.node == 1);
}

TEST_CASE("closest_leds: random bodies match the exhaustive oracle") {
  std::mt19937 rng(41);
  for (int iter = 0; iter < 300; ++iter) {
    const auto built = make_random_body(rng, 6);
    const auto poses = world_poses(built.body, random_pose(rng));
    const Vec2 stim{(static_cast<double>(rng() % 100) / 25.0) - 2.0,
                    (static_cast<double>(rng() % 100) / 25.0) - 2.0};
    const int k = 1 + static_cast<int>(rng() % 8);
    const auto got = closest_leds(built.body, poses, LedRing{}, stim, k);
    CHECK(got == led_oracle(built.body, poses, stim, k));
    CHECK(static_cast<int>(got.size()) == std::min(k, 6 * kLedCount));
  }
}

TEST_CASE("dock_feasible: exact, offset, closed boundary") {
  const Pose2 goal{1.0, 2.0, 0.5};
  CHECK(dock_feasible(goal, goal, 0.02, 0.1));
  CHECK_FALSE(dock_feasible(Pose2{1.04, 2.0, 0.5}, goal, 0.02, 0.1));
  // Boundary is inclusive (values chosen exactly representable).
  CHECK(dock_feasible(Pose2{1.25, 2.0, 0.5}, goal, 0.25, 0.1));
  CHECK_FALSE(dock_feasible(Pose2{1.0, 2.0, 0.5 + 0.25}, goal, 0.02, 0.1));
}

TEST_CASE("stimulus path interpolation") {
  Stimulus s;
  s.waypoints = {{0.0, {0.0, 0.0}}, {2.0, {2.0, 0.0}}, {3.0, {2.0, 1.0}}};
  CHECK(s.position_at(-1.0).x == doctest::Approx(0.0));
  CHECK(s.position_at(1.0).x == doctest::Approx(1.0));
  CHECK(s.position_at(2.5).y == doctest::Approx(0.5));
  CHECK(s.position_at(9.0).y == doctest::Approx(1.0));
}
