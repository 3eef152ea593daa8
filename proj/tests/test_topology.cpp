#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "vns/topology.hpp"

using namespace vns;
using vns::testing::make_random_body;

namespace {

// Homogeneous 3x3 transform stack, independent of Pose2 composition.
struct Mat3 {
  double m[3][3];

  static Mat3 identity() {
    Mat3 r{};
    r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
    return r;
  }

  static Mat3 from_pose(const Pose2& p) {
    Mat3 r = identity();
    r.m[0][0] = std::cos(p.theta);
    r.m[0][1] = -std::sin(p.theta);
    r.m[1][0] = std::sin(p.theta);
    r.m[1][1] = std::cos(p.theta);
    r.m[0][2] = p.x;
    r.m[1][2] = p.y;
    return r;
  }

  Mat3 mul(const Mat3& o) const {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) r.m[i][j] += m[i][k] * o.m[k][j];
    return r;
  }
};

std::map<NodeId, Mat3> matrix_oracle_poses(const BodyMap& body, const Pose2& root_pose) {
  std::map<NodeId, Mat3> out;
  std::function<void(const SubtreeDescription&, Mat3)> walk = [&](const SubtreeDescription& sub,
                                                                  Mat3 acc) {
    out[sub.root] = acc;
    for (const auto& c : sub.children) walk(c.sub, acc.mul(Mat3::from_pose(c.relative_pose)));
  };
  walk(body.tree, Mat3::from_pose(root_pose));
  return out;
}

}  // namespace

TEST_CASE("attach: smallest merge") {
  const BodyMap a = single_node_body(0);
  const BodyMap merged = attach_subtree(a, 0, 0, 4, single_node_body(1).tree);
  CHECK(merged.node_count() == 2);
  CHECK(merged.root() == 0);
  REQUIRE(merged.tree.children.size() == 1);
  CHECK(merged.tree.children[0].sub.root == 1);
  CHECK(validate(merged).empty());
  // Ports 0 and 4 face each other along +x: child centered one diameter away.
  const auto poses = world_poses(merged, Pose2{});
  CHECK(poses.at(1).x == doctest::Approx(kModuleDiameter).epsilon(1e-12));
  CHECK(std::abs(poses.at(1).y) < 1e-12);
  CHECK(std::abs(poses.at(1).theta) < 1e-12);
}

TEST_CASE("attach: subtree onto chain matches brute-force construction") {
  BodyMap ab = attach_subtree(single_node_body(0), 0, 0, 4, single_node_body(1).tree);
  BodyMap cd = attach_subtree(single_node_body(2), 2, 1, 5, single_node_body(3).tree);
  const BodyMap all = attach_subtree(ab, 1, 2, 6, cd.tree);

  CHECK(all.node_count() == 4);
  CHECK(validate(all).empty());
  const std::vector<std::pair<NodeId, NodeId>> want{{0, 1}, {1, 2}, {2, 3}};
  CHECK(undirected_edges(all) == want);
  auto ids = all.tree.node_ids();
  std::sort(ids.begin(), ids.end());
  CHECK(ids == std::vector<NodeId>{0, 1, 2, 3});
}

TEST_CASE("attach: guards") {
  BodyMap ab = attach_subtree(single_node_body(0), 0, 0, 4, single_node_body(1).tree);
  CHECK_THROWS_AS(attach_subtree(ab, 0, 0, 4, single_node_body(2).tree), VnsError);
  try {
    attach_subtree(ab, 0, 0, 4, single_node_body(2).tree);
  } catch (const VnsError& e) {
    CHECK(e.code() == Errc::PortOccupied);
  }
  try {
    attach_subtree(ab, 7, 1, 4, single_node_body(2).tree);
  } catch (const VnsError& e) {
    CHECK(e.code() == Errc::UnknownParent);
  }
  try {
    attach_subtree(ab, 0, 1, 4, single_node_body(1).tree);
  } catch (const VnsError& e) {
    CHECK(e.code() == Errc::DuplicateNodeId);
  }
}

TEST_CASE("detach: pair and chain") {
  BodyMap ab = attach_subtree(single_node_body(0), 0, 0, 4, single_node_body(1).tree);
  const auto [rem, sub] = detach_subtree(ab, 1);
  CHECK(rem.node_count() == 1);
  CHECK(sub.node_count() == 1);
  CHECK(sub.root == 1);

  BodyMap abc = attach_subtree(ab, 1, 2, 6, single_node_body(2).tree);
  const auto [rem2, sub2] = detach_subtree(abc, 1);
  CHECK(rem2.node_count() == 1);
  CHECK(sub2.node_count() == 2);
  // C's placement under B is preserved verbatim.
  const SubtreeDescription* c_in_original = abc.tree.find(1);
  CHECK(structurally_equal(sub2, *c_in_original));
}

TEST_CASE("detach: guards") {
  BodyMap ab = attach_subtree(single_node_body(0), 0, 0, 4, single_node_body(1).tree);
  CHECK_THROWS_AS(detach_subtree(ab, 0), VnsError);
  CHECK_THROWS_AS(detach_subtree(ab, 9), VnsError);
}

TEST_CASE("detach then attach at the same port reproduces the body") {
  std::mt19937 rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    const auto built = make_random_body(rng, 2 + static_cast<int>(rng() % 9));
    const auto ids = built.body.tree.node_ids();
    const NodeId victim = ids[1 + rng() % (ids.size() - 1)];
    const auto [parent_port, entry_port] = built.ports_of.at(victim);
    const NodeId parent = built.parent_of.at(victim);

    const auto [rem, sub] = detach_subtree(built.body, victim);
    const BodyMap back = attach_subtree(rem, parent, parent_port, entry_port, sub);
    CHECK(structurally_equal(back.tree, built.body.tree));
  }
}

TEST_CASE("reroot: identity") {
  BodyMap abc = attach_subtree(attach_subtree(single_node_body(0), 0, 0, 4,
                                              single_node_body(1).tree),
                               1, 2, 6, single_node_body(2).tree);
  const BodyMap same = reroot(abc, 0);
  CHECK(structurally_equal(same.tree, abc.tree));
}

TEST_CASE("reroot: chain reversal") {
  BodyMap abc = attach_subtree(attach_subtree(single_node_body(0), 0, 0, 4,
                                              single_node_body(1).tree),
                               1, 2, 6, single_node_body(2).tree);
  const BodyMap from_c = reroot(abc, 2);
  CHECK(from_c.root() == 2);
  CHECK(undirected_edges(from_c) == undirected_edges(abc));
  CHECK(validate(from_c).empty());
}

TEST_CASE("reroot: star") {
  BodyMap star = single_node_body(0);
  star = attach_subtree(star, 0, 0, 4, single_node_body(1).tree);
  star = attach_subtree(star, 0, 2, 6, single_node_body(2).tree);
  star = attach_subtree(star, 0, 4, 0, single_node_body(3).tree);
  const BodyMap from_b = reroot(star, 1);
  CHECK(from_b.root() == 1);
  CHECK(undirected_edges(from_b) == undirected_edges(star));
  // 0 now hangs under 1 and keeps its two other children.
  REQUIRE(from_b.tree.children.size() == 1);
  CHECK(from_b.tree.children[0].sub.root == 0);
  CHECK(from_b.tree.children[0].sub.children.size() == 2);
}

TEST_CASE("reroot preserves pairwise world positions") {
  std::mt19937 rng(11);
  for (int iter = 0; iter < 40; ++iter) {
    const auto built = make_random_body(rng, 2 + static_cast<int>(rng() % 7));
    const auto ids = built.body.tree.node_ids();
    const NodeId new_root = ids[rng() % ids.size()];

    const Pose2 world_root{0.3, -0.2, 0.7};
    const auto before = world_poses(built.body, world_root);
    const BodyMap rerooted = reroot(built.body, new_root);
    // Same physical placement, expressed from the new root's pose.
    const auto after = world_poses(rerooted, before.at(new_root));
    CHECK(undirected_edges(rerooted) == undirected_edges(built.body));
    for (const auto& [id, pose] : before) {
      CHECK(pose_close(after.at(id), pose, 1e-9));
    }
  }
}

TEST_CASE("world_poses: single node and analytic rotation") {
  const auto solo = world_poses(single_node_body(5), Pose2{});
  CHECK(pose_close(solo.at(5), Pose2{}, 1e-15));

  // A -> B at relative pose (1, 0, 0), root at (0, 0, pi/2): B lands at (0, 1).
  BodyMap ab = single_node_body(0);
  SubtreeDescription b = single_node_body(1).tree;
  ab.tree.children.push_back({0, 4, Pose2{1.0, 0.0, 0.0}, b});
  const auto poses = world_poses(ab, Pose2{0.0, 0.0, M_PI / 2});
  CHECK(poses.at(1).x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(poses.at(1).y == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(poses.at(1).theta == doctest::Approx(M_PI / 2).epsilon(1e-12));
}

TEST_CASE("world_poses: random trees match the matrix oracle") {
  std::mt19937 rng(23);
  for (int iter = 0; iter < 30; ++iter) {
    const auto built = make_random_body(rng, 6);
    const Pose2 root{0.1 * static_cast<double>(rng() % 10), -0.25, 1.1};
    const auto got = world_poses(built.body, root);
    const auto want = matrix_oracle_poses(built.body, root);
    for (const auto& [id, mat] : want) {
      CHECK(std::abs(got.at(id).x - mat.m[0][2]) < 1e-9);
      CHECK(std::abs(got.at(id).y - mat.m[1][2]) < 1e-9);
      const double ct = std::cos(got.at(id).theta);
      const double st = std::sin(got.at(id).theta);
      CHECK(std::abs(ct - mat.m[0][0]) < 1e-9);
      CHECK(std::abs(st - mat.m[1][0]) < 1e-9);
    }
  }
}

TEST_CASE("validate: clean tree, duplicate id, port reuse") {
  std::mt19937 rng(3);
  const auto ten = make_random_body(rng, 10);
  CHECK(validate(ten.body).empty());

  BodyMap dup = attach_subtree(single_node_body(0), 0, 0, 4, single_node_body(1).tree);
  dup.tree.children[0].sub.root = 0;  // corrupt: duplicated id
  const auto v1 = validate(dup);
  REQUIRE(v1.size() == 1);
  CHECK(v1[0].code == Errc::DuplicateNodeId);

  BodyMap clash = attach_subtree(single_node_body(0), 0, 0, 4, single_node_body(1).tree);
  clash.tree.children.push_back({0, 5, mated_pose(0, 5), single_node_body(2).tree});
  const auto v2 = validate(clash);
  REQUIRE(v2.size() == 1);
  CHECK(v2[0].code == Errc::PortOccupied);
}

TEST_CASE("attach grows node count and keeps the result valid") {
  std::mt19937 rng(17);
  for (int iter = 0; iter < 30; ++iter) {
    const auto host = make_random_body(rng, 1 + static_cast<int>(rng() % 6));
    const auto guest = make_random_body(rng, 1 + static_cast<int>(rng() % 4), 100);
    const auto ids = host.body.tree.node_ids();
    const NodeId parent = ids[rng() % ids.size()];
    const auto open = free_ports(host.body, parent);
    if (open.empty()) continue;
    const BodyMap merged = attach_subtree(host.body, parent, open[0], 0, guest.body.tree);
    CHECK(merged.node_count() == host.body.node_count() + guest.body.node_count());
    CHECK(validate(merged).empty());
  }
}

TEST_CASE("port frames and mated poses") {
  const Pose2 p0 = port_frame(0);
  CHECK(p0.x == doctest::Approx(kModuleRadius));
  CHECK(p0.theta == doctest::Approx(0.0));
  // Mating port 0 to the opposite port 4 keeps headings aligned.
  const Pose2 m = mated_pose(0, 4);
  CHECK(m.x == doctest::Approx(kModuleDiameter));
  CHECK(std::abs(m.y) < 1e-15);
  CHECK(std::abs(m.theta) < 1e-15);
  // Mating port 0 to port 0 flips the child around.
  const Pose2 f = mated_pose(0, 0);
  CHECK(f.x == doctest::Approx(kModuleDiameter));
  CHECK(std::abs(normalize_angle(f.theta - M_PI)) < 1e-12);
}
