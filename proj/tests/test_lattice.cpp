#include <map>
#include <set>

#include "cornerspace/lattice.hpp"
#include "cornerspace/error.hpp"
#include "doctest.h"

using namespace cornerspace;

namespace {
std::vector<Bond> bonds(std::initializer_list<Bond> b) { return b; }

// Target-indexed bonds realized at every node, with multiplicity.
std::map<SitePair, int> owned_bonds(const MergeSchedule& s) {
  std::map<SitePair, int> out;
  for (int k = 0; k <= s.root(); ++k) {
    const auto map = s.target_sites(k);
    const auto& node = s.nodes[k];
    std::vector<Bond> list = node.cross_bonds;
    for (const auto& b : list) {
      int j = map[b.j], l = map[b.l];
      out[{std::min(j, l), std::max(j, l)}] += b.multiplicity;
    }
  }
  return out;
}
}  // namespace

TEST_CASE("2x2 periodic doubles every bond") {
  const Geometry g = build_geometry(2, 2, true, true);
  CHECK(g.bonds == bonds({{0, 1, 2}, {0, 2, 2}, {1, 3, 2}, {2, 3, 2}}));
  for (int s = 0; s < 4; ++s) CHECK(g.weighted_degree(s) == 4);
}

TEST_CASE("4x4 periodic has 32 single bonds and degree 4") {
  const Geometry g = build_geometry(4, 4, true, true);
  CHECK(g.bonds.size() == 32);
  for (const auto& b : g.bonds) {
    CHECK(b.multiplicity == 1);
    CHECK(b.j < b.l);
  }
  for (int s = 0; s < 16; ++s) CHECK(g.weighted_degree(s) == 4);
  for (std::size_t k = 1; k < g.bonds.size(); ++k) {
    CHECK(std::make_pair(g.bonds[k - 1].j, g.bonds[k - 1].l) <
          std::make_pair(g.bonds[k].j, g.bonds[k].l));
  }
}

TEST_CASE("rings and open axes") {
  CHECK(build_geometry(3, 1, true, true).bonds == bonds({{0, 1, 1}, {0, 2, 1}, {1, 2, 1}}));
  CHECK(build_geometry(1, 1, true, true).bonds.empty());
  CHECK(build_geometry(3, 1, false, false).bonds == bonds({{0, 1, 1}, {1, 2, 1}}));
  for (auto [lx, ly] : {std::pair{3, 3}, {5, 4}, {6, 3}}) {
    const Geometry g = build_geometry(lx, ly, true, true);
    CHECK(static_cast<int>(g.bonds.size()) == 2 * lx * ly);
  }
}

TEST_CASE("4x4 from 2x2 plans 2x2 -> 4x2 -> 4x4 with y-wraps at the root") {
  const Geometry target = build_geometry(4, 4, true, true);
  const auto s = plan_merge_schedule(target, build_geometry(2, 2, true, true), {100}, 1);
  const auto& root = s.root_node();
  CHECK(root.geometry.label() == "4x4");
  CHECK(s.nodes[root.child_a].geometry.label() == "4x2");
  CHECK(s.nodes[s.nodes[root.child_a].child_a].geometry.label() == "2x2");
  CHECK(root.axis == MergeAxis::y);
  std::set<SitePair> cross;
  for (const auto& b : root.cross_bonds) cross.insert({b.j, b.l});
  for (int x = 0; x < 4; ++x) CHECK(cross.count({x, 12 + x}) == 1);  // row 0 to row 3
  CHECK(s.describe() ==
        plan_merge_schedule(target, build_geometry(2, 2, true, true), {100}, 1).describe());
}

TEST_CASE("3x3 from 3x1 merges (3x1 + 3x1) then adds 3x1") {
  const auto s = plan_merge_schedule(build_geometry(3, 3, true, true),
                                     build_geometry(3, 1, true, true), {0}, 1);
  const auto& root = s.root_node();
  CHECK(s.nodes[root.child_a].geometry.label() == "3x2");
  CHECK(s.nodes[root.child_b].geometry.label() == "3x1");
  CHECK(s.nodes[root.child_b].is_leaf());
  const auto& mid = s.nodes[root.child_a];
  CHECK(s.nodes[mid.child_a].geometry.label() == "3x1");
  CHECK(s.nodes[mid.child_b].geometry.label() == "3x1");
}

TEST_CASE("bond assignment is total and unique") {
  for (auto [tx, ty, bx, by] : {std::array{4, 4, 2, 2}, {3, 3, 3, 1}, {6, 3, 3, 1},
                                {2, 2, 2, 1}, {4, 2, 2, 1}}) {
    const Geometry target = build_geometry(tx, ty, true, true);
    const auto s = plan_merge_schedule(target, build_geometry(bx, by, true, true), {0}, 1, 1 << 20);
    std::map<SitePair, int> want;
    int want_total = 0, got_total = 0;
    for (const auto& b : target.bonds) {
      want[{b.j, b.l}] = b.multiplicity;
      want_total += b.multiplicity;
    }
    const auto got = owned_bonds(s);
    for (auto& [p, m] : got) got_total += m;
    CHECK(got == want);
    CHECK(got_total == want_total);
    CHECK(s.bond_owner.size() == target.bonds.size());
  }
}

TEST_CASE("2x2 from 2x1: root cross bonds match the doubled inter-row bonds") {
  const Geometry target = build_geometry(2, 2, true, true);
  const auto s = plan_merge_schedule(target, build_geometry(2, 1, true, true), {0}, 1);
  const auto& root = s.root_node();
  std::vector<Bond> cross = root.cross_bonds;
  std::vector<Bond> expected;
  for (const auto& b : target.bonds)
    if (b.l - b.j == 2) expected.push_back(b);  // bonds joining the two rows
  CHECK(cross == expected);
  CHECK(cross == bonds({{0, 2, 2}, {1, 3, 2}}));
}

TEST_CASE("schedule errors") {
  CHECK_THROWS_AS(plan_merge_schedule(build_geometry(5, 4, true, true),
                                      build_geometry(2, 2, true, true), {0}, 1),
                  Error);
  CHECK_THROWS_AS(plan_merge_schedule(build_geometry(4, 4, true, true),
                                      build_geometry(4, 4, true, true), {0}, 1),
                  Error);  // leaf 2^16 above the cap
  CHECK(fock_dimension(16, 1, 1 << 20) == 65536);
  CHECK(fock_dimension(64, 1, 1 << 20) == -1);
}
