#pragma once

#include <string>
#include <utility>
#include <vector>

namespace cornerspace {

struct Bond {
  int j = 0;  // j < l
  int l = 0;
  int multiplicity = 1;
  bool operator==(const Bond&) const = default;
};

using SitePair = std::pair<int, int>;  // first < second

/// Square lattice with site index y * lx + x and nearest-neighbor bonds
/// sorted by (j, l).
struct Geometry {
  int lx = 1, ly = 1;
  bool periodic_x = true, periodic_y = true;
  std::vector<Bond> bonds;

  int sites() const { return lx * ly; }
  int index(int x, int y) const { return y * lx + x; }
  /// Sum of bond multiplicities touching `site`.
  int weighted_degree(int site) const;
  std::string label() const { return std::to_string(lx) + "x" + std::to_string(ly); }
  bool same_shape(const Geometry& o) const {
    return lx == o.lx && ly == o.ly && periodic_x == o.periodic_x && periodic_y == o.periodic_y;
  }
};

/// Enumerates +x and +y neighbors with wraparound on periodic axes. A wrap on
/// a length-2 axis repeats an existing pair and raises its multiplicity; a
/// length-1 axis contributes no bonds.
Geometry build_geometry(int lx, int ly, bool periodic_x, bool periodic_y);

enum class MergeAxis { x, y };

struct ScheduleNode {
  Geometry geometry;
  int m = 0;  // 0 means the full product dimension
  int level = 0;  // 0 for leaves
  int child_a = -1, child_b = -1;
  MergeAxis axis = MergeAxis::x;
  std::vector<int> embed_a, embed_b;  // child site -> node site
  /// Pairs needed here or by any ancestor (node indexing). Leaves
  /// materialize them by Kronecker placement; merged nodes carry them in
  /// exact operator mode.
  std::vector<SitePair> tracked_pairs;
  /// The subset of tracked_pairs with one endpoint in each child.
  std::vector<SitePair> cross_pairs;
  /// Target bonds first realized at this node, in node indexing with target
  /// multiplicity.
  std::vector<Bond> cross_bonds;

  bool is_leaf() const { return child_a < 0; }
};

/// Binary merge tree stored in post-order (children precede parents; the
/// root is last).
struct MergeSchedule {
  Geometry target;
  Geometry base;
  std::vector<ScheduleNode> nodes;

  int root() const { return static_cast<int>(nodes.size()) - 1; }
  const ScheduleNode& root_node() const { return nodes.back(); }
  /// For every target bond, the node that owns it (leaf or merge).
  std::vector<int> bond_owner;
  /// Target-site index of each (node, node-site) is composed from embeddings;
  /// this returns the node-site -> target-site map.
  std::vector<int> target_sites(int node) const;
  /// Serialized form used for determinism checks.
  std::string describe() const;
};

/// Plans the merge tree from `base` up to `target`. At each internal node the
/// axis with more base units is split (preferring an axis with an even unit
/// count; ties go to y), the larger half first. `m_schedule` holds either one
/// M for every merge node or one M per merge level, bottom-up; 0 means full.
MergeSchedule plan_merge_schedule(const Geometry& target, const Geometry& base,
                                  const std::vector<int>& m_schedule,
                                  int n_max, long long brute_force_cap = 4096);

/// (n_max + 1)^sites, or -1 on overflow beyond `cap`.
long long fock_dimension(int sites, int n_max, long long cap);

}  // namespace cornerspace
