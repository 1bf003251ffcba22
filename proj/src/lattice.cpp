#include "cornerspace/lattice.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "cornerspace/error.hpp"

namespace cornerspace {

int Geometry::weighted_degree(int site) const {
  int deg = 0;
  for (const auto& b : bonds) {
    if (b.j == site || b.l == site) deg += b.multiplicity;
  }
  return deg;
}

Geometry build_geometry(int lx, int ly, bool periodic_x, bool periodic_y) {
  require(lx >= 1 && ly >= 1, "build_geometry: lattice sides must be >= 1");
  require(static_cast<long long>(lx) * ly <= (1 << 20), "build_geometry: lattice too large",
          ErrorCode::resource);
  Geometry g;
  g.lx = lx;
  g.ly = ly;
  g.periodic_x = periodic_x;
  g.periodic_y = periodic_y;
  std::map<SitePair, int> mult;
  auto add = [&](int a, int b) {
    if (a == b) return;
    mult[{std::min(a, b), std::max(a, b)}] += 1;
  };
  for (int y = 0; y < ly; ++y) {
    for (int x = 0; x < lx; ++x) {
      const int s = g.index(x, y);
      if (x + 1 < lx) {
        add(s, g.index(x + 1, y));
      } else if (periodic_x && lx > 1) {
        add(s, g.index(0, y));
      }
      if (y + 1 < ly) {
        add(s, g.index(x, y + 1));
      } else if (periodic_y && ly > 1) {
        add(s, g.index(x, 0));
      }
    }
  }
  for (const auto& [p, m] : mult) g.bonds.push_back({p.first, p.second, m});
  return g;
}

long long fock_dimension(int sites, int n_max, long long cap) {
  long long d = 1;
  for (int i = 0; i < sites; ++i) {
    if (d > cap / (n_max + 1)) return -1;
    d *= (n_max + 1);
  }
  return d;
}

std::vector<int> MergeSchedule::target_sites(int node) const {
  // parent links
  std::vector<int> parent(nodes.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_leaf()) {
      parent[nodes[i].child_a] = static_cast<int>(i);
      parent[nodes[i].child_b] = static_cast<int>(i);
    }
  }
  std::vector<int> map(nodes[node].geometry.sites());
  for (int s = 0; s < static_cast<int>(map.size()); ++s) map[s] = s;
  int cur = node;
  while (parent[cur] >= 0) {
    const ScheduleNode& p = nodes[parent[cur]];
    const auto& embed = (p.child_a == cur) ? p.embed_a : p.embed_b;
    for (auto& s : map) s = embed[s];
    cur = parent[cur];
  }
  return map;
}

std::string MergeSchedule::describe() const {
  std::ostringstream os;
  os << "target " << target.label() << " base " << base.label() << "\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    os << i << ": " << n.geometry.label() << " level " << n.level << " M " << n.m;
    if (!n.is_leaf()) {
      os << " = " << n.child_a << " + " << n.child_b << (n.axis == MergeAxis::x ? " (x)" : " (y)");
    }
    os << " tracked";
    for (const auto& p : n.tracked_pairs) os << " " << p.first << "-" << p.second;
    os << " cross";
    for (const auto& b : n.cross_bonds) os << " " << b.j << "-" << b.l << "x" << b.multiplicity;
    os << "\n";
  }
  return os.str();
}

MergeSchedule plan_merge_schedule(const Geometry& target, const Geometry& base,
                                  const std::vector<int>& m_schedule, int n_max,
                                  long long brute_force_cap) {
  require(base.lx >= 1 && base.ly >= 1, "plan_merge_schedule: empty base cluster");
  if (target.lx % base.lx != 0 || target.ly % base.ly != 0) {
    fail(ErrorCode::config, "plan_merge_schedule: target " + target.label() +
                                " is not reachable from base " + base.label());
  }
  const long long leaf_dim = fock_dimension(base.sites(), n_max, brute_force_cap);
  if (leaf_dim < 0) {
    fail(ErrorCode::resource, "plan_merge_schedule: base cluster " + base.label() +
                                  " exceeds the brute-force dimension cap " +
                                  std::to_string(brute_force_cap));
  }
  require(!m_schedule.empty(), "plan_merge_schedule: empty M schedule");
  for (int m : m_schedule) require(m >= 0, "plan_merge_schedule: negative M");

  MergeSchedule sched;
  sched.target = target;
  sched.base = build_geometry(base.lx, base.ly, target.periodic_x, target.periodic_y);

  std::function<int(int, int)> build = [&](int ux, int uy) -> int {
    ScheduleNode node;
    node.geometry = build_geometry(ux * base.lx, uy * base.ly, target.periodic_x, target.periodic_y);
    if (ux == 1 && uy == 1) {
      sched.nodes.push_back(std::move(node));
      return static_cast<int>(sched.nodes.size()) - 1;
    }
    bool split_x;
    const bool ex = ux > 1 && ux % 2 == 0, ey = uy > 1 && uy % 2 == 0;
    if (ex || ey) {
      split_x = ex && (!ey || ux > uy);
    } else {
      split_x = ux > 1 && (uy == 1 || ux > uy);
    }
    const int u = split_x ? ux : uy;
    const int ua = (u + 1) / 2, ub = u / 2;
    const int a = split_x ? build(ua, uy) : build(ux, ua);
    const int b = split_x ? build(ub, uy) : build(ux, ub);
    node.child_a = a;
    node.child_b = b;
    node.axis = split_x ? MergeAxis::x : MergeAxis::y;
    node.level = 1 + std::max(sched.nodes[a].level, sched.nodes[b].level);
    const Geometry& ga = sched.nodes[a].geometry;
    const Geometry& gb = sched.nodes[b].geometry;
    for (int y = 0; y < ga.ly; ++y)
      for (int x = 0; x < ga.lx; ++x) node.embed_a.push_back(node.geometry.index(x, y));
    for (int y = 0; y < gb.ly; ++y) {
      for (int x = 0; x < gb.lx; ++x) {
        node.embed_b.push_back(split_x ? node.geometry.index(x + ga.lx, y)
                                       : node.geometry.index(x, y + ga.ly));
      }
    }
    sched.nodes.push_back(std::move(node));
    return static_cast<int>(sched.nodes.size()) - 1;
  };
  build(target.lx / base.lx, target.ly / base.ly);

  // M per node
  int max_level = sched.nodes.back().level;
  if (m_schedule.size() != 1 && static_cast<int>(m_schedule.size()) != max_level) {
    fail(ErrorCode::config, "plan_merge_schedule: M schedule needs 1 or " +
                                std::to_string(max_level) + " entries, got " +
                                std::to_string(m_schedule.size()));
  }
  for (auto& n : sched.nodes) {
    if (n.is_leaf()) {
      n.m = 0;
    } else {
      n.m = m_schedule.size() == 1 ? m_schedule[0] : m_schedule[n.level - 1];
    }
  }

  // Tracked pairs: a node needs the bonds of its own standalone geometry plus
  // everything its ancestors need inside it. Nodes of equal shape share one
  // solution, so their sets are merged. Parents always have more sites, so a
  // pass in decreasing size sees final parent sets.
  const int n_nodes = static_cast<int>(sched.nodes.size());
  std::vector<int> parent(n_nodes, -1);
  for (int i = 0; i < n_nodes; ++i) {
    if (!sched.nodes[i].is_leaf()) {
      parent[sched.nodes[i].child_a] = i;
      parent[sched.nodes[i].child_b] = i;
    }
  }
  std::vector<int> order(n_nodes);
  for (int i = 0; i < n_nodes; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return sched.nodes[x].geometry.sites() > sched.nodes[y].geometry.sites();
  });
  std::map<std::pair<int, int>, std::set<SitePair>> by_shape;
  auto shape_key = [&](int i) {
    return std::make_pair(sched.nodes[i].geometry.lx, sched.nodes[i].geometry.ly);
  };
  for (int idx = 0; idx < n_nodes;) {
    const int sites = sched.nodes[order[idx]].geometry.sites();
    int end = idx;
    while (end < n_nodes && sched.nodes[order[end]].geometry.sites() == sites) ++end;
    for (int k = idx; k < end; ++k) {
      const int i = order[k];
      auto& set = by_shape[shape_key(i)];
      for (const auto& b : sched.nodes[i].geometry.bonds) set.insert({b.j, b.l});
      if (parent[i] >= 0) {
        const ScheduleNode& p = sched.nodes[parent[i]];
        const auto& embed = (p.child_a == i) ? p.embed_a : p.embed_b;
        std::map<int, int> inv;
        for (int s = 0; s < static_cast<int>(embed.size()); ++s) inv[embed[s]] = s;
        for (const auto& pr : by_shape[shape_key(parent[i])]) {
          auto f = inv.find(pr.first), g = inv.find(pr.second);
          if (f != inv.end() && g != inv.end()) {
            set.insert({std::min(f->second, g->second), std::max(f->second, g->second)});
          }
        }
      }
    }
    for (int k = idx; k < end; ++k) {
      const int i = order[k];
      const auto& set = by_shape[shape_key(i)];
      sched.nodes[i].tracked_pairs.assign(set.begin(), set.end());
    }
    idx = end;
  }
  for (auto& n : sched.nodes) {
    if (n.is_leaf()) continue;
    std::set<int> in_a(n.embed_a.begin(), n.embed_a.end());
    for (const auto& pr : n.tracked_pairs) {
      if (in_a.count(pr.first) != in_a.count(pr.second)) n.cross_pairs.push_back(pr);
    }
  }

  // Target bond ownership
  const int root = sched.root();
  std::vector<std::vector<int>> to_target(n_nodes);
  for (int i = 0; i < n_nodes; ++i) to_target[i] = sched.target_sites(i);
  for (const auto& bond : sched.nodes[root].geometry.bonds) {
    int cur = root;
    int j = bond.j, l = bond.l;  // node-local indices
    while (true) {
      const ScheduleNode& n = sched.nodes[cur];
      if (n.is_leaf()) break;
      std::map<int, int> inv_a, inv_b;
      for (int s = 0; s < static_cast<int>(n.embed_a.size()); ++s) inv_a[n.embed_a[s]] = s;
      for (int s = 0; s < static_cast<int>(n.embed_b.size()); ++s) inv_b[n.embed_b[s]] = s;
      if (inv_a.count(j) && inv_a.count(l)) {
        j = inv_a[j];
        l = inv_a[l];
        cur = n.child_a;
      } else if (inv_b.count(j) && inv_b.count(l)) {
        j = inv_b[j];
        l = inv_b[l];
        cur = n.child_b;
      } else {
        break;
      }
    }
    sched.bond_owner.push_back(cur);
    sched.nodes[cur].cross_bonds.push_back({std::min(j, l), std::max(j, l), bond.multiplicity});
  }
  for (auto& n : sched.nodes) {
    std::sort(n.cross_bonds.begin(), n.cross_bonds.end(), [](const Bond& x, const Bond& y) {
      return std::make_pair(x.j, x.l) < std::make_pair(y.j, y.l);
    });
  }
  return sched;
}

}  // namespace cornerspace
