#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <optional>
#include <string>
#include <vector>

#include "cornerspace/cluster.hpp"
#include "cornerspace/meanfield.hpp"
#include "cornerspace/observables.hpp"
#include "cornerspace/steadystate.hpp"
#include "cornerspace/trajectories.hpp"

namespace cornerspace {

/// Descending spectrum of rho. Eigenvalues in [-clip_tol, 0) become 0 and the
/// spectrum is rescaled to sum 1; anything below -clip_tol is an error.
EigenDecomposition diagonalize_rho(const DensityMatrix& rho, double clip_tol = 1e-8);

struct JointPair {
  int ra = 0, rb = 0;
  double p = 0.0;
  bool operator==(const JointPair&) const = default;
};

struct PairSelection {
  std::vector<JointPair> pairs;  // non-increasing p, ties in (ra, rb) order
  double captured = 0.0;         // sum of the selected joint probabilities
  bool degenerate_cut = false;   // ranks M and M + 1 agree to 1e-12 relative
  std::string warning;
};

/// The M largest products pa[i] * pb[j], found with a frontier max-heap that
/// starts at (0, 0) and expands (i + 1, j) and (i, j + 1).
PairSelection select_top_m_pairs(const RealVector& pa, const RealVector& pb, Index m);

/// Builds the corner of two solved children: basis states are the selected
/// pairs, operators living in one child are projected exactly, pairs across
/// the boundary are built from the rotated child factors, and the returned
/// cluster carries diag(joint p) / sum as its starting rho (eig left empty).
/// In fast mode only the pairs crossing this node are carried.
Cluster merge_clusters(const Cluster& a, const Cluster& b, const ScheduleNode& node, Index m,
                       OperatorMode mode, PairSelection* selection = nullptr);

enum class SolverKind { direct, mcwf };
std::string to_string(SolverKind k);

struct SolverSettings {
  int direct_cap = 400;  // corner dimensions above this use trajectories
  SteadyStateControls direct;
  TrajectoryConfig trajectories;
  double clip_tol = 1e-8;
  int fast_mode_above = 2000;  // automatic operator mode switch
  std::optional<OperatorMode> operator_mode;
  long long leaf_cap = 4096;
  long long brute_force_cap = 4096;
  double obs_tol = 1e-3;  // relative change between successive M
  double obs_floor = 1e-6;

  OperatorMode mode_for(Index m) const;
  SolverKind solver_for(Index dim) const {
    return dim <= direct_cap ? SolverKind::direct : SolverKind::mcwf;
  }
};

struct TimePoint {
  double t = 0.0;
  double n = 0.0;
  std::optional<double> g2;
};

/// Everything reported about one steady-state solve.
struct NodeSolve {
  int node = -1;  // schedule index, -1 for brute force
  Geometry geometry;
  Index m = 0;    // corner or Fock dimension
  bool leaf = false;
  bool brute_force = false;
  bool restored = false;  // loaded from a checkpoint, series not available
  SolverKind solver = SolverKind::direct;
  OperatorMode mode = OperatorMode::exact;
  ObservableRecord record;
  std::vector<TimePoint> series;
  std::vector<SpectrumRow> spectrum;
  bool converged = true;  // steady-state termination
  std::string termination;
  double seconds = 0.0;
  double captured_probability = 1.0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::vector<std::string> warnings;
};

struct SolvedCluster {
  Cluster cluster;
  NodeSolve report;
};

/// Steady state of `c` starting from c.rho; fills rho and eig.
SolvedCluster solve_cluster(Cluster c, const ModelParams& params, const SolverSettings& settings,
                            std::uint64_t seed);

/// Full Fock-space solve of a geometry (no corner), trajectories above
/// direct_cap. The density matrix is only kept when dimension allows.
SolvedCluster solve_brute_force(const Geometry& geom, const ModelParams& params,
                                const SolverSettings& settings);

/// Solved subtrees keyed by shape and the effective M of every merge below.
/// With a checkpoint directory, every inserted cluster is also written there
/// and lookups fall back to files written by earlier runs with the same
/// fingerprint (which should identify the model and solver settings).
class SolveCache {
 public:
  SolveCache() = default;
  SolveCache(std::string checkpoint_dir, std::string fingerprint);

  std::shared_ptr<const SolvedCluster> find(const std::string& key);
  void insert(const std::string& key, std::shared_ptr<const SolvedCluster> v);
  std::size_t size() const { return map_.size(); }
  std::string checkpoint_path(const std::string& key) const;
  /// True once for each key that find() restored from disk.
  bool consume_restored(const std::string& key) { return restored_.erase(key) > 0; }

 private:
  std::set<std::string> restored_;
  std::map<std::string, std::shared_ptr<const SolvedCluster>> map_;
  std::string dir_, fingerprint_;
};

struct PipelineResult {
  std::shared_ptr<const SolvedCluster> root;
  std::vector<NodeSolve> solves;  // new solves in execution order
  std::vector<std::string> warnings;
};

/// One pass through the schedule using each node's M. Nodes of equal shape
/// and equal effective M below them are solved once.
PipelineResult run_schedule(const MergeSchedule& schedule, const ModelParams& params,
                            const SolverSettings& settings, SolveCache* cache = nullptr);

/// True when every monitored observable moved by less than tol relative
/// (scale floored) or within 3 combined standard errors.
bool records_agree(const ObservableRecord& a, const ObservableRecord& b, double tol,
                   double floor);

struct ProgressionResult {
  std::vector<PipelineResult> passes;  // one per M
  std::vector<int> m_values;
  bool converged = false;              // last two root records agree
  std::vector<std::string> warnings;
};

/// The same M at every merge, for each M of `m_list` in turn.
ProgressionResult run_progression(const Geometry& target, const Geometry& base,
                                  const ModelParams& params, const std::vector<int>& m_list,
                                  const SolverSettings& settings, SolveCache* cache = nullptr);

struct NodeConvergence {
  int node = -1;
  std::vector<NodeSolve> attempts;  // one per M tried
  bool converged = false;
  bool oscillating = false;
};

struct ConvergenceReport {
  std::vector<NodeConvergence> nodes;  // merge nodes in post-order, one per shape
  std::vector<NodeSolve> leaves;
  bool converged = true;
  std::vector<std::string> warnings;
};

/// Per node, increases M through m_list until successive observables agree
/// to settings.obs_tol; the node then passes its last cluster upward.
std::pair<std::shared_ptr<const SolvedCluster>, ConvergenceReport> converge_in_m(
    const MergeSchedule& schedule, const ModelParams& params, const std::vector<int>& m_list,
    const SolverSettings& settings);

}  // namespace cornerspace
