#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "sgpplan/recursive_gp.hpp"

namespace sgp {

/// Axis-aligned box in state space.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  bool contains(const Eigen::VectorXd& x) const;
  /// Euclidean distance from x to the box (0 inside).
  double distance_outside(const Eigen::VectorXd& x) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
};

struct SearchNode {
  Eigen::VectorXd state;
  Eigen::MatrixXd sigma;
  double cost = 0.0;
  /// log det of the measurement Gram (noise included) for the executed
  /// history plus the path from the root to this node.
  double measurement_log_det = 0.0;
  double action_from_parent = 0.0;
  int depth = 0;
  std::uint64_t order = 0;
  SearchNode* parent = nullptr;
  std::vector<std::unique_ptr<SearchNode>> children;
};

using CostFn = std::function<double(const SearchNode&)>;

/// c(Sigma) = 1/2 log det(2 pi e Sigma).
CostFn posterior_entropy_cost();
/// -log det K_X over the executed and planned measurement locations.
CostFn measurement_entropy_cost();
CostFn constant_cost(double value = 0.0);

/// State transition with the rectangular-domain boundary policy: successors
/// leaving `domain` are discarded; when every control leaves it, only the
/// control landing nearest the domain survives, clamped into the domain.
struct Transition {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> step;
  std::optional<Box> domain;
};

/// Measurement-free covariance propagation along planned measurement locations.
struct CovariancePropagator {
  std::shared_ptr<const InducingSet> inducing;
  SparseVariant variant = SparseVariant::FIC;
  double noise_std = 0.0;

  /// Updated covariance and innovation variance for a measurement at x.
  std::pair<Eigen::MatrixXd, double> operator()(const Eigen::MatrixXd& sigma,
                                                const Eigen::VectorXd& x) const;
};

struct PrunerConfig {
  double delta = 0.0;
  double epsilon = std::numeric_limits<double>::infinity();
  std::vector<double> controls;

  void validate() const;
};

/// n uniformly spaced headings on [0, 2 pi).
std::vector<double> uniform_headings(int n);

struct RviStats {
  std::size_t expanded = 0;
  std::size_t pruned = 0;
};

/// True iff some convex combination of Q satisfies sigma + eps I >= sum_q alpha_q Sigma_q.
/// Exact for |Q| = 1 and |Q| = 2; for larger Q the search may miss a feasible
/// combination (under-prune) but never reports an infeasible one.
bool is_eps_alg_redundant(const Eigen::MatrixXd& sigma,
                          const std::vector<const Eigen::MatrixXd*>& q, double epsilon);

class SearchTree {
 public:
  SearchTree(Eigen::VectorXd state, Eigen::MatrixXd sigma, double measurement_log_det,
             const CostFn& cost);

  const SearchNode& root() const { return *root_; }
  const std::vector<SearchNode*>& leaves() const { return leaves_; }
  /// Depth of the leaves relative to the root.
  int depth() const;
  std::size_t node_count() const;

  /// Lowest-cost leaf; ties broken by lexicographic state, then insertion order.
  const SearchNode& best_leaf() const;

  /// Make `child` (a direct child of the root) the new root, discarding
  /// every other branch.
  void reroot(const SearchNode& child);

  /// One reduced-value-iteration pass: expand all leaves by every control,
  /// then prune the new layer by delta-distance and eps-algebraic redundancy.
  RviStats rvi_iterate(const Transition& transition, const CovariancePropagator& propagate,
                       const CostFn& cost, const PrunerConfig& pruner);

 private:
  void drop_dead_branch(SearchNode* node);

  std::unique_ptr<SearchNode> root_;
  std::vector<SearchNode*> leaves_;
  std::uint64_t next_order_ = 1;
};

/// Root-to-leaf action sequence. Throws std::invalid_argument when `leaf`
/// is not a descendant of `root`.
std::vector<double> backtrace(const SearchNode& root, const SearchNode& leaf);

struct StepRecord {
  int t = 0;
  Eigen::VectorXd state;
  double control = std::numeric_limits<double>::quiet_NaN();
  double measurement = std::numeric_limits<double>::quiet_NaN();
  double entropy = 0.0;
  double measurement_log_det = 0.0;
  std::size_t leaves = 0;
  std::size_t expanded = 0;
  std::size_t pruned = 0;
};

struct ExecutionConfig {
  int horizon = 1;
  int steps = 0;
  PrunerConfig pruner;
  SparseVariant variant = SparseVariant::FIC;
  double noise_std = 0.0;
  CostFn cost = posterior_entropy_cost();
};

struct ExecutionResult {
  std::vector<StepRecord> steps;  // t = 0 (initial state) .. steps
  BeliefState final_belief;
  std::vector<double> final_plan;  // remaining planned actions at the end
  RviStats totals;
};

/// Receding-horizon loop: build a depth-N tree offline, then repeatedly execute
/// the first action toward the lowest-cost leaf, measure, update the belief,
/// re-root at the executed child and deepen by one RVI iteration.
/// `measure` samples the field at a state; `observe` sees the belief after each step.
ExecutionResult plan_and_execute(
    const Eigen::VectorXd& initial_state, const BeliefState& initial_belief,
    const Transition& transition, const std::function<double(const Eigen::VectorXd&)>& measure,
    const ExecutionConfig& config,
    const std::function<void(const StepRecord&, const BeliefState&)>& observe = {});

}  // namespace sgp
