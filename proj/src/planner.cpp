#include "sgpplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace sgp {

namespace {

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// cost, then lexicographic state, then insertion order
bool node_before(const SearchNode& a, const SearchNode& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  if (lex_less(a.state, b.state)) return true;
  if (lex_less(b.state, a.state)) return false;
  return a.order < b.order;
}

double min_eigenvalue(const Eigen::MatrixXd& m, Eigen::VectorXd* eigvec = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, eigvec ? Eigen::ComputeEigenvectors
                                                              : Eigen::EigenvaluesOnly);
  if (eigvec) *eigvec = es.eigenvectors().col(0);
  return es.eigenvalues()(0);
}

// Buckets states into cells of side `cell` for radius queries.
class NeighborGrid {
 public:
  NeighborGrid(double radius, int dim) : radius_(radius), cell_(radius > 0.0 ? radius : 1.0),
                                         dim_(dim) {}

  void insert(const Eigen::VectorXd& x, std::size_t id) { cells_[key(x)].push_back({x, id}); }

  template <typename F>
  void for_each_within(const Eigen::VectorXd& x, F&& f) const {
    std::vector<long long> base = key(x);
    std::vector<long long> probe(base.size());
    const int total = static_cast<int>(std::pow(3, dim_));
    for (int code = 0; code < total; ++code) {
      int c = code;
      for (int d = 0; d < dim_; ++d) {
        probe[d] = base[d] + (c % 3) - 1;
        c /= 3;
      }
      auto it = cells_.find(probe);
      if (it == cells_.end()) continue;
      for (const auto& [pos, id] : it->second) {
        if ((pos - x).norm() <= radius_) f(id);
      }
    }
  }

 private:
  struct VecHash {
    std::size_t operator()(const std::vector<long long>& v) const {
      std::size_t h = 1469598103934665603ULL;
      for (long long c : v) h = (h ^ static_cast<std::size_t>(c)) * 1099511628211ULL;
      return h;
    }
  };

  std::vector<long long> key(const Eigen::VectorXd& x) const {
    std::vector<long long> k(static_cast<std::size_t>(dim_));
    for (int d = 0; d < dim_; ++d) k[d] = static_cast<long long>(std::floor(x(d) / cell_));
    return k;
  }

  double radius_;
  double cell_;
  int dim_;
  std::unordered_map<std::vector<long long>, std::vector<std::pair<Eigen::VectorXd, std::size_t>>,
                     VecHash>
      cells_;
};

}  // namespace

bool Box::contains(const Eigen::VectorXd& x) const {
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

double Box::distance_outside(const Eigen::VectorXd& x) const { return (x - clamp(x)).norm(); }

Eigen::VectorXd Box::clamp(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lo).cwiseMin(hi);
}

CostFn posterior_entropy_cost() {
  return [](const SearchNode& n) { return entropy_cost(n.sigma); };
}

CostFn measurement_entropy_cost() {
  return [](const SearchNode& n) { return -n.measurement_log_det; };
}

CostFn constant_cost(double value) {
  return [value](const SearchNode&) { return value; };
}

std::pair<Eigen::MatrixXd, double> CovariancePropagator::operator()(
    const Eigen::MatrixXd& sigma, const Eigen::VectorXd& x) const {
  const MeasurementPrediction p = predict_covariance(*inducing, sigma, x, variant, noise_std);
  return {update_covariance(sigma, p), p.s_yy};
}

void PrunerConfig::validate() const {
  if (controls.empty()) throw std::invalid_argument("PrunerConfig: empty control sample set");
  if (!(delta >= 0.0)) throw std::invalid_argument("PrunerConfig: delta must be >= 0");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("PrunerConfig: epsilon must be >= 0");
}

std::vector<double> uniform_headings(int n) {
  if (n < 1) throw std::invalid_argument("uniform_headings: need n >= 1");
  std::vector<double> u(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) u[i] = 2.0 * std::numbers::pi * i / n;
  return u;
}

bool is_eps_alg_redundant(const Eigen::MatrixXd& sigma,
                          const std::vector<const Eigen::MatrixXd*>& q, double epsilon) {
  if (q.empty()) return false;
  if (std::isinf(epsilon)) return true;

  const auto m = sigma.rows();
  const Eigen::MatrixXd lhs = sigma + epsilon * Eigen::MatrixXd::Identity(m, m);
  double scale = lhs.cwiseAbs().maxCoeff();
  for (const auto* s : q) scale = std::max(scale, s->cwiseAbs().maxCoeff());
  const double tol = 1e-12 * (1.0 + scale);

  // lambda_min of the slack is concave in the simplex weights.
  auto slack = [&](const Eigen::VectorXd& alpha, Eigen::VectorXd* v) {
    Eigen::MatrixXd comb = lhs;
    for (std::size_t i = 0; i < q.size(); ++i) comb -= alpha(static_cast<Eigen::Index>(i)) * *q[i];
    return min_eigenvalue(comb, v);
  };

  const auto k = static_cast<Eigen::Index>(q.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    if (slack(Eigen::VectorXd::Unit(k, i), nullptr) >= -tol) return true;
  }
  if (k == 1) return false;

  if (k == 2) {
    // golden-section search on the segment
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    auto g = [&](double a) {
      Eigen::VectorXd alpha(2);
      alpha << a, 1.0 - a;
      return slack(alpha, nullptr);
    };
    double lo = 0.0, hi = 1.0;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double g1 = g(x1), g2 = g(x2);
    for (int it = 0; it < 80 && hi - lo > 1e-14; ++it) {
      if (g1 >= -tol || g2 >= -tol) return true;
      if (g1 < g2) {
        lo = x1;
        x1 = x2;
        g1 = g2;
        x2 = lo + phi * (hi - lo);
        g2 = g(x2);
      } else {
        hi = x2;
        x2 = x1;
        g2 = g1;
        x1 = hi - phi * (hi - lo);
        g1 = g(x1);
      }
    }
    return std::max(g1, g2) >= -tol;
  }

  // centroid, then exponentiated supergradient ascent over the simplex
  Eigen::VectorXd alpha = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  Eigen::VectorXd v;
  double best = slack(alpha, &v);
  if (best >= -tol) return true;
  const double step0 = 1.0 / std::max(scale, 1e-300);
  for (int it = 1; it <= 200; ++it) {
    Eigen::VectorXd grad(k);
    for (Eigen::Index i = 0; i < k; ++i) grad(i) = -v.dot(*q[i] * v);
    const double eta = step0 / std::sqrt(static_cast<double>(it));
    Eigen::ArrayXd w = alpha.array() * (eta * (grad.array() - grad.maxCoeff())).exp();
    alpha = (w / w.sum()).matrix();
    const double val = slack(alpha, &v);
    best = std::max(best, val);
    if (best >= -tol) return true;
  }
  return false;
}

SearchTree::SearchTree(Eigen::VectorXd state, Eigen::MatrixXd sigma, double measurement_log_det,
                       const CostFn& cost) {
  root_ = std::make_unique<SearchNode>();
  root_->state = std::move(state);
  root_->sigma = std::move(sigma);
  root_->measurement_log_det = measurement_log_det;
  root_->order = 0;
  root_->cost = cost(*root_);
  leaves_.push_back(root_.get());
}

int SearchTree::depth() const { return leaves_.front()->depth - root_->depth; }

std::size_t SearchTree::node_count() const {
  std::size_t count = 0;
  std::vector<const SearchNode*> stack{root_.get()};
  while (!stack.empty()) {
    const SearchNode* n = stack.back();
    stack.pop_back();
    ++count;
    for (const auto& c : n->children) stack.push_back(c.get());
  }
  return count;
}

const SearchNode& SearchTree::best_leaf() const {
  const SearchNode* best = leaves_.front();
  for (const SearchNode* l : leaves_) {
    if (node_before(*l, *best)) best = l;
  }
  return *best;
}

void SearchTree::reroot(const SearchNode& child) {
  auto it = std::find_if(root_->children.begin(), root_->children.end(),
                         [&](const auto& c) { return c.get() == &child; });
  if (it == root_->children.end()) {
    throw std::invalid_argument("SearchTree::reroot: node is not a child of the root");
  }
  std::unique_ptr<SearchNode> next = std::move(*it);
  next->parent = nullptr;
  root_ = std::move(next);

  leaves_.clear();
  std::vector<SearchNode*> stack{root_.get()};
  while (!stack.empty()) {
    SearchNode* n = stack.back();
    stack.pop_back();
    if (n->children.empty()) leaves_.push_back(n);
    for (auto& c : n->children) stack.push_back(c.get());
  }
  std::sort(leaves_.begin(), leaves_.end(),
            [](const SearchNode* a, const SearchNode* b) { return a->order < b->order; });
}

void SearchTree::drop_dead_branch(SearchNode* node) {
  while (node != root_.get() && node->children.empty()) {
    SearchNode* parent = node->parent;
    auto& siblings = parent->children;
    siblings.erase(std::find_if(siblings.begin(), siblings.end(),
                                [&](const auto& c) { return c.get() == node; }));
    node = parent;
  }
}

RviStats SearchTree::rvi_iterate(const Transition& transition,
                                 const CovariancePropagator& propagate, const CostFn& cost,
                                 const PrunerConfig& pruner) {
  pruner.validate();
  RviStats stats;

  std::vector<std::unique_ptr<SearchNode>> candidates;
  candidates.reserve(leaves_.size() * pruner.controls.size());
  auto make_child = [&](SearchNode* leaf, double u, Eigen::VectorXd x) {
    auto child = std::make_unique<SearchNode>();
    auto [sigma, s_yy] = propagate(leaf->sigma, x);
    child->state = std::move(x);
    child->sigma = std::move(sigma);
    child->measurement_log_det = leaf->measurement_log_det + std::log(s_yy);
    child->action_from_parent = u;
    child->depth = leaf->depth + 1;
    child->order = next_order_++;
    child->parent = leaf;
    child->cost = cost(*child);
    candidates.push_back(std::move(child));
  };

  for (SearchNode* leaf : leaves_) {
    bool any_legal = false;
    double nearest = std::numeric_limits<double>::infinity();
    double nearest_u = 0.0;
    Eigen::VectorXd nearest_x;
    for (double u : pruner.controls) {
      Eigen::VectorXd x = transition.step(leaf->state, u);
      if (!transition.domain || transition.domain->contains(x)) {
        make_child(leaf, u, std::move(x));
        any_legal = true;
      } else if (!any_legal) {
        const double d = transition.domain->distance_outside(x);
        if (d < nearest) {
          nearest = d;
          nearest_u = u;
          nearest_x = transition.domain->clamp(x);
        }
      }
    }
    if (!any_legal) make_child(leaf, nearest_u, std::move(nearest_x));
  }
  stats.expanded = candidates.size();

  std::vector<std::size_t> idx(candidates.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return node_before(*candidates[a], *candidates[b]);
  });

  const int dim = static_cast<int>(candidates.front()->state.size());
  NeighborGrid grid(pruner.delta, dim);
  std::vector<bool> keep(candidates.size(), false);
  std::vector<const Eigen::MatrixXd*> q;
  for (std::size_t i : idx) {
    SearchNode& c = *candidates[i];
    bool pruned = false;
    // the first node in sort order is the retained minimum
    if (i != idx.front()) {
      q.clear();
      grid.for_each_within(c.state, [&](std::size_t j) { q.push_back(&candidates[j]->sigma); });
      pruned = !q.empty() && is_eps_alg_redundant(c.sigma, q, pruner.epsilon);
    }
    if (pruned) {
      ++stats.pruned;
    } else {
      keep[i] = true;
      grid.insert(c.state, i);
    }
  }

  std::vector<SearchNode*> old_leaves = std::move(leaves_);
  leaves_.clear();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!keep[i]) continue;
    SearchNode* parent = candidates[i]->parent;
    leaves_.push_back(candidates[i].get());
    parent->children.push_back(std::move(candidates[i]));
  }
  for (SearchNode* leaf : old_leaves) drop_dead_branch(leaf);
  return stats;
}

std::vector<double> backtrace(const SearchNode& root, const SearchNode& leaf) {
  std::vector<double> actions;
  const SearchNode* n = &leaf;
  while (n != &root) {
    if (n->parent == nullptr) throw std::invalid_argument("backtrace: node detached from root");
    actions.push_back(n->action_from_parent);
    n = n->parent;
  }
  std::reverse(actions.begin(), actions.end());
  return actions;
}

ExecutionResult plan_and_execute(
    const Eigen::VectorXd& initial_state, const BeliefState& initial_belief,
    const Transition& transition, const std::function<double(const Eigen::VectorXd&)>& measure,
    const ExecutionConfig& config,
    const std::function<void(const StepRecord&, const BeliefState&)>& observe) {
  if (config.horizon < 1) throw std::invalid_argument("plan_and_execute: horizon must be >= 1");
  if (config.steps < 0) throw std::invalid_argument("plan_and_execute: negative step count");
  config.pruner.validate();

  ExecutionResult result;
  BeliefState belief = initial_belief;
  const CovariancePropagator propagate{belief.inducing, config.variant, config.noise_std};
  double log_det_x = 0.0;
  SearchTree tree(initial_state, belief.sigma, log_det_x, config.cost);

  auto record = [&](StepRecord r) {
    r.entropy = entropy_cost(belief.sigma);
    r.measurement_log_det = log_det_x;
    r.leaves = tree.leaves().size();
    if (observe) observe(r, belief);
    result.steps.push_back(std::move(r));
  };

  StepRecord initial;
  initial.t = 0;
  initial.state = initial_state;
  for (int i = 0; i < config.horizon; ++i) {
    const RviStats s = tree.rvi_iterate(transition, propagate, config.cost, config.pruner);
    initial.expanded += s.expanded;
    initial.pruned += s.pruned;
  }
  result.totals = {initial.expanded, initial.pruned};
  record(initial);

  for (int t = 1; t <= config.steps; ++t) {
    const SearchNode* target = &tree.best_leaf();
    while (target->parent != &tree.root()) target = target->parent;

    StepRecord r;
    r.t = t;
    r.state = target->state;
    r.control = target->action_from_parent;
    r.measurement = measure(r.state);
    const MeasurementPrediction pred =
        predict(belief, r.state, config.variant, config.noise_std);
    belief = update(belief, pred, r.measurement);
    log_det_x += std::log(pred.s_yy);

    tree.reroot(*target);
    const RviStats s = tree.rvi_iterate(transition, propagate, config.cost, config.pruner);
    r.expanded = s.expanded;
    r.pruned = s.pruned;
    result.totals.expanded += s.expanded;
    result.totals.pruned += s.pruned;
    record(std::move(r));
  }

  result.final_plan = backtrace(tree.root(), tree.best_leaf());
  result.final_belief = std::move(belief);
  return result;
}

}  // namespace sgp
