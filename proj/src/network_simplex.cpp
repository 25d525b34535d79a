#include "network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pibound::detail {

namespace {
constexpr double kRelEps = 64.0 * std::numeric_limits<double>::epsilon();
constexpr std::int64_t kInfFlow = std::numeric_limits<std::int64_t>::max();
}  // namespace

NetworkSimplex::NetworkSimplex(const RowMatrix& cost, const ExactOptions& options)
    : cost_(cost.data()),
      n_(cost.rows()),
      m_(cost.cols()),
      real_arcs_(n_ * m_),
      node_count_(n_ + m_),
      root_(n_ + m_),
      options_(options) {
  double max_abs = 0.0;
  for (Arc a = 0; a < real_arcs_; ++a) max_abs = std::max(max_abs, std::abs(cost_[a]));
  art_cost_ = (max_abs + 1.0) * static_cast<double>(node_count_ + 1);
  bland_after_ = options.bland_after != 0 ? options.bland_after
                                          : static_cast<std::size_t>(50 * real_arcs_);
  block_size_ = std::max<Arc>(static_cast<Arc>(std::sqrt(static_cast<double>(real_arcs_))), 10);
}

NetworkSimplex::Node NetworkSimplex::source(Arc a) const {
  if (a < real_arcs_) return a / m_;
  const Node u = a - real_arcs_;
  return u < n_ ? u : root_;
}

NetworkSimplex::Node NetworkSimplex::target(Arc a) const {
  if (a < real_arcs_) return n_ + a % m_;
  const Node u = a - real_arcs_;
  return u < n_ ? root_ : u;
}

double NetworkSimplex::cost(Arc a) const {
  if (a < real_arcs_) return cost_[a];
  return a - real_arcs_ < n_ ? 0.0 : art_cost_;
}

double NetworkSimplex::reduced_cost(Arc a) const {
  return cost(a) + pi_[source(a)] - pi_[target(a)];
}

bool NetworkSimplex::is_eligible(Arc a, double reduced) const {
  const double scale = std::max({std::abs(cost(a)), std::abs(pi_[source(a)]), std::abs(pi_[target(a)])});
  return reduced < -kRelEps * scale;
}

void NetworkSimplex::init_tree() {
  const Node all = node_count_ + 1;
  parent_.assign(all, 0);
  thread_.assign(all, 0);
  rev_thread_.assign(all, 0);
  succ_num_.assign(all, 0);
  last_succ_.assign(all, 0);
  pred_.assign(all, -1);
  forward_.assign(all, 0);
  pi_.assign(all, 0.0);
  pred_flow_.assign(all, 0);
  state_.assign(real_arcs_ + node_count_, kLower);

  parent_[root_] = -1;
  pred_[root_] = -1;
  thread_[root_] = 0;
  rev_thread_[0] = root_;
  succ_num_[root_] = all;
  last_succ_[root_] = root_ - 1;

  for (Node u = 0; u < node_count_; ++u) {
    parent_[u] = root_;
    pred_[u] = real_arcs_ + u;
    thread_[u] = u + 1;
    rev_thread_[u + 1] = u;
    succ_num_[u] = 1;
    last_succ_[u] = u;
    state_[real_arcs_ + u] = kTree;
    if (u < n_) {
      forward_[u] = 1;
      pi_[u] = 0.0;
      pred_flow_[u] = m_;
    } else {
      forward_[u] = 0;
      pi_[u] = art_cost_;
      pred_flow_[u] = n_;
    }
  }
}

void NetworkSimplex::run() {
  init_tree();
  initial_pivots();
  pivots_ = 0;
  for (;;) {
    bool found = false;
    if (pivots_ >= bland_after_ || options_.pricing == PricingRule::Bland) {
      found = find_entering_bland();
    } else if (options_.pricing == PricingRule::Dantzig) {
      found = find_entering_dantzig();
    } else {
      found = find_entering_block();
    }
    if (!found) break;
    pivot();
    ++pivots_;
  }
  for (Node u = 0; u < node_count_; ++u) {
    if (pred_[u] >= real_arcs_ && pred_flow_[u] != 0) {
      throw std::logic_error("network simplex terminated with flow on an artificial arc");
    }
  }
}

void NetworkSimplex::initial_pivots() {
  // Cheapest incoming arc per sink, found row by row.
  std::vector<Arc> best(static_cast<std::size_t>(m_), -1);
  std::vector<double> best_cost(static_cast<std::size_t>(m_), std::numeric_limits<double>::infinity());
  for (Node i = 0; i < n_; ++i) {
    const double* row = cost_ + i * m_;
    for (Node j = 0; j < m_; ++j) {
      if (row[j] < best_cost[j]) {
        best_cost[j] = row[j];
        best[j] = i * m_ + j;
      }
    }
  }
  for (Arc a : best) {
    if (a < 0 || state_[a] != kLower) continue;
    const double rc = reduced_cost(a);
    if (!is_eligible(a, rc)) continue;
    in_arc_ = a;
    pivot();
  }
}

bool NetworkSimplex::find_entering_block() {
  double best = 0.0;
  Arc best_arc = -1;
  Arc count = block_size_;
  Arc a = next_arc_;
  Node i = a / m_;
  Node j = a % m_;
  const std::int8_t* state = state_.data();
  const double* pi_src = pi_.data();
  const double* pi_dst = pi_.data() + n_;
  for (Arc k = 0; k < real_arcs_; ++k) {
    if (state[a] == kLower) {
      const double rc = cost_[a] + pi_src[i] - pi_dst[j];
      if (rc < best) {
        best = rc;
        best_arc = a;
      }
    }
    ++a;
    if (++j == m_) {
      j = 0;
      if (++i == n_) {
        i = 0;
        a = 0;
      }
    }
    if (--count == 0) {
      if (best_arc >= 0 && is_eligible(best_arc, best)) {
        in_arc_ = best_arc;
        next_arc_ = a;
        return true;
      }
      count = block_size_;
    }
  }
  if (best_arc >= 0 && is_eligible(best_arc, best)) {
    in_arc_ = best_arc;
    next_arc_ = a;
    return true;
  }
  return false;
}

bool NetworkSimplex::find_entering_dantzig() {
  double best = 0.0;
  Arc best_arc = -1;
  for (Arc a = 0; a < real_arcs_; ++a) {
    if (state_[a] != kLower) continue;
    const double rc = reduced_cost(a);
    if (rc < best && is_eligible(a, rc)) {
      best = rc;
      best_arc = a;
    }
  }
  if (best_arc < 0) return false;
  in_arc_ = best_arc;
  return true;
}

bool NetworkSimplex::find_entering_bland() {
  for (Arc a = 0; a < real_arcs_; ++a) {
    if (state_[a] != kLower) continue;
    if (is_eligible(a, reduced_cost(a))) {
      in_arc_ = a;
      return true;
    }
  }
  return false;
}

void NetworkSimplex::pivot() {
  find_join_node();
  find_leaving_arc();
  change_flow();
  update_tree_structure();
  update_potential();
}

void NetworkSimplex::find_join_node() {
  Node u = source(in_arc_);
  Node v = target(in_arc_);
  while (u != v) {
    if (succ_num_[u] < succ_num_[v]) {
      u = parent_[u];
    } else {
      v = parent_[v];
    }
  }
  join_ = u;
}

// Flow is pushed along the entering arc from `first` to `second`, then back
// through the tree. Ties prefer the last blocking arc met on the second path,
// which keeps the basis strongly feasible.
void NetworkSimplex::find_leaving_arc() {
  const Node first = source(in_arc_);
  const Node second = target(in_arc_);
  delta_ = kInfFlow;
  int result = 0;
  for (Node u = first; u != join_; u = parent_[u]) {
    const std::int64_t d = forward_[u] ? pred_flow_[u] : kInfFlow;
    if (d < delta_) {
      delta_ = d;
      u_out_ = u;
      result = 1;
    }
  }
  for (Node u = second; u != join_; u = parent_[u]) {
    const std::int64_t d = forward_[u] ? kInfFlow : pred_flow_[u];
    if (d <= delta_) {
      delta_ = d;
      u_out_ = u;
      result = 2;
    }
  }
  if (result == 0 || delta_ == kInfFlow) {
    throw std::logic_error("network simplex found an unbounded cycle");
  }
  if (result == 1) {
    u_in_ = first;
    v_in_ = second;
  } else {
    u_in_ = second;
    v_in_ = first;
  }
}

void NetworkSimplex::change_flow() {
  const std::int64_t val = delta_;
  in_flow_ = val;
  if (val > 0) {
    for (Node u = source(in_arc_); u != join_; u = parent_[u]) pred_flow_[u] += forward_[u] ? -val : val;
    for (Node u = target(in_arc_); u != join_; u = parent_[u]) pred_flow_[u] += forward_[u] ? val : -val;
  }
  state_[in_arc_] = kTree;
  state_[pred_[u_out_]] = kLower;
}

void NetworkSimplex::update_tree_structure() {
  Node u = last_succ_[u_in_];
  const Node old_rev_thread = rev_thread_[u_out_];
  const Node old_succ_num = succ_num_[u_out_];
  const Node old_last_succ = last_succ_[u_out_];
  const Node v_out = parent_[u_out_];
  Node right = thread_[u];
  Node last = 0;

  // When old_rev_thread == v_in, join and v_out coincide.
  if (old_rev_thread == v_in_) {
    last = thread_[last_succ_[u_out_]];
  } else {
    last = thread_[v_in_];
  }

  // Re-hang the stem (u_in ... u_out) below v_in, fixing threads as we go.
  thread_[v_in_] = u_in_;
  Node stem = u_in_;
  Node par_stem = v_in_;
  dirty_revs_.clear();
  dirty_revs_.push_back(v_in_);
  while (stem != u_out_) {
    const Node new_stem = parent_[stem];
    thread_[u] = new_stem;
    dirty_revs_.push_back(u);

    const Node w = rev_thread_[stem];
    thread_[w] = right;
    rev_thread_[right] = w;

    parent_[stem] = par_stem;
    par_stem = stem;
    stem = new_stem;

    u = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
    right = thread_[u];
  }
  parent_[u_out_] = par_stem;
  thread_[u] = last;
  rev_thread_[last] = u;
  last_succ_[u_out_] = u;

  if (old_rev_thread != v_in_) {
    thread_[old_rev_thread] = right;
    rev_thread_[right] = old_rev_thread;
  }
  for (Node d : dirty_revs_) rev_thread_[thread_[d]] = d;

  // Shift pred arcs, their flows and subtree sizes along the reversed stem.
  Node tmp_sc = 0;
  const Node tmp_ls = last_succ_[u_out_];
  for (u = u_out_; u != u_in_;) {
    const Node w = parent_[u];
    pred_[u] = pred_[w];
    pred_flow_[u] = pred_flow_[w];
    forward_[u] = !forward_[w];
    tmp_sc += succ_num_[u] - succ_num_[w];
    succ_num_[u] = tmp_sc;
    last_succ_[w] = tmp_ls;
    u = w;
  }
  pred_[u_in_] = in_arc_;
  pred_flow_[u_in_] = in_flow_;
  forward_[u_in_] = (u_in_ == source(in_arc_)) ? 1 : 0;
  succ_num_[u_in_] = old_succ_num;

  Node up_limit_in = -1;
  Node up_limit_out = -1;
  if (last_succ_[join_] == v_in_) {
    up_limit_out = join_;
  } else {
    up_limit_in = join_;
  }

  for (u = v_in_; u != up_limit_in && last_succ_[u] == v_in_; u = parent_[u]) {
    last_succ_[u] = last_succ_[u_out_];
  }
  if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
    for (u = v_out; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
      last_succ_[u] = old_rev_thread;
    }
  } else {
    for (u = v_out; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
      last_succ_[u] = last_succ_[u_out_];
    }
  }

  for (u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
  for (u = v_out; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
}

void NetworkSimplex::update_potential() {
  const double c = cost(pred_[u_in_]);
  const double sigma = forward_[u_in_] ? pi_[v_in_] - pi_[u_in_] - c : pi_[v_in_] - pi_[u_in_] + c;
  const Node end = thread_[last_succ_[u_in_]];
  for (Node u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
}

std::vector<NetworkSimplex::Flow> NetworkSimplex::flows() const {
  std::vector<Flow> out;
  out.reserve(static_cast<std::size_t>(node_count_));
  for (Node u = 0; u < node_count_; ++u) {
    const Arc a = pred_[u];
    if (a >= 0 && a < real_arcs_ && pred_flow_[u] > 0) {
      out.push_back({a / m_, a % m_, pred_flow_[u]});
    }
  }
  std::sort(out.begin(), out.end(), [](const Flow& x, const Flow& y) {
    return x.i != y.i ? x.i < y.i : x.j < y.j;
  });
  return out;
}

}  // namespace pibound::detail
