#pragma once

#include <cstdint>
#include <vector>

#include "pibound/ot_core.hpp"

namespace pibound::detail {

// Primal network simplex specialised to the uncapacitated complete bipartite
// graph with n sources (supply m each) and m sinks (demand n each). Real arc
// a = i * m + j runs from node i to node n + j; node n + m is the artificial
// root, joined to every node by an artificial arc nm + u. The spanning tree is
// kept in parent/thread form with strongly feasible leaving-arc selection.
// Non-tree arcs always sit at zero flow, so only tree flows are stored (one
// per node, on the arc joining it to its parent).
class NetworkSimplex {
 public:
  NetworkSimplex(const RowMatrix& cost, const ExactOptions& options);

  void run();

  /// Positive-flow real tree arcs as (i, j, integer flow), sorted by (i, j).
  struct Flow {
    std::int64_t i;
    std::int64_t j;
    std::int64_t flow;
  };
  std::vector<Flow> flows() const;
  std::size_t pivots() const { return pivots_; }

 private:
  using Node = std::int64_t;
  using Arc = std::int64_t;

  static constexpr std::int8_t kTree = 0;
  static constexpr std::int8_t kLower = 1;

  Node source(Arc a) const;
  Node target(Arc a) const;
  double cost(Arc a) const;
  double reduced_cost(Arc a) const;
  bool is_eligible(Arc a, double reduced) const;

  void init_tree();
  void initial_pivots();
  bool find_entering_block();
  bool find_entering_dantzig();
  bool find_entering_bland();
  void pivot();
  void find_join_node();
  void find_leaving_arc();
  void change_flow();
  void update_tree_structure();
  void update_potential();

  const double* cost_;
  Node n_;
  Node m_;
  Arc real_arcs_;
  Node node_count_;  // excluding the root
  Node root_;
  double art_cost_;
  ExactOptions options_;
  std::size_t bland_after_;
  std::size_t pivots_ = 0;

  std::vector<std::int8_t> state_;
  std::vector<Node> parent_, thread_, rev_thread_, succ_num_, last_succ_, dirty_revs_;
  std::vector<Arc> pred_;
  std::vector<char> forward_;
  std::vector<double> pi_;
  std::vector<std::int64_t> pred_flow_;

  Arc next_arc_ = 0;
  Arc block_size_ = 0;

  // pivot scratch
  Arc in_arc_ = -1;
  std::int64_t in_flow_ = 0;
  Node join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0;
  std::int64_t delta_ = 0;
};

}  // namespace pibound::detail
