#pragma once

#include "dualdg/dual.hpp"
#include "dualdg/model.hpp"
#include "dualdg/stepsize.hpp"

#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace dualdg {

enum class Direction { DualToPrimal, PrimalToDual };

inline const char* to_string(Direction d) { return d == Direction::DualToPrimal ? "V2->V1" : "V1->V2"; }

struct Message {
  Index round;
  Direction direction;
  Index from;
  Index to;
  std::size_t bytes;
};

struct MessageLog {
  std::vector<Message> records;
};

/// True iff every logged message travels along an edge of the graph.
inline bool verify_locality(const MessageLog& log, const BipartiteGraph& graph) {
  for (const auto& m : log.records) {
    const Index j = m.direction == Direction::DualToPrimal ? m.from : m.to;
    const Index i = m.direction == Direction::DualToPrimal ? m.to : m.from;
    if (j < 0 || j >= graph.num_dual() || i < 0 || i >= graph.num_primal()) return false;
    if (!graph.has_edge(j, i)) return false;
  }
  return true;
}

/**
 * Delivery layer between the node sets. Every send is checked against the
 * incidence pattern and logged; payloads wait in per-receiver mailboxes
 * keyed by sender.
 */
template <typename Scalar>
class Network {
 public:
  struct Payload {
    Vec<Scalar> eq;  // nu_j going down, A_ji z_i going up
    Vec<Scalar> in;  // mu_j going down, C_ji z_i going up
  };

  explicit Network(const BipartiteGraph& graph)
      : graph_(graph), primal_inbox_(graph.num_primal()), dual_inbox_(graph.num_dual()) {}

  void send(Index round, Direction dir, Index from, Index to, Payload payload) {
    const Index j = dir == Direction::DualToPrimal ? from : to;
    const Index i = dir == Direction::DualToPrimal ? to : from;
    const bool in_range = j >= 0 && j < graph_.num_dual() && i >= 0 && i < graph_.num_primal();
    if (!in_range || !graph_.has_edge(j, i)) {
      throw LocalityViolation(std::string("message ") + to_string(dir) + " from " + std::to_string(from) + " to " +
                              std::to_string(to) + " does not follow an edge");
    }
    const std::size_t bytes = sizeof(Scalar) * static_cast<std::size_t>(payload.eq.size() + payload.in.size());
    log_.records.push_back({round, dir, from, to, bytes});
    if (dir == Direction::DualToPrimal) {
      primal_inbox_[to][from] = std::move(payload);
    } else {
      dual_inbox_[to][from] = std::move(payload);
    }
  }

  /// Messages for primal node i, ordered by sender j.
  std::map<Index, Payload>& primal_inbox(Index i) { return primal_inbox_[i]; }
  /// Messages for dual node j, ordered by sender i.
  std::map<Index, Payload>& dual_inbox(Index j) { return dual_inbox_[j]; }

  const MessageLog& log() const { return log_; }

 private:
  const BipartiteGraph& graph_;
  std::vector<std::map<Index, Payload>> primal_inbox_;
  std::vector<std::map<Index, Payload>> dual_inbox_;
  MessageLog log_;
};

/// V1 node: owns f_i and the columns {A_ji, C_ji} for j in N_bar_i.
template <typename Scalar>
struct PrimalNode {
  struct Link {
    Index j;
    Mat<Scalar> A;
    Mat<Scalar> C;
  };
  Index id;
  BlockObjective<Scalar> objective;
  std::vector<Link> links;  // j ascending
  Vec<Scalar> z;
  Scalar local_dual = 0;  // f_i(z_i) + <w_i, z_i>
};

/// V2 node: owns lambda_j, b_j, c_j and its step weight.
template <typename Scalar>
struct DualNode {
  Index id;
  Vec<Scalar> nu;
  Vec<Scalar> mu;
  Vec<Scalar> b;
  Vec<Scalar> c;
  Scalar weight;
  std::vector<Index> neighbors;  // i ascending
};

template <typename Scalar>
struct DistributedRun {
  RunTrace<Scalar> trace;  // dual value and step norm per round
  MessageLog log;
  std::vector<Vec<Scalar>> lambda_history;  // lambda^0..lambda^K
  Vec<Scalar> lambda;                       // lambda^K
  Vec<Scalar> z;                            // z^{K-1}
};

/**
 * K synchronous rounds of the weighted dual gradient method as message
 * passing. Per round: dual nodes broadcast lambda_j to N_j; primal nodes
 * solve their block and return (A_ji z_i, C_ji z_i) to each j in N_bar_i;
 * dual nodes reduce in sender order and take the projected step. Nodes only
 * hold data for their own edges. `on_round` runs before each round and may
 * send through the network (used to inject faults).
 */
template <typename Scalar>
DistributedRun<Scalar> run_distributed(const BlockProblem<Scalar>& problem, const Weights<Scalar>& W,
                                       const VecView<Scalar>& lambda0, Index rounds,
                                       const std::function<void(Network<Scalar>&, Index)>& on_round = {}) {
  if (!in_domain<Scalar>(problem, lambda0)) throw std::invalid_argument("run_distributed: lambda0 not in domain");
  const BipartiteGraph& gr = problem.graph();

  std::vector<PrimalNode<Scalar>> primal;
  primal.reserve(gr.num_primal());
  for (Index i = 0; i < gr.num_primal(); ++i) {
    PrimalNode<Scalar> node{i, problem.objective(i), {}, Vec<Scalar>::Zero(gr.n(i))};
    for (const auto& nb : gr.primal_neighbors(i)) {
      node.links.push_back({nb.node, problem.block(nb.edge).A, problem.block(nb.edge).C});
    }
    primal.push_back(std::move(node));
  }
  std::vector<DualNode<Scalar>> dual;
  dual.reserve(gr.num_dual());
  for (Index j = 0; j < gr.num_dual(); ++j) {
    DualNode<Scalar> node{j,
                          lambda0.segment(gr.nu_offset(j), gr.p(j)),
                          lambda0.segment(gr.mu_offset(j), gr.q(j)),
                          problem.b_block(j),
                          problem.c_block(j),
                          W.block(j),
                          {}};
    for (const auto& nb : gr.dual_neighbors(j)) node.neighbors.push_back(nb.node);
    dual.push_back(std::move(node));
  }

  auto gather_lambda = [&] {
    Vec<Scalar> lam(gr.total_rows());
    for (const auto& node : dual) {
      lam.segment(gr.nu_offset(node.id), gr.p(node.id)) = node.nu;
      lam.segment(gr.mu_offset(node.id), gr.q(node.id)) = node.mu;
    }
    return lam;
  };

  DistributedRun<Scalar> out;
  out.trace.algorithm = Algorithm::DG;
  out.trace.stop = StopRule{StopMode::IterationCap, 1.0, std::max<Index>(rounds, 1)};
  out.lambda_history.push_back(gather_lambda());
  const Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();

  Network<Scalar> net(gr);
  for (Index round = 0; round < rounds; ++round) {
    if (on_round) on_round(net, round);

    for (const auto& node : dual) {
      for (Index i : node.neighbors) net.send(round, Direction::DualToPrimal, node.id, i, {node.nu, node.mu});
    }

    for (auto& node : primal) {
      auto& inbox = net.primal_inbox(node.id);
      Vec<Scalar> w = Vec<Scalar>::Zero(node.objective.dim());
      for (const auto& link : node.links) {
        const auto& msg = inbox.at(link.j);
        detail::accumulate_transposed<Scalar>(w, link.A, link.C, msg.eq, msg.in);
      }
      node.z = solve_block(node.objective, w);
      node.local_dual = node.objective.value(node.z) + w.dot(node.z);
      for (const auto& link : node.links) {
        net.send(round, Direction::PrimalToDual, node.id, link.j,
                 {detail::block_product<Scalar>(link.A, node.z), detail::block_product<Scalar>(link.C, node.z)});
      }
      inbox.clear();
    }

    // Monitoring only: the dual value is not needed by any node.
    Scalar value = 0;
    for (const auto& node : primal) value += node.local_dual;
    Scalar step_sq = 0;
    for (const auto& node : dual) value -= node.nu.dot(node.b) + node.mu.dot(node.c);

    for (auto& node : dual) {
      auto& inbox = net.dual_inbox(node.id);
      Vec<Scalar> eq = Vec<Scalar>::Zero(node.nu.size());
      Vec<Scalar> in = Vec<Scalar>::Zero(node.mu.size());
      for (Index i : node.neighbors) {
        const auto& msg = inbox.at(i);
        eq += msg.eq;
        in += msg.in;
      }
      eq -= node.b;
      in -= node.c;
      const Vec<Scalar> weq = Vec<Scalar>::Constant(eq.size(), node.weight);
      const Vec<Scalar> win = Vec<Scalar>::Constant(in.size(), node.weight);
      Vec<Scalar> nu_next(node.nu.size());
      Vec<Scalar> mu_next(node.mu.size());
      detail::weighted_update<Scalar>(nu_next, node.nu, eq, weq, false);
      detail::weighted_update<Scalar>(mu_next, node.mu, in, win, true);
      step_sq += node.weight * ((nu_next - node.nu).squaredNorm() + (mu_next - node.mu).squaredNorm());
      node.nu = std::move(nu_next);
      node.mu = std::move(mu_next);
      inbox.clear();
    }

    out.trace.rows.push_back({round, value, nan, nan, nan, nan, nan, std::sqrt(step_sq), std::sqrt(step_sq)});
    out.lambda_history.push_back(gather_lambda());
  }

  out.trace.iterations = rounds;
  out.trace.status = RunStatus::CapReached;
  out.lambda = gather_lambda();
  out.z.resize(gr.total_n());
  for (const auto& node : primal) out.z.segment(gr.col_offset(node.id), gr.n(node.id)) = node.z;
  out.trace.final_lambda = out.lambda;
  out.trace.final_z = out.z;
  out.log = net.log();
  return out;
}

}  // namespace dualdg
