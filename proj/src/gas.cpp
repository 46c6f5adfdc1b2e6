#include "conformant/gas.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>

#include "conformant/rng.hpp"

namespace conformant {

Mat NeuralGas::node_matrix() const {
  require(!nodes.empty(), "NeuralGas::node_matrix: empty gas");
  Mat m(static_cast<int>(nodes.size()), nodes.front().size());
  for (int i = 0; i < node_count(); ++i) m.row(i) = nodes[i].transpose();
  return m;
}

std::vector<std::vector<int>> NeuralGas::adjacency() const {
  std::vector<std::vector<int>> adj(nodes.size());
  for (const GasEdge& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

namespace {

// Working state during the fit: nodes are kept at stable slots and marked
// dead on removal so edge indices stay valid until final compaction.
struct FitState {
  std::vector<Vec> pos;
  std::vector<double> err;
  std::vector<bool> alive;
  std::map<std::pair<int, int>, int> edge_age;
  std::vector<std::vector<int>> adj;

  int alive_count = 0;

  int add_node(const Vec& p) {
    pos.push_back(p);
    err.push_back(0.0);
    alive.push_back(true);
    adj.emplace_back();
    ++alive_count;
    return static_cast<int>(pos.size()) - 1;
  }

  static std::pair<int, int> key(int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  void connect(int a, int b) {
    auto k = key(a, b);
    auto it = edge_age.find(k);
    if (it == edge_age.end()) {
      edge_age.emplace(k, 0);
      adj[a].push_back(b);
      adj[b].push_back(a);
    } else {
      it->second = 0;
    }
  }

  void disconnect(int a, int b) {
    edge_age.erase(key(a, b));
    std::erase(adj[a], b);
    std::erase(adj[b], a);
  }

  void kill_if_orphan(int n) {
    if (alive[n] && adj[n].empty() && alive_count > 2) {
      alive[n] = false;
      --alive_count;
    }
  }

  std::pair<int, int> nearest_two(const Vec& x) const {
    int best = -1, second = -1;
    double best_d = std::numeric_limits<double>::infinity();
    double second_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(pos.size()); ++i) {
      if (!alive[i]) continue;
      const double d = (pos[i] - x).squaredNorm();
      if (d < best_d) {
        second = best;
        second_d = best_d;
        best = i;
        best_d = d;
      } else if (d < second_d) {
        second = i;
        second_d = d;
      }
    }
    return {best, second};
  }
};

}  // namespace

NeuralGas gng_fit(const Mat& samples, const GngParams& params) {
  const int n = static_cast<int>(samples.cols());
  require(n >= 2, "gng_fit: need at least 2 samples");
  require(params.max_nodes >= 2, "gng_fit: max_nodes must be >= 2");
  require(params.eps_winner > 0.0 && params.eps_winner < 1.0 &&
              params.eps_neighbor > 0.0 && params.eps_neighbor < params.eps_winner,
          "gng_fit: need 0 < eps_neighbor < eps_winner < 1");
  require(params.age_max > 0 && params.insert_every > 0, "gng_fit: invalid params");

  // Optional per-dimension min-max scaling; node positions are mapped back
  // to raw coordinates on output.
  Vec shift = Vec::Zero(samples.rows());
  Vec scale = Vec::Ones(samples.rows());
  Mat work = samples;
  if (params.normalize) {
    const Vec lo = samples.rowwise().minCoeff();
    const Vec hi = samples.rowwise().maxCoeff();
    shift = lo;
    scale = (hi - lo).cwiseMax(1e-12);
    work = (samples.colwise() - shift).array().colwise() / scale.array();
  }

  Rng rng(substream_seed(params.seed, "gng"));
  FitState st;

  const int first = static_cast<int>(rng.uniform_int(n));
  int second = first;
  for (int tries = 0; tries < 1000 && second == first; ++tries) {
    const int cand = static_cast<int>(rng.uniform_int(n));
    if (work.col(cand) != work.col(first)) second = cand;
  }
  require(second != first, "gng_fit: need at least 2 distinct samples");
  st.add_node(work.col(first));
  st.add_node(work.col(second));
  st.connect(0, 1);

  const long iters = params.effective_iters();
  for (long step = 1; step <= iters; ++step) {
    const Vec x = work.col(rng.uniform_int(n));
    auto [w1, w2] = st.nearest_two(x);

    // Age the winner's edges, then move winner and neighbors toward x.
    for (int nb : st.adj[w1]) ++st.edge_age[FitState::key(w1, nb)];
    st.err[w1] += (st.pos[w1] - x).squaredNorm();
    st.pos[w1] += params.eps_winner * (x - st.pos[w1]);
    for (int nb : st.adj[w1]) st.pos[nb] += params.eps_neighbor * (x - st.pos[nb]);
    st.connect(w1, w2);

    // Drop over-age edges incident to the winner and orphaned endpoints.
    std::vector<int> stale;
    for (int nb : st.adj[w1]) {
      if (st.edge_age[FitState::key(w1, nb)] > params.age_max) stale.push_back(nb);
    }
    for (int nb : stale) st.disconnect(w1, nb);
    for (int nb : stale) st.kill_if_orphan(nb);
    st.kill_if_orphan(w1);

    if (step % params.insert_every == 0 && st.alive_count < params.max_nodes) {
      int q = -1;
      for (int i = 0; i < static_cast<int>(st.pos.size()); ++i) {
        if (st.alive[i] && (q < 0 || st.err[i] > st.err[q])) q = i;
      }
      int r = -1;
      for (int nb : st.adj[q]) {
        if (r < 0 || st.err[nb] > st.err[r]) r = nb;
      }
      if (r >= 0) {
        const int fresh = st.add_node(0.5 * (st.pos[q] + st.pos[r]));
        st.disconnect(q, r);
        st.connect(q, fresh);
        st.connect(r, fresh);
        st.err[q] *= params.alpha_split;
        st.err[r] *= params.alpha_split;
        st.err[fresh] = st.err[q];
      }
    }

    for (double& e : st.err) e *= params.error_decay;
  }

  // Compact to contiguous indices in stable (creation) order.
  NeuralGas gas;
  gas.params = params;
  std::vector<int> remap(st.pos.size(), -1);
  for (int i = 0; i < static_cast<int>(st.pos.size()); ++i) {
    if (!st.alive[i]) continue;
    remap[i] = gas.node_count();
    gas.nodes.push_back(shift + (scale.array() * st.pos[i].array()).matrix());
    gas.node_error.push_back(st.err[i]);
  }
  for (const auto& [key, age] : st.edge_age) {
    const int a = remap[key.first];
    const int b = remap[key.second];
    if (a >= 0 && b >= 0) gas.edges.push_back({std::min(a, b), std::max(a, b), age});
  }
  std::sort(gas.edges.begin(), gas.edges.end(), [](const GasEdge& l, const GasEdge& r) {
    return std::tie(l.a, l.b) < std::tie(r.a, r.b);
  });
  return gas;
}

std::pair<int, int> nearest_two(const NeuralGas& gas, const Vec& s) {
  require(gas.node_count() >= 2, "nearest_two: need at least 2 nodes");
  int best = -1, second = -1;
  double best_d = std::numeric_limits<double>::infinity();
  double second_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < gas.node_count(); ++i) {
    const double d = (gas.nodes[i] - s).squaredNorm();
    if (d < best_d) {
      second = best;
      second_d = best_d;
      best = i;
      best_d = d;
    } else if (d < second_d) {
      second = i;
      second_d = d;
    }
  }
  return {best, second};
}

double quantization_error(const NeuralGas& gas, const Mat& samples) {
  require(gas.node_count() >= 1, "quantization_error: empty gas");
  require(samples.cols() > 0, "quantization_error: no samples");
  double total = 0.0;
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& node : gas.nodes) {
      best = std::min(best, (node - samples.col(c)).squaredNorm());
    }
    total += best;
  }
  return total / static_cast<double>(samples.cols());
}

}  // namespace conformant
