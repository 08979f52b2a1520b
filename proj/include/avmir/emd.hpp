#pragma once

// Exact Earth Mover's Distance between two discrete distributions via
// successive shortest augmenting paths on the bipartite transportation
// network (dense Dijkstra with Johnson potentials).

#include <avmir/core.hpp>

namespace avmir {

struct TransportResult {
  double cost = 0.0;  // total cost / total moved mass
  Matrix flow;        // supply x demand
};

/// Solve the balanced transportation problem. Supplies and demands are
/// normalised to unit mass first; `cost` is supply.size() x demand.size()
/// with nonnegative entries.
inline TransportResult transport(std::span<const double> supply, std::span<const double> demand, const Matrix& cost) {
  const std::size_t ns = supply.size(), nd = demand.size();
  if (ns == 0 || nd == 0) throw InputError("EMD needs non-empty distributions");
  if (cost.rows() != ns || cost.cols() != nd) throw InputError("EMD cost matrix shape mismatch");
  double tot_s = 0.0, tot_d = 0.0;
  for (double v : supply) {
    if (v < 0.0 || !std::isfinite(v)) throw InputError("EMD supplies must be finite and >= 0");
    tot_s += v;
  }
  for (double v : demand) {
    if (v < 0.0 || !std::isfinite(v)) throw InputError("EMD demands must be finite and >= 0");
    tot_d += v;
  }
  if (tot_s <= 0.0 || tot_d <= 0.0) throw InputError("EMD distributions must have positive mass");
  for (double c : cost.values()) {
    if (c < 0.0 || !std::isfinite(c)) throw InputError("EMD ground distances must be finite and >= 0");
  }

  std::vector<double> rem_s(ns), rem_d(nd);
  for (std::size_t i = 0; i < ns; ++i) rem_s[i] = supply[i] / tot_s;
  for (std::size_t j = 0; j < nd; ++j) rem_d[j] = demand[j] / tot_d;

  constexpr double kEps = 1e-14;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  TransportResult res{0.0, Matrix(ns, nd, 0.0)};
  Matrix& flow = res.flow;

  // Nodes: supplies [0, ns), demands [ns, ns + nd). The super source (fixed
  // potential 0) and sink are implicit: supplies with remaining mass start at
  // the reduced cost of their source arc, demands with remaining capacity are
  // targets ranked by true path length.
  const std::size_t n = ns + nd;
  std::vector<double> potential(n, 0.0), dist(n);
  std::vector<std::ptrdiff_t> parent(n);
  std::vector<char> done(n);

  const auto supply_left = [&] {
    return std::any_of(rem_s.begin(), rem_s.end(), [](double v) { return v > kEps; });
  };
  for (int iter = 0; supply_left() && iter < 1000000; ++iter) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < ns; ++i) {
      if (rem_s[i] > kEps) dist[i] = -potential[i];
    }
    for (std::size_t step = 0; step < n; ++step) {
      std::size_t u = n;
      double best = kInf;
      for (std::size_t v = 0; v < n; ++v) {
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      }
      if (u == n) break;
      done[u] = 1;
      if (u < ns) {
        // forward arcs supply -> demand, unlimited capacity
        for (std::size_t j = 0; j < nd; ++j) {
          const std::size_t v = ns + j;
          const double rc = cost(u, j) + potential[u] - potential[v];
          if (!done[v] && dist[u] + rc < dist[v]) {
            dist[v] = dist[u] + rc;
            parent[v] = static_cast<std::ptrdiff_t>(u);
          }
        }
      } else {
        // residual arcs demand -> supply where flow exists
        const std::size_t j = u - ns;
        for (std::size_t i = 0; i < ns; ++i) {
          if (flow(i, j) <= kEps) continue;
          const double rc = -cost(i, j) + potential[u] - potential[i];
          if (!done[i] && dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            parent[i] = static_cast<std::ptrdiff_t>(u);
          }
        }
      }
    }
    std::size_t target = n;
    double target_d = kInf;
    for (std::size_t j = 0; j < nd; ++j) {
      const std::size_t v = ns + j;
      if (rem_d[j] > kEps && dist[v] < kInf && dist[v] + potential[v] < target_d) {
        target_d = dist[v] + potential[v];
        target = v;
      }
    }
    if (target == n) break;  // only rounding residue left
    for (std::size_t v = 0; v < n; ++v) {
      if (dist[v] < kInf) potential[v] += dist[v];
    }
    // bottleneck along the path
    double push = rem_d[target - ns];
    std::size_t v = target;
    while (parent[v] >= 0) {
      const auto u = static_cast<std::size_t>(parent[v]);
      if (u >= ns) push = std::min(push, flow(v, u - ns));
      v = u;
    }
    push = std::min(push, rem_s[v]);
    const std::size_t origin = v;
    v = target;
    while (parent[v] >= 0) {
      const auto u = static_cast<std::size_t>(parent[v]);
      if (u < ns) {
        flow(u, v - ns) += push;
      } else {
        flow(v, u - ns) -= push;
      }
      v = u;
    }
    rem_s[origin] -= push;
    rem_d[target - ns] -= push;
  }
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nd; ++j) {
      if (flow(i, j) < 0.0) flow(i, j) = 0.0;
      res.cost += flow(i, j) * cost(i, j);
    }
  }
  return res;
}

inline double emd(std::span<const double> supply, std::span<const double> demand, const Matrix& cost) {
  return transport(supply, demand, cost).cost;
}

}  // namespace avmir
