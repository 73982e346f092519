#pragma once
// Test fixtures and independent reference implementations. Nothing here
// calls into the library's solvers; only Network is shared.

#include "gridflow/network.hpp"

#include <Eigen/Dense>

#include <complex>
#include <queue>
#include <random>
#include <string>
#include <vector>

namespace support {

inline std::string data(const std::string& name) { return std::string(GRIDFLOW_DATA_DIR) + "/" + name; }

// Parent map by breadth-first search over closed branches. parent_branch is
// -1 at the root and for unreachable buses.
struct Bfs {
    std::vector<int> parent_bus, parent_branch, order;
};

inline Bfs bfs_tree(const gridflow::Network& net, const std::vector<bool>& closed) {
    const int n = net.bus_count();
    std::vector<std::vector<std::pair<int, int>>> adj(n);
    for (int b = 0; b < net.branch_count(); ++b)
        if (closed[b]) {
            adj[net.from_index(b)].push_back({net.to_index(b), b});
            adj[net.to_index(b)].push_back({net.from_index(b), b});
        }
    Bfs t{std::vector<int>(n, -1), std::vector<int>(n, -1), {}};
    std::vector<bool> seen(n, false);
    std::queue<int> q;
    q.push(net.root());
    seen[net.root()] = true;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        t.order.push_back(u);
        for (auto [v, b] : adj[u])
            if (!seen[v]) {
                seen[v] = true;
                t.parent_bus[v] = u;
                t.parent_branch[v] = b;
                q.push(v);
            }
    }
    return t;
}

// Branches on the root path of `bus`, found by walking parents.
inline std::vector<int> path_walk(const Bfs& t, int bus) {
    std::vector<int> path;
    for (int u = bus; t.parent_branch[u] >= 0; u = t.parent_bus[u]) path.push_back(t.parent_branch[u]);
    return path;
}

// Polar Newton-Raphson on the bus admittance matrix, finite-difference
// Jacobian. Returns voltage magnitudes; sending-end (parent-side) complex
// powers per branch in `flow`.
inline std::vector<double> newton_acpf(const gridflow::Network& net, const std::vector<bool>& closed,
                                       std::vector<std::complex<double>>* flow = nullptr,
                                       const std::vector<double>& extra_q = {}) {
    using C = std::complex<double>;
    const Bfs t = bfs_tree(net, closed);
    const int n = net.bus_count();
    std::vector<std::vector<std::pair<int, C>>> y(n);
    std::vector<C> ydiag(n);
    for (int b = 0; b < net.branch_count(); ++b) {
        if (!closed[b]) continue;
        const C yb = 1.0 / C(net.branches()[b].r, net.branches()[b].x);
        const int i = net.from_index(b), j = net.to_index(b);
        ydiag[i] += yb;
        ydiag[j] += yb;
        y[i].push_back({j, -yb});
        y[j].push_back({i, -yb});
    }
    std::vector<C> target(n);
    for (int i = 0; i < n; ++i)
        target[i] = C(net.p_injection(i), net.q_injection(i) + (extra_q.empty() ? 0.0 : extra_q[i]));
    std::vector<int> unk;
    for (int i = 0; i < n; ++i)
        if (i != net.root()) unk.push_back(i);
    const int m = static_cast<int>(unk.size());
    Eigen::VectorXd z(2 * m);
    for (int k = 0; k < m; ++k) {
        z[k] = 0.0;
        z[m + k] = net.v0();
    }
    auto voltages = [&](const Eigen::VectorXd& s) {
        std::vector<C> v(n, C(net.v0(), 0.0));
        for (int k = 0; k < m; ++k) v[unk[k]] = std::polar(s[m + k], s[k]);
        return v;
    };
    auto mismatch = [&](const Eigen::VectorXd& s) {
        const auto v = voltages(s);
        Eigen::VectorXd f(2 * m);
        for (int k = 0; k < m; ++k) {
            const int i = unk[k];
            C cur = ydiag[i] * v[i];
            for (auto [j, yij] : y[i]) cur += yij * v[j];
            const C sc = v[i] * std::conj(cur) - target[i];
            f[k] = sc.real();
            f[m + k] = sc.imag();
        }
        return f;
    };
    for (int it = 0; it < 50; ++it) {
        const Eigen::VectorXd f = mismatch(z);
        if (f.lpNorm<Eigen::Infinity>() < 1e-14) break;
        Eigen::MatrixXd jac(2 * m, 2 * m);
        for (int c = 0; c < 2 * m; ++c) {
            const double h = 1e-7;
            Eigen::VectorXd zp = z, zm = z;
            zp[c] += h;
            zm[c] -= h;
            jac.col(c) = (mismatch(zp) - mismatch(zm)) / (2 * h);
        }
        z -= jac.partialPivLu().solve(f);
    }
    const auto v = voltages(z);
    if (flow) {
        flow->assign(net.branch_count(), C(0.0, 0.0));
        for (int u : t.order) {
            const int b = t.parent_branch[u];
            if (b < 0) continue;
            const int p = t.parent_bus[u];
            const C cur = (v[p] - v[u]) / C(net.branches()[b].r, net.branches()[b].x);
            (*flow)[b] = v[p] * std::conj(cur);
        }
    }
    std::vector<double> mag(n);
    for (int i = 0; i < n; ++i) mag[i] = std::abs(v[i]);
    return mag;
}

// Downstream injection sums by recursion over children.
inline double subtree_sum(const Bfs& t, const std::vector<double>& x, int bus) {
    double s = x[bus];
    for (int v = 0; v < static_cast<int>(t.parent_bus.size()); ++v)
        if (t.parent_bus[v] == bus && t.parent_branch[v] >= 0) s += subtree_sum(t, x, v);
    return s;
}

struct RandomShape {
    int buses = 10;
    int ties = 2;
    bool dg = false;
    bool svc = false;
};

// Random tree (bus k hangs off an earlier bus) plus tie branches between
// buses that are not yet adjacent. All tree branches are switchable.
inline gridflow::Network random_network(unsigned seed, const RandomShape& shape) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<gridflow::BusRecord> buses(shape.buses);
    for (int i = 0; i < shape.buses; ++i) {
        buses[i].id = i + 1;
        if (i > 0) {
            buses[i].p_demand = 0.01 + 0.05 * u(rng);
            buses[i].q_demand = 0.005 + 0.03 * u(rng);
        }
    }
    std::vector<gridflow::BranchRecord> branches;
    std::vector<std::vector<bool>> adjacent(shape.buses, std::vector<bool>(shape.buses, false));
    for (int i = 1; i < shape.buses; ++i) {
        const int parent = static_cast<int>(u(rng) * i);
        gridflow::BranchRecord br;
        br.from = parent + 1;
        br.to = i + 1;
        br.r = 0.005 + 0.02 * u(rng);
        br.x = 0.004 + 0.015 * u(rng);
        br.switchable = true;
        branches.push_back(br);
        adjacent[parent][i] = adjacent[i][parent] = true;
    }
    for (int t = 0, guard = 0; t < shape.ties && guard < 1000; ++guard) {
        const int a = 1 + static_cast<int>(u(rng) * (shape.buses - 1));
        const int b = 1 + static_cast<int>(u(rng) * (shape.buses - 1));
        if (a == b || adjacent[a][b]) continue;
        adjacent[a][b] = adjacent[b][a] = true;
        gridflow::BranchRecord br;
        br.from = a + 1;
        br.to = b + 1;
        br.r = 0.01 + 0.02 * u(rng);
        br.x = 0.008 + 0.015 * u(rng);
        br.switchable = true;
        br.normally_open = true;
        branches.push_back(br);
        ++t;
    }
    if (shape.dg) {
        const int k = 1 + static_cast<int>(u(rng) * (shape.buses - 1));
        buses[k].dg = gridflow::DgInjection{0.05 + 0.1 * u(rng), 0.02 * u(rng)};
    }
    if (shape.svc) {
        const int k = 1 + static_cast<int>(u(rng) * (shape.buses - 1));
        buses[k].svc = gridflow::SvcRange{-0.05, 0.05};
    }
    return gridflow::Network(1.0, 1, 1.05, std::move(buses), std::move(branches));
}

} // namespace support
