#include "gridflow/topology.hpp"

#include "gridflow/errors.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace gridflow {

int RadialTopology::sending_bus(const Network& network, int branch) const {
    const int a = network.from_index(branch);
    const int b = network.to_index(branch);
    return parent_branch[b] == branch ? a : b;
}

int RadialTopology::receiving_bus(const Network& network, int branch) const {
    const int a = network.from_index(branch);
    const int b = network.to_index(branch);
    return parent_branch[b] == branch ? b : a;
}

std::vector<int> RadialTopology::path(int bus) const {
    std::vector<int> out;
    for (int u = bus; parent_bus[u] >= 0; u = parent_bus[u]) out.push_back(parent_branch[u]);
    return out;
}

RadialTopology build_tree(const Network& network, const std::vector<bool>& closed) {
    const int n = network.bus_count();
    const int m = network.branch_count();
    if (static_cast<int>(closed.size()) != m)
        throw ValidationError("switch state has " + std::to_string(closed.size()) + " entries, expected " +
                              std::to_string(m));

    std::vector<std::vector<std::pair<int, int>>> adj(n);
    for (int k = 0; k < m; ++k) {
        if (!closed[k]) continue;
        adj[network.from_index(k)].emplace_back(network.to_index(k), k);
        adj[network.to_index(k)].emplace_back(network.from_index(k), k);
    }

    RadialTopology t;
    t.root = network.root();
    t.parent_bus.assign(n, -1);
    t.parent_branch.assign(n, -1);
    t.children.assign(n, {});
    t.depth.assign(n, 0);
    t.closed = closed;

    std::vector<bool> seen(n, false);
    seen[t.root] = true;
    t.depth_order.reserve(n);
    t.depth_order.push_back(t.root);
    for (std::size_t head = 0; head < t.depth_order.size(); ++head) {
        const int u = t.depth_order[head];
        for (auto [v, k] : adj[u]) {
            if (k == t.parent_branch[u]) continue;
            if (seen[v])
                throw NotRadial(k, "closed branch " + network.branches()[k].name() + " closes a loop");
            seen[v] = true;
            t.parent_bus[v] = u;
            t.parent_branch[v] = k;
            t.depth[v] = t.depth[u] + 1;
            t.children[u].push_back(v);
            t.depth_order.push_back(v);
        }
    }
    if (static_cast<int>(t.depth_order.size()) != n) {
        for (int i = 0; i < n; ++i)
            if (!seen[i])
                throw Disconnected(i, "bus " + std::to_string(network.buses()[i].id) +
                                          " is not reachable from the root");
    }
    // A cycle hidden in an unreachable component is caught above; a cycle among
    // reachable buses is caught during the sweep.

    t.column_of_bus.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        if (i == t.root) continue;
        t.column_of_bus[i] = static_cast<int>(t.bus_of_column.size());
        t.bus_of_column.push_back(i);
    }
    return t;
}

Eigen::MatrixXd path_incidence(const RadialTopology& topology) {
    const int nc = topology.column_count();
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(nc, nc);
    for (int k = 0; k < nc; ++k) {
        for (int u = topology.bus_of_column[k]; topology.parent_bus[u] >= 0; u = topology.parent_bus[u])
            T(topology.column_of_bus[u], k) = 1.0;
    }
    return T;
}

namespace {

int find_set(std::vector<int>& parent, int a) {
    while (parent[a] != a) {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    return a;
}

} // namespace

LoopStructure loop_structure(const Network& network) {
    const int m = network.branch_count();
    std::vector<bool> base_closed = network.normally_closed();
    RadialTopology tree = build_tree(network, base_closed);

    LoopStructure out;
    for (int k = 0; k < m; ++k) {
        if (base_closed[k]) continue;
        // Cycle = tie + both root paths minus their common part.
        int a = network.from_index(k);
        int b = network.to_index(k);
        std::vector<int> branches{k};
        while (a != b) {
            if (tree.depth[a] >= tree.depth[b]) {
                branches.push_back(tree.parent_branch[a]);
                a = tree.parent_bus[a];
            } else {
                branches.push_back(tree.parent_branch[b]);
                b = tree.parent_bus[b];
            }
        }
        std::sort(branches.begin(), branches.end());
        out.loops.push_back({k, std::move(branches)});
    }

    const int nl = static_cast<int>(out.loops.size());
    std::vector<int> parent(nl);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<int> owner(m, -1);
    for (int l = 0; l < nl; ++l) {
        for (int k : out.loops[l].branches) {
            if (owner[k] < 0) {
                owner[k] = l;
            } else {
                int ra = find_set(parent, owner[k]);
                int rb = find_set(parent, l);
                if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }
    }
    std::vector<int> set_of_root(nl, -1);
    for (int l = 0; l < nl; ++l) {
        const int r = find_set(parent, l);
        if (set_of_root[r] < 0) {
            set_of_root[r] = static_cast<int>(out.overlap_sets.size());
            out.overlap_sets.emplace_back();
        }
        auto& s = out.overlap_sets[set_of_root[r]];
        s.loops.push_back(l);
    }
    for (auto& s : out.overlap_sets) {
        std::set<int> merged;
        for (int l : s.loops) merged.insert(out.loops[l].branches.begin(), out.loops[l].branches.end());
        s.branches.assign(merged.begin(), merged.end());
        s.branch_count = static_cast<int>(s.branches.size());
        s.link_count = static_cast<int>(s.loops.size());
    }
    return out;
}

} // namespace gridflow
