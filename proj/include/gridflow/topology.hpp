#pragma once

#include "gridflow/network.hpp"

#include <Eigen/Dense>

#include <numeric>
#include <vector>

namespace gridflow {

/// Disjoint sets over 0..n-1 with path halving.
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    /// False when a and b were already joined.
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[a] = b;
        return true;
    }
};

/// Rooted spanning tree for one switch configuration.
///
/// Columns of the path-branch incidence matrix are the non-root buses in
/// network order; row k is the in-tree branch feeding the bus of column k.
/// With that pairing T is square and upper-triangular under depth order.
struct RadialTopology {
    int root = 0;
    std::vector<int> parent_bus;     ///< per bus, -1 at the root
    std::vector<int> parent_branch;  ///< per bus, -1 at the root
    std::vector<std::vector<int>> children;  ///< per bus, child bus indices
    std::vector<int> depth_order;    ///< buses, root first, parents before children
    std::vector<int> depth;          ///< number of branches between bus and root
    std::vector<int> column_of_bus;  ///< per bus, column in T (-1 at the root)
    std::vector<int> bus_of_column;  ///< inverse of column_of_bus
    std::vector<bool> closed;        ///< per branch, in-tree flag

    int bus_count() const noexcept { return static_cast<int>(parent_bus.size()); }
    int column_count() const noexcept { return static_cast<int>(bus_of_column.size()); }
    /// Branch for row `k` of T.
    int branch_of_row(int k) const noexcept { return parent_branch[bus_of_column[k]]; }
    /// Sending (parent-side) bus of an in-tree branch.
    int sending_bus(const Network& network, int branch) const;
    /// Receiving (child-side) bus of an in-tree branch.
    int receiving_bus(const Network& network, int branch) const;
    /// Branch indices on the root path of `bus` (Psi set), root side last.
    std::vector<int> path(int bus) const;
};

/// Build the tree spanned by `closed` (one flag per branch).
/// Throws NotRadial on a cycle, Disconnected when a bus is unreachable.
RadialTopology build_tree(const Network& network, const std::vector<bool>& closed);

/// Dense 0/1 path-branch incidence matrix.
Eigen::MatrixXd path_incidence(const RadialTopology& topology);

struct FundamentalLoop {
    int tie_branch = -1;
    std::vector<int> branches;  ///< sorted, tie branch included
};

struct OverlapSet {
    std::vector<int> branches;  ///< union of member loops, sorted
    std::vector<int> loops;     ///< indices into LoopStructure::loops
    int branch_count = 0;       ///< N_k
    int link_count = 0;         ///< L_k, branches that must be open
};

struct LoopStructure {
    std::vector<FundamentalLoop> loops;
    std::vector<OverlapSet> overlap_sets;
};

/// One fundamental loop per normally-open branch against the normally-closed
/// tree; loops sharing a branch (transitively) are merged into overlap sets.
LoopStructure loop_structure(const Network& network);

} // namespace gridflow
