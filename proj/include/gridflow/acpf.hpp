#pragma once

#include "gridflow/network.hpp"
#include "gridflow/topology.hpp"

#include <vector>

namespace gridflow {

/// Exact AC power flow result. Branch vectors are indexed by branch; flows are
/// measured at the sending (parent-side) end and are zero on open branches.
struct AcSolution {
    std::vector<double> v;
    std::vector<double> delta;
    std::vector<double> p_flow;
    std::vector<double> q_flow;
    double loss_total = 0.0;
    double root_p = 0.0;  ///< active injection drawn from the root
    double root_q = 0.0;
    int iterations = 0;
    double residual = 0.0;
    int root = -1;
};

struct AcOptions {
    double tol = 1e-10;
    int max_iter = 200;
    double collapse_voltage = 0.3;
};

/// Backward/forward sweep from a flat start at v0. `extra_q` optionally adds a
/// fixed reactive injection per bus (p.u.), used for compensator setpoints.
AcSolution solve_acpf(const Network& network, const RadialTopology& topology, const AcOptions& options = {},
                      const std::vector<double>& extra_q = {});

struct TwoBusResult {
    double v_j = 0.0;
    double p_ij = 0.0;
    double q_ij = 0.0;
    double delta_ij = 0.0;
};

/// Closed-form two-bus solution for a load (p_d, q_d) fed through r + jx from a
/// bus held at v_i. Returns the high-voltage root; throws Infeasible beyond the
/// loadability limit.
TwoBusResult two_bus_exact(double r, double x, double p_d, double q_d, double v_i);

} // namespace gridflow
