#pragma once

#include "gridflow/acpf.hpp"
#include "gridflow/network.hpp"
#include "gridflow/topology.hpp"

#include <string>
#include <vector>

namespace gridflow {

/// Result of one linear branch-flow solve.
///
/// Per-bus vectors cover every bus (the root carries W = 2 - v0); per-branch
/// vectors cover every branch, positive from parent to child, zero when open.
struct LinearSolution {
    std::vector<double> w;       ///< linearised reciprocal voltage
    std::vector<double> v;       ///< 2 - w
    std::vector<double> p_hat;   ///< P_ij / V_i
    std::vector<double> q_hat;
    std::vector<double> p_flow;  ///< recovered sending-end flows
    std::vector<double> q_flow;
    double loss_est = 0.0;       ///< sum R (p_hat^2 + q_hat^2)
    int root = -1;
    double condition = 1.0;      ///< condition estimate of the voltage system (closed form only)
    int iterations = 0;          ///< fixed-point sweeps (iterative variants only)
};

/// Extra injections added on top of the network data. `q_hat` enters the
/// modified reactive balance directly (not scaled by W), which is how a
/// compensator setpoint appears in the optimisation model.
struct ModifiedInjection {
    std::vector<double> q_hat;  ///< per bus, may be empty
};

struct FixedPointOptions {
    double tol = 1e-12;
    int max_iter = 500;
};

/// Modified DistFlow voltages from the closed-form relation
/// V_R = 2 - (I + T'R T P + T'X T Q)^-1 (2 - V0), flows from -T P W.
LinearSolution solve_md_closed_form(const Network& network, const RadialTopology& topology,
                                    const ModifiedInjection& extra = {});

/// Same model, W iterated as W <- (2 - V0) - (T'R T P + T'X T Q) W.
LinearSolution solve_md_fixed_point(const Network& network, const RadialTopology& topology,
                                    const FixedPointOptions& options = {}, const ModifiedInjection& extra = {});

/// Same model again, solved with tree sweeps: downstream sums for the flows,
/// root-to-leaf accumulation of the drops. No matrices involved.
LinearSolution solve_md_sweep(const Network& network, const RadialTopology& topology,
                              const FixedPointOptions& options = {}, const ModifiedInjection& extra = {});

struct BranchFlows {
    std::vector<double> p;
    std::vector<double> q;
};

/// Branch flows as the negated sum of injections over each branch's downstream
/// bus set. Injections are per bus (root entry ignored); flows per branch.
BranchFlows path_sum_flows(const Network& network, const RadialTopology& topology,
                           const std::vector<double>& p_injection, const std::vector<double>& q_injection);

/// P_ij = P_hat_ij / W_i with W taken at the parent-side bus.
/// Throws DegenerateVoltage when any W_i <= 0.
BranchFlows recover_branch_flows(const Network& network, const RadialTopology& topology,
                                 const std::vector<double>& w, const std::vector<double>& p_hat,
                                 const std::vector<double>& q_hat);

/// Lossless-flow benchmark: P_ij = -sum downstream P_k and
/// V_j^2 = V_i^2 - 2 (R P_ij + X Q_ij).
LinearSolution solve_simplified_distflow(const Network& network, const RadialTopology& topology);

/// 100 * |(1/v_i - (2 - v_i)) - (1/v_j - (2 - v_j))|, percent.
double linearization_error(double v_i, double v_j);

/// Percentage errors of a linear solution against the AC reference.
///
/// Voltage errors are relative to the AC magnitude over non-root buses. Flow
/// errors are relative to |AC flow| over branches whose AC flow magnitude is at
/// least `kFlowFloor`; smaller flows only enter the absolute-error fields.
struct ErrorReport {
    static constexpr double kFlowFloor = 1e-6;
    double avg_v = 0.0, max_v = 0.0;
    double avg_p = 0.0, max_p = 0.0;
    double avg_q = 0.0, max_q = 0.0;
    int argmax_v = -1;  ///< bus index
    int argmax_p = -1;  ///< branch index
    int argmax_q = -1;
    double small_flow_abs_p = 0.0;  ///< max abs error over excluded branches
    double small_flow_abs_q = 0.0;
};

ErrorReport compare_errors(const LinearSolution& linear, const AcSolution& ac);

/// CSV with header `quantity,avg_pct,max_pct` and rows v, p, q.
std::string error_report_csv(const ErrorReport& report);
std::string error_report_json(const ErrorReport& report);

} // namespace gridflow
