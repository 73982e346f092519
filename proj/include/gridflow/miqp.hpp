#pragma once

#include "gridflow/network.hpp"
#include "gridflow/qp.hpp"
#include "gridflow/topology.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gridflow {

/// Objective weights. The loss term is alpha * (loss in MW), so alpha = 1000
/// makes it a loss in kW and alpha = 30 prices it at 30 per MWh over one hour.
struct ObjectiveWeights {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    /// Throws ValidationError when a weight is negative or all are zero.
    void validate() const;
};

struct MiqpOptions {
    bool loop_cuts = true;
    std::optional<double> pf_min;   ///< lower bound on P^2 / (P^2 + Q^2) at the root, i.e. the squared power factor
    double big_m_scale = 1.0;
    bool propagate = true;          ///< combinatorial radiality fixing at each node
    long leaf_enumeration = 256;    ///< evaluate subtrees with at most this many trees directly; 0 disables
    double gap = 1e-6;              ///< relative optimality gap
    long max_nodes = 1000000;
    double time_limit = 600.0;      ///< seconds
    int max_cut_rounds = 50;        ///< thermal outer-linearisation rounds per solve
    double cut_tol = 1e-8;
    long enumeration_cap = 1000000;
};

/// Constraint groups, used as row tags and in infeasibility hints.
enum class Group {
    FlowBigM,
    ActiveBalance,
    ReactiveBalance,
    VoltageDrop,
    VoltageDefinition,
    Injection,
    Svc,
    BranchCount,
    Commodity,
    Capacity,
    Thermal,
    VoltageLimit,
    Angle,
    PowerFactor,
    LoopCut,
    NoGood,
};

const char* group_name(Group group);

/// Assembled mixed-integer model. The continuous relaxation lives in `problem`
/// with every x in [0, 1] (non-switchable branches fixed). Per-branch flow
/// variables are signed along the nominal orientation `sending -> receiving`.
struct MiqpModel {
    MiqpModel(Network net, ObjectiveWeights w, MiqpOptions o)
        : network(std::move(net)), weights(w), options(std::move(o)) {}

    Network network;
    ObjectiveWeights weights;
    MiqpOptions options;
    qp::Problem problem;

    std::vector<int> x;       ///< per branch
    std::vector<int> p_hat;   ///< per branch
    std::vector<int> q_hat;   ///< per branch
    std::vector<int> k;       ///< per branch commodity flow, -1 without sinks
    std::vector<int> w;       ///< per bus
    std::vector<int> v;       ///< per bus
    std::vector<int> p_inj;   ///< per bus, -1 at the root
    std::vector<int> q_inj;   ///< per bus, -1 at the root
    std::vector<int> q_svc;   ///< per bus, -1 without a compensator
    std::vector<int> svc_buses;

    std::vector<int> sending;    ///< nominal sending bus per branch
    std::vector<int> receiving;
    std::vector<double> x0;      ///< reference state, 1 = closed
    std::vector<double> flow_big_m;
    double voltage_big_m = 0.0;
    int sink_count = 0;
    LoopStructure loops;
    int loop_cut_count = 0;
    std::vector<int> thermal_branches;

    int binary_count() const;
};

/// Throws NothingToOptimize when nothing is switchable and there is no SVC.
MiqpModel build_miqp(const Network& network, const ObjectiveWeights& weights, const MiqpOptions& options = {});

/// One row per overlap set: sum of x over the set = N_k - L_k.
std::vector<qp::Row> overlap_loop_cuts(const MiqpModel& model);

enum class SolveStatus { Optimal, Incomplete, Infeasible };
const char* status_name(SolveStatus status);

struct SvcSetpoint {
    int bus = -1;
    double q_hat = 0.0;   ///< model variable
    double q = 0.0;       ///< physical output q_hat / W, p.u.
};

struct ReconfigSolution {
    SolveStatus status = SolveStatus::Infeasible;
    std::string method;
    std::vector<int> open_branches;  ///< sorted branch indices
    std::vector<SvcSetpoint> svc;
    double objective_model = 0.0;
    double loss_term = 0.0;
    double switch_term = 0.0;
    double deviation_term = 0.0;
    double loss_model_kw = 0.0;
    bool acpf_applicable = false;
    double objective_acpf = 0.0;
    double loss_acpf_kw = 0.0;
    double v_avg = 0.0;
    double v_min = 0.0;
    double gap = 0.0;
    double wall_time = 0.0;
    long nodes = 0;
    long qp_solves = 0;
    long no_good_cuts = 0;
    long candidates = 0;
    std::string infeasible_hint;
};

/// Best-first branch and bound. Budget exhaustion returns status Incomplete
/// with the incumbent; an infeasible root throws Infeasible.
ReconfigSolution solve_miqp(const MiqpModel& model);

/// Exhaustive search over loop-cut-consistent spanning trees. Throws TooLarge
/// when the candidate count exceeds options.enumeration_cap.
ReconfigSolution enumerate_radial(const Network& network, const ObjectiveWeights& weights,
                                  const MiqpOptions& options = {});

/// Exact model optimum for one closed-branch pattern (continuous variables only).
struct TopologyValue {
    bool feasible = false;
    double objective = 0.0;
    Eigen::VectorXd z;       ///< full model vector
    std::string hint;        ///< violated group when infeasible
};
TopologyValue evaluate_topology(const MiqpModel& model, const std::vector<bool>& closed);

struct AcEvaluation {
    bool applicable = false;
    double objective = 0.0;
    double loss_kw = 0.0;
    double v_avg = 0.0;
    double v_min = 0.0;
};

/// ACPF on the solution's topology with the SVC outputs as fixed injections.
/// Non-convergence yields applicable = false.
AcEvaluation evaluate_with_acpf(const Network& network, const ReconfigSolution& solution,
                                const ObjectiveWeights& weights);

std::string solution_json(const Network& network, const ReconfigSolution& solution);
/// Header and row are newline-terminated.
std::string solution_csv_header();
std::string solution_csv_row(const Network& network, const std::string& label, const ReconfigSolution& solution);
/// Reads back the open set and SVC setpoints (and stored figures) of solution_json output.
ReconfigSolution parse_solution_json(const Network& network, const std::string& text);

} // namespace gridflow
