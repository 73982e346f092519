#include "gridflow/linear_flow.hpp"

#include "gridflow/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace gridflow {

namespace {

struct ColumnData {
    Eigen::MatrixXd T;
    Eigen::VectorXd r, x;      // per row (branch feeding column bus)
    Eigen::VectorXd p, q;      // per column, net injections
    Eigen::VectorXd q_extra;   // per column, modified reactive injection
};

ColumnData column_data(const Network& net, const RadialTopology& topo, const ModifiedInjection& extra) {
    const int nc = topo.column_count();
    if (!extra.q_hat.empty() && static_cast<int>(extra.q_hat.size()) != net.bus_count())
        throw ValidationError("modified injection vector has wrong length");
    ColumnData d;
    d.T = path_incidence(topo);
    d.r.resize(nc);
    d.x.resize(nc);
    d.p.resize(nc);
    d.q.resize(nc);
    d.q_extra = Eigen::VectorXd::Zero(nc);
    for (int k = 0; k < nc; ++k) {
        const int bus = topo.bus_of_column[k];
        const auto& br = net.branches()[topo.branch_of_row(k)];
        d.r(k) = br.r;
        d.x(k) = br.x;
        d.p(k) = net.p_injection(bus);
        d.q(k) = net.q_injection(bus);
        if (!extra.q_hat.empty()) d.q_extra(k) = extra.q_hat[bus];
    }
    return d;
}

// Fill flows, losses and voltages of `sol` from the column vector of W.
void finish_from_w(const Network& net, const RadialTopology& topo, const ColumnData& d, const Eigen::VectorXd& w,
                   LinearSolution& sol) {
    const int n = net.bus_count();
    const int m = net.branch_count();
    sol.root = topo.root;
    sol.w.assign(n, 2.0 - net.v0());
    for (int k = 0; k < topo.column_count(); ++k) sol.w[topo.bus_of_column[k]] = w(k);
    sol.v.resize(n);
    for (int i = 0; i < n; ++i) sol.v[i] = 2.0 - sol.w[i];

    const Eigen::VectorXd p_inj = d.p.cwiseProduct(w);
    const Eigen::VectorXd q_inj = d.q.cwiseProduct(w) + d.q_extra;
    const Eigen::VectorXd p_br = -(d.T * p_inj);
    const Eigen::VectorXd q_br = -(d.T * q_inj);
    sol.p_hat.assign(m, 0.0);
    sol.q_hat.assign(m, 0.0);
    sol.loss_est = 0.0;
    for (int k = 0; k < topo.column_count(); ++k) {
        const int b = topo.branch_of_row(k);
        sol.p_hat[b] = p_br(k);
        sol.q_hat[b] = q_br(k);
        sol.loss_est += d.r(k) * (p_br(k) * p_br(k) + q_br(k) * q_br(k));
    }
    auto flows = recover_branch_flows(net, topo, sol.w, sol.p_hat, sol.q_hat);
    sol.p_flow = std::move(flows.p);
    sol.q_flow = std::move(flows.q);
}

} // namespace

LinearSolution solve_md_closed_form(const Network& net, const RadialTopology& topo, const ModifiedInjection& extra) {
    const ColumnData d = column_data(net, topo, extra);
    const int nc = topo.column_count();
    const Eigen::MatrixXd TtR = d.T.transpose() * d.r.asDiagonal();
    const Eigen::MatrixXd TtX = d.T.transpose() * d.x.asDiagonal();
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(nc, nc) + TtR * d.T * d.p.asDiagonal() +
                              TtX * d.T * d.q.asDiagonal();
    const Eigen::VectorXd rhs = Eigen::VectorXd::Constant(nc, 2.0 - net.v0()) - TtX * (d.T * d.q_extra);

    LinearSolution sol;
    Eigen::VectorXd w = rhs;
    if (nc > 0) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
        const double rcond = lu.rcond();
        sol.condition = rcond > 0.0 ? 1.0 / rcond : INFINITY;
        if (!(rcond > 1e-14))
            throw IllConditioned(sol.condition, "modified DistFlow voltage system is singular (condition estimate " +
                                                    std::to_string(sol.condition) + ")");
        w = lu.solve(rhs);
    }
    finish_from_w(net, topo, d, w, sol);
    return sol;
}

LinearSolution solve_md_fixed_point(const Network& net, const RadialTopology& topo, const FixedPointOptions& options,
                                    const ModifiedInjection& extra) {
    const ColumnData d = column_data(net, topo, extra);
    const int nc = topo.column_count();
    const Eigen::MatrixXd TtR = d.T.transpose() * d.r.asDiagonal();
    const Eigen::MatrixXd TtX = d.T.transpose() * d.x.asDiagonal();
    const Eigen::MatrixXd M = TtR * d.T * d.p.asDiagonal() + TtX * d.T * d.q.asDiagonal();
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(nc, 2.0 - net.v0()) - TtX * (d.T * d.q_extra);

    Eigen::VectorXd w = Eigen::VectorXd::Constant(nc, 2.0 - net.v0());
    LinearSolution sol;
    double step = 0.0;
    for (int it = 1; it <= options.max_iter; ++it) {
        Eigen::VectorXd next = c - M * w;
        step = nc > 0 ? (next - w).cwiseAbs().maxCoeff() : 0.0;
        w = std::move(next);
        if (!std::isfinite(step)) break;
        if (step <= options.tol) {
            sol.iterations = it;
            finish_from_w(net, topo, d, w, sol);
            return sol;
        }
    }
    throw NonConvergent(options.max_iter, step, "modified DistFlow fixed-point iteration did not converge");
}

LinearSolution solve_md_sweep(const Network& net, const RadialTopology& topo, const FixedPointOptions& options,
                              const ModifiedInjection& extra) {
    const int n = net.bus_count();
    const int m = net.branch_count();
    if (!extra.q_hat.empty() && static_cast<int>(extra.q_hat.size()) != n)
        throw ValidationError("modified injection vector has wrong length");
    const double w0 = 2.0 - net.v0();
    std::vector<double> w(n, w0), p_inj(n), q_inj(n);
    LinearSolution sol;
    sol.root = topo.root;
    double step = 0.0;
    for (int it = 1; it <= options.max_iter; ++it) {
        for (int i = 0; i < n; ++i) {
            p_inj[i] = net.p_injection(i) * w[i];
            q_inj[i] = net.q_injection(i) * w[i] + (extra.q_hat.empty() ? 0.0 : extra.q_hat[i]);
        }
        BranchFlows f = path_sum_flows(net, topo, p_inj, q_inj);
        step = 0.0;
        std::vector<double> next(n, w0);
        for (int u : topo.depth_order) {
            const int k = topo.parent_branch[u];
            if (k < 0) continue;
            const auto& br = net.branches()[k];
            next[u] = next[topo.parent_bus[u]] + br.r * f.p[k] + br.x * f.q[k];
            step = std::max(step, std::abs(next[u] - w[u]));
        }
        w = std::move(next);
        if (!std::isfinite(step)) break;
        if (step <= options.tol) {
            // final flows from the converged W
            for (int i = 0; i < n; ++i) {
                p_inj[i] = net.p_injection(i) * w[i];
                q_inj[i] = net.q_injection(i) * w[i] + (extra.q_hat.empty() ? 0.0 : extra.q_hat[i]);
            }
            f = path_sum_flows(net, topo, p_inj, q_inj);
            sol.iterations = it;
            sol.w = w;
            sol.v.resize(n);
            for (int i = 0; i < n; ++i) sol.v[i] = 2.0 - w[i];
            sol.p_hat = f.p;
            sol.q_hat = f.q;
            for (int k = 0; k < m; ++k)
                sol.loss_est += net.branches()[k].r * (f.p[k] * f.p[k] + f.q[k] * f.q[k]);
            auto flows = recover_branch_flows(net, topo, sol.w, sol.p_hat, sol.q_hat);
            sol.p_flow = std::move(flows.p);
            sol.q_flow = std::move(flows.q);
            return sol;
        }
    }
    throw NonConvergent(options.max_iter, step, "modified DistFlow sweep did not converge");
}

BranchFlows path_sum_flows(const Network& net, const RadialTopology& topo, const std::vector<double>& p_injection,
                           const std::vector<double>& q_injection) {
    const int n = net.bus_count();
    if (static_cast<int>(p_injection.size()) != n || static_cast<int>(q_injection.size()) != n)
        throw ValidationError("injection vectors must have one entry per bus");
    BranchFlows out{std::vector<double>(net.branch_count(), 0.0), std::vector<double>(net.branch_count(), 0.0)};
    // Every bus contributes to each branch on its root path (its Omega membership).
    for (int k = 0; k < n; ++k) {
        if (k == topo.root) continue;
        for (int u = k; topo.parent_bus[u] >= 0; u = topo.parent_bus[u]) {
            out.p[topo.parent_branch[u]] -= p_injection[k];
            out.q[topo.parent_branch[u]] -= q_injection[k];
        }
    }
    return out;
}

BranchFlows recover_branch_flows(const Network& net, const RadialTopology& topo, const std::vector<double>& w,
                                 const std::vector<double>& p_hat, const std::vector<double>& q_hat) {
    const int n = net.bus_count();
    const int m = net.branch_count();
    if (static_cast<int>(w.size()) != n || static_cast<int>(p_hat.size()) != m ||
        static_cast<int>(q_hat.size()) != m)
        throw ValidationError("flow recovery inputs have inconsistent sizes");
    for (int i = 0; i < n; ++i)
        if (!(w[i] > 0.0))
            throw DegenerateVoltage(i, "non-positive W at bus " + std::to_string(net.buses()[i].id));
    BranchFlows out{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
    for (int u : topo.depth_order) {
        const int k = topo.parent_branch[u];
        if (k < 0) continue;
        const double ws = w[topo.parent_bus[u]];
        out.p[k] = p_hat[k] / ws;
        out.q[k] = q_hat[k] / ws;
    }
    return out;
}

LinearSolution solve_simplified_distflow(const Network& net, const RadialTopology& topo) {
    const int n = net.bus_count();
    const int m = net.branch_count();
    std::vector<double> p_inj(n), q_inj(n);
    for (int i = 0; i < n; ++i) {
        p_inj[i] = net.p_injection(i);
        q_inj[i] = net.q_injection(i);
    }
    BranchFlows f = path_sum_flows(net, topo, p_inj, q_inj);

    LinearSolution sol;
    sol.root = topo.root;
    std::vector<double> v2(n, net.v0() * net.v0());
    for (int u : topo.depth_order) {
        const int k = topo.parent_branch[u];
        if (k < 0) continue;
        const auto& br = net.branches()[k];
        v2[u] = v2[topo.parent_bus[u]] - 2.0 * (br.r * f.p[k] + br.x * f.q[k]);
        if (!(v2[u] > 0.0)) throw DegenerateVoltage(u, "simplified DistFlow voltage squared is non-positive");
    }
    sol.v.resize(n);
    sol.w.resize(n);
    for (int i = 0; i < n; ++i) {
        sol.v[i] = std::sqrt(v2[i]);
        sol.w[i] = 2.0 - sol.v[i];
    }
    sol.p_flow = f.p;
    sol.q_flow = f.q;
    sol.p_hat.assign(m, 0.0);
    sol.q_hat.assign(m, 0.0);
    for (int u : topo.depth_order) {
        const int k = topo.parent_branch[u];
        if (k < 0) continue;
        const double vs = sol.v[topo.parent_bus[u]];
        sol.p_hat[k] = f.p[k] / vs;
        sol.q_hat[k] = f.q[k] / vs;
        const auto& br = net.branches()[k];
        sol.loss_est += br.r * (sol.p_hat[k] * sol.p_hat[k] + sol.q_hat[k] * sol.q_hat[k]);
    }
    return sol;
}

double linearization_error(double v_i, double v_j) {
    if (!(v_i > 0.0) || !(v_j > 0.0)) throw ValidationError("voltages must be positive");
    return 100.0 * std::abs((1.0 / v_i - (2.0 - v_i)) - (1.0 / v_j - (2.0 - v_j)));
}

ErrorReport compare_errors(const LinearSolution& lin, const AcSolution& ac) {
    if (lin.v.size() != ac.v.size() || lin.p_flow.size() != ac.p_flow.size() ||
        lin.q_flow.size() != ac.q_flow.size())
        throw ValidationError("linear and AC solutions have different dimensions");
    if (lin.root != ac.root) throw ValidationError("linear and AC solutions use different roots");

    ErrorReport rep;
    int nv = 0;
    for (std::size_t i = 0; i < ac.v.size(); ++i) {
        if (static_cast<int>(i) == ac.root) continue;
        const double e = 100.0 * std::abs(lin.v[i] - ac.v[i]) / std::abs(ac.v[i]);
        rep.avg_v += e;
        if (e > rep.max_v || rep.argmax_v < 0) {
            rep.max_v = e;
            rep.argmax_v = static_cast<int>(i);
        }
        ++nv;
    }
    if (nv > 0) rep.avg_v /= nv;

    auto flow_stats = [](const std::vector<double>& lin_f, const std::vector<double>& ac_f, double& avg, double& mx,
                         int& arg, double& small_abs) {
        int count = 0;
        for (std::size_t k = 0; k < ac_f.size(); ++k) {
            const double ref = std::abs(ac_f[k]);
            const double diff = std::abs(lin_f[k] - ac_f[k]);
            if (ref < ErrorReport::kFlowFloor) {
                small_abs = std::max(small_abs, diff);
                continue;
            }
            const double e = 100.0 * diff / ref;
            avg += e;
            if (e > mx || arg < 0) {
                mx = e;
                arg = static_cast<int>(k);
            }
            ++count;
        }
        if (count > 0) avg /= count;
    };
    flow_stats(lin.p_flow, ac.p_flow, rep.avg_p, rep.max_p, rep.argmax_p, rep.small_flow_abs_p);
    flow_stats(lin.q_flow, ac.q_flow, rep.avg_q, rep.max_q, rep.argmax_q, rep.small_flow_abs_q);
    return rep;
}

std::string error_report_csv(const ErrorReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "quantity,avg_pct,max_pct\nv,%.6f,%.6f\np,%.6f,%.6f\nq,%.6f,%.6f\n", r.avg_v,
                  r.max_v, r.avg_p, r.max_p, r.avg_q, r.max_q);
    return buf;
}

std::string error_report_json(const ErrorReport& r) {
    nlohmann::json j;
    j["v"] = {{"avg_pct", r.avg_v}, {"max_pct", r.max_v}, {"argmax_bus", r.argmax_v}};
    j["p"] = {{"avg_pct", r.avg_p}, {"max_pct", r.max_p}, {"argmax_branch", r.argmax_p},
              {"small_flow_abs", r.small_flow_abs_p}};
    j["q"] = {{"avg_pct", r.avg_q}, {"max_pct", r.max_q}, {"argmax_branch", r.argmax_q},
              {"small_flow_abs", r.small_flow_abs_q}};
    j["flow_floor_pu"] = ErrorReport::kFlowFloor;
    return j.dump(1);
}

} // namespace gridflow
