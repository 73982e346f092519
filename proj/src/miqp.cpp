#include "gridflow/miqp.hpp"

#include "gridflow/acpf.hpp"
#include "gridflow/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

namespace gridflow {

using qp::kInf;

void ObjectiveWeights::validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0))
        throw ValidationError("objective weights must be nonnegative");
    if (alpha == 0.0 && beta == 0.0 && gamma == 0.0) throw ValidationError("all objective weights are zero");
}

const char* group_name(Group g) {
    switch (g) {
    case Group::FlowBigM: return "flow-switch";
    case Group::ActiveBalance: return "active-balance";
    case Group::ReactiveBalance: return "reactive-balance";
    case Group::VoltageDrop: return "voltage-drop";
    case Group::VoltageDefinition: return "voltage-definition";
    case Group::Injection: return "injection";
    case Group::Svc: return "svc-range";
    case Group::BranchCount: return "branch-count";
    case Group::Commodity: return "commodity-flow";
    case Group::Capacity: return "branch-capacity";
    case Group::Thermal: return "thermal-limit";
    case Group::VoltageLimit: return "voltage-limit";
    case Group::Angle: return "angle-limit";
    case Group::PowerFactor: return "power-factor";
    case Group::LoopCut: return "loop-cut";
    case Group::NoGood: return "no-good";
    }
    return "unknown";
}

const char* status_name(SolveStatus s) {
    switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Incomplete: return "incomplete";
    case SolveStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

int MiqpModel::binary_count() const {
    int count = 0;
    for (const auto& br : network.branches()) count += br.switchable ? 1 : 0;
    return count;
}

namespace {

int tag(Group g) { return static_cast<int>(g); }

qp::Row make_row(std::vector<std::pair<int, double>> terms, double lo, double hi, Group g, bool elastic = true) {
    qp::Row r;
    r.terms = std::move(terms);
    r.lo = lo;
    r.hi = hi;
    r.elastic = elastic;
    r.tag = tag(g);
    return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

MiqpModel build_miqp(const Network& net, const ObjectiveWeights& weights, const MiqpOptions& options) {
    weights.validate();
    if (!(options.big_m_scale >= 1.0)) throw ValidationError("big-M scale must be at least 1");
    if (options.pf_min && !(*options.pf_min > 0.0 && *options.pf_min < 1.0))
        throw ValidationError("power-factor limit must lie in (0, 1)");

    const int n = net.bus_count();
    const int m = net.branch_count();
    const int root = net.root();

    MiqpModel md(net, weights, options);
    bool any_switch = false;
    for (const auto& br : net.branches()) any_switch = any_switch || br.switchable;
    for (int i = 0; i < n; ++i)
        if (net.buses()[i].svc) md.svc_buses.push_back(i);
    if (!any_switch && md.svc_buses.empty())
        throw NothingToOptimize("no switchable branch and no compensator: nothing to optimise");

    // Nominal orientation from the normally-closed tree where it is one.
    md.sending.resize(m);
    md.receiving.resize(m);
    std::vector<int> depth(n, -1);
    try {
        const RadialTopology t0 = build_tree(net, net.normally_closed());
        depth = t0.depth;
    } catch (const Error&) {
    }
    for (int b = 0; b < m; ++b) {
        int s = net.from_index(b), r = net.to_index(b);
        if (depth[s] >= 0 && depth[r] >= 0 && depth[r] < depth[s]) std::swap(s, r);
        md.sending[b] = s;
        md.receiving[b] = r;
    }

    // Big-M constants.
    double v_lo = net.v0(), v_hi = net.v0();
    double s_total = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& bus = net.buses()[i];
        if (i != root) {
            v_lo = std::min(v_lo, bus.v_min);
            v_hi = std::max(v_hi, bus.v_max);
        }
        s_total += std::hypot(bus.p_demand, bus.q_demand);
        if (bus.dg) s_total += std::hypot(bus.dg->p, bus.dg->q);
        if (bus.svc) s_total += std::max(std::abs(bus.svc->q_min), std::abs(bus.svc->q_max));
    }
    const double s_bound = std::max(s_total, 1e-6) / v_lo;
    md.flow_big_m.resize(m);
    double drop = 0.0;
    for (int b = 0; b < m; ++b) {
        const auto& br = net.branches()[b];
        double bound = s_bound;
        for (const auto& cap : {br.p_cap, br.q_cap, br.i_cap})
            if (cap) bound = std::min(bound, *cap * (2.0 - v_lo));
        md.flow_big_m[b] = options.big_m_scale * bound;
        drop = std::max(drop, (br.r + br.x) * bound);
    }
    md.voltage_big_m = options.big_m_scale * ((v_hi - v_lo) + drop);

    md.sink_count = 0;
    std::vector<bool> sink(n, false);
    for (int i = 0; i < n; ++i) {
        const auto& bus = net.buses()[i];
        if (i != root && (bus.dg || bus.svc)) {
            sink[i] = true;
            ++md.sink_count;
        }
    }

    qp::Problem& p = md.problem;
    md.x.resize(m);
    md.p_hat.resize(m);
    md.q_hat.resize(m);
    md.k.assign(m, -1);
    md.x0.resize(m);
    for (int b = 0; b < m; ++b) {
        const auto& br = net.branches()[b];
        md.x0[b] = br.normally_open ? 0.0 : 1.0;
        md.x[b] = br.switchable ? p.add_variable(0.0, 1.0) : p.add_variable(md.x0[b], md.x0[b]);
    }
    for (int b = 0; b < m; ++b) md.p_hat[b] = p.add_variable();
    for (int b = 0; b < m; ++b) md.q_hat[b] = p.add_variable();
    if (md.sink_count > 0)
        for (int b = 0; b < m; ++b) md.k[b] = p.add_variable();
    md.w.resize(n);
    md.v.resize(n);
    md.p_inj.assign(n, -1);
    md.q_inj.assign(n, -1);
    md.q_svc.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        const double w_root = 2.0 - net.v0();
        md.w[i] = i == root ? p.add_variable(w_root, w_root) : p.add_variable();
    }
    for (int i = 0; i < n; ++i) md.v[i] = i == root ? p.add_variable(net.v0(), net.v0()) : p.add_variable();
    for (int i = 0; i < n; ++i) {
        if (i == root) continue;
        md.p_inj[i] = p.add_variable();
        md.q_inj[i] = p.add_variable();
    }
    for (int i : md.svc_buses) md.q_svc[i] = p.add_variable();

    // Objective.
    const double a = weights.alpha * net.base_mva();
    for (int b = 0; b < m; ++b) {
        const double r = net.branches()[b].r;
        if (a > 0.0 && r > 0.0) {
            p.hessian.push_back({md.p_hat[b], md.p_hat[b], 2.0 * a * r});
            p.hessian.push_back({md.q_hat[b], md.q_hat[b], 2.0 * a * r});
        }
        if (weights.beta > 0.0) {
            p.hessian.push_back({md.x[b], md.x[b], 2.0 * weights.beta});
            p.c(md.x[b]) += -2.0 * weights.beta * md.x0[b];
            p.c0 += weights.beta * md.x0[b] * md.x0[b];
        }
    }
    if (weights.gamma > 0.0)
        for (int i = 0; i < n; ++i) {
            p.hessian.push_back({md.v[i], md.v[i], 2.0 * weights.gamma});
            p.c(md.v[i]) += -2.0 * weights.gamma;
            p.c0 += weights.gamma;
        }

    // Open branches carry no flow.
    for (int b = 0; b < m; ++b) {
        if (!net.branches()[b].switchable) continue;
        const double M = md.flow_big_m[b];
        for (int f : {md.p_hat[b], md.q_hat[b]}) {
            p.add_row(make_row({{f, 1.0}, {md.x[b], -M}}, -kInf, 0.0, Group::FlowBigM));
            p.add_row(make_row({{f, 1.0}, {md.x[b], M}}, 0.0, kInf, Group::FlowBigM));
        }
    }

    // Modified-flow balance at every non-root bus.
    std::vector<std::vector<std::pair<int, double>>> incident(n);  // (branch, +1 when sending)
    for (int b = 0; b < m; ++b) {
        incident[md.sending[b]].push_back({b, 1.0});
        incident[md.receiving[b]].push_back({b, -1.0});
    }
    for (int i = 0; i < n; ++i) {
        if (i == root) continue;
        std::vector<std::pair<int, double>> tp{{md.p_inj[i], -1.0}}, tq{{md.q_inj[i], -1.0}};
        for (auto [b, s] : incident[i]) {
            tp.push_back({md.p_hat[b], s});
            tq.push_back({md.q_hat[b], s});
        }
        p.add_row(make_row(tp, 0.0, 0.0, Group::ActiveBalance, false));
        p.add_row(make_row(tq, 0.0, 0.0, Group::ReactiveBalance, false));
    }

    // Voltage drop, relaxed on open branches.
    for (int b = 0; b < m; ++b) {
        const auto& br = net.branches()[b];
        std::vector<std::pair<int, double>> t{
            {md.w[md.receiving[b]], 1.0}, {md.w[md.sending[b]], -1.0}, {md.p_hat[b], -br.r}, {md.q_hat[b], -br.x}};
        if (!br.switchable) {
            p.add_row(make_row(t, 0.0, 0.0, Group::VoltageDrop, false));
            continue;
        }
        const double M = md.voltage_big_m;
        auto up = t, dn = t;
        up.push_back({md.x[b], M});
        dn.push_back({md.x[b], -M});
        p.add_row(make_row(up, -kInf, M, Group::VoltageDrop));
        p.add_row(make_row(dn, -M, kInf, Group::VoltageDrop));
    }

    // V = 2 - W and the modified injections.
    for (int i = 0; i < n; ++i) {
        if (i == root) continue;
        p.add_row(make_row({{md.v[i], 1.0}, {md.w[i], 1.0}}, 2.0, 2.0, Group::VoltageDefinition, false));
        std::vector<std::pair<int, double>> tq{{md.q_inj[i], 1.0}, {md.w[i], -net.q_injection(i)}};
        if (md.q_svc[i] >= 0) tq.push_back({md.q_svc[i], -1.0});
        p.add_row(make_row({{md.p_inj[i], 1.0}, {md.w[i], -net.p_injection(i)}}, 0.0, 0.0, Group::Injection, false));
        p.add_row(make_row(tq, 0.0, 0.0, Group::Injection, false));
    }

    // Compensator range scaled by W.
    for (int i : md.svc_buses) {
        const auto& svc = *net.buses()[i].svc;
        p.add_row(make_row({{md.q_svc[i], 1.0}, {md.w[i], -svc.q_min}}, 0.0, kInf, Group::Svc));
        p.add_row(make_row({{md.q_svc[i], 1.0}, {md.w[i], -svc.q_max}}, -kInf, 0.0, Group::Svc));
    }

    // Radiality: branch count and single-commodity connectivity.
    {
        std::vector<std::pair<int, double>> t;
        for (int b = 0; b < m; ++b) t.push_back({md.x[b], 1.0});
        p.add_row(make_row(t, n - 1.0, n - 1.0, Group::BranchCount));
    }
    if (md.sink_count > 0) {
        const double ns = md.sink_count;
        for (int i = 0; i < n; ++i) {
            if (i == root) continue;
            std::vector<std::pair<int, double>> t;
            for (auto [b, s] : incident[i]) t.push_back({md.k[b], -s});
            const double K = sink[i] ? 1.0 : 0.0;
            p.add_row(make_row(t, K, K, Group::Commodity, false));
        }
        for (int b = 0; b < m; ++b) {
            p.add_row(make_row({{md.k[b], 1.0}, {md.x[b], -ns}}, -kInf, 0.0, Group::Commodity));
            p.add_row(make_row({{md.k[b], 1.0}, {md.x[b], ns}}, 0.0, kInf, Group::Commodity));
        }
    }

    // Branch capacities and phase-angle limits.
    for (int b = 0; b < m; ++b) {
        const auto& br = net.branches()[b];
        const int ws = md.w[md.sending[b]];
        const std::pair<int, std::optional<double>> caps[] = {{md.p_hat[b], br.p_cap}, {md.q_hat[b], br.q_cap}};
        for (const auto& [f, cap] : caps) {
            if (!cap) continue;
            p.add_row(make_row({{f, 1.0}, {ws, -*cap}}, -kInf, 0.0, Group::Capacity));
            p.add_row(make_row({{f, 1.0}, {ws, *cap}}, 0.0, kInf, Group::Capacity));
        }
        if (br.i_cap) md.thermal_branches.push_back(b);
        const double sd = std::sin(br.delta_cap);
        const int wr = md.w[md.receiving[b]];
        p.add_row(make_row({{md.p_hat[b], br.x}, {md.q_hat[b], -br.r}, {wr, sd}}, -kInf, 2.0 * sd, Group::Angle));
        p.add_row(make_row({{md.p_hat[b], br.x}, {md.q_hat[b], -br.r}, {wr, -sd}}, -2.0 * sd, kInf, Group::Angle));
    }

    // Voltage limits on W.
    for (int i = 0; i < n; ++i) {
        if (i == root) continue;
        const auto& bus = net.buses()[i];
        p.add_row(make_row({{md.w[i], 1.0}}, 2.0 - bus.v_max, 2.0 - bus.v_min, Group::VoltageLimit));
    }

    // Root power factor, linear in the total modified root flow.
    if (options.pf_min) {
        const double eta = *options.pf_min;
        const double kq = std::sqrt(eta / (1.0 - eta));
        std::vector<std::pair<int, double>> plus, minus;
        for (auto [b, s] : incident[root]) {
            plus.push_back({md.p_hat[b], s});
            plus.push_back({md.q_hat[b], -kq * s});
            minus.push_back({md.p_hat[b], s});
            minus.push_back({md.q_hat[b], kq * s});
        }
        p.add_row(make_row(plus, 0.0, kInf, Group::PowerFactor));
        p.add_row(make_row(minus, 0.0, kInf, Group::PowerFactor));
    }

    if (options.loop_cuts) {
        md.loops = loop_structure(net);
        for (auto& row : overlap_loop_cuts(md)) p.add_row(std::move(row));
        md.loop_cut_count = static_cast<int>(md.loops.overlap_sets.size());
    }
    return md;
}

std::vector<qp::Row> overlap_loop_cuts(const MiqpModel& md) {
    std::vector<qp::Row> rows;
    for (const auto& set : md.loops.overlap_sets) {
        std::vector<std::pair<int, double>> t;
        for (int b : set.branches) t.push_back({md.x[b], 1.0});
        const double rhs = set.branch_count - set.link_count;
        rows.push_back(make_row(t, rhs, rhs, Group::LoopCut));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Fixed-topology evaluation
// ---------------------------------------------------------------------------

namespace {

// Exact solve of the modified DistFlow system on a tree by elimination:
// leaves first, each W expressed affinely in its parent's W, then a forward
// pass from the root. `q_extra` adds modified reactive injections. With
// `w_root` = 0 and no constant terms this gives the linear part only.
void tree_solve(const Network& net, const RadialTopology& topo, double w_root, const std::vector<double>& q_extra,
                bool homogeneous, std::vector<double>& w) {
    const int n = net.bus_count();
    std::vector<double> c(n, 0.0), d(n, 0.0);       // W_u = c_u + d_u W_parent
    std::vector<double> ap(n, 0.0), bp(n, 0.0);     // subtree sum of P_k W_k = ap + bp W_u
    std::vector<double> aq(n, 0.0), bq(n, 0.0);     // same for Q_k W_k + q_extra_k
    for (auto it = topo.depth_order.rbegin(); it != topo.depth_order.rend(); ++it) {
        const int u = *it;
        if (u == topo.root) continue;
        double sap = 0.0, sbp = net.p_injection(u), saq = q_extra.empty() ? 0.0 : q_extra[u], sbq = net.q_injection(u);
        for (int ch : topo.children[u]) {
            sap += ap[ch] + bp[ch] * c[ch];
            sbp += bp[ch] * d[ch];
            saq += aq[ch] + bq[ch] * c[ch];
            sbq += bq[ch] * d[ch];
        }
        ap[u] = sap;
        bp[u] = sbp;
        aq[u] = saq;
        bq[u] = sbq;
        // W_u = W_p - R (ap + bp W_u) - X (aq + bq W_u)
        const auto& br = net.branches()[topo.parent_branch[u]];
        const double den = 1.0 + br.r * sbp + br.x * sbq;
        if (!(std::abs(den) > 1e-14)) throw IllConditioned(INFINITY, "singular tree elimination");
        c[u] = -(br.r * sap + br.x * saq) / den;
        d[u] = 1.0 / den;
    }
    w.assign(n, 0.0);
    w[topo.root] = homogeneous ? 0.0 : w_root;
    for (int u : topo.depth_order) {
        if (u == topo.root) continue;
        w[u] = c[u] + d[u] * w[topo.parent_bus[u]];
    }
}

// Write the model variables implied by W and the compensator values into z.
void fill_state(const MiqpModel& md, const RadialTopology& topo, const std::vector<double>& w,
                const std::vector<double>& q_extra, bool homogeneous, Eigen::Ref<Eigen::VectorXd> z) {
    const Network& net = md.network;
    const int n = net.bus_count();
    for (int i = 0; i < n; ++i) {
        z(md.w[i]) = w[i];
        z(md.v[i]) = (homogeneous ? 0.0 : 2.0) - w[i];
        if (md.p_inj[i] >= 0) {
            z(md.p_inj[i]) = net.p_injection(i) * w[i];
            z(md.q_inj[i]) = net.q_injection(i) * w[i] + (q_extra.empty() ? 0.0 : q_extra[i]);
        }
        if (md.q_svc[i] >= 0) z(md.q_svc[i]) = q_extra.empty() ? 0.0 : q_extra[i];
    }
    std::vector<double> sp(n, 0.0), sq(n, 0.0), sk(n, 0.0);
    for (auto it = topo.depth_order.rbegin(); it != topo.depth_order.rend(); ++it) {
        const int u = *it;
        if (u == topo.root) continue;
        sp[u] += z(md.p_inj[u]);
        sq[u] += z(md.q_inj[u]);
        if (!homogeneous && (net.buses()[u].dg || net.buses()[u].svc)) sk[u] += 1.0;
        const int par = topo.parent_bus[u];
        sp[par] += sp[u];
        sq[par] += sq[u];
        sk[par] += sk[u];
    }
    for (int b = 0; b < net.branch_count(); ++b) {
        z(md.x[b]) = homogeneous ? 0.0 : (topo.closed[b] ? 1.0 : 0.0);
        double fp = 0.0, fq = 0.0, fk = 0.0;
        if (topo.closed[b]) {
            const int child = topo.receiving_bus(net, b);
            const double s = child == md.receiving[b] ? 1.0 : -1.0;
            fp = -s * sp[child];
            fq = -s * sq[child];
            fk = s * sk[child];
        }
        z(md.p_hat[b]) = fp;
        z(md.q_hat[b]) = fq;
        if (md.k[b] >= 0) z(md.k[b]) = fk;
    }
}

bool row_satisfied(double value, double lo, double hi) {
    const double tol = 1e-9;
    return value >= lo - tol * std::max(1.0, std::abs(lo)) && value <= hi + tol * std::max(1.0, std::abs(hi));
}

// Thermal outer-linearisation cuts for any violated |(P_hat, Q_hat)| <= I_cap.
template <class Add>
bool add_thermal_cuts(const MiqpModel& md, const Eigen::VectorXd& z, Add add) {
    bool added = false;
    for (int b : md.thermal_branches) {
        const double cap = *md.network.branches()[b].i_cap;
        const double pv = z(md.p_hat[b]), qv = z(md.q_hat[b]);
        const double s = std::hypot(pv, qv);
        if (s > cap + md.options.cut_tol) {
            add(make_row({{md.p_hat[b], pv / s}, {md.q_hat[b], qv / s}}, -kInf, cap, Group::Thermal));
            added = true;
        }
    }
    return added;
}

} // namespace

TopologyValue evaluate_topology(const MiqpModel& md, const std::vector<bool>& closed) {
    const Network& net = md.network;
    const RadialTopology topo = build_tree(net, closed);
    const int nz = md.problem.n;
    const int ns = static_cast<int>(md.svc_buses.size());

    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(nz);
    for (int j = 0; j < nz; ++j)
        if (md.problem.lb(j) == md.problem.ub(j)) z0(j) = md.problem.lb(j);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nz, ns);
    std::vector<double> w;
    tree_solve(net, topo, 2.0 - net.v0(), {}, false, w);
    fill_state(md, topo, w, {}, false, z0);
    for (int s = 0; s < ns; ++s) {
        std::vector<double> e(net.bus_count(), 0.0);
        e[md.svc_buses[s]] = 1.0;
        tree_solve(net, topo, 0.0, e, true, w);
        fill_state(md, topo, w, e, true, S.col(s));
    }

    TopologyValue out;
    // The problem in compensator space: z = z0 + S q.
    qp::Problem red(ns);
    red.c0 = qp::evaluate(md.problem, z0);
    if (ns > 0) {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(ns, ns);
        Eigen::VectorXd g = S.transpose() * md.problem.c;
        for (const auto& e : md.problem.hessian) {
            H += e.value * S.row(e.i).transpose() * S.row(e.j);
            g += e.value * z0(e.j) * S.row(e.i).transpose();
        }
        red.c = g;
        for (int i = 0; i < ns; ++i)
            for (int j = 0; j < ns; ++j)
                if (H(i, j) != 0.0) red.hessian.push_back({i, j, H(i, j)});
    }
    auto project = [&](const qp::Row& r) {
        qp::Row pr;
        double shift = 0.0;
        Eigen::VectorXd coef = Eigen::VectorXd::Zero(ns);
        for (auto [j, v] : r.terms) {
            shift += v * z0(j);
            if (ns > 0) coef += v * S.row(j).transpose();
        }
        for (int s = 0; s < ns; ++s)
            if (std::abs(coef(s)) > 1e-12) pr.terms.push_back({s, coef(s)});
        pr.lo = r.lo - shift;
        pr.hi = r.hi - shift;
        pr.elastic = true;
        pr.tag = r.tag;
        return pr;
    };

    if (ns == 0) {
        for (const auto& r : md.problem.rows) {
            double ax = 0.0;
            for (auto [j, v] : r.terms) ax += v * z0(j);
            if (!row_satisfied(ax, r.lo, r.hi)) {
                out.hint = group_name(static_cast<Group>(r.tag));
                return out;
            }
        }
        for (int b : md.thermal_branches)
            if (std::hypot(z0(md.p_hat[b]), z0(md.q_hat[b])) > *net.branches()[b].i_cap + md.options.cut_tol) {
                out.hint = group_name(Group::Thermal);
                return out;
            }
        out.feasible = true;
        out.objective = red.c0;
        out.z = z0;
        return out;
    }

    std::vector<qp::Row> rows;
    for (const auto& r : md.problem.rows) {
        qp::Row pr = project(r);
        if (pr.terms.empty()) {
            if (!row_satisfied(0.0, pr.lo, pr.hi)) {
                out.hint = group_name(static_cast<Group>(r.tag));
                return out;
            }
            continue;
        }
        rows.push_back(std::move(pr));
    }
    // Row generation: start from the compensator limits, add violated rows
    // until none remain. A subset that is already infeasible settles it.
    std::vector<bool> active(rows.size(), false);
    for (std::size_t r = 0; r < rows.size(); ++r) active[r] = rows[r].tag == static_cast<int>(Group::Svc);
    std::vector<qp::Row> cuts;
    int cut_rounds = 0;
    while (true) {
        qp::Problem sub = red;
        for (std::size_t r = 0; r < rows.size(); ++r)
            if (active[r]) sub.add_row(rows[r]);
        for (const auto& c : cuts) sub.add_row(c);
        const qp::Result res = qp::solve(sub);
        if (res.status == qp::Status::Failed && std::count(active.begin(), active.end(), false) > 0) {
            std::fill(active.begin(), active.end(), true);
            continue;
        }
        if (res.status != qp::Status::Optimal) {
            out.hint = res.worst_tag >= 0 ? group_name(static_cast<Group>(res.worst_tag)) : "qp-failure";
            return out;
        }
        bool added = false;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (active[r]) continue;
            double ax = 0.0;
            for (auto [j, v] : rows[r].terms) ax += v * res.x(j);
            if (!row_satisfied(ax, rows[r].lo, rows[r].hi)) {
                active[r] = true;
                added = true;
            }
        }
        if (added) continue;
        const Eigen::VectorXd z = z0 + S * res.x;
        const bool cut = add_thermal_cuts(md, z, [&](const qp::Row& r) { cuts.push_back(project(r)); });
        if (!cut) {
            out.feasible = true;
            out.z = z;
            out.objective = qp::evaluate(md.problem, z);
            return out;
        }
        if (++cut_rounds > md.options.max_cut_rounds) break;
    }
    out.hint = group_name(Group::Thermal);
    return out;
}

// ---------------------------------------------------------------------------
// Solutions
// ---------------------------------------------------------------------------

namespace {

ReconfigSolution solution_from(const MiqpModel& md, const std::vector<bool>& closed, const TopologyValue& tv) {
    const Network& net = md.network;
    ReconfigSolution sol;
    sol.status = SolveStatus::Optimal;
    for (int b = 0; b < net.branch_count(); ++b)
        if (!closed[b]) sol.open_branches.push_back(b);
    const Eigen::VectorXd& z = tv.z;
    for (int i : md.svc_buses) sol.svc.push_back({i, z(md.q_svc[i]), z(md.q_svc[i]) / z(md.w[i])});
    sol.objective_model = tv.objective;
    double loss = 0.0;
    for (int b = 0; b < net.branch_count(); ++b) {
        const double pv = z(md.p_hat[b]), qv = z(md.q_hat[b]);
        loss += net.branches()[b].r * (pv * pv + qv * qv);
        const double dx = z(md.x[b]) - md.x0[b];
        sol.switch_term += md.weights.beta * dx * dx;
    }
    for (int i = 0; i < net.bus_count(); ++i) {
        const double dv = z(md.v[i]) - 1.0;
        sol.deviation_term += md.weights.gamma * dv * dv;
    }
    sol.loss_term = md.weights.alpha * net.base_mva() * loss;
    sol.loss_model_kw = loss * net.base_mva() * 1000.0;
    return sol;
}

void attach_acpf(const Network& net, const ObjectiveWeights& weights, ReconfigSolution& sol) {
    const AcEvaluation ev = evaluate_with_acpf(net, sol, weights);
    sol.acpf_applicable = ev.applicable;
    sol.objective_acpf = ev.objective;
    sol.loss_acpf_kw = ev.loss_kw;
    sol.v_avg = ev.v_avg;
    sol.v_min = ev.v_min;
}

// Lexicographic preference among equal objectives keeps results deterministic.
bool better(double obj, const std::vector<bool>& closed, double best_obj, const std::vector<bool>& best_closed) {
    const double tol = 1e-12 * std::max(1.0, std::abs(best_obj));
    if (obj < best_obj - tol) return true;
    if (obj > best_obj + tol) return false;
    // fewer-index open branches first: compare open sets
    for (std::size_t b = 0; b < closed.size(); ++b)
        if (closed[b] != best_closed[b]) return !closed[b];
    return false;
}

// Radiality propagation on switch fixings (-1 free, 0 open, 1 closed).
// Returns false when no spanning tree is compatible.
bool propagate(const Network& net, std::vector<int>& fix) {
    const int n = net.bus_count();
    const int m = net.branch_count();
    for (bool changed = true; changed;) {
        changed = false;
        UnionFind uc(n);
        int n_closed = 0;
        for (int b = 0; b < m; ++b)
            if (fix[b] == 1) {
                if (!uc.unite(net.from_index(b), net.to_index(b))) return false;
                ++n_closed;
            }
        if (n_closed > n - 1) return false;
        for (int b = 0; b < m; ++b)
            if (fix[b] < 0 && uc.find(net.from_index(b)) == uc.find(net.to_index(b))) {
                fix[b] = 0;
                changed = true;
            }
        UnionFind ua(n);
        int n_avail = 0, comps = n;
        for (int b = 0; b < m; ++b)
            if (fix[b] != 0) {
                ++n_avail;
                if (ua.unite(net.from_index(b), net.to_index(b))) --comps;
            }
        if (comps > 1 || n_avail < n - 1) return false;
        if (n_closed == n - 1 || n_avail == n - 1) {
            const int value = n_closed == n - 1 ? 0 : 1;
            for (int b = 0; b < m; ++b)
                if (fix[b] < 0) {
                    fix[b] = value;
                    changed = true;
                }
            continue;
        }
        // Bridges of the available graph must be closed.
        std::vector<std::vector<std::pair<int, int>>> adj(n);
        for (int b = 0; b < m; ++b)
            if (fix[b] != 0) {
                adj[net.from_index(b)].push_back({net.to_index(b), b});
                adj[net.to_index(b)].push_back({net.from_index(b), b});
            }
        std::vector<int> disc(n, -1), low(n, 0);
        int timer = 0;
        struct Frame {
            int u, via, next;
        };
        std::vector<Frame> stack{{net.root(), -1, 0}};
        disc[net.root()] = low[net.root()] = timer++;
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < static_cast<int>(adj[f.u].size())) {
                auto [v, b] = adj[f.u][f.next++];
                if (b == f.via) continue;
                if (disc[v] < 0) {
                    disc[v] = low[v] = timer++;
                    stack.push_back({v, b, 0});
                } else {
                    low[f.u] = std::min(low[f.u], disc[v]);
                }
            } else {
                const Frame done = f;
                stack.pop_back();
                if (!stack.empty()) {
                    Frame& parent = stack.back();
                    low[parent.u] = std::min(low[parent.u], low[done.u]);
                    if (low[done.u] > disc[parent.u] && fix[done.via] < 0) {
                        fix[done.via] = 1;
                        changed = true;
                    }
                }
            }
        }
    }
    return true;
}

// Every spanning tree compatible with `fix` (and with the loop cuts when
// `loops` is given), or nothing when there are more than `cap`.
std::optional<std::vector<std::vector<bool>>> completions(const Network& net, const std::vector<int>& fix,
                                                          const LoopStructure* loops, long cap) {
    const int n = net.bus_count();
    const int m = net.branch_count();
    std::vector<int> free;
    UnionFind base(n);
    int closed0 = 0;
    for (int b = 0; b < m; ++b) {
        if (fix[b] < 0) free.push_back(b);
        if (fix[b] == 1) {
            if (!base.unite(net.from_index(b), net.to_index(b))) return std::vector<std::vector<bool>>{};
            ++closed0;
        }
    }
    std::vector<std::vector<bool>> out;
    std::vector<bool> closed(m);
    for (int b = 0; b < m; ++b) closed[b] = fix[b] == 1;
    const int nf = static_cast<int>(free.size());
    bool over = false;
    long trees = 0;
    auto dfs = [&](auto&& self, int i, int count, UnionFind uf) -> void {
        if (over || count + (nf - i) < n - 1) return;
        if (count == n - 1) {
            if (++trees > 4 * cap) {
                over = true;
                return;
            }
            for (int j = i; j < nf; ++j) closed[free[j]] = false;
            if (loops) {
                for (const auto& set : loops->overlap_sets) {
                    int open = 0;
                    for (int b : set.branches) open += closed[b] ? 0 : 1;
                    if (open != set.link_count) return;
                }
            }
            if (static_cast<long>(out.size()) >= cap) {
                over = true;
                return;
            }
            out.push_back(closed);
            return;
        }
        const int b = free[i];
        UnionFind next = uf;
        if (next.unite(net.from_index(b), net.to_index(b))) {
            closed[b] = true;
            self(self, i + 1, count + 1, std::move(next));
        }
        closed[b] = false;
        self(self, i + 1, count, std::move(uf));
    };
    dfs(dfs, 0, closed0, base);
    if (over) return std::nullopt;
    return out;
}

// Spanning tree preferring large relaxation values; fixed branches respected.
std::optional<std::vector<bool>> round_to_tree(const Network& net, const std::vector<int>& fix,
                                               const Eigen::VectorXd& xval) {
    const int n = net.bus_count();
    const int m = net.branch_count();
    std::vector<int> order;
    for (int b = 0; b < m; ++b)
        if (fix[b] != 0) order.push_back(b);
    auto weight = [&](int b) { return fix[b] == 1 ? 2.0 : xval(b); };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return weight(a) > weight(b); });
    UnionFind uf(n);
    std::vector<bool> closed(m, false);
    int count = 0;
    for (int b : order) {
        if (uf.unite(net.from_index(b), net.to_index(b))) {
            closed[b] = true;
            ++count;
        } else if (fix[b] == 1) {
            return std::nullopt;
        }
    }
    if (count != n - 1) return std::nullopt;
    return closed;
}

struct Node {
    double bound;
    long id;
    std::vector<int> fix;
    int branched = -1;   // branch fixed to create this node
    double moved = 0.0;  // how far its relaxed value had to move
};
struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;
    }
};

// Pseudocost product score; branches without history in a direction borrow
// the mean over those that have it. Falls back to most fractional until any
// history exists. Lowest index wins ties.
int choose_branch(const std::vector<int>& fix, const Eigen::VectorXd& xval,
                  const std::vector<std::array<double, 2>>& pc_sum, const std::vector<std::array<int, 2>>& pc_n) {
    const int m = static_cast<int>(fix.size());
    double mean[2] = {0.0, 0.0};
    int have[2] = {0, 0};
    for (int b = 0; b < m; ++b)
        for (int d = 0; d < 2; ++d)
            if (pc_n[b][d] > 0) {
                mean[d] += pc_sum[b][d] / pc_n[b][d];
                ++have[d];
            }
    const bool use_pc = have[0] > 0 && have[1] > 0;
    for (int d = 0; d < 2; ++d) mean[d] = have[d] ? mean[d] / have[d] : 1.0;

    int best = -1;
    double best_score = -1.0;
    for (int b = 0; b < m; ++b) {
        const double f = xval(b);
        const double frac = std::min(f, 1.0 - f);
        if (fix[b] >= 0 || frac <= 1e-6) continue;
        double score = frac;
        if (use_pc) {
            const double down = pc_n[b][0] ? pc_sum[b][0] / pc_n[b][0] : mean[0];
            const double up = pc_n[b][1] ? pc_sum[b][1] / pc_n[b][1] : mean[1];
            score = std::max(down * f, 1e-6) * std::max(up * (1.0 - f), 1e-6);
        }
        if (score > best_score * (1.0 + 1e-12) + 1e-300) {
            best_score = score;
            best = b;
        }
    }
    return best;
}

} // namespace

ReconfigSolution solve_miqp(const MiqpModel& md) {
    const auto t0 = std::chrono::steady_clock::now();
    const Network& net = md.network;
    const int m = net.branch_count();
    const auto& opt = md.options;

    std::vector<qp::Row> pool;  // thermal cuts and no-good cuts
    long qp_solves = 0, nodes = 0, no_goods = 0, candidates = 0;
    // Exact evaluation is cheaper without compensators (no inner QP).
    const long leaf_cap = md.svc_buses.empty() ? opt.leaf_enumeration : opt.leaf_enumeration / 4;

    bool have_inc = false;
    double inc_obj = kInf;
    std::vector<bool> inc_closed;
    TopologyValue inc_value;
    std::map<std::vector<bool>, std::pair<bool, double>> seen;

    auto try_incumbent = [&](const std::vector<bool>& closed) {
        auto it = seen.find(closed);
        if (it != seen.end()) return;
        TopologyValue tv = evaluate_topology(md, closed);
        seen.emplace(closed, std::make_pair(tv.feasible, tv.objective));
        if (!tv.feasible) return;
        if (!have_inc || better(tv.objective, closed, inc_obj, inc_closed)) {
            have_inc = true;
            inc_obj = tv.objective;
            inc_closed = closed;
            inc_value = std::move(tv);
        }
    };
    auto prunable = [&](double bound) {
        return have_inc && bound >= inc_obj - opt.gap * std::max(1.0, std::abs(inc_obj));
    };

    std::vector<int> root_fix(m, -1);
    for (int b = 0; b < m; ++b)
        if (!net.branches()[b].switchable) root_fix[b] = static_cast<int>(md.x0[b]);

    // Default configuration as the first incumbent.
    try {
        try_incumbent(net.normally_closed());
    } catch (const Error&) {
    }

    // pseudocosts: bound gain per unit change, [branch][down/up]
    std::vector<std::array<double, 2>> pc_sum(m, {0.0, 0.0});
    std::vector<std::array<int, 2>> pc_n(m, {0, 0});

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    long next_id = 0;
    open.push({-kInf, next_id++, root_fix});
    std::string root_hint;
    bool root_done = false;
    bool budget_hit = false;
    double best_open_bound = kInf;

    while (!open.empty()) {
        if (nodes >= opt.max_nodes || seconds_since(t0) > opt.time_limit) {
            budget_hit = true;
            break;
        }
        Node node = open.top();
        open.pop();
        if (prunable(node.bound)) continue;
        ++nodes;
        if (opt.propagate && !propagate(net, node.fix)) {
            if (!root_done) root_hint = group_name(Group::BranchCount);
            root_done = true;
            continue;
        }
        if (root_done && leaf_cap > 0) {
            if (auto all = completions(net, node.fix, md.loop_cut_count ? &md.loops : nullptr, leaf_cap)) {
                for (const auto& closed : *all) try_incumbent(closed);
                candidates += static_cast<long>(all->size());
                continue;
            }
        }

        qp::Problem p = md.problem;
        for (int b = 0; b < m; ++b)
            if (node.fix[b] >= 0) p.lb(md.x[b]) = p.ub(md.x[b]) = node.fix[b];
        for (const auto& r : pool) p.add_row(r);
        qp::Result res;
        bool feasible = false;
        for (int round = 0; round <= opt.max_cut_rounds; ++round) {
            res = qp::solve(p);
            ++qp_solves;
            if (res.status == qp::Status::Failed)
                throw Error("node relaxation failed to converge after " + std::to_string(res.iterations) +
                            " interior-point iterations");
            if (res.status != qp::Status::Optimal) break;
            const bool cut = add_thermal_cuts(md, res.x, [&](const qp::Row& r) {
                pool.push_back(r);
                p.add_row(r);
            });
            if (!cut) {
                feasible = true;
                break;
            }
        }
        if (!feasible) {
            if (!root_done)
                root_hint = res.worst_tag >= 0 ? group_name(static_cast<Group>(res.worst_tag)) : "thermal-limit";
            root_done = true;
            continue;
        }
        root_done = true;
        const double bound = std::max(node.bound, res.objective);
        if (node.branched >= 0 && node.moved > 1e-6) {
            const int dir = node.fix[node.branched];
            pc_sum[node.branched][dir] += (bound - node.bound) / node.moved;
            ++pc_n[node.branched][dir];
        }
        if (prunable(bound)) continue;

        Eigen::VectorXd xval(m);
        for (int b = 0; b < m; ++b) xval(b) = res.x(md.x[b]);
        const int branch_on = choose_branch(node.fix, xval, pc_sum, pc_n);

        if (branch_on < 0) {
            std::vector<bool> closed(m);
            for (int b = 0; b < m; ++b) closed[b] = xval(b) > 0.5;
            bool radial = true;
            try {
                build_tree(net, closed);
            } catch (const Error&) {
                radial = false;
            }
            if (radial) {
                try_incumbent(closed);
                continue;
            }
            std::vector<std::pair<int, double>> t;
            int ones = 0;
            for (int b = 0; b < m; ++b) {
                t.push_back({md.x[b], closed[b] ? 1.0 : -1.0});
                ones += closed[b] ? 1 : 0;
            }
            pool.push_back(make_row(t, -kInf, ones - 1.0, Group::NoGood));
            ++no_goods;
            open.push({bound, next_id++, node.fix});
            continue;
        }

        if (auto rounded = round_to_tree(net, node.fix, xval)) try_incumbent(*rounded);
        if (prunable(bound)) continue;

        Node up{bound, next_id++, node.fix, branch_on, 1.0 - xval(branch_on)};
        up.fix[branch_on] = 1;
        Node down{bound, next_id++, node.fix, branch_on, xval(branch_on)};
        down.fix[branch_on] = 0;
        open.push(std::move(up));
        open.push(std::move(down));
    }
    while (!open.empty()) {
        if (!prunable(open.top().bound)) best_open_bound = std::min(best_open_bound, open.top().bound);
        open.pop();
    }

    if (!have_inc) {
        if (budget_hit) {
            ReconfigSolution sol;
            sol.status = SolveStatus::Incomplete;
            sol.method = "branch-and-bound";
            sol.nodes = nodes;
            sol.qp_solves = qp_solves;
            sol.wall_time = seconds_since(t0);
            sol.gap = kInf;
            return sol;
        }
        throw Infeasible(root_hint.empty() ? "radiality" : root_hint,
                         "reconfiguration problem is infeasible (first violated group: " +
                             (root_hint.empty() ? std::string("radiality") : root_hint) + ")");
    }

    ReconfigSolution sol = solution_from(md, inc_closed, inc_value);
    sol.method = "branch-and-bound";
    sol.nodes = nodes;
    sol.qp_solves = qp_solves;
    sol.no_good_cuts = no_goods;
    sol.candidates = candidates;
    if (budget_hit) {
        sol.status = SolveStatus::Incomplete;
        const double lb = std::min(best_open_bound, inc_obj);
        sol.gap = (inc_obj - lb) / std::max(1.0, std::abs(inc_obj));
    } else {
        sol.status = SolveStatus::Optimal;
        sol.gap = 0.0;
    }
    attach_acpf(net, md.weights, sol);
    sol.wall_time = seconds_since(t0);
    return sol;
}

ReconfigSolution enumerate_radial(const Network& net, const ObjectiveWeights& weights, const MiqpOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    MiqpOptions o = options;
    o.loop_cuts = false;
    MiqpModel md = build_miqp(net, weights, o);
    const LoopStructure loops = loop_structure(net);
    const int m = net.branch_count();

    std::vector<bool> in_set(m, false);
    std::vector<std::vector<std::vector<int>>> choices;
    double count = 1.0;
    for (const auto& set : loops.overlap_sets) {
        for (int b : set.branches) in_set[b] = true;
        double c = 1.0;
        for (int i = 0; i < set.link_count; ++i) c = c * (set.branch_count - i) / (i + 1);
        count *= c;
        if (count > static_cast<double>(options.enumeration_cap))
            throw TooLarge(count, "enumeration would visit more than " + std::to_string(options.enumeration_cap) +
                                      " candidate configurations");
    }
    for (const auto& set : loops.overlap_sets) {
        std::vector<std::vector<int>> list;
        const int N = set.branch_count, L = set.link_count;
        std::vector<int> pick(L);
        std::iota(pick.begin(), pick.end(), 0);
        while (true) {
            std::vector<int> opened;
            bool ok = true;
            for (int i : pick) {
                const int b = set.branches[i];
                if (!net.branches()[b].switchable) ok = false;
                opened.push_back(b);
            }
            if (ok) list.push_back(std::move(opened));
            int i = L - 1;
            while (i >= 0 && pick[i] == N - L + i) --i;
            if (i < 0) break;
            ++pick[i];
            for (int j = i + 1; j < L; ++j) pick[j] = pick[j - 1] + 1;
        }
        choices.push_back(std::move(list));
    }

    bool have = false;
    double best_obj = kInf;
    std::vector<bool> best_closed;
    TopologyValue best_value;
    long candidates = 0;
    std::string last_hint;
    const int sets = static_cast<int>(choices.size());
    std::vector<int> digit(sets, 0);
    bool empty = false;
    for (const auto& c : choices) empty = empty || c.empty();
    while (!empty) {
        std::vector<bool> closed(m, true);
        for (int s = 0; s < sets; ++s)
            for (int b : choices[s][digit[s]]) closed[b] = false;
        UnionFind uf(net.bus_count());
        bool tree = true;
        for (int b = 0; b < m && tree; ++b)
            if (closed[b]) tree = uf.unite(net.from_index(b), net.to_index(b));
        if (tree) {
            ++candidates;
            TopologyValue tv = evaluate_topology(md, closed);
            if (tv.feasible && (!have || better(tv.objective, closed, best_obj, best_closed))) {
                have = true;
                best_obj = tv.objective;
                best_closed = closed;
                best_value = std::move(tv);
            } else if (!tv.feasible) {
                last_hint = tv.hint;
            }
        }
        int s = sets - 1;
        while (s >= 0 && ++digit[s] == static_cast<int>(choices[s].size())) digit[s--] = 0;
        if (s < 0) break;
    }
    if (!have)
        throw Infeasible(last_hint.empty() ? "radiality" : last_hint,
                         "no radial configuration is feasible (" + (last_hint.empty() ? "radiality" : last_hint) + ")");
    ReconfigSolution sol = solution_from(md, best_closed, best_value);
    sol.method = "enumeration";
    sol.candidates = candidates;
    attach_acpf(net, weights, sol);
    sol.wall_time = seconds_since(t0);
    return sol;
}

AcEvaluation evaluate_with_acpf(const Network& net, const ReconfigSolution& sol, const ObjectiveWeights& weights) {
    const int m = net.branch_count();
    const int n = net.bus_count();
    std::vector<bool> closed(m, true);
    for (int b : sol.open_branches) closed.at(b) = false;
    const RadialTopology topo = build_tree(net, closed);
    std::vector<double> extra(n, 0.0);
    for (const auto& s : sol.svc) extra.at(s.bus) += s.q;

    AcEvaluation ev;
    AcSolution ac;
    try {
        ac = solve_acpf(net, topo, {}, extra);
    } catch (const NonConvergent&) {
        return ev;
    } catch (const Diverged&) {
        return ev;
    }
    ev.applicable = true;
    double switching = 0.0;
    for (int b = 0; b < m; ++b) {
        const double dx = (closed[b] ? 1.0 : 0.0) - (net.branches()[b].normally_open ? 0.0 : 1.0);
        switching += dx * dx;
    }
    double dev = 0.0, vs = 0.0;
    ev.v_min = kInf;
    for (int i = 0; i < n; ++i) {
        dev += (ac.v[i] - 1.0) * (ac.v[i] - 1.0);
        vs += ac.v[i];
        ev.v_min = std::min(ev.v_min, ac.v[i]);
    }
    ev.v_avg = vs / n;
    ev.loss_kw = ac.loss_total * net.base_mva() * 1000.0;
    ev.objective = weights.alpha * net.base_mva() * ac.loss_total + weights.beta * switching + weights.gamma * dev;
    return ev;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string solution_json(const Network& net, const ReconfigSolution& sol) {
    nlohmann::ordered_json j;
    j["status"] = status_name(sol.status);
    j["method"] = sol.method;
    auto& ob = j["open_branches"] = nlohmann::ordered_json::array();
    for (int b : sol.open_branches) ob.push_back(net.branches()[b].name());
    auto& sv = j["svc"] = nlohmann::ordered_json::array();
    for (const auto& s : sol.svc)
        sv.push_back({{"bus", net.buses()[s.bus].id},
                      {"q_hat", s.q_hat},
                      {"q", s.q},
                      {"q_mvar", s.q * net.base_mva()}});
    j["objective_model"] = sol.objective_model;
    j["terms"] = {{"loss", sol.loss_term}, {"switching", sol.switch_term}, {"deviation", sol.deviation_term}};
    j["loss_model_kw"] = sol.loss_model_kw;
    j["acpf_applicable"] = sol.acpf_applicable;
    if (sol.acpf_applicable) {
        j["objective_acpf"] = sol.objective_acpf;
        j["loss_acpf_kw"] = sol.loss_acpf_kw;
        j["v_avg"] = sol.v_avg;
        j["v_min"] = sol.v_min;
    }
    if (std::isfinite(sol.gap)) j["gap"] = sol.gap;
    j["wall_time_s"] = sol.wall_time;
    j["nodes"] = sol.nodes;
    j["qp_solves"] = sol.qp_solves;
    j["no_good_cuts"] = sol.no_good_cuts;
    j["candidates"] = sol.candidates;
    return j.dump(2) + "\n";
}

std::string solution_csv_header() {
    return "scenario,status,method,open_branches,objective_model,objective_acpf,loss_acpf_kw,v_avg,gap,wall_time_s\n";
}

std::string solution_csv_row(const Network& net, const std::string& label, const ReconfigSolution& sol) {
    std::string open;
    for (int b : sol.open_branches) {
        if (!open.empty()) open += ' ';
        open += net.branches()[b].name();
    }
    char buf[512];
    if (sol.acpf_applicable)
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%.6f,%.6f,%.4f,%.6f,%.3g,%.3f\n", label.c_str(),
                      status_name(sol.status), sol.method.c_str(), open.c_str(), sol.objective_model,
                      sol.objective_acpf, sol.loss_acpf_kw, sol.v_avg, sol.gap, sol.wall_time);
    else
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%.6f,NA,NA,NA,%.3g,%.3f\n", label.c_str(),
                      status_name(sol.status), sol.method.c_str(), open.c_str(), sol.objective_model, sol.gap,
                      sol.wall_time);
    return buf;
}

ReconfigSolution parse_solution_json(const Network& net, const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("<solution>", e.what());
    }
    ReconfigSolution sol;
    try {
        const std::string st = j.at("status").get<std::string>();
        sol.status = st == "optimal" ? SolveStatus::Optimal
                                     : (st == "incomplete" ? SolveStatus::Incomplete : SolveStatus::Infeasible);
        sol.method = j.value("method", "");
        for (const auto& name : j.at("open_branches")) {
            const int b = net.find_branch(name.get<std::string>());
            if (b < 0) throw ValidationError("unknown branch " + name.get<std::string>() + " in solution");
            sol.open_branches.push_back(b);
        }
        std::sort(sol.open_branches.begin(), sol.open_branches.end());
        for (const auto& s : j.at("svc"))
            sol.svc.push_back({net.bus_index(s.at("bus").get<int>()), s.at("q_hat").get<double>(),
                               s.at("q").get<double>()});
        sol.objective_model = j.at("objective_model").get<double>();
        sol.loss_term = j.at("terms").at("loss").get<double>();
        sol.switch_term = j.at("terms").at("switching").get<double>();
        sol.deviation_term = j.at("terms").at("deviation").get<double>();
        sol.loss_model_kw = j.value("loss_model_kw", 0.0);
        sol.acpf_applicable = j.value("acpf_applicable", false);
        sol.objective_acpf = j.value("objective_acpf", 0.0);
        sol.loss_acpf_kw = j.value("loss_acpf_kw", 0.0);
        sol.v_avg = j.value("v_avg", 0.0);
        sol.v_min = j.value("v_min", 0.0);
        sol.gap = j.value("gap", kInf);
        sol.wall_time = j.value("wall_time_s", 0.0);
        sol.nodes = j.value("nodes", 0L);
        sol.qp_solves = j.value("qp_solves", 0L);
        sol.no_good_cuts = j.value("no_good_cuts", 0L);
        sol.candidates = j.value("candidates", 0L);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("<solution>", e.what());
    }
    return sol;
}

} // namespace gridflow
