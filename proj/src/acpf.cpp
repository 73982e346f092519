#include "gridflow/acpf.hpp"

#include "gridflow/errors.hpp"

#include <cmath>
#include <complex>

namespace gridflow {

using cplx = std::complex<double>;

namespace {

// Max |S_calc - S_sched| over all buses for the voltages `V`, with branch
// currents taken from the voltage differences.
double power_mismatch(const Network& net, const RadialTopology& topo, const std::vector<cplx>& V,
                      const std::vector<cplx>& load) {
    const int n = net.bus_count();
    std::vector<cplx> I_out(n, cplx{});  // current leaving each bus into the network
    for (int u : topo.depth_order) {
        const int k = topo.parent_branch[u];
        if (k < 0) continue;
        const auto& br = net.branches()[k];
        const int p = topo.parent_bus[u];
        const cplx J = (V[p] - V[u]) / cplx(br.r, br.x);
        I_out[p] += J;
        I_out[u] -= J;
    }
    double worst = 0.0;
    for (int u = 0; u < n; ++u) {
        if (u == topo.root) continue;
        // injection into the network = -load
        const cplx s = V[u] * std::conj(I_out[u]);
        worst = std::max(worst, std::abs(s + load[u]));
    }
    return worst;
}

} // namespace

AcSolution solve_acpf(const Network& net, const RadialTopology& topo, const AcOptions& options,
                      const std::vector<double>& extra_q) {
    if (!(options.tol > 0.0)) throw ValidationError("ACPF tolerance must be positive");
    const int n = net.bus_count();
    const int m = net.branch_count();
    if (!extra_q.empty() && static_cast<int>(extra_q.size()) != n)
        throw ValidationError("extra reactive injection vector has wrong length");

    std::vector<cplx> load(n);
    for (int u = 0; u < n; ++u) {
        const double q_extra = extra_q.empty() ? 0.0 : extra_q[u];
        load[u] = cplx(-net.p_injection(u), -net.q_injection(u) - q_extra);
    }

    std::vector<cplx> V(n, cplx(net.v0(), 0.0));
    std::vector<cplx> J(n, cplx{});  // current on the branch feeding each bus
    AcSolution sol;
    double residual = power_mismatch(net, topo, V, load);
    int it = 0;
    while (true) {
        ++it;
        for (auto r = topo.depth_order.rbegin(); r != topo.depth_order.rend(); ++r) {
            const int u = *r;
            if (u == topo.root) continue;
            cplx acc = std::conj(load[u] / V[u]);
            for (int c : topo.children[u]) acc += J[c];
            J[u] = acc;
        }
        for (int u : topo.depth_order) {
            if (u == topo.root) continue;
            const auto& br = net.branches()[topo.parent_branch[u]];
            V[u] = V[topo.parent_bus[u]] - cplx(br.r, br.x) * J[u];
            if (std::abs(V[u]) < options.collapse_voltage)
                throw Diverged("voltage collapsed below " + std::to_string(options.collapse_voltage) +
                               " p.u. at bus " + std::to_string(net.buses()[u].id));
        }
        residual = power_mismatch(net, topo, V, load);
        if (!std::isfinite(residual)) throw Diverged("AC sweep produced non-finite voltages");
        if (residual <= options.tol) break;
        if (it >= options.max_iter)
            throw NonConvergent(it, residual,
                                "AC sweep did not converge in " + std::to_string(it) + " iterations (residual " +
                                    std::to_string(residual) + ")");
    }

    sol.iterations = it;
    sol.root = topo.root;
    sol.residual = residual;
    sol.v.resize(n);
    sol.delta.resize(n);
    for (int u = 0; u < n; ++u) {
        sol.v[u] = std::abs(V[u]);
        sol.delta[u] = std::arg(V[u]);
    }
    sol.p_flow.assign(m, 0.0);
    sol.q_flow.assign(m, 0.0);
    cplx root_s{};
    for (int u : topo.depth_order) {
        const int k = topo.parent_branch[u];
        if (k < 0) continue;
        const int p = topo.parent_bus[u];
        const auto& br = net.branches()[k];
        const cplx Jb = (V[p] - V[u]) / cplx(br.r, br.x);
        const cplx s = V[p] * std::conj(Jb);
        sol.p_flow[k] = s.real();
        sol.q_flow[k] = s.imag();
        sol.loss_total += br.r * std::norm(Jb);
        if (p == topo.root) root_s += s;
    }
    sol.root_p = root_s.real() - net.p_injection(topo.root);
    sol.root_q = root_s.imag() - net.q_injection(topo.root) - (extra_q.empty() ? 0.0 : extra_q[topo.root]);
    return sol;
}

TwoBusResult two_bus_exact(double r, double x, double p_d, double q_d, double v_i) {
    if (!(v_i > 0.0)) throw ValidationError("sending voltage must be positive");
    // U = V_j^2 solves U^2 + (2(rP + xQ) - V_i^2) U + (r^2 + x^2)(P^2 + Q^2) = 0
    const double b = v_i * v_i - 2.0 * (r * p_d + x * q_d);
    const double c = (r * r + x * x) * (p_d * p_d + q_d * q_d);
    const double disc = b * b - 4.0 * c;
    if (disc < 0.0 || b <= 0.0) throw Infeasible("loadability", "two-bus load exceeds the loadability limit");
    const double sq = std::sqrt(disc);
    // b + sqrt(disc) computed directly; the low root is c / U_high.
    const double u = 0.5 * (b + sq);
    TwoBusResult out;
    out.v_j = std::sqrt(u);
    const double i2 = (p_d * p_d + q_d * q_d) / u;
    out.p_ij = p_d + r * i2;
    out.q_ij = q_d + x * i2;
    out.delta_ij = std::asin((x * out.p_ij - r * out.q_ij) / (v_i * out.v_j));
    return out;
}

} // namespace gridflow
