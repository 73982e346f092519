#include "support.hpp"

#include "gridflow/acpf.hpp"
#include "gridflow/errors.hpp"
#include "gridflow/linear_flow.hpp"

#include <doctest.h>

#include <cmath>

using namespace gridflow;

namespace {

// Modified DistFlow by plain iteration on the BFS tree: flows by recursive
// subtree sums, W by root-to-leaf accumulation.
struct Reference {
    std::vector<double> w, p_hat, q_hat;
};

Reference reference_md(const Network& net, const std::vector<bool>& closed, const std::vector<double>& q_extra = {}) {
    const support::Bfs t = support::bfs_tree(net, closed);
    const int n = net.bus_count();
    Reference r{std::vector<double>(n, 2.0 - net.v0()), std::vector<double>(net.branch_count(), 0.0),
                std::vector<double>(net.branch_count(), 0.0)};
    for (int it = 0; it < 1000; ++it) {
        std::vector<double> p(n), q(n);
        for (int i = 0; i < n; ++i) {
            p[i] = i == net.root() ? 0.0 : net.p_injection(i) * r.w[i];
            q[i] = i == net.root() ? 0.0 : net.q_injection(i) * r.w[i] + (q_extra.empty() ? 0.0 : q_extra[i]);
        }
        for (int u = 0; u < n; ++u)
            if (t.parent_branch[u] >= 0) {
                r.p_hat[t.parent_branch[u]] = -support::subtree_sum(t, p, u);
                r.q_hat[t.parent_branch[u]] = -support::subtree_sum(t, q, u);
            }
        double change = 0.0;
        for (int u : t.order) {
            const int b = t.parent_branch[u];
            if (b < 0) continue;
            const double next = r.w[t.parent_bus[u]] + net.branches()[b].r * r.p_hat[b] + net.branches()[b].x * r.q_hat[b];
            change = std::max(change, std::abs(next - r.w[u]));
            r.w[u] = next;
        }
        if (change < 1e-15) break;
    }
    return r;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

const char* kFixtures[] = {"case33bw.json", "case33bw_dg.json", "case33bw_dg_svc.json", "case141.json",
                           "overlapping_loops.json", "six_bus_branching.json", "two_bus.json"};

} // namespace

TEST_CASE("three modified DistFlow pipelines agree with each other and a reference") {
    for (const char* file : kFixtures) {
        for (double scale : {1.0, 2.5}) {
            CAPTURE(file);
            CAPTURE(scale);
            const Network net = load_case(support::data(file)).with_load_scale(scale);
            const auto closed = net.normally_closed();
            const RadialTopology t = build_tree(net, closed);
            const LinearSolution a = solve_md_closed_form(net, t);
            const LinearSolution b = solve_md_fixed_point(net, t);
            const LinearSolution c = solve_md_sweep(net, t);
            const Reference ref = reference_md(net, closed);
            for (const LinearSolution* s : {&b, &c}) {
                CHECK(max_diff(a.w, s->w) <= 1e-10);
                CHECK(max_diff(a.p_hat, s->p_hat) <= 1e-10);
                CHECK(max_diff(a.q_hat, s->q_hat) <= 1e-10);
                CHECK(max_diff(a.p_flow, s->p_flow) <= 1e-10);
            }
            CHECK(max_diff(a.w, ref.w) <= 1e-10);
            CHECK(max_diff(a.p_hat, ref.p_hat) <= 1e-10);
            CHECK(max_diff(a.q_hat, ref.q_hat) <= 1e-10);
            CHECK(b.iterations > 0);
        }
    }
}

TEST_CASE("modified reactive injection enters all pipelines the same way") {
    const Network net = load_case(support::data("case33bw_dg_svc.json"));
    const auto closed = net.normally_closed();
    const RadialTopology t = build_tree(net, closed);
    ModifiedInjection extra;
    extra.q_hat.assign(net.bus_count(), 0.0);
    extra.q_hat[net.bus_index(30)] = 0.04;
    const LinearSolution a = solve_md_closed_form(net, t, extra);
    const LinearSolution b = solve_md_fixed_point(net, t, {}, extra);
    const LinearSolution c = solve_md_sweep(net, t, {}, extra);
    const Reference ref = reference_md(net, closed, extra.q_hat);
    CHECK(max_diff(a.w, b.w) <= 1e-10);
    CHECK(max_diff(a.w, c.w) <= 1e-10);
    CHECK(max_diff(a.w, ref.w) <= 1e-10);
    CHECK(max_diff(a.q_hat, ref.q_hat) <= 1e-10);
}

TEST_CASE("path sums match recursive subtree sums") {
    const Network net = load_case(support::data("case141.json"));
    const auto closed = net.normally_closed();
    const RadialTopology t = build_tree(net, closed);
    const support::Bfs ref = support::bfs_tree(net, closed);
    std::vector<double> p(net.bus_count()), q(net.bus_count());
    for (int i = 0; i < net.bus_count(); ++i) {
        p[i] = std::sin(1.0 + i);
        q[i] = std::cos(0.5 * i);
    }
    p[net.root()] = q[net.root()] = 0.0;
    const BranchFlows f = path_sum_flows(net, t, p, q);
    for (int u = 0; u < net.bus_count(); ++u) {
        const int b = ref.parent_branch[u];
        if (b < 0) continue;
        CHECK(std::abs(f.p[b] + support::subtree_sum(ref, p, u)) < 1e-12);
        CHECK(std::abs(f.q[b] + support::subtree_sum(ref, q, u)) < 1e-12);
    }
    CHECK_THROWS_AS(path_sum_flows(net, t, {1.0}, q), ValidationError);
}

TEST_CASE("modified balance and drop equations hold to round-off") {
    for (const char* file : kFixtures) {
        CAPTURE(file);
        const Network net = load_case(support::data(file));
        const RadialTopology t = build_tree(net, net.normally_closed());
        const LinearSolution s = solve_md_closed_form(net, t);
        double kcl = 0.0, drop = 0.0;
        for (int u = 0; u < net.bus_count(); ++u) {
            if (u == t.root) continue;
            double bp = s.p_hat[t.parent_branch[u]] + net.p_injection(u) * s.w[u];
            double bq = s.q_hat[t.parent_branch[u]] + net.q_injection(u) * s.w[u];
            for (int c : t.children[u]) {
                bp -= s.p_hat[t.parent_branch[c]];
                bq -= s.q_hat[t.parent_branch[c]];
            }
            kcl = std::max({kcl, std::abs(bp), std::abs(bq)});
            const auto& br = net.branches()[t.parent_branch[u]];
            drop = std::max(drop, std::abs(s.w[u] - s.w[t.parent_bus[u]] - br.r * s.p_hat[t.parent_branch[u]] -
                                           br.x * s.q_hat[t.parent_branch[u]]));
        }
        CHECK(kcl <= 1e-12);
        CHECK(drop <= 1e-12);
        for (int b = 0; b < net.branch_count(); ++b)
            if (!t.closed[b]) CHECK(s.p_hat[b] == 0.0);
    }
}

TEST_CASE("flow recovery divides by the sending-end W") {
    const Network net = load_case(support::data("six_bus_branching.json"));
    const RadialTopology t = build_tree(net, net.normally_closed());
    const LinearSolution s = solve_md_closed_form(net, t);
    const BranchFlows f = recover_branch_flows(net, t, s.w, s.p_hat, s.q_hat);
    for (int b = 0; b < net.branch_count(); ++b) {
        CHECK(f.p[b] * s.w[t.sending_bus(net, b)] == doctest::Approx(s.p_hat[b]).epsilon(1e-14));
        CHECK(f.q[b] == s.q_flow[b]);
    }
    auto w = s.w;
    w[3] = 0.0;
    CHECK_THROWS_AS(recover_branch_flows(net, t, w, s.p_hat, s.q_hat), DegenerateVoltage);
}

TEST_CASE("flows point from parent to child regardless of file orientation") {
    const Network net = load_case(support::data("six_bus_branching.json"));
    auto branches = net.branches();
    std::swap(branches[3].from, branches[3].to);  // 1-4 listed as 4-1
    const Network flipped(net.base_mva(), net.psp_id(), net.v0(), net.buses(), branches);
    const LinearSolution a = solve_md_closed_form(net, build_tree(net, net.normally_closed()));
    const LinearSolution b = solve_md_closed_form(flipped, build_tree(flipped, flipped.normally_closed()));
    for (int k = 0; k < net.branch_count(); ++k) {
        CHECK(a.p_hat[k] > 0.0);
        CHECK(a.q_hat[k] > 0.0);
        CHECK(b.p_hat[k] == doctest::Approx(a.p_hat[k]).epsilon(1e-14));
    }
    // feeder head carries every downstream load
    double sum = 0.0;
    for (int i = 1; i < net.bus_count(); ++i) sum -= net.p_injection(i) * a.w[i];
    CHECK(a.p_hat[0] == doctest::Approx(sum).epsilon(1e-14));
}

TEST_CASE("simplified DistFlow matches its own recursion") {
    const Network net = load_case(support::data("case33bw.json"));
    const auto closed = net.normally_closed();
    const RadialTopology t = build_tree(net, closed);
    const support::Bfs ref = support::bfs_tree(net, closed);
    const LinearSolution sd = solve_simplified_distflow(net, t);
    std::vector<double> p(net.bus_count()), q(net.bus_count()), v2(net.bus_count(), net.v0() * net.v0());
    for (int i = 0; i < net.bus_count(); ++i) {
        p[i] = net.p_injection(i);
        q[i] = net.q_injection(i);
    }
    for (int u : ref.order) {
        const int b = ref.parent_branch[u];
        if (b < 0) continue;
        const double pf = -support::subtree_sum(ref, p, u), qf = -support::subtree_sum(ref, q, u);
        CHECK(std::abs(sd.p_flow[b] - pf) < 1e-12);
        v2[u] = v2[ref.parent_bus[u]] - 2.0 * (net.branches()[b].r * pf + net.branches()[b].x * qf);
        CHECK(std::abs(sd.v[u] - std::sqrt(v2[u])) < 1e-12);
    }
}

TEST_CASE("modified model is closer to AC than simplified DistFlow") {
    for (const char* file : {"case33bw.json", "case141.json", "case33bw_dg.json"}) {
        for (double scale : {1.0, 2.0}) {
            CAPTURE(file);
            const Network net = load_case(support::data(file)).with_load_scale(scale);
            const RadialTopology t = build_tree(net, net.normally_closed());
            const AcSolution ac = solve_acpf(net, t);
            const ErrorReport md = compare_errors(solve_md_closed_form(net, t), ac);
            const ErrorReport sd = compare_errors(solve_simplified_distflow(net, t), ac);
            CHECK(md.avg_v < sd.avg_v);
            CHECK(md.max_v < sd.max_v);
            CHECK(md.max_p < sd.max_p);
        }
    }
}

TEST_CASE("error report of an exact solution is zero") {
    const Network net = load_case(support::data("case33bw.json"));
    const RadialTopology t = build_tree(net, net.normally_closed());
    const AcSolution ac = solve_acpf(net, t);
    LinearSolution same;
    same.v = ac.v;
    same.p_flow = ac.p_flow;
    same.q_flow = ac.q_flow;
    same.root = ac.root;
    const ErrorReport r = compare_errors(same, ac);
    CHECK(r.max_v == 0.0);
    CHECK(r.max_p == 0.0);
    CHECK(r.max_q == 0.0);
    CHECK(error_report_csv(r).rfind("quantity,avg_pct,max_pct\n", 0) == 0);
    same.v.pop_back();
    CHECK_THROWS_AS(compare_errors(same, ac), ValidationError);
}

TEST_CASE("reciprocal linearisation error") {
    CHECK(linearization_error(0.8, 0.81) == doctest::Approx(0.5432).epsilon(1e-3));
    CHECK(linearization_error(1.0, 1.0) == 0.0);
    CHECK_THROWS_AS(linearization_error(0.0, 1.0), ValidationError);
}
