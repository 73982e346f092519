// gridflow: power flow comparisons and switch reconfiguration from the shell.
//
// Exit codes: 0 ok, 1 usage/data error, 2 topology error, 3 infeasible,
// 4 budget exhausted (incumbent written).

#include "gridflow/acpf.hpp"
#include "gridflow/errors.hpp"
#include "gridflow/linear_flow.hpp"
#include "gridflow/miqp.hpp"
#include "gridflow/network.hpp"
#include "gridflow/topology.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace gridflow;
using nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kError = 1, kTopology = 2, kInfeasible = 3, kIncomplete = 4 };

int thread_budget() {
    const char* env = std::getenv("GRIDFLOW_THREADS");
    int n = env ? std::atoi(env) : static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, n);
}

// Runs job(i) for i in [0, count) on up to thread_budget() workers.
template <class Job>
void parallel_for(int count, Job job) {
    const int workers = std::min(thread_budget(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) job(i);
        });
    for (auto& t : pool) t.join();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string scale_tag(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", s);
    return buf;
}

// ---------------------------------------------------------------------------
// pf / compare

struct FlowRun {
    std::string model;
    std::vector<double> v, p, q;
    double loss = 0.0;
    std::optional<ErrorReport> errors;
};

FlowRun run_model(const Network& net, const RadialTopology& topo, const std::string& model, const AcSolution* ac) {
    FlowRun r;
    r.model = model;
    if (model == "acpf") {
        AcSolution s = ac ? *ac : solve_acpf(net, topo);
        r.v = s.v;
        r.p = s.p_flow;
        r.q = s.q_flow;
        r.loss = s.loss_total;
        return r;
    }
    LinearSolution lin = model == "md" ? solve_md_closed_form(net, topo) : solve_simplified_distflow(net, topo);
    r.v = lin.v;
    r.p = lin.p_flow;
    r.q = lin.q_flow;
    r.loss = lin.loss_est;
    if (ac) r.errors = compare_errors(lin, *ac);
    return r;
}

ordered_json errors_json(const ErrorReport& e) {
    return ordered_json{{"avg_v_pct", e.avg_v}, {"max_v_pct", e.max_v}, {"avg_p_pct", e.avg_p},
                        {"max_p_pct", e.max_p}, {"avg_q_pct", e.avg_q}, {"max_q_pct", e.max_q}};
}

int cmd_pf(const std::string& case_path, const std::string& model, double scale, const fs::path& out) {
    const Network net = load_case(case_path).with_load_scale(scale);
    const RadialTopology topo = build_tree(net, net.normally_closed());
    const AcSolution ac = solve_acpf(net, topo);
    const FlowRun run = run_model(net, topo, model, &ac);

    const std::string stem = fs::path(case_path).stem().string() + "_" + model + "_" + scale_tag(scale);
    std::ostringstream bus;
    bus << "bus,v\n";
    for (int i = 0; i < net.bus_count(); ++i) bus << net.buses()[i].id << ',' << fmt(run.v[i]) << '\n';
    std::ostringstream br;
    br << "branch,p,q\n";
    for (int b = 0; b < net.branch_count(); ++b)
        br << net.branches()[b].name() << ',' << fmt(run.p[b]) << ',' << fmt(run.q[b]) << '\n';

    int arg_min = net.root();
    double v_sum = 0.0;
    for (int i = 0; i < net.bus_count(); ++i) {
        if (run.v[i] < run.v[arg_min]) arg_min = i;
        v_sum += run.v[i];
    }
    ordered_json summary{{"case", case_path},
                         {"model", model},
                         {"scale", scale},
                         {"v_min", run.v[arg_min]},
                         {"v_min_bus", net.buses()[arg_min].id},
                         {"v_avg", v_sum / net.bus_count()},
                         {"loss_kw", run.loss * net.base_mva() * 1000.0}};
    if (run.errors) summary["errors_vs_acpf"] = errors_json(*run.errors);

    write_file(out / (stem + "_bus.csv"), bus.str());
    write_file(out / (stem + "_branch.csv"), br.str());
    write_file(out / (stem + "_summary.json"), summary.dump(2) + "\n");
    std::cout << summary.dump(2) << '\n';
    return kOk;
}

int cmd_compare(const std::string& case_path, const std::vector<double>& scales, const fs::path& out) {
    const Network base = load_case(case_path);
    const RadialTopology topo = build_tree(base, base.normally_closed());
    const int n = static_cast<int>(scales.size());
    std::vector<std::string> rows(n), traces(n), errors(n);

    parallel_for(n, [&](int k) {
        try {
            const Network net = base.with_load_scale(scales[k]);
            const AcSolution ac = solve_acpf(net, topo);
            const FlowRun md = run_model(net, topo, "md", &ac);
            const FlowRun sd = run_model(net, topo, "sd", &ac);
            std::ostringstream row;
            for (const FlowRun* r : {&md, &sd}) {
                const ErrorReport& e = *r->errors;
                row << fmt(scales[k]) << ',' << r->model << ',' << fmt(e.avg_v) << ',' << fmt(e.max_v) << ','
                    << fmt(e.avg_p) << ',' << fmt(e.max_p) << ',' << fmt(e.avg_q) << ',' << fmt(e.max_q) << ','
                    << fmt(*std::min_element(ac.v.begin(), ac.v.end())) << '\n';
            }
            rows[k] = row.str();

            // Per-element traces for plotting: voltages per bus, flows per branch.
            auto pct = [](double lin, double ref) { return std::abs(ref) < ErrorReport::kFlowFloor ? 0.0 : 100.0 * std::abs(lin - ref) / std::abs(ref); };
            std::ostringstream tr;
            tr << "kind,element,acpf,md,sd,md_err_pct,sd_err_pct\n";
            for (int i = 0; i < net.bus_count(); ++i)
                tr << "v," << net.buses()[i].id << ',' << fmt(ac.v[i]) << ',' << fmt(md.v[i]) << ',' << fmt(sd.v[i])
                   << ',' << fmt(pct(md.v[i], ac.v[i])) << ',' << fmt(pct(sd.v[i], ac.v[i])) << '\n';
            for (int b = 0; b < net.branch_count(); ++b)
                tr << "p," << net.branches()[b].name() << ',' << fmt(ac.p_flow[b]) << ',' << fmt(md.p[b]) << ','
                   << fmt(sd.p[b]) << ',' << fmt(pct(md.p[b], ac.p_flow[b])) << ',' << fmt(pct(sd.p[b], ac.p_flow[b]))
                   << '\n';
            for (int b = 0; b < net.branch_count(); ++b)
                tr << "q," << net.branches()[b].name() << ',' << fmt(ac.q_flow[b]) << ',' << fmt(md.q[b]) << ','
                   << fmt(sd.q[b]) << ',' << fmt(pct(md.q[b], ac.q_flow[b])) << ',' << fmt(pct(sd.q[b], ac.q_flow[b]))
                   << '\n';
            traces[k] = tr.str();
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    });
    for (int k = 0; k < n; ++k)
        if (!errors[k].empty()) throw Error("scale " + scale_tag(scales[k]) + ": " + errors[k]);

    std::string table = "scale,model,avg_v_pct,max_v_pct,avg_p_pct,max_p_pct,avg_q_pct,max_q_pct,acpf_v_min\n";
    for (const auto& r : rows) table += r;
    write_file(out / "compare.csv", table);
    for (int k = 0; k < n; ++k) write_file(out / ("trace_" + scale_tag(scales[k]) + ".csv"), traces[k]);
    std::cout << table;
    return kOk;
}

// ---------------------------------------------------------------------------
// reconfig

struct Scenario {
    std::string label = "reconfig";
    std::string case_path;
    double load_scale = 1.0;
    ObjectiveWeights weights;
    bool loop_cuts = true;
    std::optional<double> pf_min;
    std::optional<double> v_min, v_max;
    bool oracle = false;
    double gap = 1e-6;
    long max_nodes = 1000000;
    double time_limit = 600.0;
    std::string out = "gridflow-out";
};

// Descriptor keys mirror the command-line flags; the case path is relative
// to the descriptor file.
Scenario read_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read scenario " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, e.what());
    }
    Scenario s;
    try {
        s.label = j.value("label", s.label);
        fs::path c = j.at("case").get<std::string>();
        s.case_path = (c.is_absolute() ? c : fs::path(path).parent_path() / c).string();
        s.load_scale = j.value("load_scale", 1.0);
        if (j.contains("weights")) {
            const auto& w = j["weights"];
            s.weights.alpha = w.value("alpha", 0.0);
            s.weights.beta = w.value("beta", 0.0);
            s.weights.gamma = w.value("gamma", 0.0);
        }
        s.loop_cuts = j.value("loop_cuts", true);
        if (j.contains("pf_min")) s.pf_min = j["pf_min"].get<double>();
        if (j.contains("v_min")) s.v_min = j["v_min"].get<double>();
        if (j.contains("v_max")) s.v_max = j["v_max"].get<double>();
        s.oracle = j.value("oracle", false);
        s.gap = j.value("gap", s.gap);
        s.max_nodes = j.value("max_nodes", s.max_nodes);
        s.time_limit = j.value("time_limit", s.time_limit);
        s.out = j.value("out", s.out);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, e.what());
    }
    if (!(s.load_scale > 0.0)) throw ValidationError("load_scale must be positive");
    return s;
}

std::string without_timing(const Network& net, const ReconfigSolution& sol) {
    auto j = nlohmann::json::parse(solution_json(net, sol));
    j.erase("wall_time_s");
    return j.dump();
}

int cmd_reconfig(const Scenario& sc, bool seedless) {
    if (!(sc.load_scale > 0.0)) throw ValidationError("load scale must be positive");
    const Network net = load_case(sc.case_path).with_load_scale(sc.load_scale).with_voltage_bounds(sc.v_min, sc.v_max);
    ObjectiveWeights w = sc.weights;
    w.validate();
    MiqpOptions opt;
    opt.loop_cuts = sc.loop_cuts;
    opt.pf_min = sc.pf_min;
    opt.gap = sc.gap;
    opt.max_nodes = sc.max_nodes;
    opt.time_limit = sc.time_limit;

    const MiqpModel model = build_miqp(net, w, opt);
    ReconfigSolution sol, oracle;
    std::string oracle_error;
    auto run_oracle = [&] {
        try {
            oracle = enumerate_radial(net, w, opt);
        } catch (const std::exception& e) {
            oracle_error = e.what();
        }
    };
    std::thread side;
    if (sc.oracle && thread_budget() > 1) side = std::thread(run_oracle);
    try {
        sol = solve_miqp(model);
    } catch (...) {
        if (side.joinable()) side.join();
        throw;
    }
    if (side.joinable()) side.join();
    else if (sc.oracle) run_oracle();

    const fs::path out = sc.out;
    write_file(out / (sc.label + ".json"), solution_json(net, sol) + "\n");
    write_file(out / (sc.label + ".csv"), solution_csv_header() + solution_csv_row(net, sc.label, sol));
    std::cout << solution_csv_header() << solution_csv_row(net, sc.label, sol);

    int code = sol.status == SolveStatus::Incomplete ? kIncomplete : kOk;
    if (seedless) {
        const ReconfigSolution again = solve_miqp(model);
        if (without_timing(net, again) != without_timing(net, sol)) {
            std::cerr << "determinism check failed: repeated solve differs\n";
            code = kError;
        } else {
            std::cerr << "determinism check passed\n";
        }
    }
    if (sc.oracle) {
        if (!oracle_error.empty()) {
            std::cerr << "oracle: " << oracle_error << '\n';
            return kError;
        }
        write_file(out / (sc.label + "_oracle.json"), solution_json(net, oracle) + "\n");
        const bool same_set = oracle.open_branches == sol.open_branches;
        const double rel = std::abs(oracle.objective_model - sol.objective_model) /
                           std::max(1.0, std::abs(oracle.objective_model));
        std::cerr << "oracle: " << oracle.candidates << " candidates, open set " << (same_set ? "identical" : "DIFFERS")
                  << ", objective difference " << rel << '\n';
        if (sol.status == SolveStatus::Optimal && (!same_set || rel > 1e-6)) code = kError;
    }
    return code;
}

int cmd_evaluate(const std::string& case_path, const std::string& solution_path, double scale,
                 const ObjectiveWeights& weights, std::optional<double> v_min, std::optional<double> v_max) {
    const Network net = load_case(case_path).with_load_scale(scale).with_voltage_bounds(v_min, v_max);
    std::ifstream in(solution_path);
    if (!in) throw Error("cannot read " + solution_path);
    std::stringstream buf;
    buf << in.rdbuf();
    const ReconfigSolution stored = parse_solution_json(net, buf.str());
    weights.validate();
    const AcEvaluation ev = evaluate_with_acpf(net, stored, weights);
    ordered_json j{{"acpf_applicable", ev.applicable}, {"objective_acpf", ev.objective}, {"loss_acpf_kw", ev.loss_kw},
                   {"v_avg", ev.v_avg}, {"v_min", ev.v_min}, {"stored_objective_acpf", stored.objective_acpf}};
    const double diff = std::abs(ev.objective - stored.objective_acpf);
    j["matches_stored"] = diff <= 1e-9 * std::max(1.0, std::abs(stored.objective_acpf));
    std::cout << j.dump(2) << '\n';
    return j["matches_stored"].get<bool>() ? kOk : kError;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear branch-flow analysis and switch reconfiguration for radial feeders"};
    app.require_subcommand(1);

    std::string case_path, model = "md", out = "gridflow-out";
    double scale = 1.0;
    auto* pf = app.add_subcommand("pf", "Power flow on the default topology; writes bus/branch traces and a summary");
    pf->add_option("case", case_path, "Case JSON")->required()->check(CLI::ExistingFile);
    pf->add_option("--model", model, "md, sd or acpf")->check(CLI::IsMember({"md", "sd", "acpf"}));
    pf->add_option("--scale", scale, "Load multiplier")->check(CLI::PositiveNumber);
    pf->add_option("--out", out, "Output directory");

    std::vector<double> scales{1.0};
    auto* cmp = app.add_subcommand("compare", "MD and SD errors against ACPF over load levels");
    cmp->add_option("case", case_path, "Case JSON")->required()->check(CLI::ExistingFile);
    cmp->add_option("--scales", scales, "Load multipliers")->delimiter(',')->check(CLI::PositiveNumber);
    cmp->add_option("--out", out, "Output directory");

    Scenario sc;
    std::string scenario_path;
    bool seedless = false, oracle = false;
    std::optional<double> alpha, beta, gamma, pf_limit, vmin, vmax, gap, time_limit;
    std::optional<long> max_nodes;
    std::optional<bool> loop_cuts;
    std::optional<std::string> label, rc_out;
    std::optional<double> rc_scale;
    auto* rc = app.add_subcommand("reconfig", "Optimal switch configuration and compensator setpoints");
    rc->add_option("case", case_path, "Case JSON (or use --scenario)")->check(CLI::ExistingFile);
    rc->add_option("--scenario", scenario_path, "Scenario descriptor JSON")->check(CLI::ExistingFile);
    rc->add_option("--scale", rc_scale, "Load multiplier")->check(CLI::PositiveNumber);
    rc->add_option("--alpha", alpha, "Loss weight (per MW); 1000 gives kW")->check(CLI::NonNegativeNumber);
    rc->add_option("--beta", beta, "Switching weight per changed switch")->check(CLI::NonNegativeNumber);
    rc->add_option("--gamma", gamma, "Voltage deviation weight")->check(CLI::NonNegativeNumber);
    rc->add_flag("--loop-cuts,!--no-loop-cuts", loop_cuts, "Overlap-set loop equalities (default on)");
    rc->add_option("--pf-limit", pf_limit, "Lower bound on P^2/(P^2+Q^2) at the root (squared power factor)")->check(CLI::Range(0.0, 1.0));
    rc->add_option("--vmin", vmin, "Override every bus lower voltage bound");
    rc->add_option("--vmax", vmax, "Override every bus upper voltage bound");
    rc->add_option("--gap", gap, "Relative optimality gap")->check(CLI::NonNegativeNumber);
    rc->add_option("--max-nodes", max_nodes, "Branch-and-bound node budget")->check(CLI::PositiveNumber);
    rc->add_option("--time-limit", time_limit, "Seconds")->check(CLI::PositiveNumber);
    rc->add_flag("--oracle", oracle, "Cross-check against exhaustive enumeration");
    rc->add_flag("--seedless", seedless, "Solve twice and require identical results");
    rc->add_option("--label", label, "Output file stem");
    rc->add_option("--out", rc_out, "Output directory");

    std::string solution_path;
    double ev_scale = 1.0;
    ObjectiveWeights ev_w;
    std::optional<double> ev_vmin, ev_vmax;
    auto* ev = app.add_subcommand("evaluate", "Re-run ACPF on a stored solution and compare the stored objective");
    ev->add_option("case", case_path, "Case JSON")->required()->check(CLI::ExistingFile);
    ev->add_option("solution", solution_path, "Solution JSON written by reconfig")->required()->check(CLI::ExistingFile);
    ev->add_option("--scale", ev_scale, "Load multiplier")->check(CLI::PositiveNumber);
    ev->add_option("--alpha", ev_w.alpha)->check(CLI::NonNegativeNumber);
    ev->add_option("--beta", ev_w.beta)->check(CLI::NonNegativeNumber);
    ev->add_option("--gamma", ev_w.gamma)->check(CLI::NonNegativeNumber);
    ev->add_option("--vmin", ev_vmin);
    ev->add_option("--vmax", ev_vmax);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*pf) return cmd_pf(case_path, model, scale, out);
        if (*cmp) return cmd_compare(case_path, scales, out);
        if (*rc) {
            if (!scenario_path.empty()) sc = read_scenario(scenario_path);
            if (!case_path.empty()) sc.case_path = case_path;
            if (sc.case_path.empty()) throw ValidationError("reconfig needs a case file or --scenario");
            if (rc_scale) sc.load_scale = *rc_scale;
            if (alpha || beta || gamma) {
                sc.weights.alpha = alpha.value_or(0.0);
                sc.weights.beta = beta.value_or(0.0);
                sc.weights.gamma = gamma.value_or(0.0);
            } else if (scenario_path.empty()) {
                sc.weights.alpha = 1000.0;  // loss in kW
            }
            if (loop_cuts) sc.loop_cuts = *loop_cuts;
            if (pf_limit) sc.pf_min = pf_limit;
            if (vmin) sc.v_min = vmin;
            if (vmax) sc.v_max = vmax;
            if (gap) sc.gap = *gap;
            if (max_nodes) sc.max_nodes = *max_nodes;
            if (time_limit) sc.time_limit = *time_limit;
            if (label) sc.label = *label;
            if (rc_out) sc.out = *rc_out;
            sc.oracle = sc.oracle || oracle;
            return cmd_reconfig(sc, seedless);
        }
        if (*ev) return cmd_evaluate(case_path, solution_path, ev_scale, ev_w, ev_vmin, ev_vmax);
    } catch (const NotRadial& e) {
        std::cerr << "topology error: " << e.what() << '\n';
        return kTopology;
    } catch (const Disconnected& e) {
        std::cerr << "topology error: " << e.what() << '\n';
        return kTopology;
    } catch (const Infeasible& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
    return kError;
}
