#include "gridflow/acpf.hpp"
#include "gridflow/errors.hpp"
#include "gridflow/linear_flow.hpp"
#include "gridflow/miqp.hpp"
#include "gridflow/network.hpp"
#include "gridflow/topology.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace gridflow;

namespace {

std::vector<bool> closed_flags(const Network& net, const std::optional<std::vector<std::string>>& open) {
    if (!open) return net.normally_closed();
    std::vector<bool> closed(net.branch_count(), true);
    for (const auto& name : *open) {
        const int b = net.find_branch(name);
        if (b < 0) throw ValidationError("unknown branch '" + name + "'");
        closed[b] = false;
    }
    return closed;
}

py::dict linear_dict(const LinearSolution& s) {
    py::dict d;
    d["w"] = s.w;
    d["v"] = s.v;
    d["p_hat"] = s.p_hat;
    d["q_hat"] = s.q_hat;
    d["p_flow"] = s.p_flow;
    d["q_flow"] = s.q_flow;
    d["loss_est"] = s.loss_est;
    d["iterations"] = s.iterations;
    return d;
}

LinearSolution solve_linear(const Network& net, const RadialTopology& topo, const std::string& model) {
    if (model == "md" || model == "closed_form") return solve_md_closed_form(net, topo);
    if (model == "fixed_point") return solve_md_fixed_point(net, topo);
    if (model == "sweep") return solve_md_sweep(net, topo);
    if (model == "sd") return solve_simplified_distflow(net, topo);
    throw ValidationError("unknown model '" + model + "'");
}

} // namespace

PYBIND11_MODULE(_gridflow, m) {
    m.doc() = "Linear branch-flow models and switch reconfiguration for radial feeders";

    py::register_exception<Error>(m, "GridflowError");

    py::class_<Network>(m, "Network")
        .def_property_readonly("base_mva", &Network::base_mva)
        .def_property_readonly("v0", &Network::v0)
        .def_property_readonly("bus_count", &Network::bus_count)
        .def_property_readonly("branch_count", &Network::branch_count)
        .def_property_readonly("bus_ids",
                               [](const Network& n) {
                                   std::vector<int> ids;
                                   for (const auto& b : n.buses()) ids.push_back(b.id);
                                   return ids;
                               })
        .def_property_readonly("branch_names",
                               [](const Network& n) {
                                   std::vector<std::string> names;
                                   for (const auto& b : n.branches()) names.push_back(b.name());
                                   return names;
                               })
        .def("with_load_scale", &Network::with_load_scale, py::arg("factor"))
        .def("to_json", [](const Network& n) { return serialize_case(n); });

    m.def("load_case", &load_case, py::arg("path"));
    m.def("parse_case", [](const std::string& text) { return parse_case(text); }, py::arg("text"));

    m.def(
        "solve_acpf",
        [](const Network& net, std::optional<std::vector<std::string>> open) {
            const AcSolution s = solve_acpf(net, build_tree(net, closed_flags(net, open)));
            py::dict d;
            d["v"] = s.v;
            d["delta"] = s.delta;
            d["p_flow"] = s.p_flow;
            d["q_flow"] = s.q_flow;
            d["loss_total"] = s.loss_total;
            d["iterations"] = s.iterations;
            d["residual"] = s.residual;
            return d;
        },
        py::arg("network"), py::arg("open_branches") = py::none());

    m.def(
        "solve_linear",
        [](const Network& net, const std::string& model, std::optional<std::vector<std::string>> open) {
            return linear_dict(solve_linear(net, build_tree(net, closed_flags(net, open)), model));
        },
        py::arg("network"), py::arg("model") = "md", py::arg("open_branches") = py::none(),
        "model: md (closed form), fixed_point, sweep or sd");

    m.def(
        "compare_errors",
        [](const Network& net, const std::string& model) {
            const RadialTopology topo = build_tree(net, net.normally_closed());
            const ErrorReport e = compare_errors(solve_linear(net, topo, model), solve_acpf(net, topo));
            py::dict d;
            d["avg_v"] = e.avg_v;
            d["max_v"] = e.max_v;
            d["avg_p"] = e.avg_p;
            d["max_p"] = e.max_p;
            d["avg_q"] = e.avg_q;
            d["max_q"] = e.max_q;
            return d;
        },
        py::arg("network"), py::arg("model") = "md", "Percentage errors against ACPF on the default topology");

    m.def("linearization_error", &linearization_error, py::arg("v_i"), py::arg("v_j"));

    m.def(
        "_reconfigure",
        [](const Network& net, double alpha, double beta, double gamma, bool loop_cuts, std::optional<double> pf_min,
           double gap, const std::string& method, long max_nodes, double time_limit) {
            ObjectiveWeights w{alpha, beta, gamma};
            w.validate();
            MiqpOptions opt;
            opt.loop_cuts = loop_cuts;
            opt.pf_min = pf_min;
            opt.gap = gap;
            opt.max_nodes = max_nodes;
            opt.time_limit = time_limit;
            ReconfigSolution sol;
            {
                py::gil_scoped_release release;
                if (method == "enumerate")
                    sol = enumerate_radial(net, w, opt);
                else if (method == "branch-and-bound")
                    sol = solve_miqp(build_miqp(net, w, opt));
                else
                    throw ValidationError("unknown method '" + method + "'");
            }
            return solution_json(net, sol);
        },
        py::arg("network"), py::arg("alpha"), py::arg("beta"), py::arg("gamma"), py::arg("loop_cuts"),
        py::arg("pf_min"), py::arg("gap"), py::arg("method"), py::arg("max_nodes"), py::arg("time_limit"));
}
