#include "gridflow/network.hpp"

#include "gridflow/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace gridflow {

using nlohmann::json;

std::string BranchRecord::name() const {
    return std::to_string(from) + "-" + std::to_string(to);
}

namespace {

int find_root(std::vector<int>& parent, int a) {
    while (parent[a] != a) {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    return a;
}

} // namespace

Network::Network(double base_mva, int psp_id, double v0, std::vector<BusRecord> buses,
                 std::vector<BranchRecord> branches)
    : base_mva_(base_mva), v0_(v0), buses_(std::move(buses)), branches_(std::move(branches)) {
    if (!(base_mva_ > 0.0)) throw ValidationError("base_mva must be positive");
    if (!(v0_ > 0.0)) throw ValidationError("v0 must be positive");
    if (buses_.empty()) throw ValidationError("network has no buses");

    std::unordered_map<int, int> index;
    for (int i = 0; i < bus_count(); ++i) {
        const auto& b = buses_[i];
        if (!index.emplace(b.id, i).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (!(b.v_min < b.v_max))
            throw ValidationError("bus " + std::to_string(b.id) + ": v_min must be below v_max");
        if (b.svc && !(b.svc->q_min <= b.svc->q_max))
            throw ValidationError("bus " + std::to_string(b.id) + ": svc q_min exceeds q_max");
    }
    auto it = index.find(psp_id);
    if (it == index.end()) throw ValidationError("psp bus " + std::to_string(psp_id) + " not found");
    root_ = it->second;

    from_.reserve(branches_.size());
    to_.reserve(branches_.size());
    for (const auto& br : branches_) {
        auto f = index.find(br.from);
        auto t = index.find(br.to);
        if (f == index.end() || t == index.end())
            throw ValidationError("branch " + br.name() + " references an unknown bus");
        if (f->second == t->second) throw ValidationError("branch " + br.name() + " is a self loop");
        if (br.r < 0.0 || br.x < 0.0)
            throw ValidationError("branch " + br.name() + " has negative impedance");
        if (br.r == 0.0 && br.x == 0.0)
            throw ValidationError("branch " + br.name() + " has zero impedance");
        if (br.normally_open && !br.switchable)
            throw ValidationError("branch " + br.name() + " is normally open but not switchable");
        if (!(br.delta_cap > 0.0))
            throw ValidationError("branch " + br.name() + " needs a positive angle cap");
        from_.push_back(f->second);
        to_.push_back(t->second);
    }

    std::vector<int> parent(buses_.size());
    std::iota(parent.begin(), parent.end(), 0);
    int components = bus_count();
    for (int k = 0; k < branch_count(); ++k) {
        int a = find_root(parent, from_[k]);
        int b = find_root(parent, to_[k]);
        if (a != b) {
            parent[a] = b;
            --components;
        }
    }
    if (components != 1) throw ValidationError("network graph (including ties) is not connected");
}

int Network::bus_index(int id) const {
    for (int i = 0; i < bus_count(); ++i)
        if (buses_[i].id == id) return i;
    throw ValidationError("unknown bus id " + std::to_string(id));
}

int Network::find_branch(std::string_view label) const {
    auto dash = label.find('-');
    if (dash == std::string_view::npos) return -1;
    int a = 0;
    int b = 0;
    try {
        a = std::stoi(std::string(label.substr(0, dash)));
        b = std::stoi(std::string(label.substr(dash + 1)));
    } catch (const std::exception&) {
        return -1;
    }
    for (int k = 0; k < branch_count(); ++k) {
        const auto& br = branches_[k];
        if ((br.from == a && br.to == b) || (br.from == b && br.to == a)) return k;
    }
    return -1;
}

double Network::p_injection(int bus) const noexcept {
    const auto& b = buses_[bus];
    return (b.dg ? b.dg->p : 0.0) - b.p_demand;
}

double Network::q_injection(int bus) const noexcept {
    const auto& b = buses_[bus];
    return (b.dg ? b.dg->q : 0.0) - b.q_demand;
}

std::vector<bool> Network::normally_closed() const {
    std::vector<bool> closed(branches_.size());
    for (std::size_t k = 0; k < branches_.size(); ++k) closed[k] = !branches_[k].normally_open;
    return closed;
}

Network Network::with_load_scale(double factor) const {
    if (!(factor > 0.0)) throw ValidationError("load scale must be positive");
    auto buses = buses_;
    for (auto& b : buses) {
        b.p_demand *= factor;
        b.q_demand *= factor;
    }
    return Network(base_mva_, psp_id(), v0_, std::move(buses), branches_);
}

Network Network::with_voltage_bounds(std::optional<double> v_min, std::optional<double> v_max) const {
    auto buses = buses_;
    for (int i = 0; i < bus_count(); ++i) {
        if (i == root_) continue;
        if (v_min) buses[i].v_min = *v_min;
        if (v_max) buses[i].v_max = *v_max;
    }
    return Network(base_mva_, psp_id(), v0_, std::move(buses), branches_);
}

// ---------------------------------------------------------------------------
// JSON case documents

namespace {

double number_at(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + "." + key, "missing required field");
    if (!it->is_number()) throw ParseError(path + "." + key, "expected a number");
    return it->get<double>();
}

std::optional<double> optional_number(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) return std::nullopt;
    if (!it->is_number()) throw ParseError(path + "." + key, "expected a number");
    return it->get<double>();
}

int integer_at(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + "." + key, "missing required field");
    if (!it->is_number_integer()) throw ParseError(path + "." + key, "expected an integer");
    return it->get<int>();
}

bool optional_bool(const json& obj, const char* key, const std::string& path, bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) throw ParseError(path + "." + key, "expected a boolean");
    return it->get<bool>();
}

// 12 significant digits, parsed back as a JSON number.
// Writes value * scale with 12 significant digits when that parses back to
// `value` (after the parser's division by scale), else with 17.
json decimal(double value, double scale = 1.0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", value * scale);
    if (std::strtod(buf, nullptr) / scale != value) std::snprintf(buf, sizeof buf, "%.17g", value * scale);
    return json::parse(buf);
}

} // namespace

Network parse_case(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError("byte " + std::to_string(e.byte), e.what());
    }
    if (!doc.is_object()) throw ParseError("$", "case document must be an object");

    const double base = number_at(doc, "base_mva", "$");
    if (!(base > 0.0)) throw ParseError("$.base_mva", "must be positive");
    const int psp = integer_at(doc, "psp", "$");
    const double v0 = number_at(doc, "v0", "$");

    auto buses_it = doc.find("buses");
    if (buses_it == doc.end() || !buses_it->is_array()) throw ParseError("$.buses", "expected an array");
    std::vector<BusRecord> buses;
    for (std::size_t i = 0; i < buses_it->size(); ++i) {
        const auto& b = (*buses_it)[i];
        const std::string path = "$.buses[" + std::to_string(i) + "]";
        if (!b.is_object()) throw ParseError(path, "expected an object");
        BusRecord rec;
        rec.id = integer_at(b, "id", path);
        rec.p_demand = optional_number(b, "p_demand", path).value_or(0.0) / base;
        rec.q_demand = optional_number(b, "q_demand", path).value_or(0.0) / base;
        rec.v_min = optional_number(b, "v_min", path).value_or(kDefaultVmin);
        rec.v_max = optional_number(b, "v_max", path).value_or(kDefaultVmax);
        if (auto dg = b.find("dg"); dg != b.end()) {
            if (!dg->is_object()) throw ParseError(path + ".dg", "expected an object");
            rec.dg = DgInjection{optional_number(*dg, "p", path + ".dg").value_or(0.0) / base,
                                 optional_number(*dg, "q", path + ".dg").value_or(0.0) / base};
        }
        if (auto svc = b.find("svc"); svc != b.end()) {
            if (!svc->is_object()) throw ParseError(path + ".svc", "expected an object");
            rec.svc = SvcRange{number_at(*svc, "q_min", path + ".svc") / base,
                               number_at(*svc, "q_max", path + ".svc") / base};
        }
        buses.push_back(rec);
    }

    auto branches_it = doc.find("branches");
    if (branches_it == doc.end() || !branches_it->is_array())
        throw ParseError("$.branches", "expected an array");
    std::vector<BranchRecord> branches;
    for (std::size_t i = 0; i < branches_it->size(); ++i) {
        const auto& b = (*branches_it)[i];
        const std::string path = "$.branches[" + std::to_string(i) + "]";
        if (!b.is_object()) throw ParseError(path, "expected an object");
        BranchRecord rec;
        rec.from = integer_at(b, "from", path);
        rec.to = integer_at(b, "to", path);
        rec.r = number_at(b, "r", path);
        rec.x = number_at(b, "x", path);
        rec.normally_open = optional_bool(b, "normally_open", path, false);
        rec.switchable = optional_bool(b, "switchable", path, rec.normally_open);
        if (auto v = optional_number(b, "p_cap", path)) rec.p_cap = *v / base;
        if (auto v = optional_number(b, "q_cap", path)) rec.q_cap = *v / base;
        if (auto v = optional_number(b, "i_cap", path)) rec.i_cap = *v;
        if (auto v = optional_number(b, "delta_cap_deg", path))
            rec.delta_cap = *v * std::numbers::pi / 180.0;
        branches.push_back(rec);
    }
    return Network(base, psp, v0, std::move(buses), std::move(branches));
}

Network load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open case file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

std::string serialize_case(const Network& network) {
    const double base = network.base_mva();
    json doc;
    doc["base_mva"] = decimal(base);
    doc["psp"] = network.psp_id();
    doc["v0"] = decimal(network.v0());
    json buses = json::array();
    for (const auto& b : network.buses()) {
        json j;
        j["id"] = b.id;
        j["p_demand"] = decimal(b.p_demand, base);
        j["q_demand"] = decimal(b.q_demand, base);
        j["v_min"] = decimal(b.v_min);
        j["v_max"] = decimal(b.v_max);
        if (b.dg) j["dg"] = {{"p", decimal(b.dg->p, base)}, {"q", decimal(b.dg->q, base)}};
        if (b.svc)
            j["svc"] = {{"q_min", decimal(b.svc->q_min, base)}, {"q_max", decimal(b.svc->q_max, base)}};
        buses.push_back(std::move(j));
    }
    doc["buses"] = std::move(buses);
    json branches = json::array();
    for (const auto& br : network.branches()) {
        json j;
        j["from"] = br.from;
        j["to"] = br.to;
        j["r"] = decimal(br.r);
        j["x"] = decimal(br.x);
        j["switchable"] = br.switchable;
        j["normally_open"] = br.normally_open;
        if (br.p_cap) j["p_cap"] = decimal(*br.p_cap, base);
        if (br.q_cap) j["q_cap"] = decimal(*br.q_cap, base);
        if (br.i_cap) j["i_cap"] = decimal(*br.i_cap);
        j["delta_cap_deg"] = decimal(br.delta_cap * 180.0 / std::numbers::pi);
        branches.push_back(std::move(j));
    }
    doc["branches"] = std::move(branches);
    return doc.dump(1);
}

} // namespace gridflow
