#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridflow {

inline constexpr double kDefaultVmin = 0.9;
inline constexpr double kDefaultVmax = 1.1;
inline constexpr double kDefaultDeltaCapDeg = 10.0;

/// Forecast DG output, p.u. on the network base.
struct DgInjection {
    double p = 0.0;
    double q = 0.0;
};

/// Continuous reactive range of a static VAR compensator, p.u.
struct SvcRange {
    double q_min = 0.0;
    double q_max = 0.0;
};

struct BusRecord {
    int id = 0;
    double p_demand = 0.0;
    double q_demand = 0.0;
    std::optional<DgInjection> dg;
    std::optional<SvcRange> svc;
    double v_min = kDefaultVmin;
    double v_max = kDefaultVmax;
};

/// A line between two buses. `from`/`to` are bus ids in file orientation; the
/// electrical sending end is decided per topology (parent side).
struct BranchRecord {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    bool switchable = false;
    bool normally_open = false;
    std::optional<double> p_cap;
    std::optional<double> q_cap;
    std::optional<double> i_cap;
    double delta_cap = kDefaultDeltaCapDeg * 3.14159265358979323846 / 180.0; ///< radians

    /// "from-to", the label used in reports and on the command line.
    std::string name() const;
};

/// Immutable per-unit description of a single-feeder distribution network.
///
/// Buses and branches keep file order; every algorithm addresses them by
/// position (bus index, branch index). The constructor validates all
/// structural invariants and throws ValidationError on violation.
class Network {
public:
    Network(double base_mva, int psp_id, double v0, std::vector<BusRecord> buses,
            std::vector<BranchRecord> branches);

    double base_mva() const noexcept { return base_mva_; }
    double v0() const noexcept { return v0_; }
    int psp_id() const noexcept { return buses_[root_].id; }
    int root() const noexcept { return root_; }

    const std::vector<BusRecord>& buses() const noexcept { return buses_; }
    const std::vector<BranchRecord>& branches() const noexcept { return branches_; }
    int bus_count() const noexcept { return static_cast<int>(buses_.size()); }
    int branch_count() const noexcept { return static_cast<int>(branches_.size()); }

    /// Bus index for an id; throws ValidationError when unknown.
    int bus_index(int id) const;
    int from_index(int branch) const noexcept { return from_[branch]; }
    int to_index(int branch) const noexcept { return to_[branch]; }

    /// Branch index for a "from-to" label (either orientation); -1 when unknown.
    int find_branch(std::string_view label) const;

    /// Net injection P_i = P^G - P^D (SVC excluded).
    double p_injection(int bus) const noexcept;
    double q_injection(int bus) const noexcept;

    /// Closed flags of the default configuration (all but the normally-open branches).
    std::vector<bool> normally_closed() const;

    /// Copy with every demand multiplied by `factor` (DG and SVC untouched).
    Network with_load_scale(double factor) const;
    /// Copy with all non-root voltage bounds replaced where given.
    Network with_voltage_bounds(std::optional<double> v_min, std::optional<double> v_max) const;

private:
    double base_mva_;
    double v0_;
    int root_ = 0;
    std::vector<BusRecord> buses_;
    std::vector<BranchRecord> branches_;
    std::vector<int> from_;
    std::vector<int> to_;
};

/// Parse a JSON case document. Powers in the document are MW/MVAr and are
/// converted to p.u. on `base_mva`; impedances are already p.u.
Network parse_case(std::string_view json_text);
Network load_case(const std::string& path);

/// Inverse of parse_case. Numbers get 12 significant digits when that parses
/// back to the stored value and 17 otherwise, so a round trip is bit-exact.
std::string serialize_case(const Network& network);

} // namespace gridflow
