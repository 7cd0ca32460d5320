#ifndef EVSCHED_GRID_MODEL_HPP
#define EVSCHED_GRID_MODEL_HPP

// Residential grid description: buses, series-admittance lines and
// dispatchable generators. Generator buses double as charging stations.

#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evsched/errors.hpp"

namespace evsched {

using Complex = std::complex<double>;

/// 1-based bus identifier as it appears in case files.
struct BusId {
    int value = 0;
    friend auto operator<=>(const BusId&, const BusId&) = default;
};

struct Bus {
    BusId id;
    double v_min = 0.9;  // p.u.
    double v_max = 1.1;  // p.u.
    double base_load_p = 0.0;
    double base_load_q = 0.0;
    friend bool operator==(const Bus&, const Bus&) = default;
};

struct Line {
    BusId from;
    BusId to;
    Complex admittance;  // series admittance y_km, p.u.
    friend bool operator==(const Line&, const Line&) = default;
};

/// f(P) = c2 P^2 + c1 P + c0 with P in MW.
struct GenCost {
    double c2 = 0.0;
    double c1 = 0.0;
    double c0 = 0.0;
    friend bool operator==(const GenCost&, const GenCost&) = default;
};

struct Generator {
    BusId bus;
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    GenCost cost;
    friend bool operator==(const Generator&, const Generator&) = default;
};

struct AngleLimit {
    BusId from;
    BusId to;
    double theta_max = std::numbers::pi / 6.0;
    friend bool operator==(const AngleLimit&, const AngleLimit&) = default;
};

inline constexpr double kDefaultThetaMax = std::numbers::pi / 6.0;

/// Neighbor of a bus in dense (0-based) indexing. Parallel lines are merged.
struct Neighbor {
    std::size_t bus;
    Complex admittance;
};

/// Validated, immutable grid case.
class GridCase {
public:
    GridCase() = default;

    GridCase(double base_mva, std::vector<Bus> buses, std::vector<Line> lines,
             std::vector<Generator> generators, std::vector<AngleLimit> angle_limits = {})
        : base_mva_(base_mva),
          buses_(std::move(buses)),
          lines_(std::move(lines)),
          generators_(std::move(generators)),
          angle_limits_(std::move(angle_limits)) {
        validate_and_index();
    }

    double base_mva() const { return base_mva_; }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Line>& lines() const { return lines_; }
    const std::vector<Generator>& generators() const { return generators_; }
    const std::vector<AngleLimit>& angle_limits() const { return angle_limits_; }

    std::size_t bus_count() const { return buses_.size(); }
    std::size_t generator_count() const { return generators_.size(); }

    bool has_bus(BusId id) const { return index_.contains(id.value); }

    std::size_t index_of(BusId id) const {
        auto it = index_.find(id.value);
        if (it == index_.end()) {
            throw LookupError("unknown bus " + std::to_string(id.value));
        }
        return it->second;
    }

    /// Dense-index neighbor list (parallel lines merged).
    const std::vector<Neighbor>& neighbors(std::size_t bus_index) const {
        return adjacency_.at(bus_index);
    }

    /// Generator index serving the bus, if any.
    std::optional<std::size_t> generator_at(std::size_t bus_index) const {
        const auto g = gen_of_bus_.at(bus_index);
        if (g < 0) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(g);
    }

    /// Angle bound of the i-th entry of lines().
    double line_theta_max(std::size_t line_index) const { return line_theta_.at(line_index); }

    /// Generation cost in $/h for an output given in p.u.
    double generation_cost(std::size_t gen, double p_pu) const {
        const auto& c = generators_.at(gen).cost;
        const double mw = p_pu * base_mva_;
        return c.c2 * mw * mw + c.c1 * mw + c.c0;
    }

    friend bool operator==(const GridCase& a, const GridCase& b) {
        return a.base_mva_ == b.base_mva_ && a.buses_ == b.buses_ && a.lines_ == b.lines_ &&
               a.generators_ == b.generators_ && a.angle_limits_ == b.angle_limits_;
    }

private:
    void validate_and_index();

    double base_mva_ = 100.0;
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    std::vector<Generator> generators_;
    std::vector<AngleLimit> angle_limits_;

    std::map<int, std::size_t> index_;
    std::vector<std::vector<Neighbor>> adjacency_;
    std::vector<long> gen_of_bus_;
    std::vector<double> line_theta_;
};

inline void GridCase::validate_and_index() {
    if (!(base_mva_ > 0.0) || !std::isfinite(base_mva_)) {
        throw ValidationError("base_mva must be positive");
    }
    if (buses_.empty()) {
        throw ValidationError("case declares no buses");
    }
    index_.clear();
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        const auto& b = buses_[i];
        if (b.id.value < 1) {
            throw ValidationError("bus id must be >= 1, got " + std::to_string(b.id.value));
        }
        if (!index_.emplace(b.id.value, i).second) {
            throw ValidationError("duplicate bus id " + std::to_string(b.id.value));
        }
        if (!(b.v_min > 0.0) || !(b.v_min <= b.v_max)) {
            throw ValidationError("bus " + std::to_string(b.id.value) +
                                  ": voltage bounds must satisfy 0 < v_min <= v_max");
        }
    }

    adjacency_.assign(buses_.size(), {});
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> slot;  // (k,m) -> position
    for (const auto& l : lines_) {
        const auto name = std::to_string(l.from.value) + "-" + std::to_string(l.to.value);
        if (!has_bus(l.from) || !has_bus(l.to)) {
            throw ValidationError("line " + name + " references an undeclared bus");
        }
        if (l.from == l.to) {
            throw ValidationError("line " + name + " is a self loop");
        }
        if (!std::isfinite(l.admittance.real()) || !std::isfinite(l.admittance.imag()) ||
            std::abs(l.admittance) == 0.0) {
            throw ValidationError("line " + name + " has a zero or non-finite admittance");
        }
        const auto k = index_of(l.from);
        const auto m = index_of(l.to);
        for (auto [a, b] : {std::pair{k, m}, std::pair{m, k}}) {
            auto [it, fresh] = slot.emplace(std::pair{a, b}, adjacency_[a].size());
            if (fresh) {
                adjacency_[a].push_back({b, l.admittance});
            } else {
                adjacency_[a][it->second].admittance += l.admittance;
            }
        }
    }

    gen_of_bus_.assign(buses_.size(), -1);
    for (std::size_t g = 0; g < generators_.size(); ++g) {
        const auto& gen = generators_[g];
        const auto name = "generator at bus " + std::to_string(gen.bus.value);
        if (!has_bus(gen.bus)) {
            throw ValidationError(name + " references an undeclared bus");
        }
        if (!(gen.p_min <= gen.p_max)) {
            throw ValidationError(name + ": p_min > p_max");
        }
        if (!(gen.q_min <= gen.q_max)) {
            throw ValidationError(name + ": q_min > q_max");
        }
        if (gen.cost.c2 < 0.0) {
            throw ValidationError(name + ": quadratic cost coefficient must be >= 0");
        }
        auto& owner = gen_of_bus_[index_of(gen.bus)];
        if (owner >= 0) {
            throw ValidationError(name + ": a bus may host at most one generator");
        }
        owner = static_cast<long>(g);
    }

    line_theta_.assign(lines_.size(), kDefaultThetaMax);
    for (const auto& al : angle_limits_) {
        const auto name = std::to_string(al.from.value) + "-" + std::to_string(al.to.value);
        if (!(al.theta_max > 0.0 && al.theta_max < std::numbers::pi / 2.0)) {
            throw ValidationError("angle limit " + name + " must lie in (0, pi/2)");
        }
        bool found = false;
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            const auto& l = lines_[i];
            if ((l.from == al.from && l.to == al.to) || (l.from == al.to && l.to == al.from)) {
                line_theta_[i] = al.theta_max;
                found = true;
            }
        }
        if (!found) {
            throw ValidationError("angle limit " + name + " does not match any line");
        }
    }
}

/// Neighbors of bus k with their (merged) admittances.
inline std::vector<std::pair<BusId, Complex>> admittance_neighbors(const GridCase& grid, BusId k) {
    std::vector<std::pair<BusId, Complex>> out;
    for (const auto& nb : grid.neighbors(grid.index_of(k))) {
        out.emplace_back(grid.buses()[nb.bus].id, nb.admittance);
    }
    return out;
}

// --- JSON schema -----------------------------------------------------------

namespace detail {

template <typename T>
T require(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParseError(where + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(where + ": field '" + key + "' has the wrong type");
    }
}

inline const nlohmann::json& require_array(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) {
        throw ParseError(std::string("case: missing array '") + key + "'");
    }
    return j.at(key);
}

} // namespace detail

inline GridCase case_from_json(const nlohmann::json& j) {
    using detail::require;
    if (!j.is_object()) {
        throw ParseError("case: top level must be an object");
    }
    const double base = require<double>(j, "base_mva", "case");

    std::vector<Bus> buses;
    std::size_t i = 0;
    for (const auto& b : detail::require_array(j, "buses")) {
        const auto where = "buses[" + std::to_string(i++) + "]";
        buses.push_back({BusId{require<int>(b, "id", where)}, require<double>(b, "v_min", where),
                         require<double>(b, "v_max", where), require<double>(b, "base_load_p", where),
                         require<double>(b, "base_load_q", where)});
    }

    std::vector<Line> lines;
    i = 0;
    for (const auto& l : detail::require_array(j, "lines")) {
        const auto where = "lines[" + std::to_string(i++) + "]";
        const auto y = require<std::vector<double>>(l, "admittance", where);
        if (y.size() != 2) {
            throw ParseError(where + ": admittance must be [re, im]");
        }
        lines.push_back({BusId{require<int>(l, "from", where)}, BusId{require<int>(l, "to", where)},
                         Complex{y[0], y[1]}});
    }

    std::vector<Generator> gens;
    i = 0;
    for (const auto& g : detail::require_array(j, "generators")) {
        const auto where = "generators[" + std::to_string(i++) + "]";
        const auto c = require<std::vector<double>>(g, "cost", where);
        if (c.size() != 3) {
            throw ParseError(where + ": cost must be [c2, c1, c0]");
        }
        gens.push_back({BusId{require<int>(g, "bus", where)}, require<double>(g, "p_min", where),
                        require<double>(g, "p_max", where), require<double>(g, "q_min", where),
                        require<double>(g, "q_max", where), GenCost{c[0], c[1], c[2]}});
    }

    std::vector<AngleLimit> limits;
    if (j.contains("angle_limits")) {
        i = 0;
        for (const auto& a : detail::require_array(j, "angle_limits")) {
            const auto where = "angle_limits[" + std::to_string(i++) + "]";
            limits.push_back({BusId{require<int>(a, "from", where)}, BusId{require<int>(a, "to", where)},
                              require<double>(a, "theta_max", where)});
        }
    }
    return GridCase(base, std::move(buses), std::move(lines), std::move(gens), std::move(limits));
}

inline nlohmann::json case_to_json(const GridCase& grid) {
    nlohmann::json j;
    j["base_mva"] = grid.base_mva();
    j["buses"] = nlohmann::json::array();
    for (const auto& b : grid.buses()) {
        j["buses"].push_back({{"id", b.id.value},
                              {"v_min", b.v_min},
                              {"v_max", b.v_max},
                              {"base_load_p", b.base_load_p},
                              {"base_load_q", b.base_load_q}});
    }
    j["lines"] = nlohmann::json::array();
    for (const auto& l : grid.lines()) {
        j["lines"].push_back({{"from", l.from.value},
                              {"to", l.to.value},
                              {"admittance", {l.admittance.real(), l.admittance.imag()}}});
    }
    j["generators"] = nlohmann::json::array();
    for (const auto& g : grid.generators()) {
        j["generators"].push_back({{"bus", g.bus.value},
                                   {"p_min", g.p_min},
                                   {"p_max", g.p_max},
                                   {"q_min", g.q_min},
                                   {"q_max", g.q_max},
                                   {"cost", {g.cost.c2, g.cost.c1, g.cost.c0}}});
    }
    if (!grid.angle_limits().empty()) {
        j["angle_limits"] = nlohmann::json::array();
        for (const auto& a : grid.angle_limits()) {
            j["angle_limits"].push_back(
                {{"from", a.from.value}, {"to", a.to.value}, {"theta_max", a.theta_max}});
        }
    }
    return j;
}

inline GridCase load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open case file " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return case_from_json(j);
}

} // namespace evsched

#endif
