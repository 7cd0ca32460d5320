#ifndef EVSCHED_BRUTEFORCE_ORACLE_HPP
#define EVSCHED_BRUTEFORCE_ORACLE_HPP

// Exact reference for toy instances. Every window-feasible binary schedule is
// enumerated; for each slot the continuous dispatch is found by grid search
// over generator voltage magnitudes (and non-reference generator outputs),
// with a Newton load flow closing the remaining balance equations. Nothing
// here touches the conic solver.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "evsched/grid_model.hpp"
#include "evsched/hermitian.hpp"
#include "evsched/opf_relaxation.hpp"
#include "evsched/scenario.hpp"

namespace evsched {

struct OracleInstance {
    GridCase grid;
    TimeGrid time;
    std::vector<ChargingTask> tasks;
    LoadSeries loads;
    std::vector<double> price;
    double grid_step = 1e-2;   // coarse search resolution, p.u.
    int refinements = 2;       // each pass shrinks the step tenfold

    static constexpr std::size_t kMaxBuses = 4;
    static constexpr std::size_t kMaxTasks = 3;
    static constexpr int kMaxSlots = 6;
};

struct OracleDispatch {
    bool feasible = false;
    CVector voltage;
    std::vector<double> pg;
    std::vector<double> qg;
    double cost = std::numeric_limits<double>::infinity();  // generation, $/slot
};

struct OracleResult {
    double cost = 0.0;
    ChargingSchedule tau;
    std::vector<OracleDispatch> slots;  // per slot 1..T
    std::size_t schedules_enumerated = 0;
};

namespace detail {

/// Newton load flow. Unknowns: angles of every non-reference bus and
/// magnitudes of every non-generator bus. Returns false if it fails to converge.
class LoadFlow {
public:
    LoadFlow(const GridCase& grid, std::size_t ref) : grid_(grid), ref_(ref) {
        for (std::size_t k = 0; k < grid.bus_count(); ++k) {
            if (k != ref) {
                angle_idx_.push_back(k);
            }
            if (!grid.generator_at(k)) {
                mag_idx_.push_back(k);
            }
        }
    }

    /// vmag: magnitudes at generator buses (others ignored); p_spec: net active
    /// injection at every bus (ref entry ignored); q_spec: net reactive injection at PQ buses.
    bool solve(const std::vector<double>& vmag, const std::vector<double>& p_spec,
               const std::vector<double>& q_spec, CVector& v) const {
        const auto n = grid_.bus_count();
        std::vector<double> mag = vmag;
        std::vector<double> ang(n, 0.0);
        for (auto k : mag_idx_) {
            mag[k] = 1.0;
        }
        const auto nx = angle_idx_.size() + mag_idx_.size();
        auto pack = [&](Eigen::VectorXd& x) {
            x.resize(static_cast<Eigen::Index>(nx));
            Eigen::Index i = 0;
            for (auto k : angle_idx_) {
                x(i++) = ang[k];
            }
            for (auto k : mag_idx_) {
                x(i++) = mag[k];
            }
        };
        auto unpack = [&](const Eigen::VectorXd& x) {
            Eigen::Index i = 0;
            for (auto k : angle_idx_) {
                ang[k] = x(i++);
            }
            for (auto k : mag_idx_) {
                mag[k] = x(i++);
            }
        };
        auto mismatch = [&](const Eigen::VectorXd& x) {
            unpack(x);
            const CVector vv = assemble(mag, ang);
            Eigen::VectorXd f(static_cast<Eigen::Index>(nx));
            Eigen::Index i = 0;
            for (auto k : angle_idx_) {
                f(i++) = injection(vv, k).real() - p_spec[k];
            }
            for (auto k : mag_idx_) {
                f(i++) = injection(vv, k).imag() - q_spec[k];
            }
            return f;
        };
        Eigen::VectorXd x;
        pack(x);
        if (nx == 0) {
            v = assemble(mag, ang);
            return true;
        }
        for (int it = 0; it < 30; ++it) {
            const Eigen::VectorXd f = mismatch(x);
            if (f.cwiseAbs().maxCoeff() < 1e-11) {
                unpack(x);
                v = assemble(mag, ang);
                return true;
            }
            Eigen::MatrixXd jac(f.size(), f.size());
            for (Eigen::Index c = 0; c < f.size(); ++c) {
                Eigen::VectorXd xp = x;
                const double h = 1e-7 * std::max(1.0, std::abs(x(c)));
                xp(c) += h;
                jac.col(c) = (mismatch(xp) - f) / h;
            }
            const Eigen::VectorXd dx = jac.fullPivLu().solve(-f);
            if (!dx.allFinite()) {
                return false;
            }
            x += dx;
            for (Eigen::Index c = static_cast<Eigen::Index>(angle_idx_.size()); c < x.size(); ++c) {
                if (x(c) <= 0.05) {
                    return false;  // collapsed to the low-voltage branch
                }
            }
        }
        return false;
    }

    Complex injection(const CVector& v, std::size_t k) const {
        Complex cur{0.0, 0.0};
        for (const auto& nb : grid_.neighbors(k)) {
            cur += nb.admittance * (v(k) - v(nb.bus));
        }
        return v(k) * std::conj(cur);
    }

private:
    static CVector assemble(const std::vector<double>& mag, const std::vector<double>& ang) {
        CVector v(static_cast<Eigen::Index>(mag.size()));
        for (std::size_t k = 0; k < mag.size(); ++k) {
            v(k) = std::polar(mag[k], ang[k]);
        }
        return v;
    }

    const GridCase& grid_;
    std::size_t ref_;
    std::vector<std::size_t> angle_idx_;
    std::vector<std::size_t> mag_idx_;
};

/// Single-slot exact dispatch by grid search over the control variables.
inline OracleDispatch oracle_dispatch(const GridCase& grid, const std::vector<double>& load_p,
                                      const std::vector<double>& load_q, const std::vector<double>& pev_p,
                                      double step, int refinements) {
    const auto n = grid.bus_count();
    const auto ng = grid.generator_count();
    const std::size_t ref = grid.index_of(grid.generators().front().bus);
    LoadFlow lf(grid, ref);

    // controls: |V| at each generator bus, then P at each non-reference generator
    struct Dim {
        double lo, hi;
    };
    std::vector<Dim> dims;
    std::vector<std::size_t> gen_bus(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        gen_bus[g] = grid.index_of(grid.generators()[g].bus);
        dims.push_back({grid.buses()[gen_bus[g]].v_min, grid.buses()[gen_bus[g]].v_max});
    }
    for (std::size_t g = 1; g < ng; ++g) {
        dims.push_back({grid.generators()[g].p_min, grid.generators()[g].p_max});
    }

    auto evaluate = [&](const std::vector<double>& u) {
        OracleDispatch d;
        std::vector<double> vmag(n, 1.0);
        std::vector<double> p_spec(n, 0.0);
        std::vector<double> q_spec(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            p_spec[k] = -load_p[k] - pev_p[k];
            q_spec[k] = -load_q[k];
        }
        for (std::size_t g = 0; g < ng; ++g) {
            vmag[gen_bus[g]] = u[g];
        }
        for (std::size_t g = 1; g < ng; ++g) {
            p_spec[gen_bus[g]] += u[ng + g - 1];
        }
        CVector v;
        if (!lf.solve(vmag, p_spec, q_spec, v)) {
            return d;
        }
        d.pg.assign(ng, 0.0);
        d.qg.assign(ng, 0.0);
        constexpr double tol = 1e-9;
        for (std::size_t g = 0; g < ng; ++g) {
            const auto k = gen_bus[g];
            const Complex s = lf.injection(v, k);
            d.pg[g] = s.real() + load_p[k] + pev_p[k];
            d.qg[g] = s.imag() + load_q[k];
            const auto& gen = grid.generators()[g];
            if (d.pg[g] < gen.p_min - tol || d.pg[g] > gen.p_max + tol || d.qg[g] < gen.q_min - tol ||
                d.qg[g] > gen.q_max + tol) {
                return d;
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            const double m = std::abs(v(k));
            if (m < grid.buses()[k].v_min - tol || m > grid.buses()[k].v_max + tol) {
                return d;
            }
        }
        for (std::size_t l = 0; l < grid.lines().size(); ++l) {
            const auto k = grid.index_of(grid.lines()[l].from);
            const auto m = grid.index_of(grid.lines()[l].to);
            if (std::abs(std::arg(v(k) * std::conj(v(m)))) > grid.line_theta_max(l) + tol) {
                return d;
            }
        }
        d.feasible = true;
        d.voltage = v;
        d.cost = 0.0;
        for (std::size_t g = 0; g < ng; ++g) {
            d.cost += grid.generation_cost(g, d.pg[g]);
        }
        return d;
    };

    // enumerate a rectangular lattice over [lo, hi] per dimension (bounds included)
    auto search = [&](const std::vector<Dim>& box, double h, OracleDispatch& best, std::vector<double>& best_u) {
        std::vector<std::vector<double>> axes;
        for (const auto& dm : box) {
            std::vector<double> ax;
            const int cnt = static_cast<int>(std::floor((dm.hi - dm.lo) / h + 1e-9));
            for (int i = 0; i <= cnt; ++i) {
                ax.push_back(dm.lo + i * h);
            }
            if (ax.empty() || dm.hi - ax.back() > 1e-12) {
                ax.push_back(dm.hi);
            }
            axes.push_back(std::move(ax));
        }
        std::vector<std::size_t> idx(axes.size(), 0);
        std::vector<double> u(axes.size());
        for (;;) {
            for (std::size_t a = 0; a < axes.size(); ++a) {
                u[a] = axes[a][idx[a]];
            }
            auto d = evaluate(u);
            if (d.feasible && d.cost < best.cost) {
                best = std::move(d);
                best_u = u;
            }
            std::size_t a = 0;
            while (a < axes.size() && ++idx[a] == axes[a].size()) {
                idx[a++] = 0;
            }
            if (a == axes.size()) {
                break;
            }
        }
    };

    OracleDispatch best;
    std::vector<double> best_u;
    double h = step;
    search(dims, h, best, best_u);
    for (int r = 0; r < refinements && best.feasible; ++r) {
        std::vector<Dim> box;
        for (std::size_t a = 0; a < dims.size(); ++a) {
            box.push_back({std::max(dims[a].lo, best_u[a] - h), std::min(dims[a].hi, best_u[a] + h)});
        }
        h /= 10.0;
        search(box, h, best, best_u);
    }
    return best;
}

} // namespace detail

/// True MINLP optimum of a toy instance.
inline OracleResult oracle_solve(const OracleInstance& inst) {
    const auto& grid = inst.grid;
    const int slots = inst.time.num_slots;
    if (grid.bus_count() > OracleInstance::kMaxBuses || inst.tasks.size() > OracleInstance::kMaxTasks ||
        slots > OracleInstance::kMaxSlots) {
        throw SizeError("oracle instance exceeds " + std::to_string(OracleInstance::kMaxBuses) + " buses / " +
                        std::to_string(OracleInstance::kMaxTasks) + " tasks / " +
                        std::to_string(OracleInstance::kMaxSlots) + " slots");
    }
    if (grid.generator_count() == 0) {
        throw SizeError("oracle needs at least one generator");
    }
    std::vector<std::string> violated;
    for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
        const auto& t = inst.tasks[i];
        if (t.arrival < 1 || t.departure > slots || t.required > t.window_length()) {
            violated.push_back("task " + std::to_string(i) + " (station " + std::to_string(t.station.value) +
                               ") needs " + std::to_string(t.required) + " slots in a window of " +
                               std::to_string(std::max(0, std::min(t.departure, slots) - t.arrival + 1)));
        }
    }
    if (!violated.empty()) {
        std::string msg = "no feasible schedule:";
        for (const auto& v : violated) {
            msg += " " + v + ";";
        }
        throw InfeasibleError(msg);
    }

    // candidate charging patterns per task (bitmask over slots 1..T)
    std::vector<std::vector<std::uint32_t>> patterns(inst.tasks.size());
    for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
        const auto& t = inst.tasks[i];
        std::uint32_t window = 0;
        for (int s = t.arrival; s <= t.departure; ++s) {
            window |= 1u << (s - 1);
        }
        for (std::uint32_t mask = window;; mask = (mask - 1) & window) {
            const double energy = std::popcount(mask) * t.slot_energy(inst.time.slot_hours);
            if (energy >= t.energy_demand() - 1e-9) {
                patterns[i].push_back(mask);
            }
            if (mask == 0) {
                break;
            }
        }
        std::sort(patterns[i].begin(), patterns[i].end());
    }

    std::map<std::pair<int, std::vector<long long>>, OracleDispatch> cache;
    auto dispatch = [&](int slot, const std::vector<double>& pev) -> const OracleDispatch& {
        std::vector<long long> key;
        for (double p : pev) {
            key.push_back(std::llround(p * 1e12));
        }
        auto it = cache.find({slot, key});
        if (it == cache.end()) {
            it = cache
                     .emplace(std::pair{slot, key},
                              detail::oracle_dispatch(grid, inst.loads.p[slot - 1], inst.loads.q[slot - 1], pev,
                                                      inst.grid_step, inst.refinements))
                     .first;
        }
        return it->second;
    };

    OracleResult best;
    best.cost = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> choice(inst.tasks.size(), 0);
    std::size_t enumerated = 0;
    for (;;) {
        ++enumerated;
        double cost = 0.0;
        bool feasible = true;
        for (int s = 1; s <= slots && feasible; ++s) {
            std::vector<double> pev(grid.bus_count(), 0.0);
            for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
                if (patterns[i][choice[i]] & (1u << (s - 1))) {
                    const auto& t = inst.tasks[i];
                    pev[grid.index_of(t.station)] += pev_power_pu(t, grid);
                    cost += inst.price[s - 1] * t.rate_kw * inst.time.slot_hours;
                }
            }
            const auto& d = dispatch(s, pev);
            feasible = d.feasible;
            cost += d.cost;
        }
        if (feasible && cost < best.cost) {
            best.cost = cost;
            best.tau = ChargingSchedule(static_cast<int>(inst.tasks.size()), slots, ScheduleMode::binary);
            for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
                for (int s = 1; s <= slots; ++s) {
                    best.tau.at(static_cast<int>(i), s) = (patterns[i][choice[i]] >> (s - 1)) & 1u ? 1.0 : 0.0;
                }
            }
        }
        std::size_t a = 0;
        while (a < choice.size() && ++choice[a] == patterns[a].size()) {
            choice[a++] = 0;
        }
        if (a == choice.size()) {
            break;
        }
    }
    if (!std::isfinite(best.cost)) {
        throw InfeasibleError("no binary schedule admits a feasible dispatch in every slot");
    }
    best.schedules_enumerated = enumerated;
    for (int s = 1; s <= slots; ++s) {
        best.slots.push_back(dispatch(s, pev_draw_by_bus(grid, inst.tasks, best.tau, s)));
    }
    return best;
}

/// Stable cache key for an instance (hash of its canonical JSON).
inline std::string oracle_cache_key(const OracleInstance& inst) {
    nlohmann::json j;
    j["case"] = case_to_json(inst.grid);
    j["slots"] = inst.time.num_slots;
    j["slot_hours"] = inst.time.slot_hours;
    j["tasks"] = fleet_to_json(inst.tasks);
    j["load_p"] = inst.loads.p;
    j["load_q"] = inst.loads.q;
    j["price"] = inst.price;
    j["grid_step"] = inst.grid_step;
    j["refinements"] = inst.refinements;
    // FNV-1a over the dump; std::hash is not stable across implementations
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

inline nlohmann::json oracle_result_to_json(const OracleResult& r) {
    nlohmann::json j;
    j["cost"] = r.cost;
    j["schedules_enumerated"] = r.schedules_enumerated;
    j["tau"] = nlohmann::json::array();
    for (int i = 0; i < r.tau.tasks(); ++i) {
        std::vector<int> row;
        for (int s = 1; s <= r.tau.slots(); ++s) {
            row.push_back(static_cast<int>(r.tau.at(i, s)));
        }
        j["tau"].push_back(row);
    }
    j["slots"] = nlohmann::json::array();
    for (const auto& d : r.slots) {
        nlohmann::json sj;
        sj["cost"] = d.cost;
        sj["pg"] = d.pg;
        sj["qg"] = d.qg;
        std::vector<std::array<double, 2>> v;
        for (Eigen::Index k = 0; k < d.voltage.size(); ++k) {
            v.push_back({d.voltage(k).real(), d.voltage(k).imag()});
        }
        sj["voltage"] = v;
        j["slots"].push_back(sj);
    }
    return j;
}

inline OracleResult oracle_result_from_json(const nlohmann::json& j) {
    OracleResult r;
    r.cost = j.at("cost").get<double>();
    r.schedules_enumerated = j.at("schedules_enumerated").get<std::size_t>();
    const auto& tau = j.at("tau");
    const int tasks = static_cast<int>(tau.size());
    const int slots = tasks ? static_cast<int>(tau.at(0).size()) : static_cast<int>(j.at("slots").size());
    r.tau = ChargingSchedule(tasks, slots, ScheduleMode::binary);
    for (int i = 0; i < tasks; ++i) {
        for (int s = 1; s <= slots; ++s) {
            r.tau.at(i, s) = tau.at(i).at(s - 1).get<int>();
        }
    }
    for (const auto& sj : j.at("slots")) {
        OracleDispatch d;
        d.feasible = true;
        d.cost = sj.at("cost").get<double>();
        d.pg = sj.at("pg").get<std::vector<double>>();
        d.qg = sj.at("qg").get<std::vector<double>>();
        const auto v = sj.at("voltage").get<std::vector<std::array<double, 2>>>();
        d.voltage.resize(static_cast<Eigen::Index>(v.size()));
        for (std::size_t k = 0; k < v.size(); ++k) {
            d.voltage(k) = Complex{v[k][0], v[k][1]};
        }
        r.slots.push_back(std::move(d));
    }
    return r;
}

/// oracle_solve with a JSON cache in `dir` keyed by oracle_cache_key.
inline OracleResult oracle_solve_cached(const OracleInstance& inst, const std::string& dir) {
    const std::filesystem::path path = std::filesystem::path(dir) / ("oracle_" + oracle_cache_key(inst) + ".json");
    if (std::ifstream in(path); in) {
        nlohmann::json j;
        in >> j;
        return oracle_result_from_json(j);
    }
    auto r = oracle_solve(inst);
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write oracle cache " + path.string());
    }
    out << oracle_result_to_json(r).dump(1) << "\n";
    return r;
}

} // namespace evsched

#endif
