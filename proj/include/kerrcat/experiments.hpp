// Copyright 2026 The kerrcat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>
#include <unsupported/Eigen/NonLinearOptimization>

#include "kerrcat/evolve.hpp"
#include "kerrcat/tomography.hpp"
#include "kerrcat/wigner.hpp"

namespace kerrcat {

inline constexpr const char *kVersion = "0.1.0";

enum class Solver { automatic, unitary, lindblad };

inline std::string solver_name(Solver s) {
    switch (s) {
    case Solver::automatic: return "auto";
    case Solver::unitary: return "unitary";
    case Solver::lindblad: return "lindblad";
    }
    return "?";
}

inline Solver solver_from_name(const std::string &s) {
    if (s == "auto") return Solver::automatic;
    if (s == "unitary") return Solver::unitary;
    if (s == "lindblad") return Solver::lindblad;
    throw ConfigError("solver method must be auto, unitary or lindblad");
}

inline const std::vector<std::string> &experiment_names() {
    static const std::vector<std::string> v = {"cat_gen", "bell_fock", "fock_to_cat", "two_cat_gate", "tomography"};
    return v;
}

namespace detail {

inline void reject_unknown(const nlohmann::json &j, const std::vector<std::string> &known, const std::string &what) {
    if (!j.is_object()) throw ConfigError(what + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown " + what + " key '" + it.key() + "'");
}

// A list of numbers, or {"start", "stop", "step"} with stop included.
inline std::vector<double> parse_axis(const nlohmann::json &j, const std::string &name) {
    std::vector<double> v;
    if (j.is_array()) {
        for (const auto &x : j) {
            if (!x.is_number()) throw ConfigError("sweep axis '" + name + "' must hold numbers");
            v.push_back(x.get<double>());
        }
    } else if (j.is_object()) {
        reject_unknown(j, {"start", "stop", "step"}, "range");
        const double a = j.at("start").get<double>(), b = j.at("stop").get<double>(), h = j.at("step").get<double>();
        if (!(h > 0.0) || !std::isfinite(a) || !std::isfinite(b) || b < a)
            throw ConfigError("sweep axis '" + name + "' needs finite start <= stop and step > 0");
        const long n = std::lround(std::floor((b - a) / h + 1e-9));
        if (n > 100000) throw ConfigError("sweep axis '" + name + "' is too long");
        for (long k = 0; k <= n; ++k) v.push_back(a + k * h);
    } else {
        throw ConfigError("sweep axis '" + name + "' must be a list or a range");
    }
    for (double x : v)
        if (!std::isfinite(x)) throw ConfigError("sweep axis '" + name + "' has a non-finite entry");
    return v;
}

inline std::vector<double> range(double a, double b, double h) {
    return parse_axis(nlohmann::json{{"start", a}, {"stop", b}, {"step", h}}, "range");
}

} // namespace detail

struct SweepOptions {
    std::vector<double> durations; // us
    std::vector<double> detunings; // MHz
    std::vector<double> phases;    // rad
    int chevron_mode = 1;
    std::string chevron_pair = "phi_plus";
    std::vector<double> snapshots; // us of gate time
    double sqrt_iswap_time = 0.275;
    double iswap_time = 0.480;
    std::array<double, 2> offset = {0.0, 0.82};
    bool fit_decay = false;
    double decay_target = 3.0; // us
    std::string pair = "phi_plus";

    static SweepOptions defaults(const std::string &experiment) {
        SweepOptions s;
        if (experiment == "bell_fock") {
            s.durations = detail::range(0.0, 3.0, 0.025);
            s.detunings = detail::range(-3.0, 3.0, 0.25);
        } else if (experiment == "two_cat_gate") {
            s.durations = detail::range(0.0, 1.0, 0.005);
            s.detunings = {0.0};
            s.phases = {0.0, kPi};
            s.snapshots = {0.0, 0.275, 0.480};
        }
        return s;
    }
};

inline void to_json(nlohmann::json &j, const SweepOptions &s) {
    j = nlohmann::json{{"durations", s.durations},
                       {"detunings", s.detunings},
                       {"phases", s.phases},
                       {"chevron_mode", s.chevron_mode},
                       {"chevron_pair", s.chevron_pair},
                       {"snapshots", s.snapshots},
                       {"sqrt_iswap_time", s.sqrt_iswap_time},
                       {"iswap_time", s.iswap_time},
                       {"offset", s.offset},
                       {"fit_decay", s.fit_decay},
                       {"decay_target", s.decay_target},
                       {"pair", s.pair}};
}

inline void from_json(const nlohmann::json &j, SweepOptions &s) {
    detail::reject_unknown(j,
                           {"durations", "detunings", "phases", "chevron_mode", "chevron_pair", "snapshots",
                            "sqrt_iswap_time", "iswap_time", "offset", "fit_decay", "decay_target", "pair"},
                           "sweep");
    if (j.contains("durations")) s.durations = detail::parse_axis(j.at("durations"), "durations");
    if (j.contains("detunings")) s.detunings = detail::parse_axis(j.at("detunings"), "detunings");
    if (j.contains("phases")) s.phases = detail::parse_axis(j.at("phases"), "phases");
    if (j.contains("snapshots")) s.snapshots = detail::parse_axis(j.at("snapshots"), "snapshots");
    s.chevron_mode = j.value("chevron_mode", s.chevron_mode);
    s.chevron_pair = j.value("chevron_pair", s.chevron_pair);
    s.sqrt_iswap_time = j.value("sqrt_iswap_time", s.sqrt_iswap_time);
    s.iswap_time = j.value("iswap_time", s.iswap_time);
    if (j.contains("offset")) s.offset = j.at("offset").get<std::array<double, 2>>();
    s.fit_decay = j.value("fit_decay", s.fit_decay);
    s.decay_target = j.value("decay_target", s.decay_target);
    s.pair = j.value("pair", s.pair);
}

struct MeasurementSpec {
    std::optional<int> shots; // unset: ideal
    std::uint64_t seed = 1;
    std::array<double, 2> readout_error = {0.0, 0.0};

    MeasureOptions options(std::uint64_t offset = 0) const {
        MeasureOptions o;
        o.shots = shots;
        o.seed = seed + offset;
        o.readout1 = Confusion::symmetric(readout_error[0]);
        o.readout2 = Confusion::symmetric(readout_error[1]);
        return o;
    }
};

inline void to_json(nlohmann::json &j, const MeasurementSpec &m) {
    j = nlohmann::json{{"shots", m.shots ? nlohmann::json(*m.shots) : nlohmann::json("ideal")},
                       {"seed", m.seed},
                       {"readout_error", m.readout_error}};
}

inline void from_json(const nlohmann::json &j, MeasurementSpec &m) {
    detail::reject_unknown(j, {"shots", "seed", "readout_error"}, "measurement");
    if (j.contains("shots")) {
        const auto &s = j.at("shots");
        if (s.is_string() && s.get<std::string>() == "ideal") m.shots.reset();
        else if (s.is_number_integer() && s.get<long>() > 0 && s.get<long>() < (1L << 31)) m.shots = s.get<int>();
        else throw ConfigError("measurement.shots must be \"ideal\" or a positive integer");
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0)
            throw ConfigError("measurement.seed must be a nonnegative integer");
        m.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("readout_error")) m.readout_error = j.at("readout_error").get<std::array<double, 2>>();
    for (double e : m.readout_error)
        if (!(e >= 0.0 && e <= 0.5)) throw ConfigError("readout_error entries must lie in [0, 0.5]");
}

// Initial state of the tomography experiment.
struct StateSource {
    std::string kind = "bell_cat"; // bell_cat | degraded | file
    std::string pair = "phi_plus";
    double wait = 2.0; // us, degraded only
    std::string path;  // file only
};

inline void to_json(nlohmann::json &j, const StateSource &s) {
    j = nlohmann::json{{"kind", s.kind}, {"pair", s.pair}, {"wait", s.wait}, {"path", s.path}};
}

inline void from_json(const nlohmann::json &j, StateSource &s) {
    detail::reject_unknown(j, {"kind", "pair", "wait", "path"}, "source");
    s.kind = j.value("kind", s.kind);
    s.pair = j.value("pair", s.pair);
    s.wait = j.value("wait", s.wait);
    s.path = j.value("path", s.path);
}

struct ExperimentConfig {
    std::string experiment;
    SystemParams system = SystemParams::device();
    PresetOptions schedule;
    Solver solver = Solver::automatic;
    std::optional<double> dt; // us
    SweepOptions sweep;
    MeasurementSpec measurement;
    ReconstructionConfig tomography;
    StateSource source;
    std::string output = "kerrcat_out";

    void validate() const;
};

inline void to_json(nlohmann::json &j, const ExperimentConfig &c) {
    j = nlohmann::json{{"experiment", c.experiment},
                       {"system", c.system},
                       {"schedule", c.schedule},
                       {"solver", {{"method", solver_name(c.solver)},
                                   {"dt", c.dt ? nlohmann::json(*c.dt) : nlohmann::json(nullptr)}}},
                       {"sweep", c.sweep},
                       {"measurement", c.measurement},
                       {"tomography", c.tomography},
                       {"source", c.source},
                       {"output", c.output}};
}

inline void from_json(const nlohmann::json &j, ExperimentConfig &c) {
    detail::reject_unknown(j,
                           {"experiment", "system", "schedule", "solver", "sweep", "measurement", "tomography",
                            "source", "output"},
                           "config");
    if (!j.contains("experiment") || !j.at("experiment").is_string())
        throw ConfigError("config needs an 'experiment' name");
    c = ExperimentConfig{};
    c.experiment = j.at("experiment").get<std::string>();
    const auto &names = experiment_names();
    if (std::find(names.begin(), names.end(), c.experiment) == names.end())
        throw ConfigError("unknown experiment '" + c.experiment + "'");
    c.sweep = SweepOptions::defaults(c.experiment);
    if (j.contains("system")) from_json(j.at("system"), c.system);
    if (j.contains("schedule")) from_json(j.at("schedule"), c.schedule);
    if (j.contains("solver")) {
        const auto &s = j.at("solver");
        detail::reject_unknown(s, {"method", "dt"}, "solver");
        if (s.contains("method")) c.solver = solver_from_name(s.at("method").get<std::string>());
        if (s.contains("dt") && !s.at("dt").is_null()) c.dt = s.at("dt").get<double>();
    }
    if (j.contains("sweep")) from_json(j.at("sweep"), c.sweep);
    if (j.contains("measurement")) from_json(j.at("measurement"), c.measurement);
    if (j.contains("tomography")) from_json(j.at("tomography"), c.tomography);
    if (j.contains("source")) from_json(j.at("source"), c.source);
    c.output = j.value("output", c.output);
}

namespace detail {

inline const std::vector<std::string> &pair_names() {
    static const std::vector<std::string> v = {"phi_plus", "phi_minus", "psi_plus", "psi_minus"};
    return v;
}

inline void check_pair(const std::string &p, const std::string &what) {
    const auto &v = pair_names();
    if (std::find(v.begin(), v.end(), p) == v.end())
        throw ConfigError(what + " must be one of phi_plus, phi_minus, psi_plus, psi_minus");
}

} // namespace detail

inline void ExperimentConfig::validate() const {
    system.validate();
    tomography.validate();
    if (dt && !(*dt > 0.0 && *dt <= 0.01)) throw ConfigError("solver.dt must lie in (0, 0.01] us");
    if (system.modes != 2) throw ConfigError(experiment + " needs two modes");
    if (experiment == "bell_fock" || experiment == "two_cat_gate") {
        if (sweep.durations.empty() || sweep.detunings.empty())
            throw ConfigError("sweep needs durations and detunings");
        for (double d : sweep.durations)
            if (d < 0.0) throw ConfigError("sweep durations must be nonnegative");
        if (*std::max_element(sweep.durations.begin(), sweep.durations.end()) <= 0.0)
            throw ConfigError("sweep durations need a positive entry");
    }
    if (experiment == "bell_fock") {
        if (sweep.chevron_mode != 1 && sweep.chevron_mode != 2) throw ConfigError("chevron_mode must be 1 or 2");
        detail::check_pair(sweep.chevron_pair, "chevron_pair");
    }
    if (experiment == "two_cat_gate") {
        if (sweep.phases.empty()) throw ConfigError("sweep needs at least one gate phase");
        for (double t : sweep.snapshots)
            if (t < 0.0) throw ConfigError("snapshots must be nonnegative");
        if (!(sweep.sqrt_iswap_time > 0.0) || !(sweep.iswap_time > 0.0))
            throw ConfigError("gate reference times must be positive");
        if (!(sweep.decay_target > 0.0)) throw ConfigError("decay_target must be positive");
    }
    if (experiment == "tomography") {
        if (source.kind != "bell_cat" && source.kind != "degraded" && source.kind != "file")
            throw ConfigError("source.kind must be bell_cat, degraded or file");
        detail::check_pair(source.pair, "source.pair");
        if (source.kind == "degraded" && !(source.wait > 0.0)) throw ConfigError("source.wait must be positive");
        if (source.kind == "file" && source.path.empty()) throw ConfigError("source.path is required");
    }
    if (output.empty()) throw ConfigError("output directory must be set");
}

// "a.b.c=value"; value is parsed as JSON when possible, else taken as a string.
inline void apply_override(nlohmann::json &j, const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    nlohmann::json *node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("empty key component in '" + key + "'");
        if (!node->is_object()) throw ConfigError("'" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = nlohmann::json::object();
        start = dot + 1;
    }
}

inline nlohmann::json read_json_file(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path);
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false, true);
    if (j.is_discarded()) throw ConfigError("config " + path + " is not valid JSON");
    return j;
}

inline ExperimentConfig load_config(const std::string &path, const std::vector<std::string> &overrides = {}) {
    nlohmann::json j = read_json_file(path);
    for (const auto &s : overrides) apply_override(j, s);
    ExperimentConfig c;
    try {
        c = j.get<ExperimentConfig>();
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

// Worker count: KERRCAT_THREADS caps the hardware concurrency.
inline int worker_limit() {
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char *env = std::getenv("KERRCAT_THREADS")) {
        char *end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw ConfigError("KERRCAT_THREADS must be a positive integer");
        n = std::min<long>(n, v);
    }
    return n;
}

// Runs fn(0..n-1) on up to worker_limit() threads; the first exception is rethrown.
template <class F> void parallel_for(int n, F &&fn) {
    const int workers = std::min(n, worker_limit());
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex m;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(m);
                    if (!err) err = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto &t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

struct Check {
    std::string name;
    double value = 0.0;
    std::string relation; // ">=", ">", "<=", "<", "in"
    double lo = 0.0, hi = 0.0;
    bool pass = false;
};

inline void to_json(nlohmann::json &j, const Check &c) {
    j = nlohmann::json{{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"pass", c.pass}};
    if (c.relation == "in") j["range"] = {c.lo, c.hi};
    else j["threshold"] = c.lo;
}

struct RunReport {
    std::string experiment;
    nlohmann::json metrics = nlohmann::json::object();
    std::vector<Check> checks;
    std::vector<std::string> files;
    double seconds = 0.0;

    void check(const std::string &name, double value, const std::string &rel, double lo, double hi = 0.0) {
        bool ok = false;
        if (rel == ">=") ok = value >= lo;
        else if (rel == ">") ok = value > lo;
        else if (rel == "<=") ok = value <= lo;
        else if (rel == "<") ok = value < lo;
        else if (rel == "in") ok = value >= lo && value <= hi;
        else throw Error("unknown check relation " + rel);
        checks.push_back({name, value, rel, lo, hi, ok && std::isfinite(value)});
    }
    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check &c) { return c.pass; });
    }
};

// Output directory plus the list of files written into it. Workers hand results
// back to the calling thread, which does all writing.
class RunOutput {
  public:
    explicit RunOutput(std::string dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_))
            throw ConfigError("cannot create output directory " + dir_);
        const auto probe = std::filesystem::path(dir_) / ".kerrcat_write_test";
        if (!std::ofstream(probe)) throw ConfigError("output directory " + dir_ + " is not writable");
        std::filesystem::remove(probe, ec);
    }

    std::string path(const std::string &name) {
        std::lock_guard<std::mutex> lock(m_);
        files_.push_back(name);
        const auto p = std::filesystem::path(dir_) / name;
        std::filesystem::create_directories(p.parent_path());
        return p.string();
    }
    // Registers everything a sub-writer put under `name`.
    std::string subdir(const std::string &name) {
        std::lock_guard<std::mutex> lock(m_);
        files_.push_back(name + "/");
        return (std::filesystem::path(dir_) / name).string();
    }
    const std::string &dir() const { return dir_; }
    const std::vector<std::string> &files() const { return files_; }

  private:
    std::string dir_;
    std::vector<std::string> files_;
    std::mutex m_;
};

namespace detail {

inline bool lossy(const SystemParams &p) { return !collapse_operators(p).empty(); }

inline bool use_lindblad(const ExperimentConfig &c) {
    return c.solver == Solver::lindblad || (c.solver == Solver::automatic && lossy(c.system));
}

inline Trajectory run_schedule(const ExperimentConfig &c, const QuantumState &init, const PulseSchedule &s,
                               EvolveOptions o) {
    if (c.dt) o.dt = c.dt;
    if (use_lindblad(c)) return evolve_lindblad(init.as_density(), c.system, s, o);
    if (!init.is_ket()) throw ConfigError("unitary evolution needs a pure initial state");
    return evolve_unitary(init, c.system, s, o);
}

inline Matrix thermal_populations(int N, double nth, bool excited) {
    RealVector p(N);
    for (int k = 0; k < N; ++k) p(k) = nth > 0.0 ? std::pow(nth / (1.0 + nth), k) : (k == 0 ? 1.0 : 0.0);
    p /= p.sum();
    if (excited) std::swap(p(0), p(1));
    return p.cast<cplx>().asDiagonal();
}

// Fock product |n1 n2>; Lindblad runs with n_th > 0 start from the thermal
// product instead, with |0>,|1> populations exchanged on excited modes.
inline QuantumState initial_state(const ExperimentConfig &c, int n1, int n2) {
    const SystemParams &p = c.system;
    if (use_lindblad(c) && (p.n_th_1 > 0.0 || p.n_th_2 > 0.0))
        return QuantumState::density(p.dims(), kron(thermal_populations(p.N1, p.n_th_1, n1 == 1),
                                                     thermal_populations(p.N2, p.n_th_2, n2 == 1)));
    return fock2(p.N1, p.N2, n1, n2);
}

struct BellPair {
    std::string name;
    bool exchange; // |01>,|10> rather than |00>,|11>
    double phase;
};

inline BellPair bell_pair(const std::string &name) {
    check_pair(name, "pair");
    return {name, name.rfind("psi", 0) == 0, name.find("minus") != std::string::npos ? kPi : 0.0};
}

// Basis kets (a, b) of a pair; target is (a + e^{i phase} b)/sqrt2.
inline std::pair<Vector, Vector> fock_pair(const SystemParams &p, const BellPair &b) {
    if (b.exchange) return {fock2(p.N1, p.N2, 0, 1).vector(), fock2(p.N1, p.N2, 1, 0).vector()};
    return {fock2(p.N1, p.N2, 0, 0).vector(), fock2(p.N1, p.N2, 1, 1).vector()};
}

struct CatBasis {
    Vector c[2][2]; // c[mode][0] even, c[mode][1] odd
};

inline CatBasis cat_basis(const ExperimentConfig &c) {
    const EigenCats m1 = kpo_eigen_cats(c.system, c.schedule.pump1, c.schedule.delta1, 0);
    const EigenCats m2 = kpo_eigen_cats(c.system, c.schedule.pump2, c.schedule.delta2, 1);
    CatBasis b;
    b.c[0][0] = m1.even.vector();
    b.c[0][1] = m1.odd.vector();
    b.c[1][0] = m2.even.vector();
    b.c[1][1] = m2.odd.vector();
    return b;
}

inline Vector cat_ket(const CatBasis &b, int bit1, int bit2) { return kron(b.c[0][bit1], b.c[1][bit2]); }

inline std::pair<Vector, Vector> cat_pair(const CatBasis &cb, const BellPair &b) {
    if (b.exchange) return {cat_ket(cb, 0, 1), cat_ket(cb, 1, 0)};
    return {cat_ket(cb, 0, 0), cat_ket(cb, 1, 1)};
}

inline QuantumState superpose(const Dims &dims, const Vector &a, const Vector &b, cplx w) {
    return QuantumState::ket(dims, (a + w * b) / std::sqrt(2.0));
}

inline PresetOptions bell_options(const PresetOptions &base, const BellPair &b) {
    PresetOptions o = base;
    o.bell_channel = b.exchange ? Channel::bell_diff : Channel::bell_sum;
    o.bell_phase = -0.5 * kPi - b.phase;
    return o;
}

inline double nominal_fidelity(const QuantumState &rho, const Vector &a, const Vector &b, double phase) {
    return fidelity(rho, superpose(rho.dims(), a, b, std::polar(1.0, phase)));
}

inline std::vector<double> sample_grid(double t0, double t1, double dt) {
    std::vector<double> v;
    const long n = std::lround((t1 - t0) / dt);
    for (long k = 0; k <= n; ++k) v.push_back(std::min(t1, t0 + k * dt));
    return v;
}

// Hands an integrated state to the next run; RK4 leaves the norm off by ~1e-9.
inline QuantumState renormalized(const QuantumState &s) {
    if (s.is_ket()) return QuantumState::ket(s.dims(), s.vector().normalized());
    const Matrix r = s.data();
    return QuantumState::density(s.dims(), 0.5 * (r + r.adjoint()) / r.trace().real());
}

inline std::string ns_label(double t_us) { return std::to_string(std::lround(t_us * 1000.0)) + "ns"; }

inline void write_text(const std::string &path, const std::string &text) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f << text;
}

inline void write_state(const std::string &path, const QuantumState &s) {
    write_complex_matrix(path, s.density_matrix(), s.dims());
}

} // namespace detail

// Damped cosine A exp(-t/tau) cos(w t + phi) + c fitted by Levenberg-Marquardt.
struct DecayFit {
    double amplitude = 0.0, tau = 0.0, omega = 0.0, phase = 0.0, offset = 0.0;
    double rms = 0.0;
    bool ok = false;
};

namespace detail {

struct DampedCosine {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const std::vector<double> &t, &y;
    int inputs() const { return 5; }
    int values() const { return static_cast<int>(t.size()); }

    // p = (A, rate, w, phi, c); rate = 1/tau keeps the problem smooth near tau -> inf
    int operator()(const Eigen::VectorXd &p, Eigen::VectorXd &f) const {
        for (int k = 0; k < values(); ++k)
            f(k) = p(0) * std::exp(-p(1) * t[k]) * std::cos(p(2) * t[k] + p(3)) + p(4) - y[k];
        return 0;
    }
    int df(const Eigen::VectorXd &p, Eigen::MatrixXd &J) const {
        for (int k = 0; k < values(); ++k) {
            const double e = std::exp(-p(1) * t[k]), c = std::cos(p(2) * t[k] + p(3)),
                         s = std::sin(p(2) * t[k] + p(3));
            J(k, 0) = e * c;
            J(k, 1) = -t[k] * p(0) * e * c;
            J(k, 2) = -t[k] * p(0) * e * s;
            J(k, 3) = -p(0) * e * s;
            J(k, 4) = 1.0;
        }
        return 0;
    }
};

} // namespace detail

inline DecayFit fit_damped_cosine(const std::vector<double> &t, const std::vector<double> &y) {
    if (t.size() != y.size() || t.size() < 8) throw ParameterError("decay fit needs at least 8 samples");
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    int crossings = 0;
    for (std::size_t k = 1; k < y.size(); ++k)
        if ((y[k - 1] - mean) * (y[k] - mean) < 0.0) ++crossings;
    const double span = t.back() - t.front();
    const double w0 = std::max(kPi * crossings / span, kPi / span);
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    DecayFit best;
    double best_err = kInf;
    detail::DampedCosine fn{t, y};
    for (double wf : {1.0, 0.8, 1.25})
        for (double ph : {0.0, kPi}) {
            Eigen::VectorXd p(5);
            p << 0.5 * (*hi - *lo), 1.0 / span, w0 * wf, ph, mean;
            Eigen::LevenbergMarquardt<detail::DampedCosine> lm(fn);
            lm.minimize(p);
            Eigen::VectorXd f(fn.values());
            fn(p, f);
            const double err = f.norm();
            if (std::isfinite(err) && err < best_err && p(1) > 0.0) {
                best_err = err;
                best.amplitude = p(0);
                best.tau = 1.0 / p(1);
                best.omega = p(2);
                best.phase = p(3);
                best.offset = p(4);
                best.rms = err / std::sqrt(static_cast<double>(f.size()));
                best.ok = true;
            }
        }
    if (best.amplitude < 0.0) {
        best.amplitude = -best.amplitude;
        best.phase += kPi;
    }
    best.phase = std::remainder(best.phase, kTwoPi);
    if (best.omega < 0.0) {
        best.omega = -best.omega;
        best.phase = -best.phase;
    }
    return best;
}

inline RunReport run_cat_gen(const ExperimentConfig &c, RunOutput &out) {
    RunReport rep;
    const SystemParams &p = c.system;
    const PulseSchedule s = preset_schedule("cat_gen", c.schedule);
    s.write_csv(out.path("pulses.csv"));
    EvolveOptions o;
    o.store_states = false;
    o.sample_times = detail::sample_grid(0.0, s.total_duration(), 0.01);
    for (int m = 0; m < 2; ++m) {
        o.observables.push_back({"parity" + std::to_string(m + 1), embed(parity(p.N(m)).data(), m, p.dims())});
        o.observables.push_back({"n" + std::to_string(m + 1), embed(number(p.N(m)).data(), m, p.dims())});
    }
    const Trajectory tr = detail::run_schedule(c, detail::initial_state(c, 0, 0), s, o);
    tr.write_csv(out.path("trajectory.csv"));
    detail::write_state(out.path("final_state.txt"), tr.final_state);
    const bool ideal = !detail::use_lindblad(c);
    const double pumps[2] = {c.schedule.pump1, c.schedule.pump2}, deltas[2] = {c.schedule.delta1, c.schedule.delta2};
    for (int m = 0; m < 2; ++m) {
        const std::string tag = "mode" + std::to_string(m + 1);
        const QuantumState r = tr.final_state.reduced(m);
        const EigenCats cats = kpo_eigen_cats(p, pumps[m], deltas[m], m);
        const double f = fidelity(r, cats.even);
        const double par = r.expectation(parity(p.N(m)).data());
        const double leak = p.N(m) > 8 ? tail_occupation(r, 8) : 0.0;
        rep.metrics[tag] = {{"fidelity_even_cat", f}, {"parity", par}, {"leakage_n_ge_8", leak}};
        measure_grid(tr.final_state, WignerGrid::one_mode_grid(m), c.measurement.options(), m)
            .write_csv(out.path("wigner_" + tag + ".csv"));
        if (ideal) {
            rep.check(tag + " parity", std::abs(par - 1.0), "<=", 1e-6);
            rep.check(tag + " fidelity to even eigen-cat", f, ">=", 0.95);
        }
        rep.check(tag + " leakage sum_{n>=8} p_n", leak, "<", 1e-4);
    }
    rep.metrics["norm_drift"] = tr.norm_drift;
    return rep;
}

inline RunReport run_bell_fock(const ExperimentConfig &c, RunOutput &out) {
    RunReport rep;
    const SystemParams &p = c.system;
    const SweepOptions &sw = c.sweep;
    const bool ideal = !detail::use_lindblad(c);

    // Chevron: one trajectory per detuning, sampled at every pulse length.
    const double tmax = *std::max_element(sw.durations.begin(), sw.durations.end());
    const int nd = static_cast<int>(sw.detunings.size()), nt = static_cast<int>(sw.durations.size());
    const int cm = sw.chevron_mode - 1;
    const Matrix proj0 = embed(fock(p.N(cm), 0).density_matrix(), cm, p.dims());
    const detail::BellPair cp = detail::bell_pair(sw.chevron_pair);
    RealMatrix chevron = RealMatrix::Constant(nd, nt, std::numeric_limits<double>::quiet_NaN());
    parallel_for(nd, [&](int k) {
        PresetOptions o = detail::bell_options(c.schedule, cp);
        o.bell_length = tmax;
        o.bell_detuning = sw.detunings[k];
        o.tail = 0.0;
        EvolveOptions eo;
        eo.store_states = false;
        eo.sample_times = sw.durations;
        eo.observables = {{"p0", proj0}};
        const Trajectory tr = detail::run_schedule(c, detail::initial_state(c, 0, cp.exchange ? 1 : 0),
                                                   preset_schedule("bell_fock", o), eo);
        const auto &v = tr.observables.at("p0");
        for (int j = 0; j < nt; ++j) {
            const auto it = std::find_if(tr.times.begin(), tr.times.end(),
                                         [&](double t) { return std::abs(t - sw.durations[j]) < 1e-9; });
            if (it != tr.times.end()) chevron(k, j) = v[it - tr.times.begin()];
        }
    });
    if (!chevron.allFinite()) throw NumericalError("chevron sweep is missing cells");
    {
        std::ofstream f(out.path("chevron.csv"));
        f.precision(12);
        f << "detuning_MHz,duration_us,p0_mode" << sw.chevron_mode << '\n';
        for (int k = 0; k < nd; ++k)
            for (int j = 0; j < nt; ++j) f << sw.detunings[k] << ',' << sw.durations[j] << ',' << chevron(k, j) << '\n';
    }
    int centre = 0;
    for (int k = 1; k < nd; ++k)
        if (std::abs(sw.detunings[k]) < std::abs(sw.detunings[centre])) centre = k;
    const double contrast = chevron.row(centre).maxCoeff() - chevron.row(centre).minCoeff();
    double asym = 0.0;
    for (int k = 0; k < nd; ++k)
        for (int l = 0; l < nd; ++l)
            if (std::abs(sw.detunings[k] + sw.detunings[l]) < 1e-9)
                asym = std::max(asym, (chevron.row(k) - chevron.row(l)).cwiseAbs().maxCoeff());
    rep.metrics["chevron"] = {{"centre_detuning", sw.detunings[centre]},
                              {"centre_contrast", contrast},
                              {"max_mirror_difference", asym}};
    if (ideal) rep.check("chevron centre contrast", contrast, ">=", 0.95);

    // The four Bell-Fock states at the configured pulse.
    const auto &names = detail::pair_names();
    std::vector<QuantumState> finals(4);
    parallel_for(4, [&](int k) {
        const detail::BellPair b = detail::bell_pair(names[k]);
        PresetOptions o = detail::bell_options(c.schedule, b);
        EvolveOptions eo;
        eo.store_states = false;
        finals[k] = detail::run_schedule(c, detail::initial_state(c, 0, b.exchange ? 1 : 0),
                                         preset_schedule("bell_fock", o), eo)
                        .final_state;
    });
    for (int k = 0; k < 4; ++k) {
        const detail::BellPair b = detail::bell_pair(names[k]);
        const auto [va, vb] = detail::fock_pair(p, b);
        const double f = detail::nominal_fidelity(finals[k], va, vb, b.phase);
        rep.metrics["bell_fock"][names[k]] = {{"fidelity", f},
                                              {"joint_parity_origin", two_mode_wigner(finals[k], 0.0, 0.0)}};
        detail::write_state(out.path("state_" + names[k] + ".txt"), finals[k]);
        standard_dataset(finals[k], c.measurement.options(k)).write(out.subdir("wigner_" + names[k]));
        if (ideal) rep.check(names[k] + " Bell-Fock fidelity", f, ">=", 0.99);
    }
    return rep;
}

inline RunReport run_fock_to_cat(const ExperimentConfig &c, RunOutput &out) {
    RunReport rep;
    const SystemParams &p = c.system;
    const bool ideal = !detail::use_lindblad(c);
    const detail::CatBasis cb = detail::cat_basis(c);
    const auto &names = detail::pair_names();
    std::vector<QuantumState> finals(4);
    parallel_for(4, [&](int k) {
        const detail::BellPair b = detail::bell_pair(names[k]);
        EvolveOptions eo;
        eo.store_states = false;
        finals[k] = detail::run_schedule(c, detail::initial_state(c, 0, b.exchange ? 1 : 0),
                                         preset_schedule("fock_to_cat", detail::bell_options(c.schedule, b)), eo)
                        .final_state;
    });
    preset_schedule("fock_to_cat", c.schedule).write_csv(out.path("pulses.csv"));
    for (int k = 0; k < 4; ++k) {
        const detail::BellPair b = detail::bell_pair(names[k]);
        const auto [ca, cbv] = detail::cat_pair(cb, b);
        const double nominal = detail::nominal_fidelity(finals[k], ca, cbv, b.phase);
        const double aligned = phase_aligned_fidelity(finals[k], ca, cbv);
        const double origin = two_mode_wigner(finals[k], 0.0, 0.0);
        double leak = 0.0;
        for (int m = 0; m < 2; ++m)
            if (p.N(m) > 8) leak = std::max(leak, tail_occupation(finals[k].reduced(m), 8));
        rep.metrics["bell_cat"][names[k]] = {{"fidelity_nominal_phase", nominal},
                                             {"fidelity_phase_aligned", aligned},
                                             {"wigner_origin", origin},
                                             {"max_mode_leakage_n_ge_8", leak}};
        detail::write_state(out.path("state_" + names[k] + ".txt"), finals[k]);
        standard_dataset(finals[k], c.measurement.options(k)).write(out.subdir("wigner_" + names[k]));
        if (ideal) rep.check(names[k] + " Bell-Cat fidelity (phase aligned)", aligned, ">=", 0.95);
        if (b.exchange) rep.check(names[k] + " origin 2WF value", origin, "<", 0.0);
        else rep.check(names[k] + " origin 2WF value", origin, ">", 0.0);
        rep.check(names[k] + " leakage sum_{n>=8} p_n", leak, "<", 1e-4);
    }
    return rep;
}

namespace detail {

// Time of the first minimum of y(t) below zero, refined by a parabola.
inline double first_minimum(const std::vector<double> &t, const std::vector<double> &y) {
    for (std::size_t k = 1; k + 1 < y.size(); ++k) {
        if (y[k] < 0.0 && y[k] <= y[k - 1] && y[k] <= y[k + 1]) {
            const double a = y[k - 1], b = y[k], cc = y[k + 1];
            const double den = a - 2.0 * b + cc;
            const double h = 0.5 * (t[k + 1] - t[k - 1]);
            return den > 0.0 ? t[k] + 0.5 * h * (a - cc) / den : t[k];
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

} // namespace detail

inline RunReport run_two_cat_gate(const ExperimentConfig &c, RunOutput &out) {
    RunReport rep;
    const SystemParams &p = c.system;
    const SweepOptions &sw = c.sweep;
    const bool ideal = !detail::use_lindblad(c);
    const double t0 = c.schedule.tau_ramp + c.schedule.hold;
    const double dmax = std::max({*std::max_element(sw.durations.begin(), sw.durations.end()), sw.sqrt_iswap_time,
                                  sw.iswap_time,
                                  sw.snapshots.empty() ? 0.0
                                                       : *std::max_element(sw.snapshots.begin(), sw.snapshots.end())});

    // |0F 1F> ramped into |0C 1C>.
    PresetOptions po = c.schedule;
    po.gate_length = dmax;
    po.tail = 0.0;
    const PulseSchedule prep_schedule = preset_schedule("two_cat_gate", po);
    prep_schedule.write_csv(out.path("pulses.csv"));
    EvolveOptions prep_opt;
    prep_opt.store_states = false;
    prep_opt.t_end = t0;
    const QuantumState prepared =
        detail::renormalized(detail::run_schedule(c, detail::initial_state(c, 0, 1), prep_schedule, prep_opt).final_state);

    const detail::CatBasis cb = detail::cat_basis(c);
    const Vector k01 = detail::cat_ket(cb, 0, 1), k10 = detail::cat_ket(cb, 1, 0);
    const QuantumState plus = detail::superpose(p.dims(), k01, k10, kI);
    const QuantumState minus = detail::superpose(p.dims(), k01, k10, -kI);
    const QuantumState swapped = QuantumState::ket(p.dims(), k10);
    rep.metrics["prepared_fidelity_0C1C"] = fidelity(prepared, QuantumState::ket(p.dims(), k01));

    std::vector<double> times = sw.durations;
    for (double t : sw.snapshots) times.push_back(t);
    times.push_back(sw.sqrt_iswap_time);
    times.push_back(sw.iswap_time);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                times.end());

    const int nd = static_cast<int>(sw.detunings.size()), nph = static_cast<int>(sw.phases.size());
    const int npts = nd * nph, nt = static_cast<int>(sw.durations.size());
    const Matrix par1 = embed(parity(p.N1).data(), 0, p.dims()), par2 = embed(parity(p.N2).data(), 1, p.dims());
    struct Point {
        std::vector<double> p1, p2;
        double f_plus = 0.0, f_minus = 0.0, f_swap = 0.0;
        std::vector<std::pair<double, QuantumState>> snaps;
    };
    std::vector<Point> pts(npts);
    auto near = [](double a, double b) { return std::abs(a - b) < 1e-9; };
    parallel_for(npts, [&](int idx) {
        PresetOptions o = po;
        o.gate_detuning = sw.detunings[idx / nph];
        o.gate_phase = sw.phases[idx % nph];
        Point &pt = pts[idx];
        EvolveOptions eo;
        eo.store_states = false;
        eo.t_start = t0;
        eo.t_end = t0 + dmax;
        for (double t : times) eo.sample_times.push_back(t0 + t);
        eo.observables = {{"parity1", par1}, {"parity2", par2}};
        eo.on_sample = [&](double t, const QuantumState &s) {
            const double u = t - t0;
            if (near(u, sw.sqrt_iswap_time)) {
                pt.f_plus = fidelity(s, plus);
                pt.f_minus = fidelity(s, minus);
            }
            if (near(u, sw.iswap_time)) pt.f_swap = fidelity(s, swapped);
            if (idx == 0) {
                bool keep = near(u, sw.sqrt_iswap_time);
                for (double x : sw.snapshots) keep = keep || near(u, x);
                if (keep) pt.snaps.emplace_back(u, s);
            }
        };
        const Trajectory tr = detail::run_schedule(c, prepared, preset_schedule("two_cat_gate", o), eo);
        for (double d : sw.durations) {
            const auto it = std::find_if(tr.times.begin(), tr.times.end(), [&](double t) { return near(t - t0, d); });
            if (it == tr.times.end()) throw NumericalError("gate sweep is missing a duration sample");
            const auto k = it - tr.times.begin();
            pt.p1.push_back(tr.observables.at("parity1")[k]);
            pt.p2.push_back(tr.observables.at("parity2")[k]);
        }
    });

    {
        std::ofstream f(out.path("gate_sweep.csv"));
        f.precision(12);
        f << "detuning_MHz,phase_rad,duration_us,parity1,parity2\n";
        for (int idx = 0; idx < npts; ++idx) {
            if (static_cast<int>(pts[idx].p1.size()) != nt) throw NumericalError("gate sweep is not rectangular");
            for (int j = 0; j < nt; ++j)
                f << sw.detunings[idx / nph] << ',' << sw.phases[idx % nph] << ',' << sw.durations[j] << ','
                  << pts[idx].p1[j] << ',' << pts[idx].p2[j] << '\n';
        }
    }

    double anti = 0.0;
    for (const Point &pt : pts)
        for (int j = 0; j < nt; ++j) anti = std::max(anti, std::abs(pt.p1[j] + pt.p2[j]));
    rep.metrics["max_parity_sum"] = anti;
    if (ideal) rep.check("parities anti-correlated |<P1> + <P2>|", anti, "<=", 1e-6);

    // The reference point once more from the exact |0C 1C>, free of preparation error.
    Point exact;
    {
        PresetOptions o = po;
        o.gate_detuning = sw.detunings[0];
        o.gate_phase = sw.phases[0];
        EvolveOptions eo;
        eo.store_states = false;
        eo.t_start = t0;
        eo.t_end = t0 + std::max(sw.sqrt_iswap_time, sw.iswap_time);
        eo.sample_times = {t0 + sw.sqrt_iswap_time, t0 + sw.iswap_time};
        eo.on_sample = [&](double t, const QuantumState &s) {
            if (near(t - t0, sw.sqrt_iswap_time)) {
                exact.f_plus = fidelity(s, plus);
                exact.f_minus = fidelity(s, minus);
            }
            if (near(t - t0, sw.iswap_time)) exact.f_swap = fidelity(s, swapped);
        };
        detail::run_schedule(c, QuantumState::ket(p.dims(), k01), preset_schedule("two_cat_gate", o), eo);
    }

    const Point &ref = pts[0];
    const double t_swap = detail::first_minimum(sw.durations, ref.p1);
    rep.metrics["iswap_time_from_parity"] = t_swap;
    rep.metrics["fidelity_swapped_at_iswap_time"] = ref.f_swap;
    rep.metrics["exact_input"] = {{"fidelity_plus_i", exact.f_plus},
                                  {"fidelity_minus_i", exact.f_minus},
                                  {"fidelity_swapped_at_iswap_time", exact.f_swap}};
    rep.metrics["sqrt_iswap"] = nlohmann::json::array();
    for (int idx = 0; idx < npts; ++idx)
        rep.metrics["sqrt_iswap"].push_back({{"detuning_MHz", sw.detunings[idx / nph]},
                                             {"phase_rad", sw.phases[idx % nph]},
                                             {"fidelity_plus_i", pts[idx].f_plus},
                                             {"fidelity_minus_i", pts[idx].f_minus}});
    if (ideal) {
        rep.check("iSWAP time from parity half period (us)", t_swap, "in", sw.iswap_time * 0.85, sw.iswap_time * 1.15);
        rep.check("fidelity to |1C0C> at iswap_time (exact input)", exact.f_swap, ">=", 0.95);
        rep.check("sqrt-iSWAP fidelity, best sign (exact input)", std::max(exact.f_plus, exact.f_minus), ">=", 0.95);
        for (int a = 0; a < nph; ++a)
            for (int b = a + 1; b < nph; ++b) {
                const double dphi = std::remainder(sw.phases[b] - sw.phases[a], kTwoPi);
                if (std::abs(std::abs(dphi) - kPi) > 1e-9) continue;
                const Point &x = pts[a], &y = pts[b];
                const bool flipped = (x.f_plus > x.f_minus) != (y.f_plus > y.f_minus);
                rep.check("sign flip between phases " + std::to_string(sw.phases[a]) + " and " +
                              std::to_string(sw.phases[b]),
                          flipped ? 1.0 : 0.0, ">=", 1.0);
            }
    }

    for (const auto &[u, s] : ref.snaps) {
        for (double x : sw.snapshots) {
            if (std::abs(u - x) > 1e-9) continue;
            for (int m = 0; m < 2; ++m)
                measure_grid(s, WignerGrid::one_mode_grid(m), c.measurement.options(static_cast<std::uint64_t>(m)), m)
                    .write_csv(out.path("wigner_mode" + std::to_string(m + 1) + "_" + detail::ns_label(u) + ".csv"));
        }
        if (std::abs(u - sw.sqrt_iswap_time) < 1e-9) {
            const WignerGrid g = WignerGrid::rere(sw.offset[0], sw.offset[1]);
            const WignerGrid meas = measure_grid(s, g, c.measurement.options(2), 0);
            meas.write_csv(out.path("offset_rere_state.csv"));
            const QuantumState mixture = QuantumState::density(
                p.dims(), 0.5 * (k01 * k01.adjoint() + k10 * k10.adjoint()));
            const std::vector<std::pair<std::string, QuantumState>> refs = {
                {"plus_i", plus}, {"minus_i", minus}, {"mixture", mixture}};
            for (const auto &[name, st] : refs) {
                const WignerGrid r = measure_grid(st, g);
                r.write_csv(out.path("offset_rere_" + name + ".csv"));
                rep.metrics["offset_slice_rms_to_" + name] =
                    std::sqrt((meas.values - r.values).squaredNorm() / meas.pixels());
            }
            detail::write_state(out.path("state_sqrt_iswap.txt"), s);
        }
    }

    if (sw.fit_decay) {
        const DecayFit fit = fit_damped_cosine(sw.durations, ref.p1);
        rep.metrics["decay_fit"] = {{"amplitude", fit.amplitude}, {"tau_us", fit.tau},     {"omega_rad_per_us", fit.omega},
                                    {"phase", fit.phase},         {"offset", fit.offset},  {"rms", fit.rms}};
        rep.check("two-cat Rabi decay time (us)", fit.ok ? fit.tau : kInf, "in", 0.7 * sw.decay_target,
                  1.3 * sw.decay_target);
    }
    return rep;
}

namespace detail {

inline QuantumState bell_cat_state(const ExperimentConfig &c, const std::string &pair) {
    const BellPair b = bell_pair(pair);
    const auto [a, v] = cat_pair(cat_basis(c), b);
    return superpose(c.system.dims(), a, v, std::polar(1.0, b.phase));
}

// Bell-Cat state idled with the pumps held, under the configured losses.
inline QuantumState degraded_bell_cat(const ExperimentConfig &c, const std::string &pair, double wait) {
    PulseSchedule s;
    const double amp[2] = {c.schedule.pump1, c.schedule.pump2}, det[2] = {c.schedule.delta1, c.schedule.delta2};
    for (int m = 0; m < 2; ++m) {
        DriveSpec d;
        d.channel = m == 0 ? Channel::pump1 : Channel::pump2;
        d.t_start = 0.0;
        d.t_end = wait;
        d.amplitude = Envelope::constant(amp[m]);
        d.detuning = Envelope::constant(det[m]);
        s.add(d);
    }
    EvolveOptions o;
    o.store_states = false;
    if (c.dt) o.dt = c.dt;
    return evolve_lindblad(bell_cat_state(c, pair).as_density(), c.system, s, o).final_state;
}

} // namespace detail

inline RunReport run_tomography(const ExperimentConfig &c, RunOutput &out) {
    RunReport rep;
    const StateSource &src = c.source;
    QuantumState truth;
    if (src.kind == "file") {
        Dims d;
        const Matrix m = read_complex_matrix(src.path, &d);
        if (d.size() != 2) throw ConfigError("source state must be two-mode");
        truth = QuantumState::density(d, m, 1e-8);
    } else if (src.kind == "bell_cat") {
        truth = detail::bell_cat_state(c, src.pair);
    } else {
        const QuantumState initial = detail::bell_cat_state(c, src.pair);
        truth = detail::degraded_bell_cat(c, src.pair, src.wait);
        const auto [a, b] = detail::cat_pair(detail::cat_basis(c), detail::bell_pair(src.pair));
        rep.metrics["truth_vs_initial_phase_aligned"] = phase_aligned_fidelity(truth, a, b);
        rep.metrics["truth_vs_initial"] = fidelity(truth, initial);
    }
    detail::write_state(out.path("truth.txt"), truth);
    WignerDataset ds = standard_dataset(truth, c.measurement.options());
    ds.metadata = {{"source", src.kind}, {"pair", src.pair}};
    ds.write(out.subdir("dataset"));
    const ReconstructionResult r = reconstruct(ds, c.tomography, truth);
    r.write_report(out.subdir("reconstruction"));
    rep.metrics["reconstruction"] = {{"fidelity", *r.fidelity},
                                     {"loss", r.loss},
                                     {"iterations", r.iterations},
                                     {"converged", r.converged},
                                     {"restart_losses", r.restart_losses}};
    double threshold = 0.99;
    std::string rel = ">";
    if (src.kind == "degraded") threshold = 0.98, rel = ">=";
    else if (c.measurement.shots) threshold = 0.95, rel = ">=";
    rep.check("reconstruction fidelity", *r.fidelity, rel, threshold);
    return rep;
}

inline nlohmann::json run_manifest(const ExperimentConfig &c, const RunReport &r) {
    return {{"format", "kerrcat-run"},
            {"version", 1},
            {"kerrcat", kVersion},
            {"experiment", c.experiment},
            {"config", c},
            {"solver", detail::use_lindblad(c) ? "lindblad" : "unitary"},
            {"dt_us", c.dt ? *c.dt : (detail::use_lindblad(c) ? kLindbladDt : kUnitaryDt)},
            {"files", r.files},
            {"seconds", r.seconds}};
}

// Runs the configured experiment, writing artifacts, report.json and manifest.json.
inline RunReport run_experiment(const ExperimentConfig &c) {
    c.validate();
    RunOutput out(c.output);
    const auto start = std::chrono::steady_clock::now();
    RunReport rep;
    if (c.experiment == "cat_gen") rep = run_cat_gen(c, out);
    else if (c.experiment == "bell_fock") rep = run_bell_fock(c, out);
    else if (c.experiment == "fock_to_cat") rep = run_fock_to_cat(c, out);
    else if (c.experiment == "two_cat_gate") rep = run_two_cat_gate(c, out);
    else if (c.experiment == "tomography") rep = run_tomography(c, out);
    else throw ConfigError("unknown experiment '" + c.experiment + "'");
    rep.experiment = c.experiment;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::string report_path = out.path("report.json");
    out.path("manifest.json");
    rep.files = out.files();
    detail::write_text(report_path, nlohmann::json{{"experiment", rep.experiment},
                                                   {"metrics", rep.metrics},
                                                   {"checks", rep.checks},
                                                   {"passed", rep.passed()},
                                                   {"seconds", rep.seconds}}
                                            .dump(2) +
                                        "\n");
    detail::write_text((std::filesystem::path(out.dir()) / "manifest.json").string(), run_manifest(c, rep).dump(2) + "\n");
    return rep;
}

// Config as it would be re-read from a run manifest.
inline ExperimentConfig config_from_manifest(const std::string &path) {
    const nlohmann::json m = read_json_file(path);
    if (m.value("format", "") != "kerrcat-run") throw ConfigError(path + " is not a run manifest");
    ExperimentConfig c = m.at("config").get<ExperimentConfig>();
    c.validate();
    return c;
}

struct Calibration {
    double amplitude = 0.0; // MHz
    double fidelity = 0.0;
    int evaluations = 0;
};

// Golden-section search of the Bell-preparation amplitude maximizing the final
// Bell-Fock fidelity of sweep.pair at the configured pulse length.
inline Calibration calibrate_bell_amplitude(const ExperimentConfig &c, double tol = 1e-4) {
    if (c.system.modes != 2) throw ConfigError("calibration needs two modes");
    const detail::BellPair b = detail::bell_pair(c.sweep.pair);
    const auto [va, vb] = detail::fock_pair(c.system, b);
    Calibration cal;
    auto f = [&](double amp) {
        PresetOptions o = detail::bell_options(c.schedule, b);
        o.bell_amplitude = amp;
        EvolveOptions eo;
        eo.store_states = false;
        ++cal.evaluations;
        const QuantumState s = detail::run_schedule(c, detail::initial_state(c, 0, b.exchange ? 1 : 0),
                                                    preset_schedule("bell_fock", o), eo)
                                   .final_state;
        return detail::nominal_fidelity(s, va, vb, b.phase);
    };
    const double centre = 1.0 / (4.0 * c.schedule.bell_length);
    double lo = 0.5 * centre, hi = 1.5 * centre;
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > tol) {
        if (f1 > f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    cal.amplitude = f1 > f2 ? x1 : x2;
    cal.fidelity = std::max(f1, f2);
    return cal;
}

} // namespace kerrcat
