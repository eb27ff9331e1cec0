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

// kerrcat command line.
//
//   kerrcat run <experiment> --config <file> [--set key=value ...] [--out dir] [--seed n] [--check]
//   kerrcat calibrate bell-amp --config <file> [--set key=value ...]
//   kerrcat reconstruct --dataset <manifest> --dims d1,d2 [--out dir] [--seed n] [--target rho.txt]
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 check failure.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "kerrcat/kerrcat.hpp"

using namespace kerrcat;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheck = 4;

void print_checks(const RunReport &r) {
    for (const Check &c : r.checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.value << ' ' << c.relation << ' ';
        if (c.relation == "in") std::cout << '[' << c.lo << ", " << c.hi << ']';
        else std::cout << c.lo;
        std::cout << '\n';
    }
}

int cmd_run(const std::string &experiment, const std::string &config, const std::vector<std::string> &sets,
            const std::string &out, const std::optional<std::uint64_t> &seed, bool check) {
    std::vector<std::string> overrides = sets;
    if (!out.empty()) overrides.push_back("output=\"" + out + "\"");
    if (seed) {
        overrides.push_back("measurement.seed=" + std::to_string(*seed));
        overrides.push_back("tomography.seed=" + std::to_string(*seed));
    }
    const ExperimentConfig c = load_config(config, overrides);
    if (c.experiment != experiment)
        throw ConfigError("config " + config + " describes '" + c.experiment + "', not '" + experiment + "'");
    const RunReport r = run_experiment(c);
    std::cout << r.experiment << ": " << r.files.size() << " artifacts in " << c.output << " (" << r.seconds
              << " s)\n";
    print_checks(r);
    if (check && !r.passed()) return kExitCheck;
    return 0;
}

int cmd_calibrate(const std::string &config, const std::vector<std::string> &sets) {
    ExperimentConfig c = load_config(config, sets);
    const Calibration cal = calibrate_bell_amplitude(c);
    const nlohmann::json j{{"pair", c.sweep.pair},
                           {"bell_length_us", c.schedule.bell_length},
                           {"bell_amplitude_MHz", cal.amplitude},
                           {"fidelity", cal.fidelity},
                           {"evaluations", cal.evaluations}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_reconstruct(const std::string &dataset, const std::string &dims, const std::string &out,
                    const std::optional<std::uint64_t> &seed, const std::string &target) {
    ReconstructionConfig cfg;
    cfg.dims.clear();
    std::stringstream ss(dims);
    for (std::string tok; std::getline(ss, tok, ',');) {
        try {
            std::size_t used = 0;
            cfg.dims.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception &) {
            throw ConfigError("--dims expects integers like 8,8");
        }
    }
    if (seed) cfg.seed = *seed;
    cfg.validate();
    const WignerDataset ds = WignerDataset::read(dataset);
    std::optional<QuantumState> truth;
    if (!target.empty()) {
        Dims d;
        const Matrix m = read_complex_matrix(target, &d);
        truth = QuantumState::density(d, m, 1e-8);
    }
    const ReconstructionResult r = reconstruct(ds, cfg, truth);
    const std::string dir = out.empty() ? (std::filesystem::path(dataset).parent_path() / "reconstruction").string() : out;
    r.write_report(dir);
    std::cout << "loss " << r.loss << " after " << r.iterations << " iterations"
              << (r.converged ? "" : " (not converged)") << '\n';
    if (r.fidelity) std::cout << "fidelity " << *r.fidelity << '\n';
    std::cout << "report in " << dir << '\n';
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Kerr-cat two-mode simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string experiment, config, out, dataset, dims, target, which;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    bool check = false;

    auto *run = app.add_subcommand("run", "run an experiment");
    run->add_option("experiment", experiment, "experiment name")->required()->check(CLI::IsMember(experiment_names()));
    run->add_option("--config", config, "config file")->required();
    run->add_option("--set", sets, "key=value override (dotted keys)");
    run->add_option("--out", out, "output directory");
    run->add_option("--seed", seed, "measurement and reconstruction seed");
    run->add_flag("--check", check, "exit 4 when a check fails");

    auto *cal = app.add_subcommand("calibrate", "calibrate drive parameters");
    cal->add_option("target", which, "what to calibrate")->required()->check(CLI::IsMember({"bell-amp"}));
    cal->add_option("--config", config, "config file")->required();
    cal->add_option("--set", sets, "key=value override (dotted keys)");

    auto *rec = app.add_subcommand("reconstruct", "reconstruct a density matrix from a Wigner dataset");
    rec->add_option("--dataset", dataset, "dataset manifest")->required();
    rec->add_option("--dims", dims, "reconstruction dims, e.g. 8,8")->required();
    rec->add_option("--out", out, "report directory");
    rec->add_option("--seed", seed, "optimizer seed");
    rec->add_option("--target", target, "true state for the fidelity (matrix dump)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return cmd_run(experiment, config, sets, out, seed, check);
        if (*cal) return cmd_calibrate(config, sets);
        return cmd_reconstruct(dataset, dims, out, seed, target);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParameterError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ScheduleError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DimensionError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
