// Copyright 2026 The tdlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end:
//
//   tdlearn preprocess <cfg> [-o plan.json]
//   tdlearn acquire <cfg> -o <snapshots>
//   tdlearn learn <cfg> [--snapshots f] [--oracle] [-o result.json]
//   tdlearn validate <cfg> --result f [--horizon T_f]
//   tdlearn simulate <cfg> --observable P --times t1 t2 ...

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tdlearn/tdlearn.h"

using namespace tdl;

namespace {

void emit(const std::string &text, const std::string &path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw ValueError(cat_str("cannot write '", path, "'"));
    }
    out << text;
}

std::string slurp(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(cat_str("cannot open '", path, "'"));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void log_warnings(const std::vector<std::string> &warnings) {
    for (const auto &w : warnings) {
        std::cerr << "warning: " << w << "\n";
    }
}

int cmd_preprocess(const std::string &cfg_path, const std::string &out) {
    LearnPlan plan = preprocess(load_config(cfg_path));
    log_warnings(plan.warnings);
    emit(plan_to_json(plan).dump(2) + "\n", out);
    return 0;
}

int cmd_acquire(const std::string &cfg_path, const std::string &out) {
    LearnConfig cfg = load_config(cfg_path);
    if (!cfg.truth) {
        throw ValueError("acquire needs a 'truth' ansatz to simulate");
    }
    LearnPlan plan = preprocess(cfg);
    log_warnings(plan.warnings);
    double total = plan.shots_per_time * (double)plan.times.size();
    if (total > 5e7) {
        throw LimitError(cat_str("acquisition of ", fmt_double(total),
                                 " experiments is too large; set shots_per_time in the config"));
    }
    ShadowBatch batch = acquire(*cfg.truth, plan.times, (size_t)plan.shots_per_time, cfg.seed);
    emit(serialize(batch), out);
    std::cerr << "acquired " << batch.snapshots.size() << " snapshots at " << plan.times.size() << " times\n";
    return 0;
}

int cmd_learn(const std::string &cfg_path, const std::string &snapshots, bool oracle, const std::string &out) {
    LearnConfig cfg = load_config(cfg_path);
    if (oracle) {
        cfg.mode = LearnMode::oracle;
    }
    LearnPlan plan = preprocess(cfg);
    LearnResult result;
    if (!snapshots.empty()) {
        ShadowBatch batch = parse_batch(slurp(snapshots));
        if (batch.n != plan.n || batch.times != plan.times) {
            throw ValueError("snapshot file does not match the planned system size and times");
        }
        SnapshotOverlaps src(std::move(batch), plan.groups);
        result = learn_from_source(cfg, plan, src);
        if (cfg.truth) {
            score_against(result, *cfg.truth);
        }
    } else {
        result = learn(cfg, plan);
    }
    log_warnings(result.warnings);
    for (const auto &[stage, secs] : result.stage_seconds) {
        std::cerr << "stage " << stage << ": " << fmt_double(secs) << " s\n";
    }
    emit(serialize(result), out);
    return 0;
}

int cmd_validate(const std::string &cfg_path, const std::string &result_path, double horizon) {
    LearnConfig cfg = load_config(cfg_path);
    if (!cfg.truth) {
        throw ValueError("validate needs a 'truth' ansatz for fresh coefficient evaluations");
    }
    LearnResult r = parse_result(slurp(result_path));
    const LindbladAnsatz &truth = *cfg.truth;
    ValidationReport rep = validate_holdout(
        r, [&](const CoeffIndex &idx, double t) { return truth.find(idx) ? truth.coefficient(idx, t) : 0.0; }, cfg.m,
        cfg.T, cfg.holdout_eps, cfg.holdout_delta, cfg.seed ^ 0x5a5a, cfg.constants.c_poly);
    json j = report_to_json(rep);
    if (horizon > 0) {
        j["horizon"] = horizon;
        j["extrapolated_bounds"] = extrapolate_guarantee(rep, cfg.m, cfg.T, horizon);
    }
    std::cout << j.dump(2) << "\n";
    return rep.pass ? 0 : 2;
}

int cmd_simulate(const std::string &cfg_path, const std::string &observable, const std::vector<double> &times) {
    LearnConfig cfg = load_config(cfg_path);
    if (!cfg.truth) {
        throw ValueError("simulate needs a 'truth' ansatz");
    }
    PauliString p = PauliString::from_str(observable);
    PauliGenerator gen(*cfg.truth);
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    auto states = gen.evolve(gen.basis_vector(p), 0, sorted, OdeOptions{1e-12});
    json out = json::array();
    for (size_t k = 0; k < sorted.size(); k++) {
        json terms = json::object();
        for (Eigen::Index i = 0; i < states[k].size(); i++) {
            if (std::abs(states[k][i]) > 1e-10) {
                terms[PauliString::from_index(p.n, (uint64_t)i).str()] = states[k][i];
            }
        }
        out.push_back({{"t", sorted[k]}, {"pauli_coefficients", terms}});
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{cat_str("tdlearn ", VERSION, ": learning time-dependent Lindbladians from dynamics")};
    app.require_subcommand(1);
    std::string cfg, out, snapshots, result, observable;
    bool oracle = false;
    double horizon = 0;
    std::vector<double> times;

    auto *pre = app.add_subcommand("preprocess", "plan probes, nodes, regions and budgets");
    pre->add_option("config", cfg, "configuration file")->required();
    pre->add_option("-o,--output", out, "output file (default stdout)");

    auto *acq = app.add_subcommand("acquire", "simulate process-shadow snapshots at the planned times");
    acq->add_option("config", cfg, "configuration file")->required();
    acq->add_option("-o,--output", out, "snapshot file")->required();

    auto *lrn = app.add_subcommand("learn", "learn the coefficient schedules");
    lrn->add_option("config", cfg, "configuration file")->required();
    lrn->add_option("--snapshots", snapshots, "learn from a stored snapshot file");
    lrn->add_flag("--oracle", oracle, "use exact overlaps instead of sampling");
    lrn->add_option("-o,--output", out, "result file (default stdout)");

    auto *val = app.add_subcommand("validate", "holdout validation of a learned result");
    val->add_option("config", cfg, "configuration file")->required();
    val->add_option("--result", result, "result file")->required();
    val->add_option("--horizon", horizon, "also report extrapolation bounds on [0, horizon]");

    auto *sim = app.add_subcommand("simulate", "Heisenberg evolution of a Pauli observable");
    sim->add_option("config", cfg, "configuration file")->required();
    sim->add_option("--observable", observable, "Pauli string, e.g. ZII")->required();
    sim->add_option("--times", times, "evaluation times")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*pre) {
            return cmd_preprocess(cfg, out);
        }
        if (*acq) {
            return cmd_acquire(cfg, out);
        }
        if (*lrn) {
            return cmd_learn(cfg, snapshots, oracle, out);
        }
        if (*val) {
            return cmd_validate(cfg, result, horizon);
        }
        return cmd_simulate(cfg, observable, times);
    } catch (const TdlError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
