// Command-line front end: compile, run, verify, scan and report on the
// measurement-exchange protocols. Exit codes: 0 success, 2 impossible forced
// branch, 3 configuration error, 4 verification/resource mismatch.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "stq/verify.hpp"

namespace fs = std::filesystem;
using namespace stq;
using cli::BranchMode;
using cli::ConfigError;
using cli::RunConfig;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBranchImpossible = 2;
constexpr int kExitConfig = 3;
constexpr int kExitVerify = 4;

ProtocolRunner make_runner(const RunConfig& c) {
    GradientProtocolParams gp;
    gp.mu_delta = c.mu_delta;
    gp.n = c.n;
    if (c.protocol == "p1_single") {
        if (c.level == "full") {
            return [=](OutcomeSource& s) {
                return teleport_rotation_full(gates::ket_plus("q"), c.theta, gp, s);
            };
        }
        return [=](OutcomeSource& s) {
            return teleport_rotation(gates::ket_plus("q"), c.theta, gp, s);
        };
    }
    if (c.protocol == "p1_prepare") {
        return [=](OutcomeSource& s) { return prepare_state(c.theta, c.phi_delta, c.n, s, c.mu_delta); };
    }
    if (c.protocol == "p1_two") {
        return [=](OutcomeSource& s) {
            return square_gate(gates::ket0("q"), gates::ket_plus("q"), c.n1, c.n2, s, c.mu_delta);
        };
    }
    if (c.protocol == "p1_recycle") {
        std::vector<double> angles = c.angles;
        return [=](OutcomeSource& s) {
            return recycled_sequence(gates::ket_plus("q"), angles, AngleMode::adjusted, s,
                                     c.mu_delta);
        };
    }
    if (c.protocol == "p1_stabilizer") {
        std::array<double, 3> a{0.3, 0.9, 1.7};
        if (c.angles.size() == 3) a = {c.angles[0], c.angles[1], c.angles[2]};
        auto err = c.error;
        double mu = c.mu_delta;
        return [=](OutcomeSource& s) {
            StabilizerOutcome o = stabilizer_roundtrip(gates::bloch(0.7, 0.3), a, err, s, mu);
            ProtocolResult r = o.run;
            for (int sy : o.syndromes) r.applied_rotations.push_back(sy);
            return r;
        };
    }
    if (c.protocol == "p2_bus") {
        return [=](OutcomeSource& s) { return quantum_bus(gates::bloch(1.0, 0.6), s, c.j_exchange); };
    }
    if (c.protocol == "p2_single") {
        return [=](OutcomeSource& s) {
            return hadamard_sequence(gates::bloch(0.8, 0.2), s, c.j_exchange);
        };
    }
    if (c.protocol == "p2_two") {
        return [=](OutcomeSource& s) {
            return two_qubit_sequence(gates::bloch(0.8, 0.2), gates::bloch(1.7, 2.2), s,
                                      c.j_exchange);
        };
    }
    throw ConfigError("unknown protocol " + c.protocol);
}

json ledger_to_json(const CorrectionLedger& l) {
    json frames = json::object();
    for (const auto& [q, f] : l.frames) {
        frames[q] = {{"x_power", f.x_power}, {"z_power", f.z_power}};
    }
    return {{"frames", frames},
            {"theta_pending", l.theta_pending},
            {"outcome_history", l.outcome_history}};
}

json result_to_json(const ProtocolResult& r, double probability) {
    json out;
    out["outcomes"] = json::array();
    for (const auto& rec : r.records) out["outcomes"].push_back(rec.outcome);
    out["probability"] = probability;
    out["flagged"] = r.flagged;
    out["ledger"] = ledger_to_json(r.ledger);
    out["output_leakage"] = r.output_leakage;
    if (r.output) {
        json amps = json::array();
        for (Eigen::Index i = 0; i < r.output->dim(); ++i) {
            amps.push_back({r.output->amplitude(i).real(), r.output->amplitude(i).imag()});
        }
        out["output_amplitudes"] = amps;
    } else {
        out["output_amplitudes"] = nullptr;
    }
    return out;
}

void write_file(const fs::path& p, const std::string& content) {
    if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::string level;
    std::string branches;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

RunConfig load_with_overrides(const CommonOpts& o) {
    RunConfig c = cli::load_config_file(o.config_path);
    if (!o.level.empty()) c.level = o.level == "full" ? "full" : "effective";
    if (!o.branches.empty()) {
        if (o.branches == "enumerate") c.branches = BranchMode::enumerate_all;
        else if (o.branches == "sample") c.branches = BranchMode::sample;
        else if (o.branches.rfind("forced=", 0) == 0) {
            c.branches = BranchMode::forced;
            c.forced_outcomes.clear();
            std::string rest = o.branches.substr(7);
            size_t pos = 0;
            while (pos < rest.size()) {
                size_t comma = rest.find(',', pos);
                std::string tok = rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                                              : comma - pos);
                if (!tok.empty()) c.forced_outcomes.push_back(std::stoi(tok));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
        } else {
            throw ConfigError("--branches must be enumerate, sample or forced=...");
        }
    }
    if (o.seed_given) {
        c.seed = o.seed;
        c.seed_set = true;
    }
    c.validate();
    return c;
}

std::string summary_text(const RunConfig& c, size_t n_branches) {
    std::ostringstream os;
    os << "protocol: " << c.protocol << "\n";
    os << "branches: " << n_branches << "\n";
    os << "mu_delta: " << c.mu_delta << " rad/s (" << c.mu_delta / (2.0 * M_PI) << " Hz)\n";
    os << "j:        " << c.j_exchange << " rad/s (" << c.j_exchange / (2.0 * M_PI) << " Hz)\n";
    os << "note: energies are stored as angular frequencies; configuration\n"
          "      values tagged hz were multiplied by 2*pi on ingestion\n";
    return os.str();
}

int cmd_run(const CommonOpts& opts) {
    RunConfig c = load_with_overrides(opts);
    ProtocolRunner runner = make_runner(c);
    fs::path out(opts.out_dir);

    json resj;
    resj["protocol"] = c.protocol;
    resj["branches"] = json::array();
    size_t n_branches = 0;

    if (c.branches == BranchMode::enumerate_all) {
        std::vector<Branch> branches = enumerate_branches(runner);
        double total = 0.0;
        for (const auto& b : branches) {
            resj["branches"].push_back(result_to_json(b.result, b.probability));
            total += b.probability;
        }
        resj["probability_sum"] = total;
        n_branches = branches.size();
    } else if (c.branches == BranchMode::sample) {
        OutcomeSource src = OutcomeSource::sampled(c.seed);
        ProtocolResult r = runner(src);
        resj["seed"] = c.seed;
        resj["branches"].push_back(result_to_json(r, r.probability()));
        n_branches = 1;
    } else {
        OutcomeSource src = OutcomeSource::forced(c.forced_outcomes);
        ProtocolResult r = runner(src);
        resj["branches"].push_back(result_to_json(r, r.probability()));
        n_branches = 1;
    }

    write_file(out / "result.json", resj.dump(2) + "\n");
    write_file(out / "summary.txt", summary_text(c, n_branches));

    if (c.protocol == "p1_single" || c.protocol == "p1_two" || c.protocol == "p2_single" ||
        c.protocol == "p2_two") {
        Schedule sched;
        if (c.protocol == "p1_single") {
            GradientProtocolParams gp;
            gp.mu_delta = c.mu_delta;
            gp.n = c.n;
            sched = compile_teleport_rotation(c.theta, gp);
        } else if (c.protocol == "p1_two") {
            sched = compile_square_gate(c.n1, c.n2, c.mu_delta);
        } else if (c.protocol == "p2_single") {
            sched = compile_hadamard_sequence(c.j_exchange);
        } else {
            sched = compile_two_qubit_sequence(c.j_exchange);
        }
        if (c.branches == BranchMode::enumerate_all) {
            sched.outcome_source.mode = "enumerate";
        } else if (c.branches == BranchMode::sample) {
            sched.outcome_source.mode = "sampled";
            sched.outcome_source.seed = c.seed;
        } else {
            sched.outcome_source.mode = "forced";
            sched.outcome_source.outcomes = c.forced_outcomes;
        }
        write_file(out / "schedule.json", schedule_to_json(sched) + "\n");
    }
    std::cout << "wrote " << (out / "result.json").string() << " (" << n_branches
              << " branches)\n";
    return kExitOk;
}

int cmd_verify(const CommonOpts& opts, const std::string& schedule_path) {
    RunConfig c = load_with_overrides(opts);
    fs::path out(opts.out_dir);

    Matrix target;
    CorrectionFamily family;
    int n_in = 1;
    Labels wires{"q2"};
    std::function<ProtocolResult(const StateVector&, OutcomeSource&)> runner;

    GradientProtocolParams gp;
    gp.mu_delta = c.mu_delta;
    gp.n = c.n;

    if (c.protocol == "p1_single") {
        target = gates::w(c.theta).matrix();
        if (!schedule_path.empty()) {
            std::ifstream f(schedule_path);
            if (!f) throw ConfigError("cannot open schedule " + schedule_path);
            std::stringstream ss;
            ss << f.rdbuf();
            Schedule sched = schedule_from_json(ss.str());
            runner = [sched](const StateVector& in, OutcomeSource& s) {
                return run_compiled(sched, {in}, s);
            };
        } else {
            double theta = c.theta;
            runner = [theta, gp](const StateVector& in, OutcomeSource& s) {
                return teleport_rotation(in, theta, gp, s);
            };
        }
    } else if (c.protocol == "p1_two") {
        target = tensor({gates::h("a"), gates::h("b")}).matrix() * gates::cx().matrix();
        n_in = 2;
        wires = {"q4", "q1"};
        int n1 = c.n1, n2 = c.n2;
        double mu = c.mu_delta;
        runner = [n1, n2, mu](const StateVector& in, OutcomeSource& s) {
            auto f1 = extract_factor(in, {"q1"});
            auto f2 = extract_factor(in, {"q2"});
            return square_gate(*f1, *f2, n1, n2, s, mu);
        };
    } else if (c.protocol == "p2_single") {
        target = gates::h().matrix();
        wires = {"q1"};
        double j = c.j_exchange;
        runner = [j](const StateVector& in, OutcomeSource& s) {
            return hadamard_sequence(in, s, j);
        };
    } else if (c.protocol == "p2_two") {
        Matrix hh = tensor({gates::h("a"), gates::h("b")}).matrix();
        target = hh * gates::cz().matrix() * hh;
        n_in = 2;
        wires = {"q1", "q4"};
        double j = c.j_exchange;
        runner = [j](const StateVector& in, OutcomeSource& s) {
            auto f1 = extract_factor(in, {"q1"});
            auto f2 = extract_factor(in, {"q2"});
            return two_qubit_sequence(*f1, *f2, s, j);
        };
    } else if (c.protocol == "p2_bus") {
        target = Matrix::Identity(2, 2);
        wires = {"q2"};
        double j = c.j_exchange;
        runner = [j](const StateVector& in, OutcomeSource& s) { return quantum_bus(in, s, j); };
    } else {
        throw ConfigError("verify: protocol '" + c.protocol + "' has no declared unitary target");
    }

    std::vector<StateVector> probes;
    for (int k = 0; k < n_in; ++k) probes.push_back(gates::bloch(0.8 + 0.3 * k, 0.2 + 0.5 * k));
    ProtocolRunner ref = [&](OutcomeSource& s) {
        if (n_in == 1) return runner(probes[0], s);
        StateVector in = tensor({StateVector({"q1"}, probes[0].amplitudes()),
                                 StateVector({"q2"}, probes[1].amplitudes())});
        return runner(in, s);
    };
    std::vector<Branch> branches = enumerate_branches(ref);

    std::vector<BranchMap> maps;
    for (const auto& b : branches) {
        if (b.result.flagged) continue;
        BranchMap m;
        m.outcomes = b.outcomes;
        m.probability = b.probability;
        m.ledger = b.result.ledger;
        m.kraus = branch_kraus(runner, n_in, b.outcomes, wires);
        if (m.kraus.norm() < 1e-12) continue;
        maps.push_back(std::move(m));
    }

    EquivalenceReport rep = equal_up_to_corrections(maps, target, family, 1e-10, c.protocol);
    write_file(out / "equivalence.json", equivalence_report_to_json(rep) + "\n");
    if (!rep.pass) {
        for (const auto& b : rep.branches) {
            if (!b.pass) {
                std::ostringstream bits;
                for (int o : b.outcomes) bits << o;
                std::cerr << "equivalence failed on branch " << bits.str() << " (deviation "
                          << b.deviation << ")\n";
            }
        }
        return kExitVerify;
    }
    std::cout << "equivalence pass: " << c.protocol << " over " << rep.branches.size()
              << " branches\n";
    return kExitOk;
}

int cmd_scan_leakage(const CommonOpts& opts, std::vector<double> ratios) {
    if (ratios.empty()) ratios = {0.2, 0.1, 0.05, 0.025};
    LeakageScan scan = leakage_scan(ratios);
    write_file(fs::path(opts.out_dir) / "leakage.csv", leakage_scan_to_csv(scan));
    std::cout << "slope " << scan.fit_slope << "\n";
    return kExitOk;
}

int cmd_syndromes(const CommonOpts& opts) {
    auto table = syndrome_table();
    std::ostringstream os;
    os << "error,qubit,s1,s2,s3\n";
    for (const auto& row : table) {
        char p = row.pauli == PauliKind::x ? 'X' : (row.pauli == PauliKind::y ? 'Y' : 'Z');
        os << p << "," << row.qubit << "," << row.syndromes[0] << "," << row.syndromes[1] << ","
           << row.syndromes[2] << "\n";
        bool any = row.syndromes[0] < 0 || row.syndromes[1] < 0 || row.syndromes[2] < 0;
        if (!any) {
            std::cerr << "syndrome row without a -1 entry\n";
            return kExitVerify;
        }
    }
    write_file(fs::path(opts.out_dir) / "syndromes.csv", os.str());
    std::cout << "12 rows, every single-qubit error detected\n";
    return kExitOk;
}

int cmd_resources(const CommonOpts& opts) {
    struct Want {
        const char* tag;
        int gates, meas, anc;
    };
    const Want wants[] = {{"p1_single", 1, 1, 1},
                          {"p1_two", 4, 2, 2},
                          {"p2_single", 3, 2, 1},
                          {"p2_two", 7, 5, 2}};
    json all = json::array();
    bool ok = true;
    for (const Want& w : wants) {
        ResourceCount rc = resource_count(reference_schedule(w.tag));
        all.push_back(json::parse(resource_count_to_json(rc)));
        if (rc.gates != w.gates || rc.measurements != w.meas || rc.ancillae != w.anc) {
            std::cerr << "resource mismatch for " << w.tag << ": got (" << rc.gates << ","
                      << rc.measurements << "," << rc.ancillae << ") want (" << w.gates << ","
                      << w.meas << "," << w.anc << ")\n";
            ok = false;
        }
    }
    write_file(fs::path(opts.out_dir) / "resources.json", all.dump(2) + "\n");
    if (!ok) return kExitVerify;
    std::cout << "resource counts match the reference table\n";
    return kExitOk;
}

int cmd_timing(const CommonOpts& opts) {
    RunConfig c = load_with_overrides(opts);
    fs::path out(opts.out_dir);
    std::ostringstream summary;
    bool all_under = true;
    for (const char* tag : {"p1_single", "p1_two", "p2_single", "p2_two"}) {
        double scale = c.j_exchange;
        if (std::string(tag) == "p1_single") scale = c.j_exchange / 4.0;
        if (std::string(tag) == "p1_two") scale = c.j_exchange / 2.0;
        Schedule s = reference_schedule(tag, scale);
        for (auto& step : s.steps) {
            if (auto* m = std::get_if<StMeasureStep>(&step.kind)) m->spec.latency = c.latency;
        }
        TimingReport r = gate_time(s);
        write_file(out / (std::string("timing_") + tag + ".csv"), timing_report_to_csv(r));
        summary << tag << ": " << r.total_s * 1e9 << " ns\n";
        if (r.total_s >= 150e-9) all_under = false;
    }
    write_file(out / "timing_summary.txt", summary.str());
    std::cout << summary.str();
    if (!all_under) {
        std::cerr << "a schedule exceeds 150 ns\n";
        return kExitVerify;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"state-vector simulator and verifier for measurement-exchange "
                 "protocols on singlet-triplet qubits"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string schedule_path;
    std::vector<double> ratios;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* copt = sub->add_option("--config", opts.config_path, "run configuration file");
        if (config_required) copt->required();
        sub->add_option("--out", opts.out_dir, "output directory")->envname("STQ_OUT");
        sub->add_option("--level", opts.level, "effective|full")->envname("STQ_LEVEL");
        sub->add_option("--branches", opts.branches, "enumerate|sample|forced=...")
            ->envname("STQ_BRANCHES");
        sub->add_option("--seed", opts.seed, "sampling seed")
            ->envname("STQ_SEED")
            ->each([&](const std::string&) { opts.seed_given = true; });
    };

    CLI::App* run = app.add_subcommand("run", "execute a protocol and write results");
    add_common(run, true);
    CLI::App* verify = app.add_subcommand("verify", "check branch maps against the target");
    add_common(verify, true);
    verify->add_option("--schedule", schedule_path, "replay a serialized schedule");
    CLI::App* scan = app.add_subcommand("scan-leakage", "dot-level leakage scan");
    add_common(scan, false);
    scan->add_option("--ratios", ratios, "coupling ratios");
    CLI::App* syn = app.add_subcommand("syndromes", "stabilizer syndrome table");
    add_common(syn, false);
    CLI::App* res = app.add_subcommand("resources", "resource counts for all protocols");
    add_common(res, false);
    CLI::App* tim = app.add_subcommand("timing", "gate-time reports");
    add_common(tim, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(opts);
        if (verify->parsed()) return cmd_verify(opts, schedule_path);
        if (scan->parsed()) return cmd_scan_leakage(opts, ratios);
        if (syn->parsed()) return cmd_syndromes(opts);
        if (res->parsed()) return cmd_resources(opts);
        if (tim->parsed()) return cmd_timing(opts);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const BranchImpossibleError& e) {
        std::cerr << "branch impossible: " << e.what();
        if (e.step_index >= 0) std::cerr << " (step " << e.step_index << ")";
        std::cerr << "\n";
        return kExitBranchImpossible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
