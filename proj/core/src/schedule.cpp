#include "stq/schedule.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace stq {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

} // namespace

// ---------------------------------------------------------------------------
// CorrectionLedger

void CorrectionLedger::compose_left(const Label& qubit, int z, int x, double phi) {
    Frame& f = frames[qubit];
    // X^x' Z^z' P(phi') . X^x Z^z P(phi) = X^(x+x') Z^(z+z') P(phi + (-1)^x phi')
    // up to global phase, with x the power already in the frame.
    theta_pending += (f.x_power ? -phi : phi);
    f.x_power ^= (x & 1);
    f.z_power ^= (z & 1);
}

CorrectionLedger::Frame CorrectionLedger::frame(const Label& qubit) const {
    auto it = frames.find(qubit);
    return it == frames.end() ? Frame{} : it->second;
}

Operator CorrectionLedger::correction_operator(const Label& qubit, bool include_phase) const {
    Frame f = frame(qubit);
    Operator c = gates::i2(qubit);
    if (include_phase && theta_pending != 0.0) c = c * gates::p(theta_pending, qubit);
    if (f.z_power) c = gates::z(qubit) * c;
    if (f.x_power) c = gates::x(qubit) * c;
    return c;
}

bool CorrectionLedger::trivial() const {
    if (theta_pending != 0.0) return false;
    for (const auto& [q, f] : frames)
        if (f.x_power || f.z_power) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Schedule duration

namespace {

double step_duration(const ScheduleStep& s) {
    return std::visit(
        [](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, ExchangeWindowStep>) return k.duration;
            else if constexpr (std::is_same_v<T, IntraPhaseStep>) return k.tau;
            else if constexpr (std::is_same_v<T, StMeasureStep>) return k.spec.latency;
            else return 0.0;
        },
        s.kind);
}

} // namespace

double Schedule::total_duration() const {
    double total = 0.0;
    size_t i = 0;
    while (i < steps.size()) {
        if (steps[i].parallel_group < 0) {
            total += step_duration(steps[i]);
            ++i;
            continue;
        }
        int g = steps[i].parallel_group;
        double dmax = 0.0;
        while (i < steps.size() && steps[i].parallel_group == g) {
            dmax = std::max(dmax, step_duration(steps[i]));
            ++i;
        }
        total += dmax;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Lifting qubit operators to a dot pair

Operator lift_qubit_operator(const Operator& op, Encoding encoding) {
    if (op.dim() != 2) throw ContractError("lift_qubit_operator: expects a 1-qubit operator");
    Matrix v = qubit_subspace_embedding(encoding, 1);
    Matrix lifted = v * op.matrix() * v.adjoint() +
                    (Matrix::Identity(4, 4) - v * v.adjoint());
    return Operator(dot_labels(2), std::move(lifted));
}

// ---------------------------------------------------------------------------
// Executor

namespace {

struct Executor {
    const Schedule& sched;
    StateVector state;
    OutcomeSource& source;
    CorrectionLedger ledger;
    std::vector<MeasurementRecord> records;

    int qubit_index(const Label& q) const {
        Labels qs = sched.qubit_space();
        auto it = std::find(qs.begin(), qs.end(), q);
        if (it == qs.end()) throw ScheduleError("unknown qubit label " + q);
        return static_cast<int>(it - qs.begin()) + 1;
    }

    int powers_from(int cst, const std::vector<int>& refs, int step_idx) const {
        int p = cst;
        for (int r : refs) {
            if (r < 0 || r >= static_cast<int>(records.size())) {
                throw ScheduleError("correction references a future measurement", step_idx);
            }
            p ^= (records[r].outcome & 1);
        }
        return p & 1;
    }

    void apply(const Operator& full_space_op) { state = full_space_op * state; }

    // ---- effective level ------------------------------------------------

    void exchange_window_effective(const ExchangeWindowStep& w) {
        Labels space = sched.qubit_space();
        Eigen::Index d = Eigen::Index{1} << sched.n_qubits;
        Matrix h = Matrix::Zero(d, d);
        for (const auto& [q, coeff] : w.locals) {
            h += coeff * embed(gates::z(q), {q}, space).matrix();
        }
        for (const auto& e : w.edges) {
            Matrix zz = embed(gates::z(e.qa), {e.qa}, space).matrix() *
                        embed(gates::z(e.qb), {e.qb}, space).matrix();
            h += 0.25 * e.j * (zz - Matrix::Identity(d, d));
        }
        apply(evolve(Operator(space, std::move(h)), w.duration));
    }

    void st_measure_effective(const StMeasureStep& m, int step_idx) {
        auto [a, b] = m.spec.dot_pair;
        if (b != a + 1 || a % 2 == 0) {
            throw ScheduleError("inter-qubit measurement requires full_spin level", step_idx);
        }
        int q = (a + 1) / 2;
        Label ql = "q" + std::to_string(q);
        Labels space = sched.qubit_space();

        StateVector plus = gates::ket_plus(ql), minus = gates::ket_minus(ql);
        Matrix pp = plus.amplitudes() * plus.amplitudes().adjoint();
        Matrix pm = minus.amplitudes() * minus.amplitudes().adjoint();
        Operator p_triplet = embed(Operator({ql}, pp), {ql}, space);
        Operator p_singlet = embed(Operator({ql}, pm), {ql}, space);

        auto [st0, pr0] = project(state, p_triplet);
        auto [st1, pr1] = project(state, p_singlet);
        std::vector<double> probs{pr0, pr1};
        if (m.spec.outcome_model == OutcomeModel::singlet_vs_t0) probs.push_back(0.0);

        int outcome;
        try {
            outcome = source.pick(probs);
        } catch (BranchImpossibleError& e) {
            throw BranchImpossibleError(e.what(), step_idx);
        }
        records.push_back(MeasurementRecord{m.spec, outcome, probs[outcome], step_idx});
        ledger.outcome_history.push_back(outcome);
        if (probs[outcome] < kImpossibleBranchTol) {
            throw BranchImpossibleError("zero-probability outcome", step_idx);
        }
        state = (outcome == 0 ? st0 : st1).normalized();
    }

    void reset_plus_effective(const ResetPlusStep& r, int step_idx) {
        Labels space = sched.qubit_space();
        StateVector minus = gates::ket_minus(r.qubit);
        Matrix pm = minus.amplitudes() * minus.amplitudes().adjoint();
        auto [stm, p_minus] = project(state, embed(Operator({r.qubit}, pm), {r.qubit}, space));
        if (p_minus > 1.0 - 1e-9) {
            apply(embed(gates::z(r.qubit), {r.qubit}, space));
        } else if (p_minus > 1e-9) {
            throw ScheduleError("reset of a qubit that is not in a |+/-> product state", step_idx);
        }
    }

    // ---- full-spin level --------------------------------------------------

    FullSpinModel base_model() const {
        FullSpinModel m;
        m.n_dots = 2 * sched.n_qubits;
        m.zeeman = sched.dot_fields;
        if (m.zeeman.empty()) m.zeeman.assign(m.n_dots, 0.0);
        return m;
    }

    void exchange_window_full(const ExchangeWindowStep& w) {
        FullSpinModel m = base_model();
        for (const auto& e : w.edges) {
            int qa = qubit_index(e.qa), qb = qubit_index(e.qb);
            if (qb != qa + 1) std::swap(qa, qb);
            if (qb != qa + 1) throw ScheduleError("exchange window on non-adjacent qubits");
            m.exchange[{2 * qa, 2 * qa + 1}] = e.j;
        }
        apply(evolve(full_spin_hamiltonian(m), w.duration));
    }

    void intra_phase_full(const IntraPhaseStep& p) {
        double alpha = wrap_angle(p.j * p.tau);
        if (alpha == 0.0) return;
        if (p.j <= 0.0) throw ScheduleError("intra phase with zero exchange");
        // Exchange lowers the singlet, so a window of duration (2pi-a)/j
        // realizes diag(1, e^{ia}) on the {singlet, triplet-0} code space.
        double t_phys = (kTwoPi - alpha) / p.j;
        int q = qubit_index(p.qubit);
        FullSpinModel m = base_model();
        m.exchange[{2 * q - 1, 2 * q}] = p.j;
        apply(evolve(full_spin_hamiltonian(m), t_phys));
    }

    void st_measure_full(const StMeasureStep& m, int step_idx) {
        try {
            auto [rec, st] = stq::measure(state, m.spec, source);
            records.push_back(MeasurementRecord{rec.spec, rec.outcome, rec.probability, step_idx});
            ledger.outcome_history.push_back(rec.outcome);
            state = std::move(st);
        } catch (BranchImpossibleError& e) {
            throw BranchImpossibleError(e.what(), step_idx);
        }
    }

    // ---- shared ------------------------------------------------------------

    Operator qubit_gate_in_space(const Operator& gate1q, const Label& q) const {
        if (sched.level == SimLevel::effective) {
            return embed(gate1q, {q}, sched.qubit_space());
        }
        int qi = qubit_index(q);
        Operator lifted = lift_qubit_operator(gate1q, sched.encoding);
        Labels space = sched.dot_space();
        Labels pair{space[2 * qi - 2], space[2 * qi - 1]};
        Operator named(pair, lifted.matrix());
        return embed(named, pair, space);
    }

    void intra_phase(const IntraPhaseStep& p) {
        if (sched.level == SimLevel::effective) {
            double alpha = wrap_angle(p.j * p.tau);
            apply(qubit_gate_in_space(gates::p(alpha, p.qubit), p.qubit));
        } else {
            intra_phase_full(p);
        }
    }

    void pauli_correction(const PauliCorrectionStep& c, int step_idx) {
        int x = powers_from(c.x_const, c.x_refs, step_idx);
        int z = powers_from(c.z_const, c.z_refs, step_idx);
        if (sched.correction_mode == CorrectionMode::lazy) {
            ledger.compose_left(c.qubit, z, x, 0.0);
            return;
        }
        Operator op = gates::i2(c.qubit);
        if (z) op = gates::z(c.qubit) * op;
        if (x) op = gates::x(c.qubit) * op;
        apply(qubit_gate_in_space(op, c.qubit));
    }

    void phase_correction(const PhaseCorrectionStep& c, int step_idx) {
        int sign = powers_from(0, c.sign_refs, step_idx);
        double angle = sign ? -c.angle : c.angle;
        if (sched.correction_mode == CorrectionMode::lazy) {
            ledger.compose_left(c.qubit, 0, 0, angle);
            return;
        }
        apply(qubit_gate_in_space(gates::p(angle, c.qubit), c.qubit));
    }

    void run_step(const ScheduleStep& s, int idx) {
        std::visit(
            [&](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, ExchangeWindowStep>) {
                    sched.level == SimLevel::effective ? exchange_window_effective(k)
                                                       : exchange_window_full(k);
                } else if constexpr (std::is_same_v<T, IntraPhaseStep>) {
                    intra_phase(k);
                } else if constexpr (std::is_same_v<T, StMeasureStep>) {
                    sched.level == SimLevel::effective ? st_measure_effective(k, idx)
                                                       : st_measure_full(k, idx);
                } else if constexpr (std::is_same_v<T, PauliCorrectionStep>) {
                    pauli_correction(k, idx);
                } else if constexpr (std::is_same_v<T, PhaseCorrectionStep>) {
                    phase_correction(k, idx);
                } else if constexpr (std::is_same_v<T, ResetPlusStep>) {
                    if (sched.level != SimLevel::effective) {
                        throw ScheduleError("reset supported at the effective level only", idx);
                    }
                    reset_plus_effective(k, idx);
                }
            },
            s.kind);
    }
};

} // namespace

RunResult run_schedule(const Schedule& schedule, const StateVector& initial,
                       OutcomeSource& source) {
    Executor ex{schedule, initial, source, {}, {}};
    for (size_t i = 0; i < schedule.steps.size(); ++i) {
        ex.run_step(schedule.steps[i], static_cast<int>(i));
    }
    return RunResult{std::move(ex.state), std::move(ex.ledger), std::move(ex.records),
                     schedule.total_duration()};
}

StateVector schedule_initial_state(const Schedule& schedule,
                                   const std::vector<StateVector>& inputs,
                                   const std::vector<int>& placement) {
    std::vector<int> place = placement;
    if (place.empty()) {
        for (size_t i = 0; i < inputs.size(); ++i) place.push_back(static_cast<int>(i) + 1);
    }
    if (place.size() != inputs.size()) {
        throw ContractError("schedule_initial_state: placement size mismatch");
    }
    std::vector<StateVector> factors;
    Labels qs = schedule.qubit_space();
    for (int q = 1; q <= schedule.n_qubits; ++q) {
        auto it = std::find(place.begin(), place.end(), q);
        if (it == place.end()) {
            factors.push_back(gates::ket_plus(qs[q - 1]));
        } else {
            const StateVector& in = inputs[it - place.begin()];
            if (in.dim() != 2) throw ContractError("schedule inputs must be single qubits");
            factors.push_back(StateVector({qs[q - 1]}, in.amplitudes()));
        }
    }
    StateVector qubit_state = tensor(std::span<const StateVector>(factors));
    if (schedule.level == SimLevel::effective) return qubit_state;

    Matrix v = qubit_subspace_embedding(schedule.encoding, schedule.n_qubits);
    return StateVector(schedule.dot_space(), v * qubit_state.amplitudes());
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

json step_to_json(const ScheduleStep& s) {
    json j;
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, ExchangeWindowStep>) {
                j["kind"] = "exchange_window";
                j["locals"] = json::object();
                for (const auto& [q, c] : k.locals) j["locals"][q] = c;
                j["edges"] = json::array();
                for (const auto& e : k.edges) {
                    j["edges"].push_back({{"qa", e.qa}, {"qb", e.qb}, {"j_rad_per_s", e.j}});
                }
                j["duration_s"] = k.duration;
            } else if constexpr (std::is_same_v<T, IntraPhaseStep>) {
                j["kind"] = "intra_phase";
                j["qubit"] = k.qubit;
                j["j_rad_per_s"] = k.j;
                j["tau_s"] = k.tau;
            } else if constexpr (std::is_same_v<T, StMeasureStep>) {
                j["kind"] = "st_measure";
                j["dot_pair"] = {k.spec.dot_pair.first, k.spec.dot_pair.second};
                j["outcome_model"] = k.spec.outcome_model == OutcomeModel::singlet_vs_t0
                                         ? "singlet_vs_t0"
                                         : "singlet_vs_all_triplet";
                j["latency_s"] = k.spec.latency;
            } else if constexpr (std::is_same_v<T, PauliCorrectionStep>) {
                j["kind"] = "pauli_correction";
                j["qubit"] = k.qubit;
                j["x_const"] = k.x_const;
                j["x_refs"] = k.x_refs;
                j["z_const"] = k.z_const;
                j["z_refs"] = k.z_refs;
            } else if constexpr (std::is_same_v<T, PhaseCorrectionStep>) {
                j["kind"] = "phase_correction";
                j["qubit"] = k.qubit;
                j["angle_rad"] = k.angle;
                j["sign_refs"] = k.sign_refs;
            } else if constexpr (std::is_same_v<T, ResetPlusStep>) {
                j["kind"] = "reset_plus";
                j["qubit"] = k.qubit;
            }
        },
        s.kind);
    j["parallel_group"] = s.parallel_group;
    return j;
}

ScheduleStep step_from_json(const json& j) {
    ScheduleStep s;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "exchange_window") {
        ExchangeWindowStep w;
        for (auto it = j.at("locals").begin(); it != j.at("locals").end(); ++it) {
            w.locals[it.key()] = it.value().get<double>();
        }
        for (const auto& e : j.at("edges")) {
            w.edges.push_back({e.at("qa").get<std::string>(), e.at("qb").get<std::string>(),
                               e.at("j_rad_per_s").get<double>()});
        }
        w.duration = j.at("duration_s").get<double>();
        s.kind = std::move(w);
    } else if (kind == "intra_phase") {
        s.kind = IntraPhaseStep{j.at("qubit").get<std::string>(),
                                j.at("j_rad_per_s").get<double>(), j.at("tau_s").get<double>()};
    } else if (kind == "st_measure") {
        StMeasureStep m;
        m.spec.dot_pair = {j.at("dot_pair")[0].get<int>(), j.at("dot_pair")[1].get<int>()};
        m.spec.outcome_model = j.at("outcome_model").get<std::string>() == "singlet_vs_t0"
                                   ? OutcomeModel::singlet_vs_t0
                                   : OutcomeModel::singlet_vs_all_triplet;
        m.spec.latency = j.at("latency_s").get<double>();
        s.kind = std::move(m);
    } else if (kind == "pauli_correction") {
        PauliCorrectionStep c;
        c.qubit = j.at("qubit").get<std::string>();
        c.x_const = j.at("x_const").get<int>();
        c.x_refs = j.at("x_refs").get<std::vector<int>>();
        c.z_const = j.at("z_const").get<int>();
        c.z_refs = j.at("z_refs").get<std::vector<int>>();
        s.kind = std::move(c);
    } else if (kind == "phase_correction") {
        s.kind = PhaseCorrectionStep{j.at("qubit").get<std::string>(),
                                     j.at("angle_rad").get<double>(),
                                     j.at("sign_refs").get<std::vector<int>>()};
    } else if (kind == "reset_plus") {
        s.kind = ResetPlusStep{j.at("qubit").get<std::string>()};
    } else {
        throw ScheduleError("unknown step kind in schedule JSON: " + kind);
    }
    s.parallel_group = j.at("parallel_group").get<int>();
    return s;
}

} // namespace

std::string schedule_to_json(const Schedule& schedule) {
    json j;
    j["tag"] = schedule.tag;
    j["level"] = schedule.level == SimLevel::effective ? "effective" : "full_spin";
    j["encoding"] = schedule.encoding == Encoding::gradient_x_basis ? "gradient_x_basis"
                                                                    : "exchange_z_basis";
    j["n_qubits"] = schedule.n_qubits;
    j["n_logical_inputs"] = schedule.n_logical_inputs;
    j["dot_fields_rad_per_s"] = schedule.dot_fields;
    j["correction_mode"] = schedule.correction_mode == CorrectionMode::lazy ? "lazy" : "eager";
    j["leakage_protected"] = schedule.leakage_protected;
    if (!schedule.outcome_source.mode.empty()) {
        j["outcome_source"] = {{"mode", schedule.outcome_source.mode},
                               {"seed", schedule.outcome_source.seed},
                               {"outcomes", schedule.outcome_source.outcomes}};
    }
    j["steps"] = json::array();
    for (const auto& s : schedule.steps) j["steps"].push_back(step_to_json(s));
    return j.dump(2);
}

Schedule schedule_from_json(const std::string& text) {
    json j = json::parse(text);
    Schedule s;
    s.tag = j.at("tag").get<std::string>();
    s.level = j.at("level").get<std::string>() == "effective" ? SimLevel::effective
                                                              : SimLevel::full_spin;
    s.encoding = j.at("encoding").get<std::string>() == "gradient_x_basis"
                     ? Encoding::gradient_x_basis
                     : Encoding::exchange_z_basis;
    s.n_qubits = j.at("n_qubits").get<int>();
    s.n_logical_inputs = j.at("n_logical_inputs").get<int>();
    s.dot_fields = j.at("dot_fields_rad_per_s").get<std::vector<double>>();
    s.correction_mode = j.at("correction_mode").get<std::string>() == "lazy"
                            ? CorrectionMode::lazy
                            : CorrectionMode::eager;
    s.leakage_protected = j.at("leakage_protected").get<bool>();
    if (j.contains("outcome_source")) {
        s.outcome_source.mode = j["outcome_source"].at("mode").get<std::string>();
        s.outcome_source.seed = j["outcome_source"].at("seed").get<std::uint64_t>();
        s.outcome_source.outcomes = j["outcome_source"].at("outcomes").get<std::vector<int>>();
    }
    for (const auto& js : j.at("steps")) s.steps.push_back(step_from_json(js));
    return s;
}

} // namespace stq
