// Protocol schedules: ordered steps (exchange windows, intra-qubit phase
// gates, singlet-triplet measurements, frame corrections) executed against a
// state at either simulation level, with a Pauli/phase correction ledger.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stq/measure.hpp"
#include "stq/qcore.hpp"
#include "stq/spinmodels.hpp"

namespace stq {

class ScheduleError : public std::runtime_error {
public:
    explicit ScheduleError(const std::string& what, int step = -1)
        : std::runtime_error(what), step_index(step) {}
    int step_index;
};

enum class SimLevel { effective, full_spin };

// ---------------------------------------------------------------------------
// Steps

/// Inter-qubit exchange window. At the effective level it evolves
///   H = sum_q locals[q] Z_q + sum_edges (j/4)(Z_a Z_b - I)
/// (Z = diag(1,-1)); at the full-spin level each edge turns on the Heisenberg
/// coupling between the adjacent inner dots of the two qubits, with the
/// schedule's dot fields always on.
struct ExchangeWindowStep {
    struct Edge {
        Label qa, qb;
        double j = 0.0; ///< rad/s
    };
    std::map<Label, double> locals; ///< per-qubit Z coefficient (rad/s), effective level
    std::vector<Edge> edges;
    double duration = 0.0; ///< seconds
};

/// Intra-qubit exchange phase gate; acts as diag(1, e^{i j tau}) on the
/// qubit. At the full-spin level the singlet is the exchange ground state, so
/// the same phase is realized by a window of duration (2*pi - j*tau)/j on the
/// qubit's own dot pair.
struct IntraPhaseStep {
    Label qubit;
    double j = 0.0;   ///< rad/s
    double tau = 0.0; ///< seconds (effective-level duration; angle = j*tau)
};

/// Singlet-triplet measurement of a dot pair. The effective executor accepts
/// only intra-qubit pairs (2q-1, 2q), which it reads out in the qubit's
/// {|+>,|->} basis (outcome 0 = triplet, 1 = singlet); inter-qubit pairs
/// require the full-spin level.
struct StMeasureStep {
    MeasurementSpec spec;
};

/// Outcome-conditioned Pauli frame update: X^(x) Z^(z) on `qubit` with
/// x = x_const + sum of referenced outcomes (mod 2), likewise z.
/// References index into the run's measurement records.
struct PauliCorrectionStep {
    Label qubit;
    int x_const = 0;
    std::vector<int> x_refs;
    int z_const = 0;
    std::vector<int> z_refs;
};

/// Outcome-conditioned phase update: P(angle * (-1)^(sum of referenced
/// outcomes)) on `qubit`.
struct PhaseCorrectionStep {
    Label qubit;
    double angle = 0.0;
    std::vector<int> sign_refs;
};

/// Deterministic re-preparation of a spent qubit to |+>.
struct ResetPlusStep {
    Label qubit;
};

using StepKind = std::variant<ExchangeWindowStep, IntraPhaseStep, StMeasureStep,
                              PauliCorrectionStep, PhaseCorrectionStep, ResetPlusStep>;

struct ScheduleStep {
    StepKind kind;
    /// Steps sharing a group id run concurrently; a group's duration is the
    /// max over its members. -1 means the step runs alone.
    int parallel_group = -1;
};

enum class CorrectionMode {
    lazy,  ///< corrections accumulate in the ledger, state untouched
    eager, ///< corrections are applied to the state as unitaries
};

/// How outcomes were (or are to be) drawn, carried with serialized
/// schedules so runs replay bit-exactly.
struct SavedOutcomeSource {
    std::string mode; ///< "enumerate", "sampled" or "forced"; empty = unset
    std::uint64_t seed = 0;
    std::vector<int> outcomes;
};

struct Schedule {
    std::string tag;
    SimLevel level = SimLevel::effective;
    Encoding encoding = Encoding::gradient_x_basis;
    int n_qubits = 0;
    int n_logical_inputs = 0; ///< non-ancilla inputs, for resource counts
    std::vector<double> dot_fields; ///< full level: mu*B_i per dot (rad/s)
    CorrectionMode correction_mode = CorrectionMode::lazy;
    std::vector<ScheduleStep> steps;
    bool leakage_protected = false;
    SavedOutcomeSource outcome_source;

    Labels qubit_space() const { return qubit_labels(n_qubits); }
    Labels dot_space() const { return dot_labels(2 * n_qubits); }
    double total_duration() const;
};

// ---------------------------------------------------------------------------
// Correction ledger

/// Accumulated byproduct frame, canonical order X^x Z^z P(theta) per qubit
/// (P applied first). Composes under left multiplication by new byproducts.
struct CorrectionLedger {
    struct Frame {
        int x_power = 0;
        int z_power = 0;
    };
    std::map<Label, Frame> frames;
    double theta_pending = 0.0; ///< accumulated phase angle on the data qubit
    std::vector<int> outcome_history;

    /// Left-compose Z^z X^x P(phi) onto the existing frame of `qubit`
    /// (global phase dropped).
    void compose_left(const Label& qubit, int z, int x, double phi);

    Frame frame(const Label& qubit) const;
    /// X^x Z^z P(theta_pending) as an operator on one qubit.
    Operator correction_operator(const Label& qubit, bool include_phase = true) const;
    bool trivial() const;
};

// ---------------------------------------------------------------------------
// Execution

struct RunResult {
    StateVector state; ///< qubit-space (effective) or dot-space (full) state
    CorrectionLedger ledger;
    std::vector<MeasurementRecord> records;
    double total_duration = 0.0;
};

/// Executes `steps` against `initial`. Measurement outcomes come from
/// `source`; errors are annotated with the failing step index.
RunResult run_schedule(const Schedule& schedule, const StateVector& initial,
                       OutcomeSource& source);

/// Initial state for a schedule: logical inputs on the first
/// n_logical_inputs qubits (or as placed by `placement`), ancillas |+>.
StateVector schedule_initial_state(const Schedule& schedule,
                                   const std::vector<StateVector>& inputs,
                                   const std::vector<int>& placement = {});

// Single-qubit operators lifted to the full-spin space of one dot pair:
// the encoded operator on the pair's code space, identity on t+/t-.
Operator lift_qubit_operator(const Operator& op, Encoding encoding);

// ---------------------------------------------------------------------------
// JSON serialization (documented schema; bit-exact replay)

std::string schedule_to_json(const Schedule& schedule);
Schedule schedule_from_json(const std::string& json_text);

} // namespace stq
