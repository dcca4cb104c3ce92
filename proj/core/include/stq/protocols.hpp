// The named measurement-exchange protocols, implemented as executable
// simulations with a correction ledger tracking the outcome-dependent Pauli
// and phase byproducts, plus compilers to generic schedules for resource and
// timing analysis and a branch enumerator for exhaustive verification.

#pragma once

#include <array>
#include <functional>
#include <optional>

#include "stq/schedule.hpp"

namespace stq {

// ---------------------------------------------------------------------------
// Common result type

struct ProtocolResult {
    StateVector raw_state;             ///< final state in the simulation space
    std::optional<StateVector> output; ///< output-wire qubit state when cleanly extractable
    CorrectionLedger ledger;
    std::vector<MeasurementRecord> records;
    std::vector<double> output_leakage; ///< per output qubit (full level only)
    bool flagged = false;               ///< a leakage-detection outcome fired
    std::vector<double> applied_rotations; ///< delivered W angles (teleport chains)

    double probability() const;
};

using ProtocolRunner = std::function<ProtocolResult(OutcomeSource&)>;

struct Branch {
    std::vector<int> outcomes;
    double probability = 0.0;
    ProtocolResult result;
};

/// Runs `runner` over every viable forced-outcome combination (probability
/// >= 1e-14) and returns all branches; probabilities sum to 1.
std::vector<Branch> enumerate_branches(const ProtocolRunner& runner);

// ---------------------------------------------------------------------------
// Graphs and cluster states

struct GraphSpec {
    enum class Geometry { linear_chain, square_2x2 };
    Geometry geometry = Geometry::linear_chain;
    int n_vertices = 0;
    std::vector<std::pair<int, int>> edges;      ///< 1-based vertex pairs
    std::map<int, StateVector> input_assignments; ///< vertex -> initial state

    static GraphSpec chain(int n);
    static GraphSpec square();
    void validate() const;
};

/// Product of CZ over every edge applied to the assigned inputs (default |+>).
StateVector build_cluster_state(const GraphSpec& g);

/// Cluster stabilizer K_i = X_i prod_{j in N(i)} Z_j for `g`.
Operator cluster_stabilizer(const GraphSpec& g, int vertex);

// ---------------------------------------------------------------------------
// Gradient-model (protocol 1) operations

struct GradientProtocolParams {
    double mu_delta = 1.0; ///< rad/s scale used by the compiled windows
    int n = 0;             ///< odd-multiple index in j23 = (2n+1)*pi/tau
};

/// One measurement-driven rotation: entangle (psi,|+>) by an exchange window
/// of duration tau = theta/(2 mu_delta) with j23 = (2n+1) pi / tau, then
/// measure the input qubit in the singlet-triplet basis. The output qubit
/// carries X^s P((-1)^s theta) W(theta) |psi>; the ledger records the
/// byproducts. theta in (0, 2pi]; theta = 0 is rejected (tau = 0 makes the
/// exchange unbounded) - schedule W(0) as theta = 2pi.
ProtocolResult teleport_rotation(const StateVector& psi, double theta,
                                 const GradientProtocolParams& params, OutcomeSource& source);

/// Full-spin version of teleport_rotation on four dots with an alternating
/// field profile (intra-qubit gradients 2*mu_delta of opposite orientation,
/// inner-dot splitting 2*mu_delta). Output state is not extracted (the dressed
/// frame leaves O((j/mu_delta)^2) residuals); leakage per qubit is reported.
ProtocolResult teleport_rotation_full(const StateVector& psi, double theta,
                                      const GradientProtocolParams& params,
                                      OutcomeSource& source);

/// Alternating-gradient field profile used for every full-spin simulation of
/// the gradient model: dots at (2d, 0, -2d, 0, 2d, ...) so each inner pair is
/// split by 2d while each qubit keeps |gradient| = 2d.
std::vector<double> gradient_dot_fields(int n_qubits, double mu_delta);

/// Single-measurement state preparation: both qubits |+> with a shared
/// pre-protocol precession phase P(phi_delta), window of duration tau with
/// j23 = (2n+1) pi / tau, measure qubit 1. theta = 2 mu_delta tau + phi_delta.
ProtocolResult prepare_state(double theta, double phi_delta, int n, OutcomeSource& source,
                             double mu_delta = 1.0);

/// Closed form of the prepared state for outcome s (normalized).
StateVector prepare_state_closed_form(double theta, int s);

/// Four-qubit square gate: logical inputs on the two corners of one diagonal,
/// |+> on the other; all four edges driven simultaneously with
/// j = 2(2 n1 - 1) mu_delta for tau = (2 n2 - 1) pi / (2 mu_delta); the input
/// corners are then measured. Output wires ordered (first logical, second
/// logical); ledger records the two X byproducts.
ProtocolResult square_gate(const StateVector& psi1, const StateVector& psi2, int n1, int n2,
                           OutcomeSource& source, double mu_delta = 1.0);

enum class AngleMode {
    literal,  ///< schedule each angle as given
    adjusted, ///< fold the pending frame into each scheduled angle so the
              ///< delivered rotations are exactly W(theta_k)
};

/// Repeated W rotations on two physical qubits, re-entangling the spent qubit
/// each round. The ancilla's preparation history enters as an extra
/// uniform-probability sign branch. applied_rotations lists the delivered W
/// angles; the ledger carries at most one X, one Z and one pending phase.
ProtocolResult recycled_sequence(const StateVector& psi, const std::vector<double>& angles,
                                 AngleMode mode, OutcomeSource& source, double mu_delta = 1.0);

/// Target byproduct-included operator of the two-angle recycled sequence for
/// outcomes (s1 = preparation sign, s2, s3):
///   X^(s1+s3) P((-1)^(s1+s3) theta2) W((-1)^s2 (theta2+theta1)) W(theta1).
Matrix recycled_two_angle_target(double theta1, double theta2, int s1, int s2, int s3);

struct StabilizerOutcome {
    ProtocolResult run;
    std::array<int, 3> syndromes{1, 1, 1}; ///< stabilizer expectation signs
    StateVector rotated_reference;         ///< psi~ = W(0)W(t3)W(t2)W(t1) psi
};

enum class PauliKind { x, y, z };

/// Five-qubit line: rotate psi by W(0)W(t3)W(t2)W(t1) down the chain, bring
/// the state back to the middle with two W(0) steps, encode into the linear
/// [[4,1,2]] graph code by entangling all adjacent pairs and measuring the
/// middle qubit in X, optionally inject a Pauli error, read the stabilizer
/// expectations {XZII, ZXXZ, IIZX}, and decode by X-measuring qubits 2,4,5.
StabilizerOutcome stabilizer_roundtrip(const StateVector& psi, std::array<double, 3> angles,
                                       std::optional<std::pair<PauliKind, int>> error,
                                       OutcomeSource& source, double mu_delta = 1.0);

/// Syndrome table rows for all 12 single-qubit Paulis on the encoded block,
/// computed by brute-force expectation values on the encoded state.
struct SyndromeRow {
    PauliKind pauli;
    int qubit; ///< 1..4 (code-block position)
    std::array<int, 3> syndromes;
};
std::vector<SyndromeRow> syndrome_table();

// ---------------------------------------------------------------------------
// Gradient-free (protocol 2) operations; all simulate the full spin space.

/// Quantum bus: qubit 1 carries psi, qubit 2 starts in the triplet-0 state.
/// Entangling measurement on the inner dots, then readout of qubit 1, both in
/// the three-outcome singlet/triplet-0 model; the third outcome heralds
/// leakage (flagged branch). On completed branches the output is
/// X^x Z^z psi with the powers recorded in the ledger and zero leakage.
ProtocolResult quantum_bus(const StateVector& psi, OutcomeSource& source, double j = 1.0);

/// Hadamard sequence (phase gates pi/2, -pi/2 around an entangling
/// measurement, then pi/2 and the ancilla readout); ledger records Y^s.
ProtocolResult hadamard_sequence(const StateVector& psi, OutcomeSource& source, double j = 1.0);

/// Same step pattern with arbitrary phase-gate angles; used for the
/// leakage-robustness property and the general single-qubit map report.
ProtocolResult hadamard_sequence_phases(const StateVector& psi, std::array<double, 4> phases,
                                        OutcomeSource& source, double j = 1.0);

/// Two-qubit entangling sequence with two ancillas (four qubits, eight dots).
/// Output wires carry (H (x) H) CZ (H (x) H) applied to (psi1, psi2) up to an
/// X^(s1+s2) byproduct recorded in the ledger.
ProtocolResult two_qubit_sequence(const StateVector& psi1, const StateVector& psi2,
                                  OutcomeSource& source, double j = 1.0);

// ---------------------------------------------------------------------------
// Schedule compilers (resource counting, timing, serialization, replay)

Schedule compile_teleport_rotation(double theta, const GradientProtocolParams& params);
Schedule compile_square_gate(int n1, int n2, double mu_delta);
Schedule compile_hadamard_sequence(double j);
Schedule compile_two_qubit_sequence(double j);

/// Runs a compiled schedule for one of the four protocol tags against the
/// given logical inputs and returns the result in protocol form.
ProtocolResult run_compiled(const Schedule& schedule, const std::vector<StateVector>& inputs,
                            OutcomeSource& source);

// ---------------------------------------------------------------------------
// Utilities shared with the verifier

/// Reorders subsystems to `new_order` (a permutation of the labels).
StateVector permute_subsystems(const StateVector& state, const Labels& new_order);

/// Extracts the factor on `kept` when `state` = factor (x) rest within `tol`;
/// returns nullopt when the cut is entangled or lossy beyond tol.
std::optional<StateVector> extract_factor(const StateVector& state, const Labels& kept,
                                          double tol = 1e-9);

/// <state| O |state> for a hermitian O; returns the real part.
double expectation(const StateVector& state, const Operator& o);

/// Reconstructs the Kraus map of one forced branch by running `runner`
/// over all computational-basis inputs. Columns are exact amplitudes
/// (sqrt(branch probability) included).
Matrix branch_kraus(const std::function<ProtocolResult(const StateVector&, OutcomeSource&)>& runner,
                    int n_inputs, const std::vector<int>& forced_outcomes,
                    const Labels& output_wires);

} // namespace stq
