// Equivalence checking up to declared corrections, leakage scans,
// effective-vs-full cross-validation, gate-time totals and resource counts.

#pragma once

#include <string>

#include "stq/protocols.hpp"

namespace stq {

// ---------------------------------------------------------------------------
// Global-phase and local-Z-phase equivalence

struct PhaseFit {
    bool pass = false;
    double phase = 0.0;     ///< e^{i phase} minimizing the deviation
    double deviation = 0.0; ///< max-norm after stripping
};

/// Finds e^{i phi} minimizing ||U - e^{i phi} V||_max using the
/// largest-magnitude entry of V as the phase reference.
PhaseFit equal_up_to_global_phase(const Matrix& u, const Matrix& v, double tol = kDefaultTol);

/// Strips single-qubit Z-phases and a global phase from a two-qubit diagonal
/// comparison: finds diag phases (g+a+b, g+a, g+b, g) from the first three
/// diagonal ratios and reports the residual ||U - D V||_max.
double deviation_up_to_local_z(const Matrix& u, const Matrix& v);

// ---------------------------------------------------------------------------
// Channel-vs-target equivalence up to a declared correction family

struct CorrectionFamily {
    bool allow_x = true;
    bool allow_z = true;
    bool use_ledger_phase = true; ///< include P(theta_pending) from the ledger
};

struct BranchMap {
    std::vector<int> outcomes;
    double probability = 0.0;
    Matrix kraus; ///< amplitude-exact branch map on the output wires
    CorrectionLedger ledger;
};

struct EquivalenceReport {
    std::string target_name;
    double tolerance = kDefaultTol;
    bool pass = false;
    struct BranchEntry {
        std::vector<int> outcomes;
        double probability = 0.0;
        double deviation = 0.0;
        std::string correction; ///< e.g. "X1 Z2 P(0.785)"
        double global_phase = 0.0;
        bool pass = false;
    };
    std::vector<BranchEntry> branches;
};

/// For every branch, searches the finite per-qubit {I,X} x {I,Z} family
/// (phase angles taken from the ledger, never fitted) for a correction C such
/// that C^dag K, rescaled to unit normalization, equals `target` up to global
/// phase within tol.
EquivalenceReport equal_up_to_corrections(const std::vector<BranchMap>& branches,
                                          const Matrix& target, const CorrectionFamily& family,
                                          double tol, const std::string& target_name);

std::string equivalence_report_to_json(const EquivalenceReport& r);

// ---------------------------------------------------------------------------
// Leakage scan and cross-validation

struct LeakageScanRow {
    double ratio = 0.0;       ///< j23 / mu_delta
    double max_leakage = 0.0; ///< max over basis inputs and the time grid
};

struct LeakageScan {
    std::vector<LeakageScanRow> rows;
    double fit_slope = 0.0; ///< log-log least-squares slope
};

/// Full-spin leakage of the gradient two-qubit model over one entangling
/// window per ratio: leakage(t) = 1 - ||(V V^dag) U_full(t) V psi||^2
/// maximized over computational basis inputs and t in [0, tau_cz].
LeakageScan leakage_scan(const std::vector<double>& ratios, double mu_delta = 1.0,
                         int t_points = 40);

std::string leakage_scan_to_csv(const LeakageScan& scan);

struct CrossValidation {
    double max_deviation = 0.0;       ///< over the time grid, after stripping
    double quadratic_prediction = 0.0; ///< (j23 / mu_delta)^2 reference scale
};

/// Compares the encoded-subspace full-spin propagator against the effective
/// gradient model over t in [0, tau_cz], after aligning the encoding frame
/// (the second qubit's gradient is reversed in the dot-level realization) and
/// stripping single-qubit Z-phases and the global phase.
CrossValidation cross_validate_gradient(double mu_delta, double j23, int t_points = 25);

/// Hamiltonian-level check of the gradient-free model: the magnitudes of the
/// (|00>,|11>) and (|01>,|10>) off-diagonal elements of the encoded-subspace
/// compression of the dot-level model equal j23/4.
double exchange_block_structure_deviation(double j12, double j34, double j23);

// ---------------------------------------------------------------------------
// Timing and resources

struct TimingReport {
    std::string schedule_tag;
    struct Entry {
        std::string step;
        double duration_s = 0.0;
    };
    std::vector<Entry> entries;
    double total_s = 0.0;
    std::string convention_note;
};

TimingReport gate_time(const Schedule& schedule);
std::string timing_report_to_csv(const TimingReport& r);

struct ResourceCount {
    std::string protocol;
    int gates = 0;
    int measurements = 0;
    int ancillae = 0;
    bool leakage_protected = false;
};

/// Static analysis of a compiled schedule: exchange gates = driven couplings
/// (edges per window plus intra-qubit phase gates), measurements = readout
/// steps, ancillae = qubits beyond the logical inputs.
ResourceCount resource_count(const Schedule& schedule);

/// Compiled schedule for one of the four protocol tags
/// {p1_single, p1_two, p2_single, p2_two} at default parameters.
Schedule reference_schedule(const std::string& tag, double scale = 1.0);

std::string resource_count_to_json(const ResourceCount& r);

} // namespace stq
