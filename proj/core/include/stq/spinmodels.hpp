// Hamiltonian builders and gate-scheduling formulas for the two qubit models:
// the gradient (magnetic-field-difference) two-qubit model with inter-qubit
// exchange, and the gradient-free exchange-only model, plus the full
// Zeeman+Heisenberg dot-level model both are validated against.

#pragma once

#include <map>
#include <utility>
#include <vector>

#include "stq/qcore.hpp"

namespace stq {

// ---------------------------------------------------------------------------
// Parameter records. All energies are angular frequencies (rad/s).

struct GradientModelParams {
    double mu_delta_12 = 0.0; ///< intra-qubit gradient, qubit 1 (rad/s)
    double mu_delta_34 = 0.0; ///< intra-qubit gradient, qubit 2 (rad/s)
    double mu_delta_b = 0.0;  ///< inter-qubit field difference (rad/s)
    double j23 = 0.0;         ///< inter-qubit exchange (rad/s), >= 0

    static GradientModelParams symmetric(double mu_delta, double j23);

    /// True in the leakage-suppressed regime j23 < 0.1 * min gradient.
    bool leakage_suppressed() const;
    void validate() const;
};

struct ExchangeOnlyParams {
    double j12 = 0.0;
    double j34 = 0.0;
    double j23 = 0.0;
    void validate() const;
};

/// Exchange couplings keyed by unordered dot pair (1-based indices, i < j).
using ExchangeMap = std::map<std::pair<int, int>, double>;

struct FullSpinModel {
    int n_dots = 0;
    std::vector<double> zeeman; ///< per-dot field energy mu*B_i (rad/s)
    ExchangeMap exchange;       ///< J_ij (rad/s), all >= 0
    void validate() const;
};

/// CZ timing condition: tau = n1*pi/(mu_delta), j23 = mu_delta*(4n1-2n2-1)/n1.
struct CzSchedule {
    int n1 = 1;
    int n2 = 1;
    double mu_delta = 0.0;
    double tau = 0.0;
    double j23 = 0.0;
    bool leakage_regime_warning = false; ///< set when j23 >= 0.1*mu_delta
};

enum class Encoding {
    gradient_x_basis,  ///< |0> = |ud>, |1> = |du> per qubit (dot-spin strings)
    exchange_z_basis,  ///< |0> = singlet, |1> = triplet-0 per qubit
};

// ---------------------------------------------------------------------------
// Operations

/// The dressed field shift B~ entering the gradient model, evaluated exactly
/// as written (no small-j expansion):
///   0.5*[ -(d12+d34)/2 + dB - sqrt( (dB - (d12+d34)/2)^2 + j23^2/4 ) ].
double btilde(const GradientModelParams& p);

/// Two-qubit gradient-model Hamiltonian over labels {q1,q2}, diagonal in the
/// ordered computational basis:
///   H = (d12+B~) Z1 + (d34+B~) Z2 + (j23/4) (Z1 Z2 - I),
/// with Z represented as diag(1,-1). This representation is the one under
/// which an exchange window followed by a singlet/triplet readout projects
/// the W(theta) rotation with theta = 2*mu_delta*tau (see protocols).
Operator effective_gradient_hamiltonian(const GradientModelParams& p);

/// CZ timing condition. Throws ContractError when the implied j23 <= 0.
CzSchedule cz_schedule(int n1, int n2, double mu_delta);

/// Gradient-free two-qubit model over {q1,q2}:
///   H = (j12/2) Z1 + (j34/2) Z2 - (j23/4) X1 X2, Z = diag(1,-1).
Operator exchange_only_hamiltonian(const ExchangeOnlyParams& p);

/// Intra-qubit exchange phase gate diag(1, e^{i j tau}).
Operator phase_gate(double j, double tau, Label l = "q");

/// Dot-level model over n_dots spins:
///   H = sum_i (mu B_i / 2) sz_i + sum_(i,j) J_ij (S_i . S_j - 1/4),
/// where sz is the physical spin Pauli-z in the {up,down} basis and
/// S_i . S_j = (sx sx + sy sy + sz sz)/4. n_dots <= 8.
Operator full_spin_hamiltonian(const FullSpinModel& m);

/// Isometry V mapping the 2^n-dim qubit space into the 4^n-dim spin space of
/// 2n dots (qubit i lives on dots 2i-1, 2i). V^dag V = I.
/// Returned as a (4^n x 2^n) matrix; row space labels are the dot labels.
Matrix qubit_subspace_embedding(Encoding encoding, int n_qubits);

/// Projector onto the image of the encoding (V V^dag) over 2n dots.
Operator code_space_projector(Encoding encoding, int n_qubits);

// Two-spin m_s = 0 pair states over two dot labels.
StateVector singlet_pair(Label d1, Label d2);
StateVector triplet0_pair(Label d1, Label d2);

} // namespace stq
