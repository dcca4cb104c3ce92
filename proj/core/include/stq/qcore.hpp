// Dense complex linear algebra over small labeled tensor-product spaces of
// two-level subsystems (quantum dots or encoded qubits). Everything downstream
// (spin models, measurements, protocol schedules) is built on these values.

#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace stq {

using cdouble = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Thrown when an operation's stated precondition is violated (e.g. evolve()
/// handed a non-hermitian matrix).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Subsystem tag, e.g. "q1" for a logical qubit or "d3" for a dot.
using Label = std::string;
using Labels = std::vector<Label>;

Labels qubit_labels(int n);
Labels dot_labels(int n);

/// Entrywise max norm; the default norm for all tolerances in this project.
double max_norm(const Matrix& m);
double max_norm(const Vector& v);

inline constexpr double kDefaultTol = 1e-10;

// ---------------------------------------------------------------------------
// StateVector

class StateVector {
public:
    StateVector() = default;
    StateVector(Labels labels, Vector amplitudes);

    /// Computational basis state |index> over `labels` (label 0 is the most
    /// significant bit).
    static StateVector basis(Labels labels, Eigen::Index index);

    Eigen::Index dim() const { return amp_.size(); }
    int n_subsystems() const { return static_cast<int>(labels_.size()); }
    const Labels& labels() const { return labels_; }
    const Vector& amplitudes() const { return amp_; }
    cdouble amplitude(Eigen::Index i) const { return amp_(i); }

    double norm() const { return amp_.norm(); }
    bool is_normalized(double tol = 1e-12) const;
    StateVector normalized() const;

    /// <this|other>
    cdouble inner(const StateVector& other) const;

    int index_of_label(const Label& l) const;

private:
    Labels labels_;
    Vector amp_;
};

// ---------------------------------------------------------------------------
// Operator

class Operator {
public:
    Operator() = default;
    Operator(Labels labels, Matrix entries);

    static Operator identity(Labels labels);

    Eigen::Index dim() const { return m_.rows(); }
    int n_subsystems() const { return static_cast<int>(labels_.size()); }
    const Labels& labels() const { return labels_; }
    const Matrix& matrix() const { return m_; }

    bool is_hermitian(double tol = 1e-12) const;
    bool is_unitary(double tol = kDefaultTol) const;
    bool is_projector(double tol = kDefaultTol) const;

    Operator dagger() const;
    Operator operator*(const Operator& rhs) const;
    StateVector operator*(const StateVector& psi) const;

private:
    Labels labels_;
    Matrix m_;
};

// ---------------------------------------------------------------------------
// Operations

/// Kronecker product of operators, labels concatenated in argument order.
Operator tensor(std::span<const Operator> factors);
Operator tensor(std::initializer_list<Operator> factors);
StateVector tensor(std::span<const StateVector> factors);
StateVector tensor(std::initializer_list<StateVector> factors);

/// exp(-i H t) by eigendecomposition. H must be hermitian, t >= 0.
/// Hermiticity is checked relative to the magnitude of H so that
/// rad/s-scale Hamiltonians are accepted.
Operator evolve(const Operator& hamiltonian, double t_seconds);

/// Applies projector P; returns the unnormalized projected state and the
/// Born probability <psi|P|psi>. The caller renormalizes when p > 0.
std::pair<StateVector, double> project(const StateVector& psi, const Operator& p);

/// Embeds `op` (acting on `targets`) into the full space given by `space`,
/// identity on all other subsystems, with the index permutation required for
/// non-adjacent targets.
Operator embed(const Operator& op, const Labels& targets, const Labels& space);

/// |<a|b>|^2
double fidelity_states(const StateVector& a, const StateVector& b);

// ---------------------------------------------------------------------------
// Constant 2x2 gates and states used throughout. The matrix convention in the
// ordered basis {|0>,|1>} is Z = diag(1,-1); the protocol identities hold
// in this representation (see spinmodels).

namespace gates {

Operator i2(Label l = "q");
Operator x(Label l = "q");
Operator y(Label l = "q");
Operator z(Label l = "q");
Operator h(Label l = "q");
/// P(theta) = diag(1, e^{i theta})
Operator p(double theta, Label l = "q");
/// W(theta) = H P(theta), the measurement-projected rotation.
Operator w(double theta, Label l = "q");
/// diag(1,1,1,-1) over two labels.
Operator cz(Label a = "q1", Label b = "q2");
/// Control on first label, target on second.
Operator cx(Label a = "q1", Label b = "q2");

StateVector ket0(Label l = "q");
StateVector ket1(Label l = "q");
StateVector ket_plus(Label l = "q");
StateVector ket_minus(Label l = "q");
/// General Bloch state cos(t/2)|0> + e^{i phi} sin(t/2)|1>.
StateVector bloch(double theta, double phi, Label l = "q");

} // namespace gates

} // namespace stq
