#include "stq/qcore.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace stq {

namespace {

void check_labels_unique(const Labels& labels) {
    Labels sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("duplicate subsystem label");
    }
}

Eigen::Index dim_for(const Labels& labels) {
    return Eigen::Index{1} << labels.size();
}

} // namespace

Labels qubit_labels(int n) {
    Labels out;
    out.reserve(n);
    for (int i = 1; i <= n; ++i) out.push_back("q" + std::to_string(i));
    return out;
}

Labels dot_labels(int n) {
    Labels out;
    out.reserve(n);
    for (int i = 1; i <= n; ++i) out.push_back("d" + std::to_string(i));
    return out;
}

double max_norm(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }
double max_norm(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------
// StateVector

StateVector::StateVector(Labels labels, Vector amplitudes)
    : labels_(std::move(labels)), amp_(std::move(amplitudes)) {
    check_labels_unique(labels_);
    if (amp_.size() != dim_for(labels_)) {
        throw std::invalid_argument("amplitude count does not match 2^(subsystems)");
    }
}

StateVector StateVector::basis(Labels labels, Eigen::Index index) {
    Vector v = Vector::Zero(dim_for(labels));
    if (index < 0 || index >= v.size()) throw std::out_of_range("basis index out of range");
    v(index) = 1.0;
    return StateVector(std::move(labels), std::move(v));
}

bool StateVector::is_normalized(double tol) const {
    return std::abs(amp_.squaredNorm() - 1.0) < tol;
}

StateVector StateVector::normalized() const {
    double n = norm();
    if (n < 1e-300) throw std::runtime_error("cannot normalize zero vector");
    return StateVector(labels_, amp_ / n);
}

cdouble StateVector::inner(const StateVector& other) const {
    if (dim() != other.dim()) throw std::invalid_argument("dimension mismatch in inner product");
    return amp_.dot(other.amp_); // Eigen's dot conjugates the left argument
}

int StateVector::index_of_label(const Label& l) const {
    for (int i = 0; i < n_subsystems(); ++i)
        if (labels_[i] == l) return i;
    throw std::invalid_argument("unknown label: " + l);
}

// ---------------------------------------------------------------------------
// Operator

Operator::Operator(Labels labels, Matrix entries)
    : labels_(std::move(labels)), m_(std::move(entries)) {
    check_labels_unique(labels_);
    if (m_.rows() != m_.cols() || m_.rows() != dim_for(labels_)) {
        throw std::invalid_argument("operator shape does not match 2^(subsystems)");
    }
}

Operator Operator::identity(Labels labels) {
    Eigen::Index d = dim_for(labels);
    return Operator(std::move(labels), Matrix::Identity(d, d));
}

bool Operator::is_hermitian(double tol) const {
    return max_norm(Matrix(m_ - m_.adjoint())) < tol;
}

bool Operator::is_unitary(double tol) const {
    Matrix delta = m_.adjoint() * m_ - Matrix::Identity(dim(), dim());
    return max_norm(delta) < tol;
}

bool Operator::is_projector(double tol) const {
    if (!is_hermitian(tol)) return false;
    Matrix delta = m_ * m_ - m_;
    return max_norm(delta) < tol;
}

Operator Operator::dagger() const { return Operator(labels_, m_.adjoint()); }

Operator Operator::operator*(const Operator& rhs) const {
    if (dim() != rhs.dim()) throw std::invalid_argument("operator dimension mismatch");
    return Operator(labels_, m_ * rhs.m_);
}

StateVector Operator::operator*(const StateVector& psi) const {
    if (dim() != psi.dim()) throw std::invalid_argument("operator/state dimension mismatch");
    return StateVector(psi.labels(), m_ * psi.amplitudes());
}

// ---------------------------------------------------------------------------
// tensor

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Labels concat_labels(const Labels& a, const Labels& b) {
    Labels out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

} // namespace

Operator tensor(std::span<const Operator> factors) {
    if (factors.empty()) throw std::invalid_argument("tensor of zero factors");
    Matrix m = factors[0].matrix();
    Labels labels = factors[0].labels();
    for (size_t i = 1; i < factors.size(); ++i) {
        m = kron(m, factors[i].matrix());
        labels = concat_labels(labels, factors[i].labels());
    }
    return Operator(std::move(labels), std::move(m));
}

Operator tensor(std::initializer_list<Operator> factors) {
    std::vector<Operator> v(factors);
    return tensor(std::span<const Operator>(v));
}

StateVector tensor(std::span<const StateVector> factors) {
    if (factors.empty()) throw std::invalid_argument("tensor of zero factors");
    Vector v = factors[0].amplitudes();
    Labels labels = factors[0].labels();
    for (size_t i = 1; i < factors.size(); ++i) {
        const Vector& b = factors[i].amplitudes();
        Vector out(v.size() * b.size());
        for (Eigen::Index j = 0; j < v.size(); ++j)
            out.segment(j * b.size(), b.size()) = v(j) * b;
        v = std::move(out);
        labels = concat_labels(labels, factors[i].labels());
    }
    return StateVector(std::move(labels), std::move(v));
}

StateVector tensor(std::initializer_list<StateVector> factors) {
    std::vector<StateVector> v(factors);
    return tensor(std::span<const StateVector>(v));
}

// ---------------------------------------------------------------------------
// evolve

Operator evolve(const Operator& hamiltonian, double t_seconds) {
    double scale = std::max(1.0, max_norm(hamiltonian.matrix()));
    if (!hamiltonian.is_hermitian(1e-12 * scale)) {
        throw ContractError("evolve: Hamiltonian is not hermitian");
    }
    if (t_seconds < 0.0) throw ContractError("evolve: negative duration");

    Eigen::SelfAdjointEigenSolver<Matrix> es(hamiltonian.matrix());
    if (es.info() != Eigen::Success) throw std::runtime_error("evolve: eigendecomposition failed");

    const auto& evals = es.eigenvalues();
    const Matrix& v = es.eigenvectors();
    Vector phases(evals.size());
    for (Eigen::Index k = 0; k < evals.size(); ++k) {
        phases(k) = std::exp(cdouble(0.0, -evals(k) * t_seconds));
    }
    Matrix u = v * phases.asDiagonal() * v.adjoint();
    return Operator(hamiltonian.labels(), std::move(u));
}

// ---------------------------------------------------------------------------
// project

std::pair<StateVector, double> project(const StateVector& psi, const Operator& p) {
    if (p.dim() != psi.dim()) throw std::invalid_argument("projector dimension mismatch");
    Vector out = p.matrix() * psi.amplitudes();
    double prob = out.squaredNorm();
    // For an exact projector <psi|P|psi> = ||P psi||^2; clamp roundoff.
    prob = std::clamp(prob, 0.0, 1.0);
    return {StateVector(psi.labels(), std::move(out)), prob};
}

// ---------------------------------------------------------------------------
// embed

Operator embed(const Operator& op, const Labels& targets, const Labels& space) {
    if (targets.size() != static_cast<size_t>(op.n_subsystems())) {
        throw std::invalid_argument("embed: operator size does not match target count");
    }
    std::vector<int> pos;
    pos.reserve(targets.size());
    for (const Label& t : targets) {
        auto it = std::find(space.begin(), space.end(), t);
        if (it == space.end()) throw std::invalid_argument("embed: unknown label " + t);
        pos.push_back(static_cast<int>(it - space.begin()));
    }

    const int n = static_cast<int>(space.size());
    const int k = static_cast<int>(targets.size());
    const Eigen::Index dim = Eigen::Index{1} << n;
    const Eigen::Index opdim = Eigen::Index{1} << k;

    std::vector<int> rest;
    for (int i = 0; i < n; ++i)
        if (std::find(pos.begin(), pos.end(), i) == pos.end()) rest.push_back(i);

    auto bit_of = [n](Eigen::Index idx, int subsys) -> int {
        return static_cast<int>((idx >> (n - 1 - subsys)) & 1);
    };

    Matrix out = Matrix::Zero(dim, dim);
    const Matrix& m = op.matrix();
    for (Eigen::Index col = 0; col < dim; ++col) {
        Eigen::Index opcol = 0;
        for (int j = 0; j < k; ++j) opcol = (opcol << 1) | bit_of(col, pos[j]);
        for (Eigen::Index oprow = 0; oprow < opdim; ++oprow) {
            cdouble val = m(oprow, opcol);
            if (val == cdouble(0.0, 0.0)) continue;
            // row index: target bits replaced, all others kept
            Eigen::Index row = col;
            for (int j = 0; j < k; ++j) {
                int b = static_cast<int>((oprow >> (k - 1 - j)) & 1);
                Eigen::Index mask = Eigen::Index{1} << (n - 1 - pos[j]);
                row = b ? (row | mask) : (row & ~mask);
            }
            out(row, col) += val;
        }
    }
    return Operator(space, std::move(out));
}

// ---------------------------------------------------------------------------
// fidelity

double fidelity_states(const StateVector& a, const StateVector& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
    return std::norm(a.inner(b));
}

// ---------------------------------------------------------------------------
// gates

namespace gates {

namespace {
const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
}

Operator i2(Label l) { return Operator::identity({std::move(l)}); }

Operator x(Label l) {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return Operator({std::move(l)}, m);
}

Operator y(Label l) {
    Matrix m(2, 2);
    m << cdouble(0, 0), cdouble(0, -1), cdouble(0, 1), cdouble(0, 0);
    return Operator({std::move(l)}, m);
}

Operator z(Label l) {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return Operator({std::move(l)}, m);
}

Operator h(Label l) {
    Matrix m(2, 2);
    m << inv_sqrt2, inv_sqrt2, inv_sqrt2, -inv_sqrt2;
    return Operator({std::move(l)}, m);
}

Operator p(double theta, Label l) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = std::exp(cdouble(0.0, theta));
    return Operator({std::move(l)}, m);
}

Operator w(double theta, Label l) {
    Label ll = l;
    return h(ll) * p(theta, ll);
}

Operator cz(Label a, Label b) {
    Matrix m = Matrix::Identity(4, 4);
    m(3, 3) = -1.0;
    return Operator({std::move(a), std::move(b)}, m);
}

Operator cx(Label a, Label b) {
    Matrix m = Matrix::Zero(4, 4);
    m(0, 0) = 1;
    m(1, 1) = 1;
    m(2, 3) = 1;
    m(3, 2) = 1;
    return Operator({std::move(a), std::move(b)}, m);
}

StateVector ket0(Label l) { return StateVector::basis({std::move(l)}, 0); }
StateVector ket1(Label l) { return StateVector::basis({std::move(l)}, 1); }

StateVector ket_plus(Label l) {
    Vector v(2);
    v << inv_sqrt2, inv_sqrt2;
    return StateVector({std::move(l)}, v);
}

StateVector ket_minus(Label l) {
    Vector v(2);
    v << inv_sqrt2, -inv_sqrt2;
    return StateVector({std::move(l)}, v);
}

StateVector bloch(double theta, double phi, Label l) {
    Vector v(2);
    v << std::cos(theta / 2.0), std::exp(cdouble(0, phi)) * std::sin(theta / 2.0);
    return StateVector({std::move(l)}, v);
}

} // namespace gates

} // namespace stq
