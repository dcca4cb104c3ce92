#include "stq/spinmodels.hpp"

#include <cmath>

namespace stq {

namespace {

bool finite(double x) { return std::isfinite(x); }

} // namespace

// ---------------------------------------------------------------------------
// Parameter records

GradientModelParams GradientModelParams::symmetric(double mu_delta, double j23) {
    return GradientModelParams{mu_delta, mu_delta, mu_delta, j23};
}

bool GradientModelParams::leakage_suppressed() const {
    double m = std::min({std::abs(mu_delta_12), std::abs(mu_delta_34), std::abs(mu_delta_b)});
    return j23 < 0.1 * m;
}

void GradientModelParams::validate() const {
    if (!finite(mu_delta_12) || !finite(mu_delta_34) || !finite(mu_delta_b) || !finite(j23)) {
        throw ContractError("gradient model: non-finite parameter");
    }
    if (j23 < 0.0) throw ContractError("gradient model: j23 must be >= 0");
}

void ExchangeOnlyParams::validate() const {
    if (!finite(j12) || !finite(j34) || !finite(j23)) {
        throw ContractError("exchange-only model: non-finite parameter");
    }
    if (j12 < 0.0 || j34 < 0.0 || j23 < 0.0) {
        throw ContractError("exchange-only model: couplings must be >= 0");
    }
}

void FullSpinModel::validate() const {
    if (n_dots < 1 || n_dots > 8) throw ContractError("full spin model: n_dots must be 1..8");
    if (static_cast<int>(zeeman.size()) != n_dots) {
        throw ContractError("full spin model: zeeman list size mismatch");
    }
    for (double b : zeeman)
        if (!finite(b)) throw ContractError("full spin model: non-finite field");
    for (const auto& [pair, j] : exchange) {
        auto [i, k] = pair;
        if (i < 1 || k < 1 || i > n_dots || k > n_dots || i >= k) {
            throw ContractError("full spin model: bad exchange pair");
        }
        if (!finite(j) || j < 0.0) throw ContractError("full spin model: bad exchange coupling");
    }
}

// ---------------------------------------------------------------------------
// Gradient model

double btilde(const GradientModelParams& p) {
    p.validate();
    double half_sum = 0.5 * (p.mu_delta_12 + p.mu_delta_34);
    double gap = p.mu_delta_b - half_sum;
    return 0.5 * (-half_sum + p.mu_delta_b - std::sqrt(gap * gap + 0.25 * p.j23 * p.j23));
}

Operator effective_gradient_hamiltonian(const GradientModelParams& p) {
    p.validate();
    const double bt = btilde(p);
    const double c1 = p.mu_delta_12 + bt;
    const double c2 = p.mu_delta_34 + bt;
    Matrix h = Matrix::Zero(4, 4);
    for (int b1 = 0; b1 < 2; ++b1) {
        for (int b2 = 0; b2 < 2; ++b2) {
            double z1 = b1 == 0 ? 1.0 : -1.0;
            double z2 = b2 == 0 ? 1.0 : -1.0;
            h(2 * b1 + b2, 2 * b1 + b2) = c1 * z1 + c2 * z2 + 0.25 * p.j23 * (z1 * z2 - 1.0);
        }
    }
    return Operator({"q1", "q2"}, h);
}

CzSchedule cz_schedule(int n1, int n2, double mu_delta) {
    if (n1 == 0) throw ContractError("cz_schedule: n1 must be nonzero");
    if (!finite(mu_delta) || mu_delta <= 0.0) throw ContractError("cz_schedule: mu_delta must be > 0");
    CzSchedule s;
    s.n1 = n1;
    s.n2 = n2;
    s.mu_delta = mu_delta;
    s.tau = n1 * M_PI / mu_delta;
    s.j23 = mu_delta * (4.0 * n1 - 2.0 * n2 - 1.0) / n1;
    if (s.tau <= 0.0 || s.j23 <= 0.0) throw ContractError("cz_schedule: schedule implies j23 <= 0 or tau <= 0");
    s.leakage_regime_warning = s.j23 >= 0.1 * mu_delta;
    return s;
}

// ---------------------------------------------------------------------------
// Exchange-only model

Operator exchange_only_hamiltonian(const ExchangeOnlyParams& p) {
    p.validate();
    Matrix h = Matrix::Zero(4, 4);
    for (int b1 = 0; b1 < 2; ++b1) {
        for (int b2 = 0; b2 < 2; ++b2) {
            double z1 = b1 == 0 ? 1.0 : -1.0;
            double z2 = b2 == 0 ? 1.0 : -1.0;
            h(2 * b1 + b2, 2 * b1 + b2) = 0.5 * p.j12 * z1 + 0.5 * p.j34 * z2;
        }
    }
    // -(j23/4) X1 X2 couples |00><11| + |01><10| + h.c.
    h(0, 3) -= 0.25 * p.j23;
    h(3, 0) -= 0.25 * p.j23;
    h(1, 2) -= 0.25 * p.j23;
    h(2, 1) -= 0.25 * p.j23;
    return Operator({"q1", "q2"}, h);
}

Operator phase_gate(double j, double tau, Label l) {
    if (j < 0.0 || tau < 0.0) throw ContractError("phase_gate: j and tau must be >= 0");
    return gates::p(j * tau, std::move(l));
}

// ---------------------------------------------------------------------------
// Full spin model

Operator full_spin_hamiltonian(const FullSpinModel& m) {
    m.validate();
    const int n = m.n_dots;
    if (n > 8) throw ContractError("full spin model: n_dots > 8");
    const Eigen::Index dim = Eigen::Index{1} << n;
    Labels labels = dot_labels(n);

    auto spin_up = [n](Eigen::Index idx, int dot) -> bool {
        // dot is 1-based, dot 1 is the most significant bit; bit 0 = up.
        return ((idx >> (n - dot)) & 1) == 0;
    };

    Matrix h = Matrix::Zero(dim, dim);
    for (Eigen::Index s = 0; s < dim; ++s) {
        double diag = 0.0;
        for (int d = 1; d <= n; ++d) {
            diag += 0.5 * m.zeeman[d - 1] * (spin_up(s, d) ? 1.0 : -1.0);
        }
        for (const auto& [pair, j] : m.exchange) {
            auto [i, k] = pair;
            bool ui = spin_up(s, i), uk = spin_up(s, k);
            // J (S_i.S_j - 1/4): diagonal -J/2 on anti-aligned, 0 on aligned;
            // flip-flop J/2 between |ud> and |du>.
            if (ui != uk) {
                diag += -0.5 * j;
                Eigen::Index flipped = s;
                flipped ^= (Eigen::Index{1} << (n - i));
                flipped ^= (Eigen::Index{1} << (n - k));
                h(flipped, s) += 0.5 * j;
            }
        }
        h(s, s) += diag;
    }
    return Operator(std::move(labels), std::move(h));
}

// ---------------------------------------------------------------------------
// Encodings

StateVector singlet_pair(Label d1, Label d2) {
    Vector v = Vector::Zero(4);
    v(1) = 1.0 / std::sqrt(2.0);  // |ud>
    v(2) = -1.0 / std::sqrt(2.0); // |du>
    return StateVector({std::move(d1), std::move(d2)}, v);
}

StateVector triplet0_pair(Label d1, Label d2) {
    Vector v = Vector::Zero(4);
    v(1) = 1.0 / std::sqrt(2.0);
    v(2) = 1.0 / std::sqrt(2.0);
    return StateVector({std::move(d1), std::move(d2)}, v);
}

Matrix qubit_subspace_embedding(Encoding encoding, int n_qubits) {
    if (n_qubits < 1 || n_qubits > 4) {
        throw ContractError("qubit_subspace_embedding: n_qubits must be 1..4");
    }
    Matrix v1(4, 2);
    v1.setZero();
    switch (encoding) {
    case Encoding::gradient_x_basis:
        v1(1, 0) = 1.0; // |0> -> |ud>
        v1(2, 1) = 1.0; // |1> -> |du>
        break;
    case Encoding::exchange_z_basis: {
        double r = 1.0 / std::sqrt(2.0);
        v1(1, 0) = r; // |0> -> singlet
        v1(2, 0) = -r;
        v1(1, 1) = r; // |1> -> triplet-0
        v1(2, 1) = r;
        break;
    }
    default:
        throw ContractError("qubit_subspace_embedding: unknown encoding");
    }

    Matrix v = v1;
    for (int q = 1; q < n_qubits; ++q) {
        Matrix next(v.rows() * 4, v.cols() * 2);
        next.setZero();
        for (Eigen::Index i = 0; i < v.rows(); ++i)
            for (Eigen::Index j = 0; j < v.cols(); ++j)
                if (v(i, j) != cdouble(0.0, 0.0))
                    next.block(i * 4, j * 2, 4, 2) = v(i, j) * v1;
        v = std::move(next);
    }
    return v;
}

Operator code_space_projector(Encoding encoding, int n_qubits) {
    Matrix v = qubit_subspace_embedding(encoding, n_qubits);
    return Operator(dot_labels(2 * n_qubits), v * v.adjoint());
}

} // namespace stq
