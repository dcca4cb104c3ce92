#include "stq/verify.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace stq {

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

// ---------------------------------------------------------------------------
// Phase equivalence

PhaseFit equal_up_to_global_phase(const Matrix& u, const Matrix& v, double tol) {
    if (u.rows() != v.rows() || u.cols() != v.cols()) {
        throw ContractError("equal_up_to_global_phase: shape mismatch");
    }
    Eigen::Index imax = 0, jmax = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
            if (std::abs(v(i, j)) > best) {
                best = std::abs(v(i, j));
                imax = i;
                jmax = j;
            }
        }
    }
    PhaseFit fit;
    if (best < 1e-300) {
        fit.deviation = max_norm(u);
        fit.pass = fit.deviation < tol;
        return fit;
    }
    cdouble ratio = u(imax, jmax) / v(imax, jmax);
    double mag = std::abs(ratio);
    cdouble phase = mag > 1e-300 ? ratio / mag : cdouble(1.0, 0.0);
    fit.phase = std::arg(phase);
    fit.deviation = max_norm(Matrix(u - phase * v));
    fit.pass = fit.deviation < tol;
    return fit;
}

double deviation_up_to_local_z(const Matrix& u, const Matrix& v) {
    if (u.rows() != 4 || v.rows() != 4) {
        throw ContractError("deviation_up_to_local_z: expects 4x4 matrices");
    }
    // Model: U = diag(e^{i(g+a+b)}, e^{i(g+a)}, e^{i(g+b)}, e^{ig}) V.
    // Solve the three phases from the diagonal ratios (falling back to the
    // largest entries when a diagonal vanishes), then measure the residual.
    auto safe_arg = [&](Eigen::Index k) -> double {
        if (std::abs(v(k, k)) < 1e-12 || std::abs(u(k, k)) < 1e-12) return 0.0;
        return std::arg(u(k, k) / v(k, k));
    };
    double d11 = safe_arg(3);
    double a = safe_arg(1) - d11;
    double b = safe_arg(2) - d11;
    double g = d11;
    Vector phases(4);
    phases << std::exp(cdouble(0, g + a + b)), std::exp(cdouble(0, g + a)),
        std::exp(cdouble(0, g + b)), std::exp(cdouble(0, g));
    Matrix stripped = phases.asDiagonal().inverse() * u;
    return max_norm(Matrix(stripped - v));
}

// ---------------------------------------------------------------------------
// equal_up_to_corrections

namespace {

Matrix correction_matrix(int n_qubits, unsigned x_mask, unsigned z_mask) {
    Matrix c = Matrix::Identity(1, 1);
    for (int k = 0; k < n_qubits; ++k) {
        Matrix one = Matrix::Identity(2, 2);
        if (z_mask & (1u << k)) one = gates::z().matrix() * one;
        if (x_mask & (1u << k)) one = gates::x().matrix() * one;
        Matrix next(c.rows() * 2, c.cols() * 2);
        next.setZero();
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            for (Eigen::Index j = 0; j < c.cols(); ++j)
                next.block(2 * i, 2 * j, 2, 2) = c(i, j) * one;
        c = std::move(next);
    }
    return c;
}

std::string correction_name(int n_qubits, unsigned x_mask, unsigned z_mask, double phase) {
    std::ostringstream os;
    bool any = false;
    for (int k = 0; k < n_qubits; ++k) {
        if (x_mask & (1u << k)) {
            os << (any ? " " : "") << "X" << (k + 1);
            any = true;
        }
        if (z_mask & (1u << k)) {
            os << (any ? " " : "") << "Z" << (k + 1);
            any = true;
        }
    }
    if (phase != 0.0) {
        os << (any ? " " : "") << "P(" << phase << ")";
        any = true;
    }
    if (!any) os << "I";
    return os.str();
}

} // namespace

EquivalenceReport equal_up_to_corrections(const std::vector<BranchMap>& branches,
                                          const Matrix& target, const CorrectionFamily& family,
                                          double tol, const std::string& target_name) {
    if (branches.empty()) throw ContractError("equal_up_to_corrections: empty branch list");
    const int nq = static_cast<int>(std::round(std::log2(target.rows())));

    EquivalenceReport rep;
    rep.target_name = target_name;
    rep.tolerance = tol;
    rep.pass = true;

    for (const BranchMap& b : branches) {
        EquivalenceReport::BranchEntry e;
        e.outcomes = b.outcomes;
        e.probability = b.probability;

        // Rescale the Kraus to unit (Frobenius) normalization.
        double fn = b.kraus.norm();
        if (fn < 1e-300) {
            e.deviation = 1.0;
            e.pass = false;
            rep.pass = false;
            rep.branches.push_back(std::move(e));
            continue;
        }
        Matrix k = b.kraus * (std::sqrt(static_cast<double>(target.rows())) / fn);

        double best_dev = 1e300;
        for (unsigned xm = 0; xm < (1u << nq); ++xm) {
            if (!family.allow_x && xm) continue;
            for (unsigned zm = 0; zm < (1u << nq); ++zm) {
                if (!family.allow_z && zm) continue;
                for (int use_phase = 0; use_phase < (family.use_ledger_phase ? 2 : 1); ++use_phase) {
                    Matrix c = correction_matrix(nq, xm, zm);
                    double phase = 0.0;
                    if (use_phase && b.ledger.theta_pending != 0.0) {
                        phase = b.ledger.theta_pending;
                        // pending phase on the last-listed output wire
                        Matrix p = Matrix::Identity(1, 1);
                        for (int q2 = 0; q2 < nq; ++q2) {
                            Matrix one = (q2 == nq - 1) ? gates::p(phase).matrix()
                                                        : Matrix::Identity(2, 2);
                            Matrix next(p.rows() * 2, p.cols() * 2);
                            next.setZero();
                            for (Eigen::Index i = 0; i < p.rows(); ++i)
                                for (Eigen::Index j = 0; j < p.cols(); ++j)
                                    next.block(2 * i, 2 * j, 2, 2) = p(i, j) * one;
                            p = std::move(next);
                        }
                        c = c * p;
                    }
                    PhaseFit fit = equal_up_to_global_phase(c.adjoint() * k, target, tol);
                    if (fit.deviation < best_dev) {
                        best_dev = fit.deviation;
                        e.deviation = fit.deviation;
                        e.global_phase = fit.phase;
                        e.correction = correction_name(nq, xm, zm, phase);
                        e.pass = fit.pass;
                    }
                }
            }
        }
        if (!e.pass) rep.pass = false;
        rep.branches.push_back(std::move(e));
    }
    return rep;
}

std::string equivalence_report_to_json(const EquivalenceReport& r) {
    nlohmann::json j;
    j["target"] = r.target_name;
    j["tolerance"] = r.tolerance;
    j["pass"] = r.pass;
    j["branches"] = nlohmann::json::array();
    for (const auto& b : r.branches) {
        j["branches"].push_back({{"outcomes", b.outcomes},
                                 {"probability", b.probability},
                                 {"deviation", b.deviation},
                                 {"correction", b.correction},
                                 {"global_phase", b.global_phase},
                                 {"pass", b.pass}});
    }
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Leakage scan

namespace {

/// One entangling-window leakage trace of the dot-level gradient model.
double window_max_leakage(double mu_delta, double j23, int t_points) {
    FullSpinModel m;
    m.n_dots = 4;
    m.zeeman = gradient_dot_fields(2, mu_delta);
    m.exchange[{2, 3}] = j23;
    Operator h = full_spin_hamiltonian(m);

    // tau_cz from the CZ condition at this ratio; fall back to one precession
    // period when the ratio is not of the (4 n1 - 2 n2 - 1)/n1 = r form.
    double tau_cz = M_PI / mu_delta * std::max(1.0, std::round(mu_delta / j23));

    Matrix v = qubit_subspace_embedding(Encoding::gradient_x_basis, 2);
    Matrix proj = v * v.adjoint();

    double worst = 0.0;
    auto scan_grid = [&](double t_max, int n) {
        // midpoint grid: avoids sampling exactly on the dressing period
        for (int it = 0; it < n; ++it) {
            double t = t_max * (it + 0.5) / n;
            Operator u = evolve(h, t);
            for (int b = 0; b < 4; ++b) {
                Vector out = u.matrix() * v.col(b);
                double kept = (proj * out).squaredNorm();
                worst = std::max(worst, 1.0 - kept);
            }
        }
    };
    scan_grid(std::min(tau_cz, 2.0 * M_PI / mu_delta), 48);
    scan_grid(tau_cz, t_points);
    return worst;
}

} // namespace

LeakageScan leakage_scan(const std::vector<double>& ratios, double mu_delta, int t_points) {
    LeakageScan scan;
    for (double r : ratios) {
        if (!(r > 0.0) || r > 0.5) throw ContractError("leakage_scan: ratios must lie in (0, 0.5]");
        scan.rows.push_back({r, window_max_leakage(mu_delta, r * mu_delta, t_points)});
    }
    // log-log least squares
    if (scan.rows.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (const auto& row : scan.rows) {
            if (row.max_leakage <= 0.0) continue;
            double x = std::log(row.ratio), y = std::log(row.max_leakage);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++n;
        }
        if (n >= 2) scan.fit_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return scan;
}

std::string leakage_scan_to_csv(const LeakageScan& scan) {
    std::ostringstream os;
    os << "ratio,max_leakage,fit_slope\n";
    for (const auto& r : scan.rows) {
        os << fmt(r.ratio) << "," << fmt(r.max_leakage) << "," << fmt(scan.fit_slope) << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Cross validation

CrossValidation cross_validate_gradient(double mu_delta, double j23, int t_points) {
    FullSpinModel m;
    m.n_dots = 4;
    m.zeeman = gradient_dot_fields(2, mu_delta);
    m.exchange[{2, 3}] = j23;
    Operator h_full = full_spin_hamiltonian(m);

    Operator h_eff = effective_gradient_hamiltonian(
        GradientModelParams::symmetric(mu_delta, j23));

    // The dot-level realization reverses the second qubit's gradient, so the
    // encoded frame differs by an X on qubit 2.
    Matrix v = qubit_subspace_embedding(Encoding::gradient_x_basis, 2);
    Matrix twist = tensor({gates::i2("q1"), gates::x("q2")}).matrix();

    double tau_cz = j23 > 0.0 ? M_PI / mu_delta * std::max(1.0, std::round(mu_delta / j23))
                              : M_PI / mu_delta;

    CrossValidation cv;
    cv.quadratic_prediction = j23 > 0.0 ? (j23 / mu_delta) * (j23 / mu_delta) : 0.0;
    for (int it = 1; it <= t_points; ++it) {
        double t = tau_cz * it / t_points;
        Matrix compressed = twist * v.adjoint() * evolve(h_full, t).matrix() * v * twist;
        Matrix u_eff = evolve(h_eff, t).matrix();
        cv.max_deviation = std::max(cv.max_deviation, deviation_up_to_local_z(compressed, u_eff));
    }
    return cv;
}

double exchange_block_structure_deviation(double j12, double j34, double j23) {
    FullSpinModel m;
    m.n_dots = 4;
    m.zeeman.assign(4, 0.0);
    m.exchange[{1, 2}] = j12;
    m.exchange[{3, 4}] = j34;
    m.exchange[{2, 3}] = j23;
    Matrix v = qubit_subspace_embedding(Encoding::exchange_z_basis, 2);
    Matrix compressed = v.adjoint() * full_spin_hamiltonian(m).matrix() * v;

    double dev = 0.0;
    dev = std::max(dev, std::abs(std::abs(compressed(0, 3)) - 0.25 * j23));
    dev = std::max(dev, std::abs(std::abs(compressed(3, 0)) - 0.25 * j23));
    dev = std::max(dev, std::abs(std::abs(compressed(1, 2)) - 0.25 * j23));
    dev = std::max(dev, std::abs(std::abs(compressed(2, 1)) - 0.25 * j23));
    return dev;
}

// ---------------------------------------------------------------------------
// Timing

namespace {

double step_seconds(const ScheduleStep& s) {
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

std::string step_name(const ScheduleStep& s) {
    return std::visit(
        [](const auto& k) -> std::string {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, ExchangeWindowStep>) return "exchange_window";
            else if constexpr (std::is_same_v<T, IntraPhaseStep>) return "intra_phase " + k.qubit;
            else if constexpr (std::is_same_v<T, StMeasureStep>)
                return "st_measure d" + std::to_string(k.spec.dot_pair.first) + ",d" +
                       std::to_string(k.spec.dot_pair.second);
            else if constexpr (std::is_same_v<T, PauliCorrectionStep>) return "pauli_correction";
            else if constexpr (std::is_same_v<T, PhaseCorrectionStep>) return "phase_correction";
            else return "reset_plus";
        },
        s.kind);
}

} // namespace

TimingReport gate_time(const Schedule& schedule) {
    TimingReport r;
    r.schedule_tag = schedule.tag;
    for (const auto& s : schedule.steps) {
        r.entries.push_back({step_name(s), step_seconds(s)});
    }
    r.total_s = schedule.total_duration();
    r.convention_note =
        "energies are angular frequencies (rad/s); phase-gate durations use the "
        "effective-level convention tau = angle/j with inverse gates dialed to "
        "angle 3pi/2; parallel groups contribute their longest member";
    return r;
}

std::string timing_report_to_csv(const TimingReport& r) {
    std::ostringstream os;
    os << "step,duration_ns\n";
    for (const auto& e : r.entries) {
        os << e.step << "," << fmt(e.duration_s * 1e9) << "\n";
    }
    os << "total," << fmt(r.total_s * 1e9) << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Resources

ResourceCount resource_count(const Schedule& schedule) {
    ResourceCount rc;
    rc.protocol = schedule.tag;
    rc.ancillae = schedule.n_qubits - schedule.n_logical_inputs;
    rc.leakage_protected = schedule.leakage_protected;
    for (const auto& s : schedule.steps) {
        std::visit(
            [&](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, ExchangeWindowStep>) {
                    rc.gates += static_cast<int>(k.edges.size());
                } else if constexpr (std::is_same_v<T, IntraPhaseStep>) {
                    rc.gates += 1;
                } else if constexpr (std::is_same_v<T, StMeasureStep>) {
                    rc.measurements += 1;
                }
            },
            s.kind);
    }
    return rc;
}

Schedule reference_schedule(const std::string& tag, double scale) {
    if (tag == "p1_single") {
        GradientProtocolParams p;
        p.mu_delta = scale;
        return compile_teleport_rotation(M_PI / 2.0, p);
    }
    if (tag == "p1_two") return compile_square_gate(1, 1, scale);
    if (tag == "p2_single") return compile_hadamard_sequence(scale);
    if (tag == "p2_two") return compile_two_qubit_sequence(scale);
    throw ContractError("reference_schedule: unknown tag " + tag);
}

std::string resource_count_to_json(const ResourceCount& r) {
    nlohmann::json j;
    j["protocol"] = r.protocol;
    j["gates"] = r.gates;
    j["measurements"] = r.measurements;
    j["ancillae"] = r.ancillae;
    j["leakage_protected"] = r.leakage_protected;
    return j.dump(2);
}

} // namespace stq
