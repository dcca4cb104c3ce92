// Acceptance suite: runs every verification gate at its stated tolerance and
// prints one pass/fail line per criterion. Returns the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "stq/protocols.hpp"
#include "stq/verify.hpp"

using namespace stq;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool pass, const std::string& detail = "") {
    std::printf("[%2d] %-28s %s%s%s\n", idx, name, pass ? "PASS" : "FAIL",
                detail.empty() ? "" : "  -- ", detail.c_str());
    if (!pass) ++g_failures;
}

Matrix ledger_matrix_1q(const CorrectionLedger& l, const Label& wire, bool with_phase) {
    auto f = l.frame(wire);
    Matrix c = Matrix::Identity(2, 2);
    if (with_phase && l.theta_pending != 0.0) c = c * gates::p(l.theta_pending).matrix();
    if (f.z_power) c = gates::z().matrix() * c;
    if (f.x_power) c = gates::x().matrix() * c;
    return c;
}

StateVector rand_qubit(std::uint64_t& seed) {
    return gates::bloch(uniform_u01(seed) * M_PI, uniform_u01(seed) * 2 * M_PI);
}

// 1. rotation teleportation: ledger-stripped branch maps equal H P(theta)
void criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst = 0.0;
    for (double theta : {M_PI / 4, M_PI / 2, M_PI, 1.5 * M_PI, 1.0}) {
        for (int n : {0, 3}) {
            GradientProtocolParams p;
            p.mu_delta = 1.0e8;
            p.n = n;
            for (int s = 0; s < 2; ++s) {
                Matrix k = branch_kraus(
                    [&](const StateVector& in, OutcomeSource& src) {
                        return teleport_rotation(in, theta, p, src);
                    },
                    1, {s}, {"q2"});
                Matrix kn = k * (std::sqrt(2.0) / k.norm());
                OutcomeSource src = OutcomeSource::forced({s});
                CorrectionLedger led =
                    teleport_rotation(gates::ket0("q"), theta, p, src).ledger;
                Matrix corr = ledger_matrix_1q(led, "q", true);
                PhaseFit f = equal_up_to_global_phase(corr.adjoint() * kn,
                                                      gates::w(theta).matrix(), 1e-10);
                worst = std::max(worst, f.deviation);
                ok = ok && f.pass;
            }
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 1.0;
    char buf[96];
    std::snprintf(buf, sizeof buf, "max deviation %.2e, %.2f s", worst, secs);
    report(1, "rotation teleportation", ok, buf);
}

// 2. controlled-phase timing condition
void criterion_2() {
    bool ok = true;
    double worst = 0.0;
    Matrix cz = gates::cz().matrix();
    for (auto [n1, n2] :
         std::vector<std::pair<int, int>>{{1, 1}, {2, 3}, {5, 9}, {10, 19}, {3, 5}}) {
        CzSchedule s = cz_schedule(n1, n2, 1.3e8);
        Operator h = effective_gradient_hamiltonian(
            GradientModelParams::symmetric(1.3e8, s.j23));
        double dev = deviation_up_to_local_z(evolve(h, s.tau).matrix(), cz);
        worst = std::max(worst, dev);
        ok = ok && dev < 1e-10;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "max deviation %.2e", worst);
    report(2, "controlled-phase condition", ok, buf);
}

// 3. single-measurement state preparation
void criterion_3() {
    bool ok = true;
    double worst_fid = 0.0, worst_ortho = 0.0;
    for (int g = 0; g < 32; ++g) {
        double theta = 2.0 * M_PI * (g + 0.5) / 32.0;
        StateVector out[2] = {gates::ket0("q"), gates::ket0("q")};
        for (int s = 0; s < 2; ++s) {
            OutcomeSource f = OutcomeSource::forced({s});
            ProtocolResult r = prepare_state(theta, 0.0, 0, f);
            if (!r.output) {
                ok = false;
                continue;
            }
            out[s] = *r.output;
            double dev = 1.0 - fidelity_states(out[s], prepare_state_closed_form(theta, s));
            worst_fid = std::max(worst_fid, dev);
            ok = ok && dev < 1e-10;
        }
        double ortho = std::abs(out[0].inner(out[1]));
        worst_ortho = std::max(worst_ortho, ortho);
        ok = ok && ortho < 1e-12;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "max infidelity %.2e, max overlap %.2e", worst_fid,
                  worst_ortho);
    report(3, "state preparation", ok, buf);
}

// 4. square-geometry two-qubit gate
void criterion_4() {
    bool ok = true;
    double worst = 0.0;
    Matrix target = tensor({gates::h("a"), gates::h("b")}).matrix() * gates::cx().matrix();
    std::uint64_t seed = 4;
    for (int s1 = 0; s1 < 2; ++s1) {
        for (int s2 = 0; s2 < 2; ++s2) {
            Matrix k = branch_kraus(
                [&](const StateVector& in, OutcomeSource& src) {
                    auto f1 = extract_factor(in, {"q1"});
                    auto f2 = extract_factor(in, {"q2"});
                    return square_gate(*f1, *f2, 1, 1, src);
                },
                2, {s1, s2}, {"q4", "q1"});
            Matrix kn = k * (2.0 / k.norm());
            Matrix corr = Matrix::Identity(4, 4);
            if ((s1 + s2) % 2) corr = tensor({gates::x("a"), gates::i2("b")}).matrix() * corr;
            if (s2) corr = tensor({gates::i2("a"), gates::x("b")}).matrix() * corr;
            PhaseFit f = equal_up_to_global_phase(corr.adjoint() * kn, target, 1e-10);
            worst = std::max(worst, f.deviation);
            ok = ok && f.pass;
            // state-level spot checks on random inputs
            for (int trial = 0; trial < 20; ++trial) {
                StateVector a = rand_qubit(seed), b = rand_qubit(seed);
                OutcomeSource src = OutcomeSource::forced({s1, s2});
                ProtocolResult r = square_gate(a, b, 1, 1, src);
                if (!r.output) {
                    ok = false;
                    continue;
                }
                Vector want = corr * target *
                              tensor({StateVector({"a"}, a.amplitudes()),
                                      StateVector({"b"}, b.amplitudes())})
                                  .amplitudes();
                StateVector wv({"a", "b"}, want);
                double dev = 1.0 - fidelity_states(*r.output, wv.normalized());
                worst = std::max(worst, dev);
                ok = ok && dev < 1e-10;
            }
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "max deviation %.2e", worst);
    report(4, "square two-qubit gate", ok, buf);
}

// 5. recycled measurements
void criterion_5() {
    bool ok = true;
    double worst = 0.0;
    double t1 = M_PI / 2, t2 = M_PI / 3;
    for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2)
            for (int s3 = 0; s3 < 2; ++s3) {
                Matrix k = branch_kraus(
                    [&](const StateVector& in, OutcomeSource& src) {
                        return recycled_sequence(in, {t1, t2}, AngleMode::literal, src);
                    },
                    1, {s1, s2, s3}, {"q1"});
                Matrix kn = k * (std::sqrt(2.0) / k.norm());
                PhaseFit f = equal_up_to_global_phase(
                    kn, recycled_two_angle_target(t1, t2, s1, s2, s3), 1e-10);
                worst = std::max(worst, f.deviation);
                ok = ok && f.pass;
            }

    // four-angle runs leave at most one X and one Z in the frame, and the
    // stripped state matches the delivered rotation product
    std::uint64_t seed = 5;
    for (int run = 0; run < 50; ++run) {
        std::vector<double> angles;
        for (int k = 0; k < 4; ++k) angles.push_back(uniform_u01(seed) * 5.9 + 0.1);
        StateVector psi = rand_qubit(seed);
        OutcomeSource src = OutcomeSource::sampled(splitmix64_next(seed));
        ProtocolResult r = recycled_sequence(psi, angles, AngleMode::adjusted, src);
        auto f = r.ledger.frame("q1");
        bool pauli_only = (f.x_power == 0 || f.x_power == 1) &&
                          (f.z_power == 0 || f.z_power == 1);
        ok = ok && pauli_only && r.output.has_value();
        if (r.output) {
            Matrix wprod = Matrix::Identity(2, 2);
            for (double a : r.applied_rotations) wprod = gates::w(a).matrix() * wprod;
            Matrix corr = ledger_matrix_1q(r.ledger, "q1", true);
            StateVector stripped({"q"}, corr.adjoint() * r.output->amplitudes());
            StateVector want({"q"}, wprod * psi.amplitudes());
            double dev = 1.0 - fidelity_states(stripped.normalized(), want.normalized());
            worst = std::max(worst, dev);
            ok = ok && dev < 1e-10;
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "max deviation %.2e", worst);
    report(5, "recycled measurements", ok, buf);
}

// 6. linear stabilizer code roundtrip and syndrome table
void criterion_6() {
    bool ok = true;
    StateVector psi = gates::bloch(0.9, 1.3);
    std::array<double, 3> angles{0.4, 1.1, 2.0};
    Matrix wprod = Matrix::Identity(2, 2);
    for (double a : {angles[0], angles[1], angles[2], 0.0}) wprod = gates::w(a).matrix() * wprod;
    StateVector want({"q"}, wprod * psi.amplitudes());

    auto branches = enumerate_branches([&](OutcomeSource& src) {
        StabilizerOutcome o = stabilizer_roundtrip(psi, angles, std::nullopt, src);
        ProtocolResult r = o.run;
        for (int s : o.syndromes) r.applied_rotations.push_back(s);
        return r;
    });
    double psum = 0.0, worst = 0.0;
    for (const auto& b : branches) {
        psum += b.probability;
        size_t na = b.result.applied_rotations.size();
        bool syn_ok = b.result.applied_rotations[na - 3] > 0 &&
                      b.result.applied_rotations[na - 2] > 0 &&
                      b.result.applied_rotations[na - 1] > 0;
        ok = ok && syn_ok;
        if (!b.result.output) {
            ok = false;
            continue;
        }
        Matrix corr = ledger_matrix_1q(b.result.ledger, "q", false);
        StateVector stripped({"q"}, corr.adjoint() * b.result.output->amplitudes());
        double dev = 1.0 - fidelity_states(stripped.normalized(), want.normalized());
        worst = std::max(worst, dev);
        ok = ok && dev < 1e-10;
    }
    ok = ok && std::abs(psum - 1.0) < 1e-10;

    // brute-force syndrome table; every single-qubit error flips a syndrome
    std::puts("     syndrome table (error qubit s1 s2 s3):");
    for (const auto& row : syndrome_table()) {
        char p = row.pauli == PauliKind::x ? 'X' : (row.pauli == PauliKind::y ? 'Y' : 'Z');
        std::printf("       %c%d  %+d %+d %+d\n", p, row.qubit, row.syndromes[0],
                    row.syndromes[1], row.syndromes[2]);
        ok = ok && (row.syndromes[0] < 0 || row.syndromes[1] < 0 || row.syndromes[2] < 0);
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu branches, max recovery deviation %.2e", branches.size(),
                  worst);
    report(6, "stabilizer roundtrip", ok, buf);
}

// 7. quantum bus
void criterion_7() {
    bool ok = true;
    double worst_leak = 0.0, worst_fid = 0.0;
    std::uint64_t seed = 7;
    int heralded = 0;
    for (int trial = 0; trial < 20; ++trial) {
        StateVector psi = rand_qubit(seed);
        auto branches =
            enumerate_branches([&](OutcomeSource& src) { return quantum_bus(psi, src); });
        double psum = 0.0;
        for (const auto& b : branches) {
            psum += b.probability;
            if (b.result.flagged) {
                ++heralded;
                ok = ok && b.result.output_leakage[0] > 0.99; // detection is real
                continue;
            }
            worst_leak = std::max(worst_leak, b.result.output_leakage[0]);
            ok = ok && b.result.output_leakage[0] < 1e-12 && b.result.output.has_value();
            if (b.result.output) {
                Matrix corr = ledger_matrix_1q(b.result.ledger, "q", false);
                StateVector want({"q"}, corr * psi.amplitudes());
                double dev = 1.0 - fidelity_states(*b.result.output, want.normalized());
                worst_fid = std::max(worst_fid, dev);
                ok = ok && dev < 1e-10;
            }
        }
        ok = ok && std::abs(psum - 1.0) < 1e-12;
    }
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "max leakage %.2e, max deviation %.2e, %d heralded detection branches",
                  worst_leak, worst_fid, heralded);
    report(7, "quantum bus", ok, buf);
}

// 8. single-qubit sequence
void criterion_8() {
    bool ok = true;
    double worst = 0.0, worst_leak = 0.0;
    std::uint64_t seed = 8;

    // branch maps strip to the Hadamard
    StateVector probe = gates::bloch(0.8, 0.2);
    auto branches =
        enumerate_branches([&](OutcomeSource& src) { return hadamard_sequence(probe, src); });
    for (const auto& b : branches) {
        if (b.result.flagged) continue;
        Matrix k = branch_kraus(
            [&](const StateVector& in, OutcomeSource& src) {
                return hadamard_sequence(in, src);
            },
            1, b.outcomes, {"q1"});
        if (k.norm() < 1e-12) continue;
        Matrix kn = k * (std::sqrt(2.0) / k.norm());
        Matrix corr = ledger_matrix_1q(b.result.ledger, "q", false);
        PhaseFit f = equal_up_to_global_phase(corr.adjoint() * kn, gates::h().matrix(), 1e-10);
        worst = std::max(worst, f.deviation);
        ok = ok && f.pass;
        worst_leak = std::max(worst_leak, b.result.output_leakage[0]);
        ok = ok && b.result.output_leakage[0] < 1e-12;
    }

    // leakage robustness under arbitrary phase substitutions
    for (int trial = 0; trial < 50; ++trial) {
        std::array<double, 4> phases{uniform_u01(seed) * 2 * M_PI, uniform_u01(seed) * 2 * M_PI,
                                     uniform_u01(seed) * 2 * M_PI, uniform_u01(seed) * 2 * M_PI};
        StateVector psi = rand_qubit(seed);
        auto bs = enumerate_branches(
            [&](OutcomeSource& src) { return hadamard_sequence_phases(psi, phases, src); });
        for (const auto& b : bs) {
            if (b.result.flagged) continue;
            worst_leak = std::max(worst_leak, b.result.output_leakage[0]);
            ok = ok && b.result.output_leakage[0] < 1e-12;
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "max deviation %.2e, max completed-branch leakage %.2e", worst,
                  worst_leak);
    report(8, "single-qubit sequence", ok, buf);
}

// 9. two-qubit sequence
void criterion_9() {
    bool ok = true;
    double worst = 0.0, worst_leak = 0.0;
    Matrix hh = tensor({gates::h("a"), gates::h("b")}).matrix();
    Matrix target = hh * gates::cz().matrix() * hh;
    std::uint64_t seed = 9;

    StateVector p1v = gates::bloch(0.8, 0.2), p2v = gates::bloch(1.7, 2.2);
    auto branches = enumerate_branches(
        [&](OutcomeSource& src) { return two_qubit_sequence(p1v, p2v, src); });
    for (const auto& b : branches) {
        if (b.result.flagged) continue;
        Matrix k = branch_kraus(
            [&](const StateVector& in, OutcomeSource& src) {
                auto f1 = extract_factor(in, {"q1"});
                auto f2 = extract_factor(in, {"q2"});
                return two_qubit_sequence(*f1, *f2, src);
            },
            2, b.outcomes, {"q1", "q4"});
        if (k.norm() < 1e-12) continue;
        Matrix kn = k * (2.0 / k.norm());
        Matrix c1 = ledger_matrix_1q(b.result.ledger, "q1", false);
        Matrix c2 = ledger_matrix_1q(b.result.ledger, "q2", false);
        Matrix corr(4, 4);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) corr.block(2 * i, 2 * j, 2, 2) = c1(i, j) * c2;
        PhaseFit f = equal_up_to_global_phase(corr.adjoint() * kn, target, 1e-10);
        worst = std::max(worst, f.deviation);
        ok = ok && f.pass;
        worst_leak = std::max(
            worst_leak, std::max(b.result.output_leakage[0], b.result.output_leakage[1]));
        ok = ok && worst_leak < 1e-12;
    }

    // ten random input pairs, state-level, across enumerated branches
    for (int trial = 0; trial < 10; ++trial) {
        StateVector a = rand_qubit(seed), b = rand_qubit(seed);
        auto bs = enumerate_branches(
            [&](OutcomeSource& src) { return two_qubit_sequence(a, b, src); });
        Vector want0 = target * tensor({StateVector({"x"}, a.amplitudes()),
                                        StateVector({"y"}, b.amplitudes())})
                                    .amplitudes();
        for (const auto& br : bs) {
            if (br.result.flagged || !br.result.output) continue;
            Matrix c1 = ledger_matrix_1q(br.result.ledger, "q1", false);
            Matrix c2 = ledger_matrix_1q(br.result.ledger, "q2", false);
            Matrix corr(4, 4);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) corr.block(2 * i, 2 * j, 2, 2) = c1(i, j) * c2;
            StateVector stripped({"x", "y"}, corr.adjoint() * br.result.output->amplitudes());
            StateVector wv({"x", "y"}, want0);
            double dev = 1.0 - fidelity_states(stripped.normalized(), wv.normalized());
            worst = std::max(worst, dev);
            ok = ok && dev < 1e-10;
            worst_leak = std::max(worst_leak, std::max(br.result.output_leakage[0],
                                                       br.result.output_leakage[1]));
        }
    }
    ok = ok && worst_leak < 1e-12;
    char buf[96];
    std::snprintf(buf, sizeof buf, "max deviation %.2e, max leakage %.2e", worst, worst_leak);
    report(9, "two-qubit sequence", ok, buf);
}

// 10. leakage scaling of the dot-level gradient model
void criterion_10() {
    auto t0 = std::chrono::steady_clock::now();
    LeakageScan scan = leakage_scan({0.2, 0.1, 0.05, 0.025});
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool monotone = true;
    for (size_t i = 1; i < scan.rows.size(); ++i) {
        monotone = monotone && scan.rows[i].max_leakage < scan.rows[i - 1].max_leakage;
    }
    bool ok = monotone && std::abs(scan.fit_slope - 2.0) <= 0.2 && secs < 10.0;
    char buf[96];
    std::snprintf(buf, sizeof buf, "slope %.3f, monotone %s, %.2f s", scan.fit_slope,
                  monotone ? "yes" : "no", secs);
    report(10, "leakage scaling", ok, buf);
}

// 11. resource counts
void criterion_11() {
    struct Want {
        const char* tag;
        int gates, meas, anc;
    };
    bool ok = true;
    std::string detail;
    for (const Want w : {Want{"p1_single", 1, 1, 1}, Want{"p1_two", 4, 2, 2},
                         Want{"p2_single", 3, 2, 1}, Want{"p2_two", 7, 5, 2}}) {
        ResourceCount rc = resource_count(reference_schedule(w.tag));
        bool match = rc.gates == w.gates && rc.measurements == w.meas && rc.ancillae == w.anc &&
                     rc.leakage_protected;
        ok = ok && match;
        detail += std::string(w.tag) + "(" + std::to_string(rc.gates) + "," +
                  std::to_string(rc.measurements) + "," + std::to_string(rc.ancillae) + ") ";
    }
    report(11, "resource counts", ok, detail);
}

// 12. gate times under both frequency conventions
void criterion_12() {
    bool ok = true;
    std::string detail;
    for (double j : {2.0 * M_PI * 160.0e6, 160.0e6}) {
        double worst = 0.0;
        for (const char* tag : {"p1_single", "p1_two", "p2_single", "p2_two"}) {
            double scale = j;
            if (std::string(tag) == "p1_single") scale = j / 4.0;
            if (std::string(tag) == "p1_two") scale = j / 2.0;
            TimingReport r = gate_time(reference_schedule(tag, scale));
            worst = std::max(worst, r.total_s);
            ok = ok && r.total_s < 150e-9;
        }
        char buf[48];
        std::snprintf(buf, sizeof buf, "max %.1f ns ", worst * 1e9);
        detail += buf;
    }
    report(12, "gate times under 150 ns", ok, detail + "(angular | ordinary reading of 160 MHz)");
}

} // namespace

int main() {
    std::puts("acceptance criteria");
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();
    if (g_failures == 0) {
        std::puts("all criteria passed");
    } else {
        std::printf("%d criteria FAILED\n", g_failures);
    }
    return g_failures;
}
