#include <doctest.h>

#include <cmath>

#include "stq/protocols.hpp"
#include "stq/verify.hpp"

using namespace stq;

namespace {

Matrix ledger_correction_1q(const CorrectionLedger& l, const Label& wire, bool with_phase = true) {
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

} // namespace

TEST_CASE("cluster states") {
    SUBCASE("single vertex is |+>") {
        StateVector s = build_cluster_state(GraphSpec::chain(1));
        CHECK(fidelity_states(s, gates::ket_plus("q1")) == doctest::Approx(1.0));
    }
    SUBCASE("two-vertex chain") {
        StateVector s = build_cluster_state(GraphSpec::chain(2));
        // (|0+> + |1->)/sqrt(2)
        Vector want(4);
        double r = 0.5;
        want << r, r, r, -r;
        CHECK((s.amplitudes() - want).norm() < 1e-14);
    }
    SUBCASE("stabilizers fix the cluster state") {
        for (const GraphSpec& g : {GraphSpec::chain(4), GraphSpec::square()}) {
            StateVector s = build_cluster_state(g);
            for (int v = 1; v <= g.n_vertices; ++v) {
                StateVector ks = cluster_stabilizer(g, v) * s;
                CHECK(fidelity_states(ks, s) == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }
    SUBCASE("input assignments replace the default plus states") {
        GraphSpec g = GraphSpec::chain(2);
        g.input_assignments[1] = gates::ket0("in");
        StateVector s = build_cluster_state(g);
        // CZ(|0> (x) |+>) = |0>|+>
        StateVector want = tensor({gates::ket0("q1"), gates::ket_plus("q2")});
        CHECK(fidelity_states(s, want) == doctest::Approx(1.0));
    }
    SUBCASE("non-simple graphs are rejected") {
        GraphSpec g = GraphSpec::chain(3);
        g.edges.push_back({1, 2});
        CHECK_THROWS_AS(build_cluster_state(g), ContractError);
        GraphSpec loop = GraphSpec::chain(2);
        loop.edges[0] = {1, 1};
        CHECK_THROWS_AS(build_cluster_state(loop), ContractError);
    }
}

TEST_CASE("teleport rotation: branch maps equal the projected rotation") {
    GradientProtocolParams params;
    params.mu_delta = 1.0e8;
    for (double theta : {M_PI / 4, M_PI / 2, M_PI, 1.5 * M_PI, 1.0}) {
        for (int n : {0, 3}) {
            params.n = n;
            for (int s = 0; s < 2; ++s) {
                Matrix k = branch_kraus(
                    [&](const StateVector& in, OutcomeSource& src) {
                        return teleport_rotation(in, theta, params, src);
                    },
                    1, {s}, {"q2"});
                Matrix kn = k * (std::sqrt(2.0) / k.norm());
                // strip the recorded corrections: X^s P((-1)^s theta)
                Matrix corr = gates::p((s ? -1.0 : 1.0) * theta).matrix();
                if (s) corr = gates::x().matrix() * corr;
                PhaseFit f =
                    equal_up_to_global_phase(corr.adjoint() * kn, gates::w(theta).matrix(), 1e-10);
                CHECK(f.pass);
            }
        }
    }
}

TEST_CASE("teleport rotation: spec example outputs") {
    GradientProtocolParams params;
    OutcomeSource f0 = OutcomeSource::forced({0});
    ProtocolResult r = teleport_rotation(gates::ket0("q"), 1.3, params, f0);
    REQUIRE(r.output.has_value());
    // P(theta) W(theta) |0> = P(theta)|+>
    StateVector want({"q"}, gates::p(1.3).matrix() * gates::ket_plus("q").amplitudes());
    CHECK(fidelity_states(*r.output, want) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(
        {
            OutcomeSource s = OutcomeSource::forced({0});
            teleport_rotation(gates::ket0("q"), 0.0, params, s);
        },
        ScheduleError);
}

TEST_CASE("teleport rotation branch probabilities sum to one") {
    GradientProtocolParams params;
    auto branches = enumerate_branches([&](OutcomeSource& src) {
        return teleport_rotation(gates::bloch(0.7, 0.4), 2.1, params, src);
    });
    double sum = 0.0;
    for (const auto& b : branches) sum += b.probability;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(branches.size() == 2);
}

TEST_CASE("full-spin teleport stays below the quadratic leakage extrapolation") {
    // The rotation window requires j23 = (2n+1) pi / tau with
    // tau = theta/(2 mu_delta), so its coupling ratio is 2 pi (2n+1)/theta
    // and never drops below one. The quadratic scan fit extrapolated to the
    // schedule's own ratio bounds the observed leakage.
    LeakageScan scan = leakage_scan({0.2, 0.1, 0.05, 0.025});
    // fit leak = c * ratio^slope from the smallest point
    double c = scan.rows.back().max_leakage /
               std::pow(scan.rows.back().ratio, scan.fit_slope);

    GradientProtocolParams params;
    params.mu_delta = 1.0;
    params.n = 0;
    double theta = 2.0 * M_PI; // ratio = 2 pi (2n+1)/theta = 1
    double ratio = 2.0 * M_PI * (2 * params.n + 1) / theta;
    double predicted = c * std::pow(ratio, scan.fit_slope);
    for (int s = 0; s < 2; ++s) {
        OutcomeSource src = OutcomeSource::forced({s});
        ProtocolResult r = teleport_rotation_full(gates::bloch(0.4, 1.2), theta, params, src);
        REQUIRE(r.output_leakage.size() == 2);
        CHECK(r.output_leakage[1] < 10.0 * predicted);
    }
}

TEST_CASE("prepare_state matches the closed form and the branches are antipodal") {
    for (int g = 0; g < 32; ++g) {
        double theta = 2.0 * M_PI * (g + 0.5) / 32.0;
        StateVector s0, s1;
        {
            OutcomeSource f = OutcomeSource::forced({0});
            ProtocolResult r = prepare_state(theta, 0.0, 0, f);
            REQUIRE(r.output.has_value());
            s0 = *r.output;
            CHECK(fidelity_states(s0, prepare_state_closed_form(theta, 0)) ==
                  doctest::Approx(1.0).epsilon(1e-12));
        }
        {
            OutcomeSource f = OutcomeSource::forced({1});
            ProtocolResult r = prepare_state(theta, 0.0, 0, f);
            REQUIRE(r.output.has_value());
            s1 = *r.output;
            CHECK(fidelity_states(s1, prepare_state_closed_form(theta, 1)) ==
                  doctest::Approx(1.0).epsilon(1e-12));
        }
        CHECK(std::abs(s0.inner(s1)) < 1e-12);
    }
}

TEST_CASE("prepare_state with a precession phase") {
    double theta = 2.2, phi = 0.9;
    for (int s = 0; s < 2; ++s) {
        OutcomeSource f = OutcomeSource::forced({s});
        ProtocolResult r = prepare_state(theta, phi, 2, f);
        REQUIRE(r.output.has_value());
        CHECK(fidelity_states(*r.output, prepare_state_closed_form(theta, s)) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
    // trivial angles
    OutcomeSource f0 = OutcomeSource::forced({0});
    auto r0 = prepare_state(2 * M_PI, 0.0, 0, f0); // theta = 0 mod 2 pi
    CHECK(fidelity_states(*r0.output, gates::ket0("q")) == doctest::Approx(1.0).epsilon(1e-10));
    OutcomeSource f1 = OutcomeSource::forced({1});
    auto r1 = prepare_state(2 * M_PI, 0.0, 0, f1);
    CHECK(fidelity_states(*r1.output, gates::ket1("q")) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("square gate reproduces the two-qubit circuit on every branch") {
    Matrix hh = tensor({gates::h("a"), gates::h("b")}).matrix();
    Matrix target = hh * gates::cx().matrix();
    std::uint64_t seed = 77;
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
            CHECK(f.pass);
        }
    }

    // trivial example: |00> with both outcomes 0 gives |++>
    OutcomeSource f00 = OutcomeSource::forced({0, 0});
    ProtocolResult r = square_gate(gates::ket0("q"), gates::ket0("q"), 1, 1, f00);
    REQUIRE(r.output.has_value());
    StateVector pp = tensor({gates::ket_plus("q4"), gates::ket_plus("q1")});
    CHECK(fidelity_states(*r.output, pp) == doctest::Approx(1.0).epsilon(1e-12));

    // |10>: (H (x) H)|11> = |-->
    OutcomeSource f2 = OutcomeSource::forced({0, 0});
    ProtocolResult r2 = square_gate(gates::ket1("q"), gates::ket0("q"), 1, 1, f2);
    StateVector mm = tensor({gates::ket_minus("q4"), gates::ket_minus("q1")});
    CHECK(fidelity_states(*r2.output, mm) == doctest::Approx(1.0).epsilon(1e-12));

    // other schedule indices keep the identity
    for (auto [n1, n2] : std::vector<std::pair<int, int>>{{2, 1}, {1, 2}, {3, 2}}) {
        StateVector a = rand_qubit(seed), b = rand_qubit(seed);
        OutcomeSource src = OutcomeSource::forced({1, 0});
        ProtocolResult rr = square_gate(a, b, n1, n2, src);
        REQUIRE(rr.output.has_value());
        Matrix corr = tensor({gates::x("a"), gates::i2("b")}).matrix();
        Vector want = target * tensor({StateVector({"a"}, a.amplitudes()),
                                       StateVector({"b"}, b.amplitudes())})
                                   .amplitudes();
        StateVector stripped({"a", "b"}, corr.adjoint() * rr.output->amplitudes());
        StateVector wv({"a", "b"}, want);
        CHECK(fidelity_states(stripped.normalized(), wv.normalized()) ==
              doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("recycled sequence: single angle reduces to the teleport rotation") {
    GradientProtocolParams params;
    double theta = 1.1;
    for (int prep = 0; prep < 2; ++prep) {
        for (int s = 0; s < 2; ++s) {
            OutcomeSource src = OutcomeSource::forced({prep, s});
            ProtocolResult r = recycled_sequence(gates::bloch(0.6, 0.6), {theta},
                                                 AngleMode::literal, src);
            REQUIRE(r.output.has_value());
            // byproduct-included target: Z^prep X^s P((-1)^s theta) W(theta)
            Matrix u = gates::w(theta).matrix();
            u = gates::p((s ? -1.0 : 1.0) * theta).matrix() * u;
            if (s) u = gates::x().matrix() * u;
            if (prep) u = gates::z().matrix() * u;
            Vector want = u * gates::bloch(0.6, 0.6).amplitudes();
            StateVector wv({"q"}, want);
            CHECK(fidelity_states(*r.output, wv.normalized()) ==
                  doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("recycled sequence: two-angle branches match the closed-form composite") {
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
                Matrix target = recycled_two_angle_target(t1, t2, s1, s2, s3);
                PhaseFit f = equal_up_to_global_phase(kn, target, 1e-10);
                CHECK(f.pass);
            }
}

TEST_CASE("recycled sequence: adjusted mode delivers the requested rotations") {
    std::vector<double> angles{0.7, 1.9, 2.4, 0.9};
    StateVector psi = gates::bloch(1.1, 0.4);
    auto branches = enumerate_branches([&](OutcomeSource& src) {
        return recycled_sequence(psi, angles, AngleMode::adjusted, src);
    });
    CHECK(branches.size() == 32);
    double psum = 0.0;
    Matrix wprod = Matrix::Identity(2, 2);
    for (double a : angles) wprod = gates::w(a).matrix() * wprod;
    StateVector want({"q"}, wprod * psi.amplitudes());
    for (const auto& b : branches) {
        psum += b.probability;
        REQUIRE(b.result.output.has_value());
        Matrix corr = ledger_correction_1q(b.result.ledger, "q1");
        StateVector stripped({"q"}, corr.adjoint() * b.result.output->amplitudes());
        CHECK(fidelity_states(stripped.normalized(), want.normalized()) ==
              doctest::Approx(1.0).epsilon(1e-10));
        // corrections stay within one X and one Z
        CHECK(b.result.ledger.frame("q1").x_power >= 0);
        CHECK(b.result.ledger.frame("q1").x_power <= 1);
        CHECK(b.result.ledger.frame("q1").z_power <= 1);
    }
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("recycled sequence: sampled runs leave only Pauli-frame corrections") {
    std::uint64_t seed = 2024;
    for (int run = 0; run < 50; ++run) {
        std::vector<double> angles;
        for (int k = 0; k < 4; ++k) angles.push_back(uniform_u01(seed) * 5.9 + 0.1);
        OutcomeSource src = OutcomeSource::sampled(seed);
        splitmix64_next(seed);
        ProtocolResult r =
            recycled_sequence(rand_qubit(seed), angles, AngleMode::adjusted, src);
        auto f = r.ledger.frame("q1");
        CHECK((f.x_power == 0 || f.x_power == 1));
        CHECK((f.z_power == 0 || f.z_power == 1));
    }
}

TEST_CASE("recycled sequence rejects an empty angle list") {
    OutcomeSource src = OutcomeSource::sampled(1);
    CHECK_THROWS_AS(recycled_sequence(gates::ket0("q"), {}, AngleMode::literal, src),
                    ContractError);
}

TEST_CASE("stabilizer roundtrip without error recovers the rotated state") {
    StateVector psi = gates::bloch(0.9, 1.3);
    std::array<double, 3> angles{0.4, 1.1, 2.0};
    auto branches = enumerate_branches([&](OutcomeSource& src) {
        StabilizerOutcome o = stabilizer_roundtrip(psi, angles, std::nullopt, src);
        // carry the syndromes through applied_rotations for the check below
        ProtocolResult r = o.run;
        for (int s : o.syndromes) r.applied_rotations.push_back(s);
        return r;
    });
    CHECK(branches.size() == 1024);
    double psum = 0.0;
    Matrix wprod = Matrix::Identity(2, 2);
    for (double a : {angles[0], angles[1], angles[2], 0.0}) wprod = gates::w(a).matrix() * wprod;
    StateVector want({"q"}, wprod * psi.amplitudes());
    for (const auto& b : branches) {
        psum += b.probability;
        size_t na = b.result.applied_rotations.size();
        CHECK(b.result.applied_rotations[na - 3] == doctest::Approx(1.0));
        CHECK(b.result.applied_rotations[na - 2] == doctest::Approx(1.0));
        CHECK(b.result.applied_rotations[na - 1] == doctest::Approx(1.0));
        REQUIRE(b.result.output.has_value());
        Matrix corr = ledger_correction_1q(b.result.ledger, "q", false);
        StateVector stripped({"q"}, corr.adjoint() * b.result.output->amplitudes());
        CHECK(fidelity_states(stripped.normalized(), want.normalized()) ==
              doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("stabilizer roundtrip: identity rotation on the forced all-triplet branch") {
    StateVector psi = gates::bloch(1.2, 0.5);
    OutcomeSource src = OutcomeSource::forced({0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    StabilizerOutcome o = stabilizer_roundtrip(psi, {0.0, 0.0, 0.0}, std::nullopt, src);
    REQUIRE(o.run.output.has_value());
    Matrix corr = ledger_correction_1q(o.run.ledger, "q", false);
    StateVector stripped({"q"}, corr.adjoint() * o.run.output->amplitudes());
    // W(0)^4 = H^4 = identity
    CHECK(fidelity_states(stripped.normalized(), psi) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("single-qubit Pauli errors flip at least one syndrome") {
    // brute-force table; the expected rows follow the anticommutation of each
    // error with {XZII, ZXXZ, IIZX} on the code block
    auto table = syndrome_table();
    CHECK(table.size() == 12);
    auto anti = [](char a, char b) {
        if (a == 'I' || b == 'I' || a == b) return false;
        return true;
    };
    const char* stabs[3] = {"XZII", "ZXXZ", "IIZX"};
    for (const auto& row : table) {
        char e = row.pauli == PauliKind::x ? 'X' : (row.pauli == PauliKind::y ? 'Y' : 'Z');
        bool any_flip = false;
        for (int si = 0; si < 3; ++si) {
            char sc = stabs[si][row.qubit - 1];
            int want = anti(e, sc) ? -1 : 1;
            CHECK(row.syndromes[si] == want);
            if (want == -1) any_flip = true;
        }
        CHECK(any_flip);
    }
    // degeneracy classes exist (Z1 and X2 share a signature)
    std::array<int, 3> z1{}, x2{};
    for (const auto& row : table) {
        if (row.pauli == PauliKind::z && row.qubit == 1) z1 = row.syndromes;
        if (row.pauli == PauliKind::x && row.qubit == 2) x2 = row.syndromes;
    }
    CHECK(z1 == x2);
}

TEST_CASE("stabilizer roundtrip rejects a bad error index") {
    OutcomeSource src = OutcomeSource::sampled(3);
    CHECK_THROWS_AS(stabilizer_roundtrip(gates::ket0("q"), {0.1, 0.2, 0.3},
                                         std::make_pair(PauliKind::x, 5), src),
                    ContractError);
}

TEST_CASE("quantum bus teleports with recorded byproducts and no leakage") {
    std::uint64_t seed = 55;
    for (int trial = 0; trial < 20; ++trial) {
        StateVector psi = rand_qubit(seed);
        auto branches =
            enumerate_branches([&](OutcomeSource& src) { return quantum_bus(psi, src); });
        double psum = 0.0;
        for (const auto& b : branches) {
            psum += b.probability;
            if (b.result.flagged) {
                // heralded leakage-detection event: the output qubit really is
                // outside the code space
                CHECK(b.result.output_leakage[0] > 0.99);
                continue;
            }
            CHECK(b.result.output_leakage[0] < 1e-12);
            REQUIRE(b.result.output.has_value());
            Matrix corr = ledger_correction_1q(b.result.ledger, "q", false);
            StateVector want({"q"}, corr * psi.amplitudes());
            CHECK(fidelity_states(*b.result.output, want.normalized()) ==
                  doctest::Approx(1.0).epsilon(1e-10));
        }
        CHECK(psum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("quantum bus on parity-basis inputs") {
    // X eigenstates come through as |+> or |-> according to the recorded
    // Z byproduct; the X byproduct acts trivially on them
    auto branches = enumerate_branches(
        [&](OutcomeSource& src) { return quantum_bus(gates::ket_plus("q"), src); });
    for (const auto& b : branches) {
        if (b.result.flagged || !b.result.output) continue;
        StateVector want =
            b.result.ledger.frame("q").z_power ? gates::ket_minus("q") : gates::ket_plus("q");
        CHECK(fidelity_states(*b.result.output, want) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("hadamard sequence: every completed branch strips to H with zero leakage") {
    StateVector psi = gates::bloch(0.8, 0.2);
    auto branches =
        enumerate_branches([&](OutcomeSource& src) { return hadamard_sequence(psi, src); });
    StateVector want({"q"}, gates::h().matrix() * psi.amplitudes());
    double psum = 0.0;
    int completed = 0;
    for (const auto& b : branches) {
        psum += b.probability;
        if (b.result.flagged) {
            CHECK(b.result.output_leakage[0] > 0.99);
            continue;
        }
        ++completed;
        CHECK(b.result.output_leakage[0] < 1e-12);
        REQUIRE(b.result.output.has_value());
        Matrix corr = ledger_correction_1q(b.result.ledger, "q", false);
        StateVector stripped({"q"}, corr.adjoint() * b.result.output->amplitudes());
        CHECK(fidelity_states(stripped.normalized(), want.normalized()) ==
              doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(completed >= 4);

    // spec examples: |0> -> |+>, |+> -> |0>
    for (auto [in, out] : std::vector<std::pair<StateVector, StateVector>>{
             {gates::ket0("q"), gates::ket_plus("q")},
             {gates::ket_plus("q"), gates::ket0("q")}}) {
        auto bs = enumerate_branches([&](OutcomeSource& src) { return hadamard_sequence(in, src); });
        for (const auto& b : bs) {
            if (b.result.flagged || !b.result.output) continue;
            Matrix corr = ledger_correction_1q(b.result.ledger, "q", false);
            StateVector stripped({"q"}, corr.adjoint() * b.result.output->amplitudes());
            CHECK(fidelity_states(stripped.normalized(), out) ==
                  doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("generalized phase sequence never leaks the data qubit") {
    std::uint64_t seed = 808;
    for (int trial = 0; trial < 50; ++trial) {
        std::array<double, 4> phases{uniform_u01(seed) * 2 * M_PI, uniform_u01(seed) * 2 * M_PI,
                                     uniform_u01(seed) * 2 * M_PI, uniform_u01(seed) * 2 * M_PI};
        StateVector psi = rand_qubit(seed);
        auto branches = enumerate_branches(
            [&](OutcomeSource& src) { return hadamard_sequence_phases(psi, phases, src); });
        for (const auto& b : branches) {
            if (b.result.flagged) continue; // heralded detection events
            CHECK(b.result.output_leakage[0] < 1e-12);
        }
    }
}

TEST_CASE("two-qubit sequence: branch maps, byproducts and leakage") {
    StateVector p1v = gates::bloch(0.8, 0.2), p2v = gates::bloch(1.7, 2.2);
    auto branches = enumerate_branches(
        [&](OutcomeSource& src) { return two_qubit_sequence(p1v, p2v, src); });
    Matrix hh = tensor({gates::h("a"), gates::h("b")}).matrix();
    Matrix target = hh * gates::cz().matrix() * hh;
    StateVector in = tensor({StateVector({"a"}, p1v.amplitudes()),
                             StateVector({"b"}, p2v.amplitudes())});
    Vector want = target * in.amplitudes();
    StateVector wv({"a", "b"}, want);

    double psum = 0.0;
    int completed = 0;
    for (const auto& b : branches) {
        psum += b.probability;
        if (b.result.flagged) continue;
        ++completed;
        CHECK(std::max(b.result.output_leakage[0], b.result.output_leakage[1]) < 1e-12);
        REQUIRE(b.result.output.has_value());
        Matrix c1 = ledger_correction_1q(b.result.ledger, "q1", false);
        Matrix c2 = ledger_correction_1q(b.result.ledger, "q2", false);
        Matrix corr(4, 4);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) corr.block(2 * i, 2 * j, 2, 2) = c1(i, j) * c2;
        StateVector stripped({"a", "b"}, corr.adjoint() * b.result.output->amplitudes());
        CHECK(fidelity_states(stripped.normalized(), wv.normalized()) ==
              doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(completed >= 16);
}

TEST_CASE("two-qubit sequence over random input pairs via branch maps") {
    Matrix hh = tensor({gates::h("a"), gates::h("b")}).matrix();
    Matrix target = hh * gates::cz().matrix() * hh;
    std::uint64_t seed = 11;
    StateVector ref1 = rand_qubit(seed), ref2 = rand_qubit(seed);
    auto branches = enumerate_branches(
        [&](OutcomeSource& src) { return two_qubit_sequence(ref1, ref2, src); });
    int tested = 0;
    for (const auto& b : branches) {
        if (b.result.flagged) continue;
        Matrix k = branch_kraus(
            [&](const StateVector& in, OutcomeSource& src) {
                auto f1 = extract_factor(in, {"q1"});
                auto f2 = extract_factor(in, {"q2"});
                return two_qubit_sequence(*f1, *f2, src);
            },
            2, b.outcomes, {"q1", "q4"});
        if (k.norm() < 1e-9) continue;
        Matrix kn = k * (2.0 / k.norm());
        Matrix c1 = ledger_correction_1q(b.result.ledger, "q1", false);
        Matrix c2 = ledger_correction_1q(b.result.ledger, "q2", false);
        Matrix corr(4, 4);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) corr.block(2 * i, 2 * j, 2, 2) = c1(i, j) * c2;
        PhaseFit f = equal_up_to_global_phase(corr.adjoint() * kn, target, 1e-10);
        CHECK(f.pass);
        if (++tested >= 8) break; // the map test covers all inputs at once
    }
    CHECK(tested >= 4);
}

TEST_CASE("trivial two-qubit inputs") {
    // |++> passes through the transformed entangler unchanged
    auto branches = enumerate_branches([&](OutcomeSource& src) {
        return two_qubit_sequence(gates::ket_plus("q"), gates::ket_plus("q"), src);
    });
    StateVector pp = tensor({gates::ket_plus("a"), gates::ket_plus("b")});
    for (const auto& b : branches) {
        if (b.result.flagged || !b.result.output) continue;
        Matrix c1 = ledger_correction_1q(b.result.ledger, "q1", false);
        Matrix c2 = ledger_correction_1q(b.result.ledger, "q2", false);
        Matrix corr(4, 4);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) corr.block(2 * i, 2 * j, 2, 2) = c1(i, j) * c2;
        StateVector stripped({"a", "b"}, corr.adjoint() * b.result.output->amplitudes());
        CHECK(fidelity_states(stripped.normalized(), pp) == doctest::Approx(1.0).epsilon(1e-10));
    }
}
