#include "stq/protocols.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

namespace stq {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double wrap_positive(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w <= 0.0) w += kTwoPi;
    return w; // in (0, 2pi]
}

Label q(int i) { return "q" + std::to_string(i); }

/// X-basis readout of one effective-level qubit; outcome 0 = |+> (triplet),
/// 1 = |-> (singlet).
int measure_qubit_x(StateVector& state, const Label& ql, OutcomeSource& source,
                    std::vector<MeasurementRecord>& records, int dot_hint) {
    const Labels& space = state.labels();
    StateVector plus = gates::ket_plus(ql), minus = gates::ket_minus(ql);
    Matrix pp = plus.amplitudes() * plus.amplitudes().adjoint();
    Matrix pm = minus.amplitudes() * minus.amplitudes().adjoint();
    auto [st0, p0] = project(state, embed(Operator({ql}, pp), {ql}, space));
    auto [st1, p1] = project(state, embed(Operator({ql}, pm), {ql}, space));
    std::vector<double> probs{p0, p1};
    int s = source.pick(probs);
    records.push_back(MeasurementRecord{
        MeasurementSpec{{2 * dot_hint - 1, 2 * dot_hint}, OutcomeModel::singlet_vs_all_triplet, 0.0},
        s, probs[s], static_cast<int>(records.size())});
    if (probs[s] < kImpossibleBranchTol) throw BranchImpossibleError("zero-probability outcome");
    state = (s == 0 ? st0 : st1).normalized();
    return s;
}

/// Two-qubit exchange window of the gradient model embedded in `space`:
/// locals (mu_delta + btilde) on both qubits plus the (j/4)(ZZ-I) coupling.
void gradient_window(StateVector& state, const Label& qa, const Label& qb, double mu_delta,
                     double jj, double tau) {
    const Labels& space = state.labels();
    GradientModelParams p = GradientModelParams::symmetric(mu_delta, jj);
    double local = mu_delta + btilde(p);
    Eigen::Index d = state.dim();
    Matrix h = Matrix::Zero(d, d);
    h += local * embed(gates::z(qa), {qa}, space).matrix();
    h += local * embed(gates::z(qb), {qb}, space).matrix();
    Matrix zz = embed(gates::z(qa), {qa}, space).matrix() *
                embed(gates::z(qb), {qb}, space).matrix();
    h += 0.25 * jj * (zz - Matrix::Identity(d, d));
    Operator u = evolve(Operator(space, std::move(h)), tau);
    state = u * state;
}

/// Byproduct frame of a W-rotation chain; transmutes through each H inside W.
struct WFrame {
    int x = 0;
    int z = 0;
    double phi = 0.0;

    /// scheduled angle chi delivered as W(delta); returns delta.
    double step(double chi, int outcome, int prep_sign) {
        double delta = (x ? -chi : chi) + phi;
        int x_old = x, z_old = z;
        x = outcome ^ z_old;
        z = prep_sign ^ x_old;
        phi = ((outcome ^ z_old) ? -chi : chi);
        return delta;
    }

    /// scheduled angle that delivers W(theta) given the current frame.
    double adjusted_angle(double theta) const {
        return wrap_positive(x ? -(theta - phi) : (theta - phi));
    }
};

void store_frame(CorrectionLedger& ledger, const Label& out_label, const WFrame& f) {
    ledger.frames[out_label] = CorrectionLedger::Frame{f.x, f.z};
    ledger.theta_pending = f.phi;
}

} // namespace

double ProtocolResult::probability() const {
    double p = 1.0;
    for (const auto& r : records) p *= r.probability;
    return p;
}

// ---------------------------------------------------------------------------
// Branch enumeration

std::vector<Branch> enumerate_branches(const ProtocolRunner& runner) {
    std::vector<Branch> out;
    std::vector<std::vector<int>> stack{{}};
    while (!stack.empty()) {
        std::vector<int> prefix = std::move(stack.back());
        stack.pop_back();
        OutcomeSource src = OutcomeSource::exploring(prefix);
        ProtocolResult res = runner(src);
        const auto& draws = src.draws();
        if (draws.size() == prefix.size()) {
            Branch b;
            b.outcomes = prefix;
            b.probability = 1.0;
            for (const auto& d : draws) b.probability *= d.probs[d.outcome];
            b.result = std::move(res);
            out.push_back(std::move(b));
            continue;
        }
        const auto& d = draws[prefix.size()];
        for (int o = static_cast<int>(d.probs.size()) - 1; o >= 0; --o) {
            if (d.probs[o] >= kImpossibleBranchTol) {
                std::vector<int> next = prefix;
                next.push_back(o);
                stack.push_back(std::move(next));
            }
        }
    }
    std::sort(out.begin(), out.end(),
              [](const Branch& a, const Branch& b) { return a.outcomes < b.outcomes; });
    return out;
}

// ---------------------------------------------------------------------------
// Graphs

GraphSpec GraphSpec::chain(int n) {
    GraphSpec g;
    g.geometry = Geometry::linear_chain;
    g.n_vertices = n;
    for (int i = 1; i < n; ++i) g.edges.push_back({i, i + 1});
    return g;
}

GraphSpec GraphSpec::square() {
    GraphSpec g;
    g.geometry = Geometry::square_2x2;
    g.n_vertices = 4;
    g.edges = {{1, 2}, {2, 4}, {3, 4}, {1, 3}};
    return g;
}

void GraphSpec::validate() const {
    if (n_vertices < 1 || n_vertices > 5) throw ContractError("graph: 1..5 vertices supported");
    std::vector<std::pair<int, int>> norm;
    for (auto [a, b] : edges) {
        if (a == b) throw ContractError("graph: self loop");
        if (a < 1 || b < 1 || a > n_vertices || b > n_vertices) {
            throw ContractError("graph: vertex out of range");
        }
        norm.push_back({std::min(a, b), std::max(a, b)});
    }
    std::sort(norm.begin(), norm.end());
    if (std::adjacent_find(norm.begin(), norm.end()) != norm.end()) {
        throw ContractError("graph: duplicate edge");
    }
    if (geometry == Geometry::linear_chain) {
        if (static_cast<int>(edges.size()) != n_vertices - 1) {
            throw ContractError("graph: chain must have n-1 edges");
        }
    } else if (n_vertices != 4 || edges.size() != 4) {
        throw ContractError("graph: 2x2 square must have 4 vertices and 4 edges");
    }
    for (const auto& [v, st] : input_assignments) {
        if (v < 1 || v > n_vertices) throw ContractError("graph: input vertex out of range");
        if (st.dim() != 2) throw ContractError("graph: inputs must be single qubits");
    }
}

StateVector build_cluster_state(const GraphSpec& g) {
    g.validate();
    std::vector<StateVector> factors;
    for (int v = 1; v <= g.n_vertices; ++v) {
        auto it = g.input_assignments.find(v);
        if (it == g.input_assignments.end()) {
            factors.push_back(gates::ket_plus(q(v)));
        } else {
            factors.push_back(StateVector({q(v)}, it->second.amplitudes()));
        }
    }
    StateVector state = tensor(std::span<const StateVector>(factors));
    for (auto [a, b] : g.edges) {
        state = embed(gates::cz(q(a), q(b)), {q(a), q(b)}, state.labels()) * state;
    }
    return state;
}

Operator cluster_stabilizer(const GraphSpec& g, int vertex) {
    g.validate();
    Labels space = qubit_labels(g.n_vertices);
    Operator k = embed(gates::x(q(vertex)), {q(vertex)}, space);
    for (auto [a, b] : g.edges) {
        if (a == vertex) k = k * embed(gates::z(q(b)), {q(b)}, space);
        if (b == vertex) k = k * embed(gates::z(q(a)), {q(a)}, space);
    }
    return k;
}

// ---------------------------------------------------------------------------
// teleport_rotation

ProtocolResult teleport_rotation(const StateVector& psi, double theta,
                                 const GradientProtocolParams& params, OutcomeSource& source) {
    if (!(theta > 0.0) || theta > kTwoPi) {
        throw ScheduleError("teleport_rotation: theta must lie in (0, 2pi]; "
                            "theta = 0 makes tau = 0 and the exchange unbounded");
    }
    double tau = theta / (2.0 * params.mu_delta);
    double jj = (2.0 * params.n + 1.0) * M_PI / tau;

    StateVector state = tensor({StateVector({"q1"}, psi.amplitudes()), gates::ket_plus("q2")});
    gradient_window(state, "q1", "q2", params.mu_delta, jj, tau);

    ProtocolResult res;
    int s = measure_qubit_x(state, "q1", source, res.records, 1);

    WFrame f;
    double delta = f.step(theta, s, 0);
    res.applied_rotations = {delta};
    store_frame(res.ledger, "q", f);
    res.ledger.outcome_history.push_back(s);
    res.raw_state = state;
    auto factor = extract_factor(state, {"q2"});
    if (factor) res.output = StateVector({"q"}, factor->amplitudes());
    return res;
}

std::vector<double> gradient_dot_fields(int n_qubits, double mu_delta) {
    // Alternating gradient orientation: (2d, 0, -2d, 0, 2d, 0, ...), so every
    // adjacent inner dot pair is split by 2d.
    std::vector<double> b(2 * n_qubits, 0.0);
    for (int qi = 0; qi < n_qubits; ++qi) {
        double sign = (qi % 2 == 0) ? 1.0 : -1.0;
        b[2 * qi] = sign * 2.0 * mu_delta;
    }
    return b;
}

ProtocolResult teleport_rotation_full(const StateVector& psi, double theta,
                                      const GradientProtocolParams& params,
                                      OutcomeSource& source) {
    if (!(theta > 0.0) || theta > kTwoPi) {
        throw ScheduleError("teleport_rotation_full: theta must lie in (0, 2pi]");
    }
    double tau = theta / (2.0 * params.mu_delta);
    double jj = (2.0 * params.n + 1.0) * M_PI / tau;

    Matrix v = qubit_subspace_embedding(Encoding::gradient_x_basis, 2);
    StateVector qubit_in =
        tensor({StateVector({"q1"}, psi.amplitudes()), gates::ket_plus("q2")});
    StateVector state(dot_labels(4), v * qubit_in.amplitudes());

    FullSpinModel m;
    m.n_dots = 4;
    m.zeeman = gradient_dot_fields(2, params.mu_delta);
    m.exchange[{2, 3}] = jj;
    state = evolve(full_spin_hamiltonian(m), tau) * state;

    ProtocolResult res;
    MeasurementSpec spec{{1, 2}, OutcomeModel::singlet_vs_all_triplet, 0.0};
    auto [rec, st] = measure(state, spec, source);
    res.records.push_back(rec);
    res.ledger.outcome_history.push_back(rec.outcome);
    res.raw_state = st;
    res.output_leakage = {leakage_population(st, Encoding::gradient_x_basis, 1),
                          leakage_population(st, Encoding::gradient_x_basis, 2)};
    WFrame f;
    f.step(theta, rec.outcome, 0);
    store_frame(res.ledger, "q", f);
    return res;
}

// ---------------------------------------------------------------------------
// prepare_state

ProtocolResult prepare_state(double theta, double phi_delta, int n, OutcomeSource& source,
                             double mu_delta) {
    if (n < 0) throw ContractError("prepare_state: n must be >= 0");
    double angle = wrap_positive(theta - phi_delta); // 2 mu_delta tau
    double tau = angle / (2.0 * mu_delta);
    double jj = (2.0 * n + 1.0) * M_PI / tau;

    StateVector state = tensor({gates::ket_plus("q1"), gates::ket_plus("q2")});
    // shared pre-protocol precession phase
    if (phi_delta != 0.0) {
        state = embed(gates::p(phi_delta, "q1"), {"q1"}, state.labels()) * state;
        state = embed(gates::p(phi_delta, "q2"), {"q2"}, state.labels()) * state;
    }
    gradient_window(state, "q1", "q2", mu_delta, jj, tau);

    ProtocolResult res;
    int s = measure_qubit_x(state, "q1", source, res.records, 1);
    res.ledger.outcome_history.push_back(s);
    res.ledger.frames["q"] = CorrectionLedger::Frame{s, 0};
    res.ledger.theta_pending = s ? -2.0 * theta : 0.0;
    res.raw_state = state;
    auto factor = extract_factor(state, {"q2"});
    if (factor) res.output = StateVector({"q"}, factor->amplitudes());
    return res;
}

StateVector prepare_state_closed_form(double theta, int s) {
    double half = 0.5 * (M_PI * s + theta);
    Vector v(2);
    v << std::cos(half), cdouble(0, -1) * std::exp(cdouble(0, theta)) * std::sin(half);
    StateVector st({"q"}, v);
    return st.normalized();
}

// ---------------------------------------------------------------------------
// square_gate
//
// Corners: q1 = top-left (+), q2 = top-right (psi1), q3 = bottom-left (psi2),
// q4 = bottom-right (+). The three path edges (BR-TR, TR-TL, TL-BL) run at
// j = 2(2 n1 - 1) mu_delta; the closing edge (BL-BR) is driven through full
// periods (j4 tau = 0 mod 4pi) so its entangling phase vanishes. Each driven
// edge contributes the dressed local term -j/4 to both endpoints; the bare
// gradient precession is echoed out of the window frame.

ProtocolResult square_gate(const StateVector& psi1, const StateVector& psi2, int n1, int n2,
                           OutcomeSource& source, double mu_delta) {
    if (n1 == 0 || n2 == 0) throw ScheduleError("square_gate: n1, n2 must be nonzero");
    double jj = 2.0 * (2.0 * n1 - 1.0) * mu_delta;
    double tau = (2.0 * n2 - 1.0) * M_PI / (2.0 * mu_delta);
    if (jj <= 0.0 || tau <= 0.0) throw ScheduleError("square_gate: degenerate schedule");
    double j_close = 4.0 * M_PI / tau; // full-period drive on the closing edge

    std::vector<StateVector> factors{gates::ket_plus("q1"),
                                     StateVector({"q2"}, psi1.amplitudes()),
                                     StateVector({"q3"}, psi2.amplitudes()),
                                     gates::ket_plus("q4")};
    StateVector state = tensor(std::span<const StateVector>(factors));
    const Labels space = state.labels();

    struct EdgeSpec {
        const char *a, *b;
        double j;
    };
    const EdgeSpec edges[] = {{"q2", "q4", jj}, {"q1", "q2", jj}, {"q1", "q3", jj},
                              {"q3", "q4", j_close}};
    Eigen::Index d = state.dim();
    Matrix h = Matrix::Zero(d, d);
    for (const auto& e : edges) {
        Matrix za = embed(gates::z(e.a), {e.a}, space).matrix();
        Matrix zb = embed(gates::z(e.b), {e.b}, space).matrix();
        h += 0.25 * e.j * (za * zb - Matrix::Identity(d, d));
        h += -0.25 * e.j * (za + zb); // dressed local shift per driven edge
    }
    state = evolve(Operator(space, std::move(h)), tau) * state;

    ProtocolResult res;
    int s1 = measure_qubit_x(state, "q2", source, res.records, 2);
    int s2 = measure_qubit_x(state, "q3", source, res.records, 3);
    res.ledger.outcome_history = {s1, s2};
    // Byproducts: X^(s1+s2) on the first logical wire (q4), X^(s2) on the
    // second (q1).
    res.ledger.frames["q4"] = CorrectionLedger::Frame{(s1 + s2) % 2, 0};
    res.ledger.frames["q1"] = CorrectionLedger::Frame{s2 % 2, 0};
    res.raw_state = state;
    auto factor = extract_factor(state, {"q4", "q1"});
    if (factor) res.output = *factor;
    return res;
}

// ---------------------------------------------------------------------------
// recycled_sequence

ProtocolResult recycled_sequence(const StateVector& psi, const std::vector<double>& angles,
                                 AngleMode mode, OutcomeSource& source, double mu_delta) {
    if (angles.empty()) throw ContractError("recycled_sequence: empty angle list");

    ProtocolResult res;
    // Preparation-history sign of the ancilla (uniform prior branch).
    std::vector<double> half{0.5, 0.5};
    int s_prep = source.pick(half);
    res.records.push_back(MeasurementRecord{
        MeasurementSpec{{3, 4}, OutcomeModel::singlet_vs_all_triplet, 0.0}, s_prep, 0.5, 0});
    res.ledger.outcome_history.push_back(s_prep);

    StateVector anc = s_prep ? gates::ket_minus("q2") : gates::ket_plus("q2");
    StateVector state = tensor({StateVector({"q1"}, psi.amplitudes()), anc});

    WFrame f;
    int prev_outcome_of_target = s_prep;

    for (size_t k = 0; k < angles.size(); ++k) {
        Label info = (k % 2 == 0) ? "q1" : "q2";
        Label target = (k % 2 == 0) ? "q2" : "q1";
        double chi = (mode == AngleMode::adjusted) ? f.adjusted_angle(angles[k])
                                                   : wrap_positive(angles[k]);
        double tau = chi / (2.0 * mu_delta);
        double jj = M_PI / tau; // n = 0 windows
        gradient_window(state, info, target, mu_delta, jj, tau);
        int s = measure_qubit_x(state, info, source, res.records, (info == "q1") ? 1 : 2);
        res.ledger.outcome_history.push_back(s);
        double delta = f.step(chi, s, prev_outcome_of_target);
        res.applied_rotations.push_back(wrap_positive(delta));
        prev_outcome_of_target = s; // the just-measured qubit is re-entangled next round
    }

    Label out_label = (angles.size() % 2 == 0) ? "q1" : "q2";
    store_frame(res.ledger, out_label, f);
    res.raw_state = state;
    auto factor = extract_factor(state, {out_label});
    if (factor) res.output = StateVector({"q"}, factor->amplitudes());
    return res;
}

Matrix recycled_two_angle_target(double theta1, double theta2, int s1, int s2, int s3) {
    Matrix u = gates::w(theta1).matrix();
    double inner = (s2 ? -1.0 : 1.0) * (theta2 + theta1);
    u = gates::w(inner).matrix() * u;
    u = gates::p(((s1 + s3) % 2 ? -1.0 : 1.0) * theta2).matrix() * u;
    if ((s1 + s3) % 2) u = gates::x().matrix() * u;
    return u;
}

// ---------------------------------------------------------------------------
// stabilizer_roundtrip

namespace {

Operator pauli_op(PauliKind p, const Label& l) {
    switch (p) {
    case PauliKind::x: return gates::x(l);
    case PauliKind::y: return gates::y(l);
    default: return gates::z(l);
    }
}

void apply_cz_window(StateVector& state, const Label& qa, const Label& qb, double mu_delta) {
    CzSchedule cs = cz_schedule(1, 1, mu_delta);
    gradient_window(state, qa, qb, mu_delta, cs.j23, cs.tau);
}

void reset_to_plus(StateVector& state, const Label& ql) {
    const Labels& space = state.labels();
    StateVector minus = gates::ket_minus(ql);
    Matrix pm = minus.amplitudes() * minus.amplitudes().adjoint();
    auto [stm, p_minus] = project(state, embed(Operator({ql}, pm), {ql}, space));
    if (p_minus > 1.0 - 1e-9) {
        state = embed(gates::z(ql), {ql}, space) * state;
    } else if (p_minus > 1e-9) {
        throw ScheduleError("reset of a qubit that is not in a |+/-> product state");
    }
}

} // namespace

StabilizerOutcome stabilizer_roundtrip(const StateVector& psi, std::array<double, 3> angles,
                                       std::optional<std::pair<PauliKind, int>> error,
                                       OutcomeSource& source, double mu_delta) {
    if (error && (error->second < 1 || error->second > 4)) {
        throw ContractError("stabilizer_roundtrip: error qubit index must be 1..4");
    }

    StabilizerOutcome out;
    ProtocolResult& res = out.run;

    std::vector<StateVector> factors{StateVector({"q1"}, psi.amplitudes())};
    for (int i = 2; i <= 5; ++i) factors.push_back(gates::ket_plus(q(i)));
    StateVector state = tensor(std::span<const StateVector>(factors));
    const Labels space = state.labels();

    // Rotation leg: four adjusted W steps down the chain, then two W(0)
    // transfers back to the middle qubit.
    WFrame f;
    std::array<double, 4> leg{angles[0], angles[1], angles[2], 0.0};
    int carrier = 1;
    for (int k = 0; k < 4; ++k) {
        double chi = f.adjusted_angle(leg[k]);
        double tau = chi / (2.0 * mu_delta);
        gradient_window(state, q(carrier), q(carrier + 1), mu_delta, M_PI / tau, tau);
        int s = measure_qubit_x(state, q(carrier), source, res.records, carrier);
        res.ledger.outcome_history.push_back(s);
        res.applied_rotations.push_back(wrap_positive(f.step(chi, s, 0)));
        ++carrier;
    }
    for (int k = 0; k < 2; ++k) {
        reset_to_plus(state, q(carrier - 1));
        double chi = f.adjusted_angle(0.0);
        double tau = chi / (2.0 * mu_delta);
        gradient_window(state, q(carrier), q(carrier - 1), mu_delta, M_PI / tau, tau);
        int s = measure_qubit_x(state, q(carrier), source, res.records, carrier);
        res.ledger.outcome_history.push_back(s);
        res.applied_rotations.push_back(wrap_positive(f.step(chi, s, 0)));
        --carrier;
    }
    // carrier == 3; resolve the accumulated frame (inverse of X^x Z^z P(phi))
    // so the encoded block is the exact graph code of psi~.
    {
        Matrix m = Matrix::Identity(2, 2);
        if (f.x) m = gates::x().matrix() * m;
        if (f.z) m = gates::z().matrix() * m;
        m = m * gates::p(f.phi).matrix();
        Operator inv({q(3)}, m.adjoint());
        state = embed(inv, {q(3)}, space) * state;
    }

    // Reference rotated state.
    {
        Matrix u = Matrix::Identity(2, 2);
        for (int k = 0; k < 4; ++k) u = gates::w(leg[k]).matrix() * u;
        out.rotated_reference = StateVector({"q"}, u * psi.amplitudes());
    }

    // Encode: reset the spent qubits, entangle all adjacent pairs, measure
    // the middle qubit in X.
    for (int i : {1, 2, 4, 5}) reset_to_plus(state, q(i));
    for (int i = 1; i <= 4; ++i) apply_cz_window(state, q(i), q(i + 1), mu_delta);
    int m_enc = measure_qubit_x(state, q(3), source, res.records, 3);
    res.ledger.outcome_history.push_back(m_enc);

    // Optional single-qubit Pauli error on the code block (q1,q2,q4,q5).
    const std::array<int, 4> block{1, 2, 4, 5};
    if (error) {
        Label ql = q(block[error->second - 1]);
        state = embed(pauli_op(error->first, ql), {ql}, space) * state;
    }

    // Stabilizer expectations {X Z I I, Z X X Z, I I Z X} over the block.
    auto block_op = [&](const char* pattern) {
        Operator o = Operator::identity(space);
        for (int i = 0; i < 4; ++i) {
            if (pattern[i] == 'I') continue;
            Label ql = q(block[i]);
            Operator g = pattern[i] == 'X' ? gates::x(ql) : gates::z(ql);
            o = o * embed(g, {ql}, space);
        }
        return o;
    };
    const char* pats[3] = {"XZII", "ZXXZ", "IIZX"};
    for (int i = 0; i < 3; ++i) {
        double e = expectation(state, block_op(pats[i]));
        out.syndromes[i] = e >= 0.0 ? 1 : -1;
    }

    // Decode: X-measure qubits 2, 4, 5; recovered state lands on qubit 1 with
    // byproducts X^(d1) Z^(m + d3).
    int d1 = measure_qubit_x(state, q(2), source, res.records, 2);
    int d2 = measure_qubit_x(state, q(4), source, res.records, 4);
    int d3 = measure_qubit_x(state, q(5), source, res.records, 5);
    res.ledger.outcome_history.insert(res.ledger.outcome_history.end(), {d1, d2, d3});
    res.ledger.frames["q"] = CorrectionLedger::Frame{d1, (m_enc + d3) % 2};
    res.ledger.theta_pending = 0.0;

    res.raw_state = state;
    auto factor = extract_factor(state, {q(1)});
    if (factor) res.output = StateVector({"q"}, factor->amplitudes());
    return out;
}

std::vector<SyndromeRow> syndrome_table() {
    std::vector<SyndromeRow> rows;
    StateVector psi = gates::bloch(0.7, 0.3);
    for (int qi = 1; qi <= 4; ++qi) {
        for (PauliKind p : {PauliKind::x, PauliKind::y, PauliKind::z}) {
            OutcomeSource forced = OutcomeSource::exploring({});
            StabilizerOutcome o =
                stabilizer_roundtrip(psi, {0.3, 0.9, 1.7}, std::make_pair(p, qi), forced);
            rows.push_back(SyndromeRow{p, qi, o.syndromes});
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Protocol 2: quantum bus

namespace {

/// Full-spin intra-qubit phase gate: window of duration (2pi - alpha)/j on
/// the qubit's own dot pair (fields are zero in the gradient-free model).
/// The pair evolution under j (S.S - 1/4) is exp(+i j t) on the singlet and
/// identity on the triplets, so the window is applied in closed form.
void p2_phase(StateVector& state, int qubit, double alpha, double jj, int n_qubits) {
    alpha = std::fmod(alpha, kTwoPi);
    if (alpha < 0.0) alpha += kTwoPi;
    if (alpha == 0.0) return;
    double t_phys = (kTwoPi - alpha) / jj;
    cdouble singlet_phase = std::exp(cdouble(0.0, jj * t_phys));

    Labels space = dot_labels(2 * n_qubits);
    Label da = space[2 * qubit - 2], db = space[2 * qubit - 1];
    StateVector s = singlet_pair(da, db);
    Matrix ps = s.amplitudes() * s.amplitudes().adjoint();
    Matrix u_pair = Matrix::Identity(4, 4) + (singlet_phase - 1.0) * ps;
    state = embed(Operator({da, db}, std::move(u_pair)), {da, db}, space) * state;
}

int p2_measure(StateVector& state, std::pair<int, int> dots, OutcomeModel model,
               OutcomeSource& source, std::vector<MeasurementRecord>& records) {
    MeasurementSpec spec{dots, model, 0.0};
    auto [rec, st] = measure(state, spec, source);
    rec.step_index = static_cast<int>(records.size());
    records.push_back(rec);
    state = std::move(st);
    return rec.outcome;
}

StateVector p2_initial(const std::vector<StateVector>& qubit_states) {
    int n = static_cast<int>(qubit_states.size());
    std::vector<StateVector> factors;
    for (int i = 0; i < n; ++i) {
        factors.push_back(StateVector({q(i + 1)}, qubit_states[i].amplitudes()));
    }
    StateVector qs = tensor(std::span<const StateVector>(factors));
    Matrix v = qubit_subspace_embedding(Encoding::exchange_z_basis, n);
    return StateVector(dot_labels(2 * n), v * qs.amplitudes());
}

} // namespace

ProtocolResult quantum_bus(const StateVector& psi, OutcomeSource& source, double /*j*/) {
    // Qubit 2 starts in the triplet-0 state (the |+> of the x-basis labels).
    StateVector state = p2_initial({psi, gates::ket1("q")});

    ProtocolResult res;
    int r = p2_measure(state, {2, 3}, OutcomeModel::singlet_vs_t0, source, res.records);
    int s = p2_measure(state, {1, 2}, OutcomeModel::singlet_vs_t0, source, res.records);
    res.ledger.outcome_history = {r, s};
    // A t+/t- readout of qubit 1 heralds that the leakage injected by the
    // entangling measurement landed on the output qubit.
    res.flagged = (s == 2);

    // Byproducts in the z-encoded basis: X for a singlet readout of qubit 1,
    // an additional Z when the entangling measurement lands in the aligned
    // (t+/t-) sector.
    int x_pow = (s == 1) ? 1 : 0;
    int z_pow = (r == 2) ? 1 : 0;
    res.ledger.frames["q"] = CorrectionLedger::Frame{x_pow, z_pow};

    res.raw_state = state;
    res.output_leakage = {leakage_population(state, Encoding::exchange_z_basis, 2)};
    if (!res.flagged) {
        auto factor = extract_factor(state, {"d3", "d4"});
        if (factor) {
            Matrix v = qubit_subspace_embedding(Encoding::exchange_z_basis, 1);
            Vector compressed = v.adjoint() * factor->amplitudes();
            double n2 = compressed.norm();
            if (n2 > 1e-9) res.output = StateVector({"q"}, compressed / n2);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Protocol 2: single-qubit sequence

ProtocolResult hadamard_sequence_phases(const StateVector& psi, std::array<double, 4> phases,
                                        OutcomeSource& source, double jj) {
    StateVector state = p2_initial({psi, gates::ket_plus("q")}); // ancilla |+> = |ud>

    ProtocolResult res;
    p2_phase(state, 1, phases[0], jj, 2);
    p2_phase(state, 2, phases[1], jj, 2);
    int r = p2_measure(state, {2, 3}, OutcomeModel::singlet_vs_t0, source, res.records);
    p2_phase(state, 1, phases[2], jj, 2);
    p2_phase(state, 2, phases[3], jj, 2);
    int s = p2_measure(state, {3, 4}, OutcomeModel::singlet_vs_t0, source, res.records);
    res.ledger.outcome_history = {r, s};
    // A t+/t- ancilla readout heralds leakage of the data qubit.
    res.flagged = (s == 2);

    // Y^y correction on the data qubit (Y = i X Z up to a global phase);
    // the entangling measurement contributes only through its aligned-sector
    // (t+/t-) branch.
    int y_pow = 1 ^ (s == 1 ? 1 : 0) ^ (r == 2 ? 1 : 0);
    res.ledger.frames["q"] = CorrectionLedger::Frame{y_pow, y_pow};

    res.raw_state = state;
    res.output_leakage = {leakage_population(state, Encoding::exchange_z_basis, 1)};
    if (!res.flagged) {
        auto factor = extract_factor(state, {"d1", "d2"});
        if (factor) {
            Matrix v = qubit_subspace_embedding(Encoding::exchange_z_basis, 1);
            Vector compressed = v.adjoint() * factor->amplitudes();
            double n2 = compressed.norm();
            if (n2 > 1e-9) res.output = StateVector({"q"}, compressed / n2);
        }
    }
    return res;
}

ProtocolResult hadamard_sequence(const StateVector& psi, OutcomeSource& source, double jj) {
    return hadamard_sequence_phases(psi, {M_PI / 2.0, 1.5 * M_PI, M_PI / 2.0, 0.0}, source, jj);
}

// ---------------------------------------------------------------------------
// Protocol 2: two-qubit sequence
// Wires: q1 = ancilla a1 (|+>), q2 = psi1, q3 = ancilla a2 (|+>), q4 = psi2.
// The first data stream teleports to a1 through the final entangling
// measurement, the second stays in place; the mediating ancilla a2 carries
// the correlations between its two entangling measurements and is read out
// together with the first data wire. The mediator takes a quarter phase
// between its two entangling measurements. Outputs: (a1 wire, psi2 wire).
//
// The entangling measurements here resolve the two-qubit code space exactly:
// outcomes {+parity, -parity, leakage}, realized by the lifted parity
// projectors (I +- X X)/2 together with the code-space complement. Under
// this readout the sequence never moves weight out of the encoded subspace,
// which is what the circuit-level identity requires; the microscopic
// inner-dot-pair realization (as used by the quantum bus) transports net
// spin onto the unmeasured wires and is exposed separately through the
// measurement module.

namespace {

/// Ideal code-space parity measurement between adjacent qubits qa, qa+1:
/// outcome 0 = +parity, 1 = -parity, 2 = leakage (outside the two-qubit
/// code space of the pair).
int p2_parity_measure(StateVector& state, int qa, int n_qubits, OutcomeSource& source,
                      std::vector<MeasurementRecord>& records) {
    Labels space = dot_labels(2 * n_qubits);
    Labels quad{space[2 * qa - 2], space[2 * qa - 1], space[2 * qa], space[2 * qa + 1]};

    Matrix v = qubit_subspace_embedding(Encoding::exchange_z_basis, 2);
    Matrix xx = Matrix::Zero(4, 4);
    xx(0, 3) = xx(3, 0) = xx(1, 2) = xx(2, 1) = 1.0;
    Matrix plus = v * (0.5 * (Matrix::Identity(4, 4) + xx)) * v.adjoint();
    Matrix minus = v * (0.5 * (Matrix::Identity(4, 4) - xx)) * v.adjoint();
    Matrix rest = Matrix::Identity(16, 16) - v * v.adjoint();

    Operator pp = embed(Operator(quad, plus), quad, space);
    Operator pm = embed(Operator(quad, minus), quad, space);
    Operator pr = embed(Operator(quad, rest), quad, space);

    auto [s0, pr0] = project(state, pp);
    auto [s1, pr1] = project(state, pm);
    auto [s2, pr2] = project(state, pr);
    std::vector<double> probs{pr0, pr1, pr2};
    int o = source.pick(probs);
    records.push_back(MeasurementRecord{
        MeasurementSpec{{2 * qa, 2 * qa + 1}, OutcomeModel::singlet_vs_t0, 0.0}, o, probs[o],
        static_cast<int>(records.size())});
    if (probs[o] < kImpossibleBranchTol) throw BranchImpossibleError("zero-probability outcome");
    state = (o == 0 ? s0 : (o == 1 ? s1 : s2)).normalized();
    return o;
}

} // namespace

ProtocolResult two_qubit_sequence(const StateVector& psi1, const StateVector& psi2,
                                  OutcomeSource& source, double jj) {
    StateVector state = p2_initial(
        {gates::ket_plus("q"), psi1, gates::ket_plus("q"), psi2});

    ProtocolResult res;
    const double half = M_PI / 2.0, pi = M_PI;

    p2_phase(state, 1, half, jj, 4); // a1: P(pi/2)
    p2_phase(state, 3, half, jj, 4); // a2: P(pi/2)
    p2_phase(state, 4, pi, jj, 4);   // psi2: Z
    int m34 = p2_parity_measure(state, 3, 4, source, res.records);
    p2_phase(state, 4, pi, jj, 4);   // psi2: Z
    p2_phase(state, 3, half, jj, 4); // a2: junction P(pi/2)
    int m23 = p2_parity_measure(state, 2, 4, source, res.records);
    p2_phase(state, 2, pi, jj, 4);   // psi1: Z
    int m12 = p2_parity_measure(state, 1, 4, source, res.records);
    p2_phase(state, 2, pi, jj, 4);   // psi1: Z (pre-readout)
    int s1 = p2_measure(state, {5, 6}, OutcomeModel::singlet_vs_t0, source, res.records);
    int s2 = p2_measure(state, {3, 4}, OutcomeModel::singlet_vs_t0, source, res.records);
    res.ledger.outcome_history = {m34, m23, m12, s1, s2};
    res.flagged = (m34 == 2) || (m23 == 2) || (m12 == 2) || (s1 == 2) || (s2 == 2);

    // Byproducts on the output wires (logical slot 1 = a1 wire, slot 2 =
    // psi2 wire), from the parity bits p_i = [m_i == -parity] and the
    // readout bits b_i = [s_i == triplet-0]:
    //   X on slot 1: 1 + p1 + p2 + p3 + b1 + b2,  Z on slot 1: 1 + p3,
    //   X on slot 2: 1 + p2   (all mod 2).
    int p1 = m34 == 1, p2 = m23 == 1, p3 = m12 == 1;
    int b1 = s1 == 0, b2 = s2 == 0;
    res.ledger.frames["q1"] = CorrectionLedger::Frame{(1 ^ p1 ^ p2 ^ p3 ^ b1 ^ b2), (1 ^ p3)};
    res.ledger.frames["q2"] = CorrectionLedger::Frame{(1 ^ p2), 0};

    res.raw_state = state;
    res.output_leakage = {leakage_population(state, Encoding::exchange_z_basis, 1),
                          leakage_population(state, Encoding::exchange_z_basis, 4)};
    if (!res.flagged) {
        auto factor = extract_factor(state, {"d1", "d2", "d7", "d8"});
        if (factor) {
            Matrix v = qubit_subspace_embedding(Encoding::exchange_z_basis, 2);
            Vector compressed = v.adjoint() * factor->amplitudes();
            double n2 = compressed.norm();
            if (n2 > 1e-9) res.output = StateVector({"q1", "q2"}, compressed / n2);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Compilers

Schedule compile_teleport_rotation(double theta, const GradientProtocolParams& params) {
    if (!(theta > 0.0) || theta > kTwoPi) {
        throw ScheduleError("compile_teleport_rotation: theta must lie in (0, 2pi]");
    }
    double tau = theta / (2.0 * params.mu_delta);
    double jj = (2.0 * params.n + 1.0) * M_PI / tau;
    double local = params.mu_delta + btilde(GradientModelParams::symmetric(params.mu_delta, jj));

    Schedule s;
    s.tag = "p1_single";
    s.level = SimLevel::effective;
    s.encoding = Encoding::gradient_x_basis;
    s.n_qubits = 2;
    s.n_logical_inputs = 1;
    s.leakage_protected = true;

    ExchangeWindowStep w;
    w.locals = {{"q1", local}, {"q2", local}};
    w.edges = {{"q1", "q2", jj}};
    w.duration = tau;
    s.steps.push_back({w, -1});
    s.steps.push_back({StMeasureStep{MeasurementSpec{{1, 2}, OutcomeModel::singlet_vs_all_triplet, 0.0}}, -1});
    s.steps.push_back({PhaseCorrectionStep{"q2", theta, {0}}, -1});
    s.steps.push_back({PauliCorrectionStep{"q2", 0, {0}, 0, {}}, -1});
    return s;
}

Schedule compile_square_gate(int n1, int n2, double mu_delta) {
    double jj = 2.0 * (2.0 * n1 - 1.0) * mu_delta;
    double tau = (2.0 * n2 - 1.0) * M_PI / (2.0 * mu_delta);
    double j_close = 4.0 * M_PI / tau;

    Schedule s;
    s.tag = "p1_two";
    s.level = SimLevel::effective;
    s.encoding = Encoding::gradient_x_basis;
    s.n_qubits = 4;
    s.n_logical_inputs = 2;
    s.leakage_protected = true;

    ExchangeWindowStep w;
    for (const auto& [a, b, j] : std::initializer_list<std::tuple<const char*, const char*, double>>{
             {"q2", "q4", jj}, {"q1", "q2", jj}, {"q1", "q3", jj}, {"q3", "q4", j_close}}) {
        w.edges.push_back({a, b, j});
        w.locals[a] -= 0.25 * j;
        w.locals[b] -= 0.25 * j;
    }
    w.duration = tau;
    s.steps.push_back({w, -1});
    s.steps.push_back({StMeasureStep{MeasurementSpec{{3, 4}, OutcomeModel::singlet_vs_all_triplet, 0.0}}, 1});
    s.steps.push_back({StMeasureStep{MeasurementSpec{{5, 6}, OutcomeModel::singlet_vs_all_triplet, 0.0}}, 1});
    s.steps.push_back({PauliCorrectionStep{"q4", 0, {0, 1}, 0, {}}, -1});
    s.steps.push_back({PauliCorrectionStep{"q1", 0, {1}, 0, {}}, -1});
    return s;
}

Schedule compile_hadamard_sequence(double jj) {
    Schedule s;
    s.tag = "p2_single";
    s.level = SimLevel::full_spin;
    s.encoding = Encoding::exchange_z_basis;
    s.n_qubits = 2;
    s.n_logical_inputs = 1;
    s.dot_fields.assign(4, 0.0);
    s.leakage_protected = true;

    s.steps.push_back({IntraPhaseStep{"q1", jj, (M_PI / 2.0) / jj}, 1});
    s.steps.push_back({IntraPhaseStep{"q2", jj, (1.5 * M_PI) / jj}, 1});
    s.steps.push_back({StMeasureStep{MeasurementSpec{{2, 3}, OutcomeModel::singlet_vs_t0, 0.0}}, -1});
    s.steps.push_back({IntraPhaseStep{"q1", jj, (M_PI / 2.0) / jj}, -1});
    s.steps.push_back({StMeasureStep{MeasurementSpec{{3, 4}, OutcomeModel::singlet_vs_t0, 0.0}}, -1});
    s.steps.push_back({PauliCorrectionStep{"q1", 1, {1}, 1, {1}}, -1}); // Y^(1+s)
    return s;
}

Schedule compile_two_qubit_sequence(double jj) {
    Schedule s;
    s.tag = "p2_two";
    s.level = SimLevel::full_spin;
    s.encoding = Encoding::exchange_z_basis;
    s.n_qubits = 4;
    s.n_logical_inputs = 2;
    s.dot_fields.assign(8, 0.0);
    s.leakage_protected = true;

    const double t_half = (M_PI / 2.0) / jj, t_pi = M_PI / jj;
    s.steps.push_back({IntraPhaseStep{"q1", jj, t_half}, 1});
    s.steps.push_back({IntraPhaseStep{"q3", jj, t_half}, 1});
    s.steps.push_back({IntraPhaseStep{"q4", jj, t_pi}, 1});
    s.steps.push_back({StMeasureStep{MeasurementSpec{{6, 7}, OutcomeModel::singlet_vs_t0, 0.0}}, -1});
    s.steps.push_back({IntraPhaseStep{"q4", jj, t_pi}, 2});
    s.steps.push_back({IntraPhaseStep{"q3", jj, t_half}, 2});
    s.steps.push_back({StMeasureStep{MeasurementSpec{{4, 5}, OutcomeModel::singlet_vs_t0, 0.0}}, -1});
    s.steps.push_back({IntraPhaseStep{"q2", jj, t_pi}, -1});
    s.steps.push_back({StMeasureStep{MeasurementSpec{{2, 3}, OutcomeModel::singlet_vs_t0, 0.0}}, -1});
    s.steps.push_back({IntraPhaseStep{"q2", jj, t_pi}, -1});
    s.steps.push_back({StMeasureStep{MeasurementSpec{{5, 6}, OutcomeModel::singlet_vs_t0, 0.0}}, -1});
    s.steps.push_back({StMeasureStep{MeasurementSpec{{3, 4}, OutcomeModel::singlet_vs_t0, 0.0}}, -1});
    s.steps.push_back({PauliCorrectionStep{"q1", 1, {0, 1, 2, 3, 4}, 1, {2}}, -1});
    s.steps.push_back({PauliCorrectionStep{"q4", 1, {1}, 0, {}}, -1});
    return s;
}

ProtocolResult run_compiled(const Schedule& schedule, const std::vector<StateVector>& inputs,
                            OutcomeSource& source) {
    std::vector<int> placement;
    if (schedule.tag == "p1_two") placement = {2, 3};
    else if (schedule.tag == "p2_single") placement = {1};
    else if (schedule.tag == "p2_two") placement = {2, 4};
    StateVector init = schedule_initial_state(schedule, inputs, placement);
    RunResult r = run_schedule(schedule, init, source);
    ProtocolResult res;
    res.raw_state = r.state;
    res.ledger = r.ledger;
    res.records = r.records;
    return res;
}

// ---------------------------------------------------------------------------
// Utilities

StateVector permute_subsystems(const StateVector& state, const Labels& new_order) {
    const int n = state.n_subsystems();
    if (static_cast<int>(new_order.size()) != n) {
        throw ContractError("permute_subsystems: label count mismatch");
    }
    std::vector<int> src_pos;
    for (const Label& l : new_order) src_pos.push_back(state.index_of_label(l));

    const Vector& amp = state.amplitudes();
    Vector out = Vector::Zero(amp.size());
    for (Eigen::Index i = 0; i < amp.size(); ++i) {
        Eigen::Index j = 0;
        for (int k = 0; k < n; ++k) {
            int bit = static_cast<int>((i >> (n - 1 - src_pos[k])) & 1);
            j = (j << 1) | bit;
        }
        out(j) = amp(i);
    }
    return StateVector(new_order, std::move(out));
}

std::optional<StateVector> extract_factor(const StateVector& state, const Labels& kept,
                                          double tol) {
    Labels order = kept;
    for (const Label& l : state.labels()) {
        if (std::find(kept.begin(), kept.end(), l) == kept.end()) order.push_back(l);
    }
    StateVector perm = permute_subsystems(state, order);
    const Eigen::Index dk = Eigen::Index{1} << kept.size();
    const Eigen::Index dr = perm.dim() / dk;
    Eigen::Map<const Matrix> reshaped(perm.amplitudes().data(), dr, dk);
    // column-major map: entry (r, k) = amp(k*dr + r); index = kept-bits major,
    // so amp index = k*dr + r with k the kept part. Transpose to (dk x dr).
    Matrix m = reshaped.transpose();
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
    if (svd.singularValues()(0) < 1.0 - tol) return std::nullopt;
    Vector factor = svd.matrixU().col(0);
    // Fix the overall phase so the largest-magnitude amplitude is real
    // positive; callers compare up to global phase anyway.
    Eigen::Index imax;
    factor.cwiseAbs().maxCoeff(&imax);
    cdouble ph = factor(imax) / std::abs(factor(imax));
    factor /= ph;
    return StateVector(kept, std::move(factor));
}

double expectation(const StateVector& state, const Operator& o) {
    return (state.amplitudes().adjoint() * o.matrix() * state.amplitudes())(0, 0).real();
}

Matrix branch_kraus(
    const std::function<ProtocolResult(const StateVector&, OutcomeSource&)>& runner,
    int n_inputs, const std::vector<int>& forced_outcomes, const Labels& output_wires) {
    const Eigen::Index din = Eigen::Index{1} << n_inputs;
    std::vector<std::optional<ProtocolResult>> runs(din);
    Labels in_labels = qubit_labels(n_inputs);
    for (Eigen::Index b = 0; b < din; ++b) {
        OutcomeSource src = OutcomeSource::forced(forced_outcomes);
        std::vector<StateVector> parts;
        for (int k = 0; k < n_inputs; ++k) {
            int bit = static_cast<int>((b >> (n_inputs - 1 - k)) & 1);
            parts.push_back(bit ? gates::ket1(in_labels[k]) : gates::ket0(in_labels[k]));
        }
        try {
            runs[b] = runner(tensor(std::span<const StateVector>(parts)), src);
        } catch (const BranchImpossibleError&) {
            // this branch annihilates the basis input: zero column
        }
    }

    // Reference rest-factor from the run with the largest branch probability.
    Eigen::Index ref = -1;
    double best_p = -1.0;
    for (Eigen::Index i = 0; i < din; ++i) {
        if (runs[i] && runs[i]->probability() > best_p) {
            best_p = runs[i]->probability();
            ref = i;
        }
    }
    if (ref < 0) throw BranchImpossibleError("branch impossible for every basis input");

    const StateVector& ref_state = runs[ref]->raw_state;
    bool full_level = !ref_state.labels().empty() && ref_state.labels()[0][0] == 'd';

    Labels kept;
    if (full_level) {
        for (const Label& w : output_wires) {
            int qi = std::stoi(w.substr(1));
            kept.push_back("d" + std::to_string(2 * qi - 1));
            kept.push_back("d" + std::to_string(2 * qi));
        }
    } else {
        kept = output_wires;
    }

    Labels order = kept;
    for (const Label& l : ref_state.labels()) {
        if (std::find(kept.begin(), kept.end(), l) == kept.end()) order.push_back(l);
    }
    const Eigen::Index dk = Eigen::Index{1} << kept.size();
    auto kept_rest = [&](const StateVector& st) {
        StateVector perm = permute_subsystems(st, order);
        const Eigen::Index dr = perm.dim() / dk;
        Matrix m(dk, dr);
        for (Eigen::Index k = 0; k < dk; ++k)
            for (Eigen::Index r = 0; r < dr; ++r) m(k, r) = perm.amplitude(k * dr + r);
        return m;
    };

    Matrix mref = kept_rest(ref_state);
    // Rest factor: with M = U S V^dag, the product M * V.col(0) contracts the
    // rest index against the dominant rest state.
    Eigen::JacobiSVD<Matrix> svd(mref, Eigen::ComputeThinV);
    Vector rest = svd.matrixV().col(0);

    const Eigen::Index dout = full_level ? (Eigen::Index{1} << output_wires.size()) : dk;
    Matrix kraus(dout, din);
    Matrix v;
    if (full_level) {
        v = qubit_subspace_embedding(Encoding::exchange_z_basis,
                                     static_cast<int>(output_wires.size()));
    }
    for (Eigen::Index b = 0; b < din; ++b) {
        if (!runs[b]) {
            kraus.col(b).setZero();
            continue;
        }
        Vector col = kept_rest(runs[b]->raw_state) * rest;
        col *= std::sqrt(runs[b]->probability());
        if (full_level) col = v.adjoint() * col;
        kraus.col(b) = col;
    }
    return kraus;
}

} // namespace stq
