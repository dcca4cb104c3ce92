#include "stq/measure.hpp"

#include <cmath>
#include <numeric>

namespace stq {

void MeasurementSpec::validate(int n_dots) const {
    auto [a, b] = dot_pair;
    if (a == b) throw ContractError("measurement spec: dot indices must be distinct");
    if (a < 1 || b < 1 || a > n_dots || b > n_dots) {
        throw ContractError("measurement spec: dot index out of range");
    }
    if (latency < 0.0) throw ContractError("measurement spec: negative latency");
}

StProjectors st_projectors(const MeasurementSpec& spec, const Labels& dot_space) {
    spec.validate(static_cast<int>(dot_space.size()));
    auto [a, b] = spec.dot_pair;
    const Label& la = dot_space[a - 1];
    const Label& lb = dot_space[b - 1];

    StateVector s = singlet_pair(la, lb);
    Matrix ps2 = s.amplitudes() * s.amplitudes().adjoint();
    Operator p_singlet = embed(Operator({la, lb}, ps2), {la, lb}, dot_space);

    if (spec.outcome_model == OutcomeModel::singlet_vs_all_triplet) {
        Operator p_triplet(dot_space,
                           Matrix::Identity(p_singlet.dim(), p_singlet.dim()) - p_singlet.matrix());
        return StProjectors{std::move(p_triplet), std::move(p_singlet), std::nullopt};
    }

    StateVector t0 = triplet0_pair(la, lb);
    Matrix pt2 = t0.amplitudes() * t0.amplitudes().adjoint();
    Operator p_t0 = embed(Operator({la, lb}, pt2), {la, lb}, dot_space);
    Operator p_rest(dot_space, Matrix::Identity(p_singlet.dim(), p_singlet.dim()) -
                                   p_singlet.matrix() - p_t0.matrix());
    return StProjectors{std::move(p_t0), std::move(p_singlet), std::move(p_rest)};
}

// ---------------------------------------------------------------------------
// OutcomeSource

OutcomeSource::OutcomeSource(Mode m, std::vector<int> outcomes, std::uint64_t seed)
    : mode_(m), forced_(std::move(outcomes)), rng_state_(seed) {}

OutcomeSource OutcomeSource::sampled(std::uint64_t seed) {
    return OutcomeSource(Mode::sampled, {}, seed);
}

OutcomeSource OutcomeSource::forced(std::vector<int> outcomes) {
    return OutcomeSource(Mode::forced, std::move(outcomes), 0);
}

OutcomeSource OutcomeSource::exploring(std::vector<int> prefix) {
    return OutcomeSource(Mode::exploring, std::move(prefix), 0);
}

std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform_u01(std::uint64_t& state) {
    return static_cast<double>(splitmix64_next(state) >> 11) * 0x1.0p-53;
}

int OutcomeSource::pick(std::span<const double> probs) {
    int outcome = -1;
    if ((mode_ == Mode::forced || mode_ == Mode::exploring) && cursor_ < forced_.size()) {
        outcome = forced_[cursor_++];
        if (outcome < 0 || outcome >= static_cast<int>(probs.size())) {
            throw ContractError("forced outcome index out of range");
        }
        if (probs[outcome] < kImpossibleBranchTol) {
            throw BranchImpossibleError("forced outcome has probability < 1e-14");
        }
    } else if (mode_ == Mode::forced) {
        throw ContractError("forced outcome list exhausted");
    } else if (mode_ == Mode::exploring) {
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] >= kImpossibleBranchTol) {
                outcome = static_cast<int>(i);
                break;
            }
        }
        if (outcome < 0) throw std::runtime_error("no viable measurement outcome");
    } else {
        double u = uniform_u01(rng_state_);
        double acc = 0.0;
        outcome = static_cast<int>(probs.size()) - 1;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) {
                outcome = static_cast<int>(i);
                break;
            }
        }
    }
    draws_.push_back(Draw{outcome, std::vector<double>(probs.begin(), probs.end())});
    return outcome;
}

// ---------------------------------------------------------------------------
// measure

std::pair<MeasurementRecord, StateVector>
measure(const StateVector& state, const MeasurementSpec& spec, OutcomeSource& source) {
    if (!state.is_normalized(1e-9)) {
        throw ContractError("measure: state must be normalized");
    }
    StProjectors proj = st_projectors(spec, state.labels());

    std::vector<const Operator*> ops{&proj.triplet, &proj.singlet};
    if (proj.rest) ops.push_back(&*proj.rest);

    std::vector<double> probs;
    std::vector<StateVector> collapsed;
    probs.reserve(ops.size());
    for (const Operator* p : ops) {
        auto [st, pr] = project(state, *p);
        probs.push_back(pr);
        collapsed.push_back(std::move(st));
    }

    int outcome = source.pick(probs);
    MeasurementRecord rec{spec, outcome, probs[outcome], -1};
    if (probs[outcome] < kImpossibleBranchTol) {
        throw BranchImpossibleError("measurement collapsed onto a zero-probability outcome");
    }
    return {rec, collapsed[outcome].normalized()};
}

std::pair<MeasurementRecord, StateVector>
entangling_measurement(const StateVector& state, std::pair<int, int> qubit_pair,
                       OutcomeSource& source, OutcomeModel model) {
    auto [qa, qb] = qubit_pair;
    if (qb != qa + 1) throw ContractError("entangling measurement: qubits must be adjacent");
    // inner dots: rightmost dot of qubit a, leftmost dot of qubit b
    MeasurementSpec spec{{2 * qa, 2 * qa + 1}, model, 0.0};
    return measure(state, spec, source);
}

// ---------------------------------------------------------------------------
// Leakage accounting

double leakage_population(const StateVector& state, Encoding encoding, int qubit) {
    (void)encoding; // both encodings span the pair's m_s = 0 subspace
    const int n = state.n_subsystems();
    if (2 * qubit > n) throw ContractError("leakage_population: qubit index out of range");
    const int d1 = 2 * qubit - 1, d2 = 2 * qubit; // 1-based dots
    const Vector& amp = state.amplitudes();
    double leak = 0.0;
    for (Eigen::Index i = 0; i < amp.size(); ++i) {
        int b1 = static_cast<int>((i >> (n - d1)) & 1);
        int b2 = static_cast<int>((i >> (n - d2)) & 1);
        if (b1 == b2) leak += std::norm(amp(i));
    }
    return leak;
}

std::vector<double> ms_sector_weights(const StateVector& state) {
    const int n = state.n_subsystems();
    std::vector<double> weights(n + 1, 0.0); // sector index = number of down spins
    const Vector& amp = state.amplitudes();
    for (Eigen::Index i = 0; i < amp.size(); ++i) {
        int downs = 0;
        for (int b = 0; b < n; ++b) downs += static_cast<int>((i >> b) & 1);
        weights[downs] += std::norm(amp(i));
    }
    return weights;
}

} // namespace stq
