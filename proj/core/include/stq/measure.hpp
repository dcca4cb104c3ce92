// Singlet-triplet projective measurements on dot pairs, Born-rule sampling
// with a seeded deterministic generator, forced-outcome branch selection for
// exhaustive enumeration, and leakage-population accounting.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "stq/qcore.hpp"
#include "stq/spinmodels.hpp"

namespace stq {

/// Thrown when a forced outcome has probability below 1e-14.
class BranchImpossibleError : public std::runtime_error {
public:
    explicit BranchImpossibleError(const std::string& what, int step = -1)
        : std::runtime_error(what), step_index(step) {}
    int step_index;
};

inline constexpr double kImpossibleBranchTol = 1e-14;

enum class OutcomeModel {
    singlet_vs_all_triplet, ///< binary: outcome 0 = any triplet, 1 = singlet
    singlet_vs_t0,          ///< ternary: 0 = triplet-0, 1 = singlet, 2 = rest (leakage flag)
};

struct MeasurementSpec {
    std::pair<int, int> dot_pair; ///< 1-based dot indices, distinct
    OutcomeModel outcome_model = OutcomeModel::singlet_vs_all_triplet;
    double latency = 0.0; ///< seconds, >= 0

    int n_outcomes() const { return outcome_model == OutcomeModel::singlet_vs_t0 ? 3 : 2; }
    void validate(int n_dots) const;
};

struct MeasurementRecord {
    MeasurementSpec spec;
    int outcome = 0;          ///< 0 triplet(/t0), 1 singlet, 2 leakage flag
    double probability = 0.0; ///< Born probability of the recorded outcome
    int step_index = -1;
};

/// Projectors for a dot-pair singlet/triplet measurement embedded in `space`.
/// Under singlet_vs_all_triplet, triplet + singlet = identity and rest is
/// absent. Under singlet_vs_t0 the pair does not resolve the identity and the
/// leftover projector (the t+/t- leakage outcome) is surfaced in `rest`.
struct StProjectors {
    Operator triplet;
    Operator singlet;
    std::optional<Operator> rest;
};

StProjectors st_projectors(const MeasurementSpec& spec, const Labels& dot_space);

// ---------------------------------------------------------------------------
// Outcome sources

/// Where measurement outcomes come from: a seeded deterministic sampler, a
/// forced outcome list (for branch enumeration / replay), or a forced prefix
/// followed by first-viable choices (used by the branch explorer).
class OutcomeSource {
public:
    enum class Mode { sampled, forced, exploring };

    static OutcomeSource sampled(std::uint64_t seed);
    static OutcomeSource forced(std::vector<int> outcomes);
    static OutcomeSource exploring(std::vector<int> prefix);

    /// Chooses an outcome given the Born probabilities of all outcomes.
    /// Forced outcomes with probability < 1e-14 raise BranchImpossibleError.
    int pick(std::span<const double> probs);

    Mode mode() const { return mode_; }

    struct Draw {
        int outcome;
        std::vector<double> probs;
    };
    const std::vector<Draw>& draws() const { return draws_; }

private:
    OutcomeSource(Mode m, std::vector<int> outcomes, std::uint64_t seed);

    Mode mode_;
    std::vector<int> forced_;
    std::size_t cursor_ = 0;
    std::uint64_t rng_state_ = 0;
    std::vector<Draw> draws_;
};

/// splitmix64 step; the project-wide deterministic generator.
std::uint64_t splitmix64_next(std::uint64_t& state);
/// Uniform double in [0,1) from the generator.
double uniform_u01(std::uint64_t& state);

// ---------------------------------------------------------------------------
// Measurement operations

/// Collapses `state` per the Born rule for the dot-pair measurement `spec`.
/// The returned state is renormalized.
std::pair<MeasurementRecord, StateVector>
measure(const StateVector& state, const MeasurementSpec& spec, OutcomeSource& source);

/// Inter-qubit entangling measurement: the singlet-triplet measurement of the
/// inner dot pair (rightmost dot of qubit a, leftmost dot of qubit b) of two
/// adjacent encoded qubits, on a full-spin-space state.
std::pair<MeasurementRecord, StateVector>
entangling_measurement(const StateVector& state, std::pair<int, int> qubit_pair,
                       OutcomeSource& source,
                       OutcomeModel model = OutcomeModel::singlet_vs_all_triplet);

/// Probability weight outside the encoded 2-dim subspace of `qubit`'s dot
/// pair (the pair states with aligned spins; for either encoding the encoded
/// subspace is the pair's m_s = 0 span).
double leakage_population(const StateVector& state, Encoding encoding, int qubit);

/// Expectation of the total spin projection m_s (in units of 1) of a
/// full-spin-space state, plus the set of occupied m_s sectors. Measurements
/// in the singlet-triplet basis never move weight between m_s sectors.
std::vector<double> ms_sector_weights(const StateVector& state);

} // namespace stq
