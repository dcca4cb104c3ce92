// Strict key=value run configuration for the command-line front end. Unknown
// keys are rejected and every energy requires an explicit unit tag
// (rad_per_s, or hz which is multiplied by 2*pi on ingestion).

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stq/protocols.hpp"

namespace stq::cli {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class BranchMode { enumerate_all, sample, forced };

struct RunConfig {
    std::string protocol; // p1_single p1_two p1_prepare p1_recycle p1_stabilizer
                          // p2_bus p2_single p2_two
    std::string level = "default"; // effective | full | default
    BranchMode branches = BranchMode::enumerate_all;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<int> forced_outcomes;

    double theta = M_PI / 2.0;
    double phi_delta = 0.0;
    std::vector<double> angles;
    int n = 0;
    int n1 = 1;
    int n2 = 1;
    double mu_delta = 1.0e8;   // rad/s after ingestion
    double j_exchange = 1.0e9; // rad/s after ingestion
    double latency = 0.0;
    std::optional<std::pair<PauliKind, int>> error;

    void validate() const;
};

/// Parses the documented key=value format; throws ConfigError naming the
/// offending key or missing unit tag.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

} // namespace stq::cli
