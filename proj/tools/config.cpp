#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace stq::cli {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

double parse_number(const std::string& key, const std::string& text) {
    try {
        size_t pos = 0;
        double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' has a malformed number: " + text);
    }
}

/// "value unit" with unit in {rad_per_s, hz}; hz values are multiplied by
/// 2*pi on ingestion.
double parse_energy(const std::string& key, const std::string& text) {
    std::vector<std::string> parts = split(text, ' ');
    parts.erase(std::remove(parts.begin(), parts.end(), ""), parts.end());
    if (parts.size() != 2) {
        throw ConfigError("config: energy key '" + key +
                          "' requires an explicit unit tag (rad_per_s or hz)");
    }
    double v = parse_number(key, parts[0]);
    if (parts[1] == "rad_per_s") return v;
    if (parts[1] == "hz") return v * 2.0 * M_PI;
    throw ConfigError("config: key '" + key + "' has unknown unit tag '" + parts[1] + "'");
}

} // namespace

void RunConfig::validate() const {
    static const std::set<std::string> tags{"p1_single", "p1_two", "p1_prepare", "p1_recycle",
                                            "p1_stabilizer", "p2_bus", "p2_single", "p2_two"};
    if (!tags.count(protocol)) throw ConfigError("config: unknown protocol '" + protocol + "'");
    if (branches == BranchMode::sample && !seed_set) {
        throw ConfigError("config: key 'seed' is required in sample mode");
    }
    if (level != "default" && level != "effective" && level != "full") {
        throw ConfigError("config: key 'level' must be effective or full");
    }
    bool p2 = protocol.rfind("p2_", 0) == 0;
    if (p2 && level == "effective") {
        throw ConfigError("config: protocol '" + protocol + "' simulates the full spin space; "
                          "level=effective is not available");
    }
    if (mu_delta <= 0.0 || j_exchange <= 0.0) {
        throw ConfigError("config: energies must be positive");
    }
    if (latency < 0.0) throw ConfigError("config: key 'latency' must be >= 0");
    if (protocol == "p1_stabilizer" && angles.size() != 3 && !angles.empty()) {
        throw ConfigError("config: p1_stabilizer takes exactly 3 angles");
    }
    if (protocol == "p1_recycle" && angles.empty()) {
        throw ConfigError("config: p1_recycle requires key 'angles'");
    }
}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
        }
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (seen.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
        seen.insert(key);

        if (key == "protocol") {
            c.protocol = val;
        } else if (key == "level") {
            c.level = val;
        } else if (key == "branches") {
            if (val == "enumerate") {
                c.branches = BranchMode::enumerate_all;
            } else if (val == "sample") {
                c.branches = BranchMode::sample;
            } else if (val.rfind("forced=", 0) == 0) {
                c.branches = BranchMode::forced;
                for (const std::string& b : split(val.substr(7), ',')) {
                    if (b.empty()) continue;
                    c.forced_outcomes.push_back(static_cast<int>(parse_number(key, b)));
                }
            } else {
                throw ConfigError("config: key 'branches' must be enumerate, sample or forced=...");
            }
        } else if (key == "seed") {
            c.seed = static_cast<std::uint64_t>(parse_number(key, val));
            c.seed_set = true;
        } else if (key == "theta") {
            c.theta = parse_number(key, val);
        } else if (key == "phi_delta") {
            c.phi_delta = parse_number(key, val);
        } else if (key == "angles") {
            for (const std::string& a : split(val, ',')) {
                if (!a.empty()) c.angles.push_back(parse_number(key, a));
            }
        } else if (key == "n") {
            c.n = static_cast<int>(parse_number(key, val));
        } else if (key == "n1") {
            c.n1 = static_cast<int>(parse_number(key, val));
        } else if (key == "n2") {
            c.n2 = static_cast<int>(parse_number(key, val));
        } else if (key == "mu_delta") {
            c.mu_delta = parse_energy(key, val);
        } else if (key == "j") {
            c.j_exchange = parse_energy(key, val);
        } else if (key == "latency") {
            c.latency = parse_number(key, val);
        } else if (key == "error") {
            if (val.size() < 2) throw ConfigError("config: key 'error' expects e.g. X1");
            PauliKind p;
            if (val[0] == 'X' || val[0] == 'x') p = PauliKind::x;
            else if (val[0] == 'Y' || val[0] == 'y') p = PauliKind::y;
            else if (val[0] == 'Z' || val[0] == 'z') p = PauliKind::z;
            else throw ConfigError("config: key 'error' expects a Pauli letter, e.g. X1");
            c.error = std::make_pair(p, static_cast<int>(parse_number(key, val.substr(1))));
        } else {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    }
    if (c.protocol.empty()) throw ConfigError("config: key 'protocol' is required");
    c.validate();
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

} // namespace stq::cli
