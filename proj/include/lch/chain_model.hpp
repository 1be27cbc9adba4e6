// chain_model.hpp - physical parameters, time grid and key=value configuration

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lch {

using cplx = std::complex<double>;

// Malformed configuration text (unknown key, bad number, ...).
class ConfigParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Well-formed input that violates a physical or structural invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tridiagonal single-particle environment: on-site energies and hoppings of
// the semi-infinite chain, truncated to n_sites.
struct ChainEnvironment {
    std::vector<double> epsilon;
    std::vector<double> hopping;
    int n_sites = 0;

    static ChainEnvironment uniform(int n_sites, double epsilon, double hopping);

    void validate() const;
    // 2 * max |h_j|
    double lieb_robinson_velocity() const;
    // Dense real symmetric single-particle Hamiltonian.
    Eigen::MatrixXd hamiltonian() const;

    bool operator==(const ChainEnvironment&) const = default;
};

enum class CouplingOperator { SigmaMinus };

// Driven qubit H_s(t) = s+ s- + f s_x cos(w t), coupled through g V_s with V_s = s-.
struct OpenSystem {
    double drive_amplitude = 0.1;
    double coupling = 0.1;
    CouplingOperator coupling_operator = CouplingOperator::SigmaMinus;
    double drive_frequency = 1.0;

    void validate() const;
    bool operator==(const OpenSystem&) const = default;
};

// Uniform grid t_i = i * T / n_steps, i = 0..n_steps.
struct TimeGrid {
    double t_final = 100.0;
    int n_steps = 2000;

    // Finest grid with dt <= max_dt.
    static TimeGrid with_max_step(double t_final, double max_dt = 0.05);

    void validate() const;
    double dt() const { return t_final / n_steps; }
    double time(int i) const { return t_final * static_cast<double>(i) / n_steps; }
    int size() const { return n_steps + 1; }
    // Index of a time lying on the grid; throws std::out_of_range otherwise.
    int index_of(double t) const;

    bool operator==(const TimeGrid&) const = default;
};

// Significance thresholds. Either an absolute a_cut is given, or it is derived
// as r_cut times the top eigenvalue of the retarded density at the final time.
struct Thresholds {
    std::optional<double> a_cut;
    double r_cut = 1e-4;
    int n_cut = 4;
    double lieb_robinson_velocity = 0.1;

    bool is_relative() const { return !a_cut.has_value(); }
    double absolute_cut(double top_eigenvalue_at_final_time) const;

    bool operator==(const Thresholds&) const = default;
};

struct Config {
    ChainEnvironment env;
    OpenSystem system;
    TimeGrid grid;
    Thresholds thresholds;
    std::uint64_t seed = 20240521;
    int n_histories = 20;

    void validate() const;
    bool operator==(const Config&) const = default;
};

// Defaults: eps=1, h=0.05, g=0.1, f=0.1, n_cut=4, T=100, 30 sites, r_cut=1e-4.
Config default_config();

Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);
std::string serialize_config(const Config& config);

// FNV-1a over the serialized configuration, as 16 hex digits.
std::string config_hash(const Config& config);

} // namespace lch
