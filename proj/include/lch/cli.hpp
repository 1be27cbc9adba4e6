// cli.hpp - command-line pipeline: config -> stages -> CSV / JSON files.

#pragma once

#include "lch/chain_model.hpp"
#include "lch/lightcone.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lch::cli {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
    std::string command;
    std::filesystem::path config_path;  // empty = built-in defaults
    std::filesystem::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> r_cut;
    std::optional<int> n_histories;
    int threads = 1;
    int n_samples = 500;
    int stride = 0;  // lightcone / occupation output stride, 0 = automatic
};

// Known commands: spread, lightcone, evolve, sweep, histories, sample, all.
bool is_command(const std::string& name);

// Runs one command; returns the process exit code (0 ok, 1 stage failure,
// 2 usage error). Failures also write <out>/error.json.
int run(const RunOptions& options);

// argv parsing + run.
int main_entry(int argc, char** argv);

// Config after applying command-line overrides.
Config resolve_config(const RunOptions& options);

// "%.12e"
std::string format_number(double value);

// Writes via a temporary file in the same directory and renames it in place.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

// Lossless JSON round trip of the single-particle analysis (cache format).
std::string analysis_to_json(const LightConeAnalysis& analysis);
LightConeAnalysis analysis_from_json(const std::string& text);

} // namespace lch::cli
