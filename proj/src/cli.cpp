// cli.cpp

#include "lch/cli.hpp"

#include "lch/dynamics.hpp"
#include "lch/fock.hpp"
#include "lch/histories.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace lch::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCommands{"spread", "lightcone", "evolve", "sweep", "histories", "sample", "all"};

class CsvWriter {
public:
    CsvWriter(const std::string& hash, const std::vector<std::string>& header) {
        out_ << "# manifest: manifest.json config_hash=" << hash << '\n';
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }
    CsvWriter& num(double v) { return field(format_number(v)); }
    CsvWriter& integer(long long v) { return field(std::to_string(v)); }
    CsvWriter& text(const std::string& v) { return field(v); }
    void end_row() {
        out_ << '\n';
        first_ = true;
    }
    std::string str() const { return out_.str(); }

private:
    CsvWriter& field(const std::string& v) {
        if (!first_) out_ << ',';
        out_ << v;
        first_ = false;
        return *this;
    }
    std::ostringstream out_;
    bool first_ = true;
};

json basis_to_json(const ModeBasis& b) {
    json vectors = json::array();
    for (int k = 0; k < b.size(); ++k) {
        json col = json::array();
        for (Eigen::Index q = 0; q < b.vectors.rows(); ++q) col.push_back({b.vectors(q, k).real(), b.vectors(q, k).imag()});
        vectors.push_back(std::move(col));
    }
    json labels = json::array();
    for (auto l : b.labels) labels.push_back(static_cast<int>(l));
    return {{"rows", b.vectors.rows()}, {"vectors", vectors}, {"significance", b.significance},
            {"arrival", b.arrival}, {"escape", b.escape}, {"labels", labels}};
}

ModeBasis basis_from_json(const json& j) {
    ModeBasis b;
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto& vectors = j.at("vectors");
    b.vectors.resize(rows, static_cast<Eigen::Index>(vectors.size()));
    for (std::size_t k = 0; k < vectors.size(); ++k)
        for (Eigen::Index q = 0; q < rows; ++q) {
            const auto& z = vectors[k][static_cast<std::size_t>(q)];
            b.vectors(q, static_cast<Eigen::Index>(k)) = cplx(z[0].get<double>(), z[1].get<double>());
        }
    b.significance = j.at("significance").get<std::vector<double>>();
    b.arrival = j.at("arrival").get<std::vector<double>>();
    b.escape = j.at("escape").get<std::vector<double>>();
    for (int l : j.at("labels").get<std::vector<int>>()) b.labels.push_back(static_cast<ModeLabel>(l));
    return b;
}

struct Context {
    RunOptions options;
    Config config;
    std::string hash;
    std::vector<std::string> outputs;
    std::shared_ptr<const SpreadTrajectory> trajectory;
    std::optional<LightConeAnalysis> analysis;

    void emit(const std::string& name, const std::string& contents) {
        write_atomic(options.out_dir / name, contents);
        outputs.push_back(name);
    }

    const SpreadTrajectory& spread() {
        if (!trajectory) trajectory = std::make_shared<const SpreadTrajectory>(solve_spread(config.env, config.grid));
        return *trajectory;
    }

    const LightConeAnalysis& light_cone() {
        if (analysis) return *analysis;
        const char* cache_dir = std::getenv("LCH_CACHE_DIR");
        fs::path cache_file;
        if (cache_dir && *cache_dir) {
            cache_file = fs::path(cache_dir) / (hash + "-lightcone.json");
            if (fs::exists(cache_file)) {
                std::ifstream in(cache_file);
                std::stringstream buf;
                buf << in.rdbuf();
                try {
                    analysis = analysis_from_json(buf.str());
                    return *analysis;
                } catch (const std::exception&) {
                    // unreadable cache entries are recomputed
                }
            }
        }
        analysis = analyze_light_cone(spread(), config.thresholds);
        if (!cache_file.empty()) {
            fs::create_directories(cache_file.parent_path());
            write_atomic(cache_file, analysis_to_json(*analysis));
        }
        return *analysis;
    }

    int stride() const {
        if (options.stride > 0) return options.stride;
        return std::max(1, config.grid.n_steps / 200);
    }

    double effective_r_cut() {
        const auto& lc = light_cone();
        if (config.thresholds.is_relative()) return config.thresholds.r_cut;
        return lc.spectrum.size() > 0 && lc.spectrum(0) > 0 ? lc.a_cut / lc.spectrum(0) : 0.0;
    }
};

int count_above(const Eigen::MatrixXcd& rho, double cut) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
    return static_cast<int>((es.eigenvalues().array() > cut).count());
}

void stage_spread(Context& ctx) {
    const auto& traj = ctx.spread();
    std::vector<std::string> header{"t"};
    for (int p = 0; p < traj.n_sites(); ++p) {
        header.push_back("re_" + std::to_string(p));
        header.push_back("im_" + std::to_string(p));
    }
    CsvWriter csv(ctx.hash, header);
    for (int i = 0; i < traj.grid.size(); ++i) {
        csv.num(traj.grid.time(i));
        for (int p = 0; p < traj.n_sites(); ++p) csv.num(traj.alpha(p, i).real()).num(traj.alpha(p, i).imag());
        csv.end_row();
    }
    ctx.emit("alpha.csv", csv.str());
}

void stage_lightcone(Context& ctx) {
    const auto& traj = ctx.spread();
    const auto& lc = ctx.light_cone();
    const int n = traj.grid.n_steps;

    CsvWriter cone(ctx.hash, {"t", "m_plus", "m_minus", "I1_plus"});
    for (int i = 0; i <= n; i += ctx.stride()) {
        const auto plus = accumulate_density_at(traj, i, LightConeKind::Retarded);
        const auto minus = accumulate_density_at(traj, i, LightConeKind::Advanced);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(plus.matrix, Eigen::EigenvaluesOnly);
        const double top = es.eigenvalues().size() ? es.eigenvalues().maxCoeff() : 0.0;
        cone.num(traj.grid.time(i))
            .integer((es.eigenvalues().array() > lc.a_cut).count())
            .integer(count_above(minus.matrix, lc.a_cut))
            .num(top);
        cone.end_row();
    }
    ctx.emit("lightcone.csv", cone.str());

    CsvWriter spec(ctx.hash, {"t", "p", "I_p_plus"});
    const int anchors = std::min(10, n);
    for (int a = 1; a <= anchors; ++a) {
        const int i = static_cast<int>(std::lround(static_cast<double>(a) * n / anchors));
        const auto plus = accumulate_density_at(traj, i, LightConeKind::Retarded);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(plus.matrix, Eigen::EigenvaluesOnly);
        const Eigen::VectorXd ev = es.eigenvalues().reverse();
        for (Eigen::Index p = 0; p < ev.size(); ++p) {
            spec.num(traj.grid.time(i)).integer(p + 1).num(ev(p));
            spec.end_row();
        }
    }
    ctx.emit("spectrum.csv", spec.str());

    CsvWriter modes(ctx.hash, {"basis", "k", "significance", "t_in", "t_out"});
    const auto dump = [&](const char* name, const ModeBasis& b) {
        for (int k = 0; k < b.size(); ++k) {
            const auto ku = static_cast<std::size_t>(k);
            modes.text(name).integer(k).num(b.significance[ku]).num(b.arrival[ku]).num(b.escape[ku]);
            modes.end_row();
        }
    };
    dump("interior", lc.interior);
    dump("forward", lc.forward);
    dump("escaped", lc.escaped);
    ctx.emit("modes.csv", modes.str());
}

ManyBodyState initial_state(int n_modes, int n_cut) {
    return ManyBodyState::product_vacuum(build_basis(n_modes, n_cut), 0.0, 1.0);
}

void stage_evolve(Context& ctx) {
    ctx.spread();
    const auto& lc = ctx.light_cone();
    const int n_cut = ctx.config.thresholds.n_cut;
    const int n_sites = ctx.config.env.n_sites;

    const auto full = full_chain_spec(ctx.config.system, ctx.trajectory);
    PropagateOptions opts;
    opts.occupation_stride = ctx.stride();
    const auto run = propagate(full, initial_state(n_sites, n_cut), opts);

    CsvWriter occ(ctx.hash, {"t", "site", "n_p"});
    for (std::size_t c = 0; c < run.occupation_indices.size(); ++c)
        for (int p = 0; p < n_sites; ++p) {
            occ.num(run.times[static_cast<std::size_t>(run.occupation_indices[c])])
                .integer(p)
                .num(run.occupations(p, static_cast<Eigen::Index>(c)));
            occ.end_row();
        }
    ctx.emit("occupations.csv", occ.str());

    CsvWriter obs(ctx.hash, {"t", "sigma_z"});
    for (std::size_t i = 0; i < run.times.size(); ++i) {
        obs.num(run.times[i]).num(run.sigma_z[i]);
        obs.end_row();
    }
    ctx.emit("observables.csv", obs.str());

    // interior normal modes against the full chain, compared in chain slots
    const int m = lc.interior.size();
    const auto nor = normal_modes_spec(ctx.config.system, ctx.trajectory, lc.normal.vectors.leftCols(m));
    const auto truncated = propagate(nor, initial_state(m, n_cut)).final_state;
    const auto in_normal = embed(truncated, build_basis(n_sites, n_cut));
    const auto in_chain = change_slots(in_normal, lc.normal.vectors, Eigen::MatrixXcd::Identity(n_sites, n_sites));
    CsvWriter inf(ctx.hash, {"m", "infidelity"});
    inf.integer(m).num(infidelity(run.final_state, in_chain));
    inf.end_row();
    ctx.emit("evolve_infidelity.csv", inf.str());
}

void stage_sweep(Context& ctx) {
    ctx.spread();
    const auto& lc = ctx.light_cone();
    SweepRequest req;
    req.system = ctx.config.system;
    req.trajectory = ctx.trajectory;
    req.normal = lc.normal;
    req.n_cut = ctx.config.thresholds.n_cut;
    req.m_max = std::min(lc.normal.size(), std::max(lc.interior.size(), 1));
    req.threads = ctx.options.threads;
    for (auto family : {SweepFamily::MinimalForward, SweepFamily::NormalModes}) {
        req.family = family;
        CsvWriter csv(ctx.hash, {"m", "infidelity", "a_cut", "tail_mass"});
        for (const auto& p : guard_mode_sweep(req)) {
            csv.integer(p.m).num(p.infidelity).num(p.a_cut).num(p.tail_mass);
            csv.end_row();
        }
        ctx.emit(family == SweepFamily::MinimalForward ? "infidelity.csv" : "infidelity_normal.csv", csv.str());
    }
}

void stage_histories(Context& ctx) {
    ctx.spread();
    const auto& lc = ctx.light_cone();
    const int n_cut = ctx.config.thresholds.n_cut;
    // full mode set: escaped modes first, then the rest of the chain
    const auto spec = normal_modes_spec(ctx.config.system, ctx.trajectory, completing_unitary(lc.escaped.vectors));
    const auto events = escape_events(lc.escaped, ctx.config.grid);
    EnumerationOptions opts;
    opts.threads = ctx.options.threads;
    const auto hist = enumerate_histories(spec, events, initial_state(ctx.config.env.n_sites, n_cut), opts);

    CsvWriter csv(ctx.hash, {"label", "P", "t_out"});
    for (const auto& b : hist.branches) {
        std::string times;
        for (const auto& o : b.outcomes) times += (times.empty() ? "" : ";") + format_number(o.t_out);
        csv.text(b.label.empty() ? "-" : b.label).num(b.branch_amplitude_sq).text(times);
        csv.end_row();
    }
    ctx.emit("branches.csv", csv.str());

    json report{{"config_hash", ctx.hash},
                {"n_branches", hist.branches.size()},
                {"n_escape_events", events.size()},
                {"leakage", hist.leakage},
                {"total_probability", hist.total_probability()},
                {"reference_norm_sq", hist.reference_norm_sq},
                {"r_cut", ctx.effective_r_cut()}};
    const auto picked = select_histories(hist, ctx.config.n_histories, HistorySelection::TopWeight);
    if (picked.size() >= 2) {
        std::vector<const HistoryRecord*> chosen;
        for (auto i : picked) chosen.push_back(&hist.branches[i]);
        const auto rep = decoherence_overlap(chosen, ctx.effective_r_cut());
        json overlaps = json::array();
        for (int a = 0; a < rep.n_histories; ++a) {
            json row = json::array();
            for (int b = 0; b < rep.n_histories; ++b) row.push_back(rep.overlaps(a, b));
            overlaps.push_back(std::move(row));
        }
        report["n_histories"] = rep.n_histories;
        report["mean_overlap"] = rep.mean_overlap;
        report["geometric_mean"] = rep.geometric_mean;
        report["pinned"] = rep.pinned;
        report["labels"] = rep.labels;
        report["probabilities"] = rep.probabilities;
        report["overlaps"] = overlaps;
    } else {
        report["n_histories"] = picked.size();
        report["mean_overlap"] = nullptr;
        report["geometric_mean"] = nullptr;
    }
    ctx.emit("histories.json", report.dump(2) + "\n");
}

void stage_sample(Context& ctx) {
    ctx.spread();
    const auto& lc = ctx.light_cone();
    const int n_cut = ctx.config.thresholds.n_cut;
    const auto spec = effective_relevant_spec(ctx.config.system, ctx.trajectory, lc.forward, lc.escaped);
    const auto events = escape_events(lc.escaped, ctx.config.grid);
    const auto ens = quantum_jump_sample(spec, events, initial_state(lc.escaped.size(), n_cut), ctx.config.seed,
                                         ctx.options.n_samples, ctx.options.threads);
    CsvWriter csv(ctx.hash, {"t", "sigma_z_mean", "sigma_z_stderr", "n_samples"});
    for (std::size_t i = 0; i < ens.times.size(); ++i) {
        csv.num(ens.times[i]).num(ens.mean[i]).num(ens.standard_error[i]).integer(ens.n_samples);
        csv.end_row();
    }
    ctx.emit("sample.csv", csv.str());
}

void write_manifest(const Context& ctx, double seconds) {
    json manifest{{"config_hash", ctx.hash},   {"seed", ctx.config.seed},     {"command", ctx.options.command},
                  {"outputs", ctx.outputs},    {"wall_time_s", seconds},      {"version", kVersion},
                  {"config", serialize_config(ctx.config)}};
    write_atomic(ctx.options.out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void report_error(const RunOptions& options, const std::string& stage, const std::string& type,
                  const std::string& message) {
    const json err{{"error", {{"stage", stage}, {"type", type}, {"message", message}}}};
    std::cerr << err.dump() << '\n';
    try {
        fs::create_directories(options.out_dir);
        write_atomic(options.out_dir / "error.json", err.dump(2) + "\n");
    } catch (const std::exception&) {
        // stderr already carries the report
    }
}

} // namespace

bool is_command(const std::string& name) {
    return std::find(kCommands.begin(), kCommands.end(), name) != kCommands.end();
}

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12e", value);
    return buf;
}

void write_atomic(const fs::path& path, const std::string& contents) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << contents;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string analysis_to_json(const LightConeAnalysis& a) {
    const json j{{"a_cut", a.a_cut},
                 {"spectrum", std::vector<double>(a.spectrum.data(), a.spectrum.data() + a.spectrum.size())},
                 {"normal", basis_to_json(a.normal)},
                 {"interior", basis_to_json(a.interior)},
                 {"forward", basis_to_json(a.forward)},
                 {"escaped", basis_to_json(a.escaped)}};
    return j.dump();
}

LightConeAnalysis analysis_from_json(const std::string& text) {
    const json j = json::parse(text);
    LightConeAnalysis a;
    a.a_cut = j.at("a_cut").get<double>();
    const auto spectrum = j.at("spectrum").get<std::vector<double>>();
    a.spectrum = Eigen::Map<const Eigen::VectorXd>(spectrum.data(), static_cast<Eigen::Index>(spectrum.size()));
    a.normal = basis_from_json(j.at("normal"));
    a.interior = basis_from_json(j.at("interior"));
    a.forward = basis_from_json(j.at("forward"));
    a.escaped = basis_from_json(j.at("escaped"));
    return a;
}

Config resolve_config(const RunOptions& options) {
    Config config = options.config_path.empty() ? default_config() : load_config(options.config_path);
    if (options.seed) config.seed = *options.seed;
    if (options.n_histories) config.n_histories = *options.n_histories;
    if (options.r_cut) {
        config.thresholds.a_cut.reset();
        config.thresholds.r_cut = *options.r_cut;
    }
    config.validate();
    return config;
}

int run(const RunOptions& options) {
    if (!is_command(options.command)) {
        std::cerr << "unknown command '" << options.command << "'; expected one of spread, lightcone, evolve, sweep, "
                     "histories, sample, all\n";
        return 2;
    }
    if (options.threads < 1 || options.n_samples < 1) {
        std::cerr << "--threads and --n-samples must be positive\n";
        return 2;
    }
    std::string stage = "config";
    try {
        const auto start = std::chrono::steady_clock::now();
        Context ctx;
        ctx.options = options;
        ctx.config = resolve_config(options);
        ctx.hash = config_hash(ctx.config);
        fs::create_directories(options.out_dir);

        const auto stages = options.command == "all"
                                ? std::vector<std::string>{"spread", "lightcone", "evolve", "sweep", "histories", "sample"}
                                : std::vector<std::string>{options.command};
        for (const auto& s : stages) {
            stage = s;
            if (s == "spread") stage_spread(ctx);
            else if (s == "lightcone") stage_lightcone(ctx);
            else if (s == "evolve") stage_evolve(ctx);
            else if (s == "sweep") stage_sweep(ctx);
            else if (s == "histories") stage_histories(ctx);
            else if (s == "sample") stage_sample(ctx);
        }
        stage = "manifest";
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(ctx, seconds);
        return 0;
    } catch (const ConfigParseError& e) {
        report_error(options, stage, "ConfigParseError", e.what());
    } catch (const ValidationError& e) {
        report_error(options, stage, "ValidationError", e.what());
    } catch (const std::exception& e) {
        report_error(options, stage, "RuntimeError", e.what());
    }
    return 1;
}

int main_entry(int argc, char** argv) {
    CLI::App app{"Light-cone histories: significant modes, truncated dynamics and decoherent histories"};
    RunOptions options;
    std::string positional_config;
    std::string positional_out;
    std::string config_flag;
    std::string out_flag;
    std::uint64_t seed = 0;
    double r_cut = 0.0;
    int n_histories = 0;

    app.add_option("command", options.command, "spread | lightcone | evolve | sweep | histories | sample | all")
        ->required();
    app.add_option("config_file", positional_config, "configuration file");
    app.add_option("out_dir", positional_out, "output directory");
    app.add_option("--config", config_flag, "configuration file");
    app.add_option("--out", out_flag, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--threads", options.threads, "worker threads")->capture_default_str();
    auto* r_cut_opt = app.add_option("--r-cut", r_cut, "override the relative significance threshold");
    auto* hist_opt = app.add_option("--n-histories", n_histories, "histories in the overlap report");
    app.add_option("--n-samples", options.n_samples, "quantum-jump samples")->capture_default_str();
    app.add_option("--stride", options.stride, "grid stride of tabulated outputs (0 = automatic)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (!config_flag.empty() && !positional_config.empty()) {
        std::cerr << "config given twice\n";
        return 2;
    }
    if (!out_flag.empty() && !positional_out.empty()) {
        std::cerr << "output directory given twice\n";
        return 2;
    }
    options.config_path = config_flag.empty() ? positional_config : config_flag;
    const std::string out = out_flag.empty() ? positional_out : out_flag;
    if (!out.empty()) options.out_dir = out;
    if (*seed_opt) options.seed = seed;
    if (*r_cut_opt) options.r_cut = r_cut;
    if (*hist_opt) options.n_histories = n_histories;
    return run(options);
}

} // namespace lch::cli
