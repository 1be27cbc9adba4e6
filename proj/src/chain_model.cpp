// chain_model.cpp - configuration parsing, validation and serialization

#include "lch/chain_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace lch {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& key, const std::string& text) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw ConfigParseError("config: key '" + key + "' expects a number, got '" + text + "'");
    }
    return value;
}

long long parse_integer(const std::string& key, const std::string& text) {
    long long value = 0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw ConfigParseError("config: key '" + key + "' expects an integer, got '" + text + "'");
    }
    return value;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = trim(std::string_view(text).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start));
        if (item.empty()) throw ConfigParseError("config: empty list entry for key '" + key + "'");
        values.push_back(parse_double(key, item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return values;
}

// Scalar broadcast or exact-length list.
std::vector<double> expand(const std::string& key, const std::vector<double>& values, int length) {
    if (values.size() == 1) return std::vector<double>(static_cast<std::size_t>(std::max(length, 0)), values[0]);
    if (static_cast<int>(values.size()) != length) {
        throw ValidationError("config: '" + key + "' has " + std::to_string(values.size()) +
                              " entries, expected " + std::to_string(length));
    }
    return values;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_list(const std::vector<double>& values) {
    if (!values.empty() &&
        std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
        return format_double(values.front());
    }
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    return out;
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

ChainEnvironment ChainEnvironment::uniform(int n_sites, double epsilon, double hopping) {
    ChainEnvironment env;
    env.n_sites = n_sites;
    env.epsilon.assign(static_cast<std::size_t>(std::max(n_sites, 0)), epsilon);
    env.hopping.assign(static_cast<std::size_t>(std::max(n_sites - 1, 0)), hopping);
    return env;
}

void ChainEnvironment::validate() const {
    if (n_sites < 2) throw ValidationError("chain: n_sites must be >= 2");
    if (static_cast<int>(epsilon.size()) != n_sites) throw ValidationError("chain: epsilon length != n_sites");
    if (static_cast<int>(hopping.size()) != n_sites - 1) throw ValidationError("chain: hopping length != n_sites - 1");
    if (!all_finite(epsilon) || !all_finite(hopping)) throw ValidationError("chain: non-finite coefficient");
}

double ChainEnvironment::lieb_robinson_velocity() const {
    double h_max = 0.0;
    for (double h : hopping) h_max = std::max(h_max, std::abs(h));
    return 2.0 * h_max;
}

Eigen::MatrixXd ChainEnvironment::hamiltonian() const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_sites, n_sites);
    for (int j = 0; j < n_sites; ++j) h(j, j) = epsilon[static_cast<std::size_t>(j)];
    for (int j = 0; j + 1 < n_sites; ++j) {
        h(j, j + 1) = hopping[static_cast<std::size_t>(j)];
        h(j + 1, j) = hopping[static_cast<std::size_t>(j)];
    }
    return h;
}

void OpenSystem::validate() const {
    if (!std::isfinite(coupling) || coupling < 0.0) throw ValidationError("system: coupling g must be finite and >= 0");
    if (!std::isfinite(drive_amplitude)) throw ValidationError("system: drive amplitude f must be finite");
    if (!std::isfinite(drive_frequency)) throw ValidationError("system: drive frequency must be finite");
}

TimeGrid TimeGrid::with_max_step(double t_final, double max_dt) {
    TimeGrid grid;
    grid.t_final = t_final;
    grid.n_steps = std::max(1, static_cast<int>(std::ceil(t_final / max_dt - 1e-9)));
    return grid;
}

void TimeGrid::validate() const {
    if (!std::isfinite(t_final) || t_final <= 0.0) throw ValidationError("grid: T must be > 0");
    if (n_steps < 1) throw ValidationError("grid: n_steps must be >= 1");
}

int TimeGrid::index_of(double t) const {
    const double x = t / dt();
    const double r = std::round(x);
    if (r < 0 || r > n_steps || std::abs(x - r) > 1e-7) {
        throw std::out_of_range("time " + format_double(t) + " is not on the grid");
    }
    return static_cast<int>(r);
}

double Thresholds::absolute_cut(double top_eigenvalue_at_final_time) const {
    return a_cut ? *a_cut : r_cut * top_eigenvalue_at_final_time;
}

void Config::validate() const {
    env.validate();
    system.validate();
    grid.validate();
    if (thresholds.a_cut && !(*thresholds.a_cut >= 0.0)) throw ValidationError("thresholds: a_cut must be >= 0");
    if (!(thresholds.r_cut > 0.0 && thresholds.r_cut <= 1.0)) throw ValidationError("thresholds: r_cut must lie in (0, 1]");
    if (thresholds.n_cut < 1) throw ValidationError("thresholds: n_cut must be >= 1");
    if (n_histories < 2) throw ValidationError("n_histories must be >= 2");
}

Config default_config() {
    Config c;
    c.env = ChainEnvironment::uniform(30, 1.0, 0.05);
    c.system = OpenSystem{};
    c.grid = TimeGrid::with_max_step(100.0);
    c.thresholds.r_cut = 1e-4;
    c.thresholds.n_cut = 4;
    c.thresholds.lieb_robinson_velocity = c.env.lieb_robinson_velocity();
    return c;
}

Config parse_config(std::string_view text) {
    static const char* const known[] = {"n_sites", "epsilon", "hopping", "g", "f", "n_cut", "T",
                                        "n_steps", "r_cut", "a_cut", "seed", "n_histories"};
    std::map<std::string, std::string> raw;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigParseError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        auto key = trim(std::string_view(stripped).substr(0, eq));
        auto value = trim(std::string_view(stripped).substr(eq + 1));
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ConfigParseError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        if (value.empty()) throw ConfigParseError("config line " + std::to_string(line_no) + ": empty value");
        if (!raw.emplace(key, value).second) {
            throw ConfigParseError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }

    Config c = default_config();
    auto get = [&](const char* key) -> const std::string* {
        auto it = raw.find(key);
        return it == raw.end() ? nullptr : &it->second;
    };

    if (auto v = get("n_sites")) c.env.n_sites = static_cast<int>(parse_integer("n_sites", *v));
    std::vector<double> eps{1.0};
    std::vector<double> hop{0.05};
    if (auto v = get("epsilon")) eps = parse_list("epsilon", *v);
    if (auto v = get("hopping")) hop = parse_list("hopping", *v);
    c.env.epsilon = expand("epsilon", eps, c.env.n_sites);
    c.env.hopping = expand("hopping", hop, c.env.n_sites - 1);

    if (auto v = get("g")) c.system.coupling = parse_double("g", *v);
    if (auto v = get("f")) c.system.drive_amplitude = parse_double("f", *v);
    if (auto v = get("n_cut")) c.thresholds.n_cut = static_cast<int>(parse_integer("n_cut", *v));
    if (auto v = get("T")) c.grid = TimeGrid::with_max_step(parse_double("T", *v));
    if (auto v = get("n_steps")) c.grid.n_steps = static_cast<int>(parse_integer("n_steps", *v));
    if (get("r_cut") && get("a_cut")) {
        throw ValidationError("config: give either r_cut or a_cut, not both");
    }
    if (auto v = get("r_cut")) c.thresholds.r_cut = parse_double("r_cut", *v);
    if (auto v = get("a_cut")) c.thresholds.a_cut = parse_double("a_cut", *v);
    if (auto v = get("seed")) {
        const auto s = parse_integer("seed", *v);
        if (s < 0) throw ValidationError("config: seed must be non-negative");
        c.seed = static_cast<std::uint64_t>(s);
    }
    if (auto v = get("n_histories")) c.n_histories = static_cast<int>(parse_integer("n_histories", *v));

    c.validate();
    c.thresholds.lieb_robinson_velocity = c.env.lieb_robinson_velocity();
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError("config: cannot open '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string serialize_config(const Config& c) {
    std::ostringstream out;
    out << "n_sites=" << c.env.n_sites << '\n';
    out << "epsilon=" << format_list(c.env.epsilon) << '\n';
    out << "hopping=" << format_list(c.env.hopping) << '\n';
    out << "g=" << format_double(c.system.coupling) << '\n';
    out << "f=" << format_double(c.system.drive_amplitude) << '\n';
    out << "n_cut=" << c.thresholds.n_cut << '\n';
    out << "T=" << format_double(c.grid.t_final) << '\n';
    out << "n_steps=" << c.grid.n_steps << '\n';
    if (c.thresholds.a_cut) {
        out << "a_cut=" << format_double(*c.thresholds.a_cut) << '\n';
    } else {
        out << "r_cut=" << format_double(c.thresholds.r_cut) << '\n';
    }
    out << "seed=" << c.seed << '\n';
    out << "n_histories=" << c.n_histories << '\n';
    return out.str();
}

std::string config_hash(const Config& config) {
    const auto text = serialize_config(config);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace lch
