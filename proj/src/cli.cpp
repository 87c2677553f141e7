#include "cpcdma/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpcdma/errors.hpp"

#ifndef CPCDMA_BUILD_ID
#define CPCDMA_BUILD_ID "dev"
#endif

namespace cpcdma {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError(key, "not an integer: '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError(key, "not a number: '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError(key, "not a boolean: '" + v + "'");
}

std::vector<std::string> split_csv(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

// Grid edits re-derive bounds from the resolved grid, so partial overrides
// (say just snr_stop) keep the other parts.
static void set_grid(RunManifest& m, double start, double stop, double step) {
    m.cfg.snr_grid_db = make_grid(start, stop, step);
}

static double grid_start(const RunManifest& m) {
    return m.cfg.snr_grid_db.empty() ? 0.0 : m.cfg.snr_grid_db.front();
}
static double grid_stop(const RunManifest& m) {
    return m.cfg.snr_grid_db.empty() ? 0.0 : m.cfg.snr_grid_db.back();
}
static double grid_step(const RunManifest& m) {
    return m.cfg.snr_grid_db.size() < 2 ? 0.5
                                        : m.cfg.snr_grid_db[1] - m.cfg.snr_grid_db[0];
}

RunManifest default_manifest() {
    RunManifest m;
    m.build_id = CPCDMA_BUILD_ID;
    set_grid(m, 0.0, 10.0, 0.5);
    return m;
}

std::vector<std::string> preset_names() {
    return {"fig2-fullload", "fig2-halfload", "fig2-quarterload",
            "fig3-fullload", "fig3-halfload", "fig3-quarterload"};
}

void apply_preset(RunManifest& m, const std::string& name) {
    SystemConfig& c = m.cfg;
    c = SystemConfig{};
    c.n_tx = 2;
    c.spreading = 16;
    c.arq_rounds = 3;
    c.taps = 10;
    c.cp_len = 10;
    c.symbols_per_antenna = 256;
    c.turbo_iterations = 3;
    c.frames_per_point = 2000;
    c.receivers = {ReceiverKind::ChipLevel, ReceiverKind::SymbolLevel};
    if (name == "fig2-fullload") {
        c.n_rx = 2;
        c.codes = 16;
        set_grid(m, -2.0, 10.0, 0.5);
    } else if (name == "fig2-halfload") {
        c.n_rx = 2;
        c.codes = 8;
        set_grid(m, -4.0, 8.0, 0.5);
    } else if (name == "fig2-quarterload") {
        c.n_rx = 2;
        c.codes = 4;
        set_grid(m, -6.0, 6.0, 0.5);
    } else if (name == "fig3-fullload") {
        c.n_rx = 1;
        c.codes = 16;
        set_grid(m, 2.0, 20.0, 0.5);
    } else if (name == "fig3-halfload") {
        c.n_rx = 1;
        c.codes = 8;
        set_grid(m, 0.0, 18.0, 0.5);
    } else if (name == "fig3-quarterload") {
        c.n_rx = 1;
        c.codes = 4;
        set_grid(m, -2.0, 16.0, 0.5);
    } else {
        throw ConfigError("preset", "unknown preset '" + name + "'");
    }
    m.preset_name = name;
}

void apply_key(RunManifest& m, const std::string& key, const std::string& value) {
    SystemConfig& c = m.cfg;
    if (key == "preset") {
        apply_preset(m, value);
    } else if (key == "receiver") {
        c.receivers.clear();
        for (const auto& r : split_csv(value)) c.receivers.push_back(receiver_from_string(r));
        if (c.receivers.empty()) throw ConfigError(key, "no receivers given");
    } else if (key == "n_tx") {
        c.n_tx = int(parse_int(key, value));
    } else if (key == "n_rx") {
        c.n_rx = int(parse_int(key, value));
    } else if (key == "spreading") {
        c.spreading = int(parse_int(key, value));
    } else if (key == "codes") {
        c.codes = int(parse_int(key, value));
    } else if (key == "bits_per_symbol") {
        c.bits_per_symbol = int(parse_int(key, value));
    } else if (key == "arq_rounds") {
        c.arq_rounds = int(parse_int(key, value));
    } else if (key == "taps") {
        c.taps = int(parse_int(key, value));
    } else if (key == "cp_len") {
        c.cp_len = int(parse_int(key, value));
    } else if (key == "symbols_per_antenna") {
        c.symbols_per_antenna = int(parse_int(key, value));
    } else if (key == "turbo_iterations") {
        c.turbo_iterations = int(parse_int(key, value));
    } else if (key == "interleaver_seed") {
        c.interleaver_seed = std::uint64_t(parse_int(key, value));
    } else if (key == "maxlog_demapper") {
        c.maxlog_demapper = parse_bool(key, value);
    } else if (key == "long_term_static") {
        c.long_term_static = parse_bool(key, value);
    } else if (key == "snr_start") {
        set_grid(m, parse_double(key, value), grid_stop(m), grid_step(m));
    } else if (key == "snr_stop") {
        set_grid(m, grid_start(m), parse_double(key, value), grid_step(m));
    } else if (key == "snr_step") {
        set_grid(m, grid_start(m), grid_stop(m), parse_double(key, value));
    } else if (key == "frames") {
        c.frames_per_point = int(parse_int(key, value));
    } else if (key == "seed") {
        m.master_seed = std::uint64_t(parse_int(key, value));
    } else if (key == "out") {
        m.out_stem = value;
    } else if (key == "threads") {
        m.threads = int(parse_int(key, value));
    } else {
        throw ConfigError(key, "unknown key");
    }
}

RunManifest parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config:" + std::to_string(lineno), "expected key = value");
        entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }

    RunManifest m = default_manifest();
    for (const auto& [k, v] : entries)
        if (k == "preset") apply_preset(m, v);
    for (const auto& [k, v] : entries)
        if (k != "preset") apply_key(m, k, v);
    m.cfg.validate();
    return m;
}

std::string csv_path(const RunManifest& m, ReceiverKind kind) {
    return m.out_stem + "." + to_string(kind) + ".csv";
}

void write_csv(std::ostream& os, const RunManifest& m, ReceiverKind kind,
               const std::vector<SweepPoint>& points) {
    const SystemConfig& c = m.cfg;
    char buf[256];
    os << "# cpcdma_sim\n";
    os << "# build = " << m.build_id << "\n";
    os << "# preset = " << (m.preset_name.empty() ? "none" : m.preset_name) << "\n";
    os << "# receiver = " << to_string(kind) << "\n";
    os << "# seed = " << m.master_seed << "\n";
    os << "# n_tx = " << c.n_tx << "\n# n_rx = " << c.n_rx << "\n";
    os << "# spreading = " << c.spreading << "\n# codes = " << c.codes << "\n";
    os << "# bits_per_symbol = " << c.bits_per_symbol << "\n";
    os << "# arq_rounds = " << c.arq_rounds << "\n";
    os << "# taps = " << c.taps << "\n# cp_len = " << c.cp_len << "\n";
    os << "# symbols_per_antenna = " << c.symbols_per_antenna << "\n";
    os << "# turbo_iterations = " << c.turbo_iterations << "\n";
    os << "# interleaver_seed = " << c.interleaver_seed << "\n";
    os << "# maxlog_demapper = " << (c.maxlog_demapper ? 1 : 0) << "\n";
    os << "# long_term_static = " << (c.long_term_static ? 1 : 0) << "\n";
    os << "# frames = " << c.frames_per_point << "\n";
    os << "# rate_bits = " << c.rate_bits() << "\n";
    os << "# chips_per_block = " << c.chips_per_block() << "\n";
    const CombiningCost chip = chip_combining_cost(c);
    const CombiningCost sym = symbol_combining_cost(c);
    os << "# chip_state_reals = " << chip.state_reals << "\n";
    os << "# chip_max_additions = " << chip.additions << "\n";
    os << "# symbol_state_reals = " << sym.state_reals << "\n";
    os << "# symbol_max_additions = " << sym.additions << "\n";
    os << "EcN0_dB,eta,ci_halfwidth,frames,mean_rounds\n";
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.2f,%.6f,%.6f,%lld,%.6f\n", p.ecn0_db, p.stats.eta(),
                      p.stats.ci_halfwidth(), (long long)p.stats.frames, p.stats.mean_rounds());
        os << buf;
    }
}

int run(const RunManifest& m, bool progress) {
    m.cfg.validate();
    for (ReceiverKind kind : m.cfg.receivers) {
        const std::string path = csv_path(m, kind);
        if (progress) std::fprintf(stderr, "sweep: receiver=%s -> %s\n", to_string(kind).c_str(),
                                   path.c_str());
        try {
            const std::vector<SweepPoint> points =
                run_sweep(m.cfg, kind, m.master_seed, m.threads, progress);
            std::ofstream os(path, std::ios::trunc);
            if (!os) throw IoError("cannot open output file '" + path + "'");
            write_csv(os, m, kind, points);
            os.flush();
            if (!os) throw IoError("failed writing '" + path + "'");
        } catch (...) {
            std::error_code ec;
            std::filesystem::remove(path, ec);
            throw;
        }
    }
    return 0;
}

}  // namespace cpcdma
