#include "cpcdma/config.hpp"

#include <cmath>

#include "cpcdma/errors.hpp"

namespace cpcdma {

std::string to_string(ReceiverKind k) {
    switch (k) {
        case ReceiverKind::ChipLevel: return "chip";
        case ReceiverKind::SymbolLevel: return "symbol";
        case ReceiverKind::Mfb: return "mfb";
    }
    return "?";
}

ReceiverKind receiver_from_string(const std::string& s) {
    if (s == "chip") return ReceiverKind::ChipLevel;
    if (s == "symbol") return ReceiverKind::SymbolLevel;
    if (s == "mfb") return ReceiverKind::Mfb;
    throw ConfigError("receiver", "must be one of chip|symbol|mfb, got '" + s + "'");
}

namespace {
bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }
}

void SystemConfig::validate() const {
    if (n_tx < 1 || n_tx > 4) throw ConfigError("n_tx", "must be in [1,4]");
    if (n_rx < 1 || n_rx > 4) throw ConfigError("n_rx", "must be in [1,4]");
    if (!is_pow2(spreading)) throw ConfigError("spreading", "N must be a power of two");
    if (codes < 1 || codes > spreading) throw ConfigError("codes", "C <= N violated");
    if (bits_per_symbol != 2) throw ConfigError("bits_per_symbol", "only QPSK (M=2) is supported");
    if (arq_rounds < 1) throw ConfigError("arq_rounds", "K >= 1 required");
    if (taps < 1) throw ConfigError("taps", "L >= 1 required");
    if (cp_len < taps - 1) throw ConfigError("cp_len", "CP shorter than channel");
    if (symbols_per_antenna < 1) throw ConfigError("symbols_per_antenna", "T_s >= 1 required");
    if (symbols_per_antenna % codes != 0)
        throw ConfigError("symbols_per_antenna", "T_s must be divisible by C");
    if (turbo_iterations < 1) throw ConfigError("turbo_iterations", "at least one iteration");
    if (constraint_len != 5) throw ConfigError("constraint_len", "only constraint length 5 supported");
    if (info_bits() < 1) throw ConfigError("symbols_per_antenna", "frame too short for tail bits");
    if (frames_per_point < 1) throw ConfigError("frames", "at least one frame per point");
    if (min_variance <= 0) throw ConfigError("min_variance", "must be positive");
    if (llr_cap <= 0) throw ConfigError("llr_cap", "must be positive");
}

std::vector<double> make_grid(double start_db, double stop_db, double step_db) {
    if (step_db <= 0) throw ConfigError("snr_step", "must be positive");
    std::vector<double> g;
    const int n = int(std::floor((stop_db - start_db) / step_db + 1e-9)) + 1;
    for (int i = 0; i < n; ++i) g.push_back(start_db + i * step_db);
    return g;
}

}  // namespace cpcdma
