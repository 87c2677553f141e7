#ifndef CPCDMA_CONFIG_HPP
#define CPCDMA_CONFIG_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cpcdma {

enum class ReceiverKind { ChipLevel, SymbolLevel, Mfb };

std::string to_string(ReceiverKind k);
ReceiverKind receiver_from_string(const std::string& s);

/// Every scalar parameter of the link. Rate-1/2 convolutional coding and QPSK
/// are the supported operating point; the fields stay general so invalid
/// combinations are rejected by validate() rather than by construction.
struct SystemConfig {
    int n_tx = 2;                  // transmit antennas
    int n_rx = 2;                  // receive antennas
    int spreading = 16;            // Walsh code length N
    int codes = 16;                // multiplexed codes C
    int bits_per_symbol = 2;       // M (QPSK)
    int arq_rounds = 3;            // maximum rounds K
    int taps = 10;                 // channel taps L
    int cp_len = 10;               // cyclic prefix chips
    int symbols_per_antenna = 256; // T_s
    int turbo_iterations = 3;
    std::array<unsigned, 2> generators{035, 023};  // octal, constraint length 5
    int constraint_len = 5;
    std::uint64_t interleaver_seed = 0x1f2e3d4cULL;
    bool maxlog_demapper = false;  // exact log-sum by default
    bool long_term_static = false; // same channel draw for every ARQ round
    double min_variance = 1e-6;    // floor on soft chip variances
    double llr_cap = 50.0;

    // Sweep parameters.
    std::vector<double> snr_grid_db;   // Ec/N0 per chip per rx antenna
    int frames_per_point = 2000;
    std::vector<ReceiverKind> receivers{ReceiverKind::ChipLevel};

    int chips_per_block() const { return symbols_per_antenna * spreading / codes; }  // T_c
    double symbol_energy() const { return double(spreading) / double(codes); }       // E_s
    int coded_bits() const { return n_tx * bits_per_symbol * symbols_per_antenna; }
    int tail_bits() const { return constraint_len - 1; }
    int info_bits() const { return coded_bits() / 2 - tail_bits(); }
    int rate_bits() const { return bits_per_symbol * n_tx * codes / 2; }  // R = rho M N_T C

    /// Throws ConfigError on any violated invariant.
    void validate() const;
};

std::vector<double> make_grid(double start_db, double stop_db, double step_db);

}  // namespace cpcdma

#endif
