#ifndef CPCDMA_COMBINER_HPP
#define CPCDMA_COMBINER_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "cpcdma/channel.hpp"
#include "cpcdma/config.hpp"
#include "cpcdma/numerics.hpp"
#include "cpcdma/txchain.hpp"

namespace cpcdma {

enum class LlrKind { APriori, Extrinsic, APosteriori };

/// LLRs for the coded-interleaved bits, equalizer-domain order
/// (antenna-major, then symbol, then bit). Positive favors bit 0.
struct LlrFrame {
    LlrKind kind = LlrKind::APriori;
    std::vector<double> v;
};

LlrFrame zero_llrs(const SystemConfig& cfg);

/// Gray QPSK with energy E_s: point(b0,b1) = sqrt(E_s/2) ((1-2b0) + j(1-2b1)).
struct QpskConstellation {
    double amp = 0.0;  // sqrt(E_s/2)
    explicit QpskConstellation(double symbol_energy);
    cd point(int idx) const {  // idx = (b0<<1)|b1
        return {amp * (1.0 - 2.0 * ((idx >> 1) & 1)), amp * (1.0 - 2.0 * (idx & 1))};
    }
};

/// Conditional mean and variance of the transmitted chips given a-priori LLRs.
struct ChipPriors {
    BlockVector xtilde;            // T_c blocks x n_tx lanes, soft chip means
    std::vector<double> xi;        // per-chip variances, same layout
    std::vector<double> xi_bar;    // n_tx time-averaged variances (diagonal of Xi~)
};

ChipPriors chip_priors_from_llrs(const LlrFrame& apriori, const WalshMatrix& w,
                                 const SystemConfig& cfg);

/// Running count of the arithmetic additions spent in combining recursions.
struct ComplexityMeter {
    std::uint64_t additions = 0;
};

/// Accumulated matched-filter output and per-bin Gram matrices; the memory
/// footprint never depends on how many rounds were absorbed.
class ChipCombinerState {
public:
    ChipCombinerState(int bins, int n_tx);

    /// Absorbs round k: ytilde += Lambda^H y_f, D_i += Lambda_i^H Lambda_i.
    void update(const BlockVector& y_f, const ChannelFrequencyResponse& lambda, int round);

    int round() const { return round_; }
    int bins() const { return bins_; }
    int n_tx() const { return n_tx_; }
    const BlockVector& ytilde() const { return ytilde_; }
    std::span<const cd> gram_flat() const { return d_; }

    /// Logical state size in real values: 2 T_c N_T (N_T + 1).
    std::size_t size_reals() const;
    const ComplexityMeter& meter() const { return meter_; }

private:
    int bins_ = 0, n_tx_ = 0, round_ = 0;
    BlockVector ytilde_;
    std::vector<cd> d_;  // bins x n_tx^2
    ComplexityMeter meter_;
};

/// Forward/backward MMSE filters of one turbo iteration.
struct EqualizerFilters {
    int bins = 0, n = 0;
    std::vector<cd> gamma;  // bins x n^2
    std::vector<cd> gd;     // bins x n^2, Gamma_i D_i (Hermitian)
    SmallMatrix upsilon;    // time average of gd; Omega_i = gd_i - upsilon
};

/// Gamma_i = (1/sigma2) { I - D_i C_i^{-1} }, C_i = sigma2 Xi~^{-1} + D_i,
/// evaluated in the equivalent form Xi~^{-1} C_i^{-1} which stays stable for
/// small sigma2. Upsilon averages Gamma_i D_i over all bins in index order.
EqualizerFilters compute_filters(std::span<const cd> gram_flat, int bins, int n,
                                 std::span<const double> xi_bar, double sigma2);

/// z_f,i = Gamma_i ytilde_i - (Gamma_i D_i - Upsilon) xtilde_f,i.
BlockVector mmse_estimate(const EqualizerFilters& f, const BlockVector& ytilde,
                          const BlockVector& xtilde_f);

/// Despread symbol estimates with the equivalent-model statistics
/// r = g s + nu: g_t = Re[Upsilon]_tt and theta2_t = E_s (g_t - [U Xi~ U^H]_tt),
/// which reduces to E_s (g - g^2) under uninformative priors.
struct DespreadOutput {
    int n_tx = 0, symbols = 0;
    std::vector<cd> r;          // r[t * symbols + j]
    std::vector<double> g;      // same layout
    std::vector<double> theta2; // same layout, floored at 1e-12
};

DespreadOutput despread_and_stat(const BlockVector& zhat, const SmallMatrix& upsilon,
                                 std::span<const double> xi_bar, const WalshMatrix& w,
                                 const SystemConfig& cfg);

/// Extrinsic LLRs from the despread statistics; metric -|r - g s|^2 / theta2
/// plus the a-priori term of the other bits, own-bit prior excluded.
LlrFrame demap_chip_level(const DespreadOutput& d, const LlrFrame& apriori,
                          const SystemConfig& cfg);

/// Accumulated demapper metrics of the previous rounds, one value per
/// (antenna, symbol, constellation point).
class SymbolCombinerState {
public:
    SymbolCombinerState(int symbols_per_antenna, int n_tx, int bits_per_symbol);

    /// Extrinsic LLRs from accumulated-plus-current metrics; the stored sum is
    /// untouched so within-round iterations never double-count.
    LlrFrame demap_combined(const DespreadOutput& d, const LlrFrame& apriori,
                            const SystemConfig& cfg);

    /// Folds round k's final metrics into the accumulator.
    void commit_round(const DespreadOutput& d, const SystemConfig& cfg, int round);

    int round() const { return round_; }
    std::size_t size_reals() const { return metric_.size(); }
    const ComplexityMeter& meter() const { return meter_; }

private:
    int symbols_ = 0, n_tx_ = 0, points_ = 0, round_ = 0;
    std::vector<double> metric_;  // [t][j][s], sign-corrected (larger = closer)
    ComplexityMeter meter_;
};

}  // namespace cpcdma

#endif
