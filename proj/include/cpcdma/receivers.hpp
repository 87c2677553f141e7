#ifndef CPCDMA_RECEIVERS_HPP
#define CPCDMA_RECEIVERS_HPP

#include <memory>
#include <random>

#include "cpcdma/combiner.hpp"

namespace cpcdma {

/// Per-frame receiver state machine. run_frame drives: start_round once per
/// ARQ round, then equalize_demap once per turbo iteration (the decoder loop
/// lives outside), then end_round when the round failed.
class FrameReceiver {
public:
    virtual ~FrameReceiver() = default;
    virtual void start_round(int round, const ChannelRealization& h,
                             const ChannelFrequencyResponse& lambda, const BlockVector& y_f,
                             std::mt19937_64& rng) = 0;
    virtual LlrFrame equalize_demap(const LlrFrame& apriori) = 0;
    virtual void end_round() {}
    /// False for genie receivers that synthesize their own statistics.
    virtual bool needs_propagation() const { return true; }
    virtual std::uint64_t additions() const { return 0; }
};

/// Joint MMSE FDE over all rounds via the accumulated (ytilde, D_i) state.
class ChipLevelReceiver : public FrameReceiver {
public:
    ChipLevelReceiver(const SystemConfig& cfg, const WalshMatrix& w, double sigma2);

    void start_round(int round, const ChannelRealization& h, const ChannelFrequencyResponse& lambda,
                     const BlockVector& y_f, std::mt19937_64& rng) override;
    LlrFrame equalize_demap(const LlrFrame& apriori) override;
    std::uint64_t additions() const override { return state_.meter().additions; }

    const ChipCombinerState& state() const { return state_; }

private:
    const SystemConfig* cfg_;
    const WalshMatrix* w_;
    double sigma2_;
    ChipCombinerState state_;
    BlockDftWorkspace dft_;
};

/// Per-round MMSE FDE with combining at the demapper metric level.
class SymbolLevelReceiver : public FrameReceiver {
public:
    SymbolLevelReceiver(const SystemConfig& cfg, const WalshMatrix& w, double sigma2);

    void start_round(int round, const ChannelRealization& h, const ChannelFrequencyResponse& lambda,
                     const BlockVector& y_f, std::mt19937_64& rng) override;
    LlrFrame equalize_demap(const LlrFrame& apriori) override;
    void end_round() override;
    std::uint64_t additions() const override { return accum_.meter().additions; }

    const SymbolCombinerState& state() const { return accum_; }

private:
    const SystemConfig* cfg_;
    const WalshMatrix* w_;
    double sigma2_;
    int round_ = 0;
    SymbolCombinerState accum_;
    BlockVector ytilde_cur_;
    std::vector<cd> gram_cur_;
    DespreadOutput last_despread_;
    bool have_despread_ = false;
    BlockDftWorkspace dft_;
};

/// Matched filter bound: every symbol rides its spread waveform alone and is
/// maximal-ratio combined over taps, receive antennas and rounds.
class MfbReceiver : public FrameReceiver {
public:
    MfbReceiver(const SystemConfig& cfg, const WalshMatrix& w, const SymbolBlock& truth,
                double sigma2);

    void start_round(int round, const ChannelRealization& h, const ChannelFrequencyResponse& lambda,
                     const BlockVector& y_f, std::mt19937_64& rng) override;
    LlrFrame equalize_demap(const LlrFrame& apriori) override;
    bool needs_propagation() const override { return false; }

    /// Post-combining matched-filter energy of one symbol slot (test hook).
    double combined_energy(int t, int j) const {
        return energy_[std::size_t(t) * truth_->symbols_per_antenna + j];
    }

private:
    const SystemConfig* cfg_;
    const WalshMatrix* w_;
    const SymbolBlock* truth_;
    double sigma2_;
    std::vector<double> energy_;  // accumulated per (t, j)
    std::vector<cd> mf_;          // accumulated matched-filter outputs
};

std::unique_ptr<FrameReceiver> make_receiver(ReceiverKind kind, const SystemConfig& cfg,
                                             const WalshMatrix& w, const SymbolBlock& truth,
                                             double sigma2);

}  // namespace cpcdma

#endif
