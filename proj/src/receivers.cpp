#include "cpcdma/receivers.hpp"

#include <cmath>

#include "cpcdma/errors.hpp"

namespace cpcdma {

ChipLevelReceiver::ChipLevelReceiver(const SystemConfig& cfg, const WalshMatrix& w, double sigma2)
    : cfg_(&cfg), w_(&w), sigma2_(sigma2), state_(cfg.chips_per_block(), cfg.n_tx) {}

void ChipLevelReceiver::start_round(int round, const ChannelRealization&,
                                    const ChannelFrequencyResponse& lambda, const BlockVector& y_f,
                                    std::mt19937_64&) {
    state_.update(y_f, lambda, round);
}

LlrFrame ChipLevelReceiver::equalize_demap(const LlrFrame& apriori) {
    const ChipPriors priors = chip_priors_from_llrs(apriori, *w_, *cfg_);
    const EqualizerFilters filters = compute_filters(state_.gram_flat(), state_.bins(),
                                                     state_.n_tx(), priors.xi_bar, sigma2_);
    BlockVector xf = priors.xtilde;
    dft_.forward(xf);
    BlockVector z = mmse_estimate(filters, state_.ytilde(), xf);
    dft_.inverse(z);
    const DespreadOutput d = despread_and_stat(z, filters.upsilon, priors.xi_bar, *w_, *cfg_);
    return demap_chip_level(d, apriori, *cfg_);
}

SymbolLevelReceiver::SymbolLevelReceiver(const SystemConfig& cfg, const WalshMatrix& w,
                                         double sigma2)
    : cfg_(&cfg),
      w_(&w),
      sigma2_(sigma2),
      accum_(cfg.symbols_per_antenna, cfg.n_tx, cfg.bits_per_symbol),
      ytilde_cur_(std::size_t(cfg.chips_per_block()), std::size_t(cfg.n_tx)) {
    gram_cur_.assign(std::size_t(cfg.chips_per_block()) * cfg.n_tx * cfg.n_tx, cd{});
}

void SymbolLevelReceiver::start_round(int round, const ChannelRealization&,
                                      const ChannelFrequencyResponse& lambda,
                                      const BlockVector& y_f, std::mt19937_64&) {
    if (round != round_ + 1)
        throw RoundOrderViolation("symbol receiver: rounds must be consecutive");
    round_ = round;
    // Single-round statistics: ytilde = Lambda^H y_f, D_i = Lambda_i^H Lambda_i.
    const int bins = cfg_->chips_per_block(), n_tx = cfg_->n_tx, n_rx = cfg_->n_rx;
    std::fill(ytilde_cur_.data.begin(), ytilde_cur_.data.end(), cd{});
    SmallMatrix lam, g;
    for (int i = 0; i < bins; ++i) {
        lam.load(lambda.bin(i), n_rx, n_tx);
        adjoint_apply(lam, std::span<const cd>(&y_f.data[std::size_t(i) * n_rx], n_rx),
                      std::span<cd>(&ytilde_cur_.data[std::size_t(i) * n_tx], n_tx));
        gram_into(lam, g);
        g.store(std::span<cd>(gram_cur_.data() + std::size_t(i) * n_tx * n_tx,
                              std::size_t(n_tx) * n_tx));
    }
    have_despread_ = false;
}

LlrFrame SymbolLevelReceiver::equalize_demap(const LlrFrame& apriori) {
    const ChipPriors priors = chip_priors_from_llrs(apriori, *w_, *cfg_);
    const EqualizerFilters filters = compute_filters(gram_cur_, cfg_->chips_per_block(), cfg_->n_tx,
                                                     priors.xi_bar, sigma2_);
    BlockVector xf = priors.xtilde;
    dft_.forward(xf);
    BlockVector z = mmse_estimate(filters, ytilde_cur_, xf);
    dft_.inverse(z);
    last_despread_ = despread_and_stat(z, filters.upsilon, priors.xi_bar, *w_, *cfg_);
    have_despread_ = true;
    return accum_.demap_combined(last_despread_, apriori, *cfg_);
}

void SymbolLevelReceiver::end_round() {
    if (!have_despread_)
        throw RoundOrderViolation("symbol receiver: end_round before any iteration");
    accum_.commit_round(last_despread_, *cfg_, round_);
}

MfbReceiver::MfbReceiver(const SystemConfig& cfg, const WalshMatrix& w, const SymbolBlock& truth,
                         double sigma2)
    : cfg_(&cfg), w_(&w), truth_(&truth), sigma2_(sigma2) {
    energy_.assign(std::size_t(cfg.n_tx) * cfg.symbols_per_antenna, 0.0);
    mf_.assign(energy_.size(), cd{});
}

void MfbReceiver::start_round(int, const ChannelRealization& h, const ChannelFrequencyResponse&,
                              const BlockVector&, std::mt19937_64& rng) {
    const int N = cfg_->spreading, C = cfg_->codes, L = h.taps;
    const int Ts = cfg_->symbols_per_antenna;
    // Energy of each code's channel-convolved waveform, per transmit antenna.
    std::vector<double> code_energy(std::size_t(cfg_->n_tx) * C, 0.0);
    for (int t = 0; t < cfg_->n_tx; ++t) {
        for (int n = 0; n < C; ++n) {
            double e = 0.0;
            for (int r = 0; r < cfg_->n_rx; ++r) {
                for (int u = 0; u < N + L - 1; ++u) {
                    cd acc{};
                    for (int l = 0; l < L; ++l) {
                        const int p = u - l;
                        if (p >= 0 && p < N) acc += h.at(l, r, t) * (*w_)(p, n);
                    }
                    e += std::norm(acc);
                }
            }
            code_energy[std::size_t(t) * C + n] = e;
        }
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < cfg_->n_tx; ++t) {
        for (int j = 0; j < Ts; ++j) {
            const double e = code_energy[std::size_t(t) * C + (j % C)];
            const std::size_t sj = std::size_t(t) * Ts + j;
            cd noise{};
            if (sigma2_ > 0.0) {
                const double sd = std::sqrt(sigma2_ * e / 2.0);
                noise = cd(sd * gauss(rng), sd * gauss(rng));
            }
            mf_[sj] += e * truth_->at(t, j) + noise;
            energy_[sj] += e;
        }
    }
}

LlrFrame MfbReceiver::equalize_demap(const LlrFrame& apriori) {
    DespreadOutput d;
    d.n_tx = cfg_->n_tx;
    d.symbols = cfg_->symbols_per_antenna;
    d.r.resize(energy_.size());
    d.g.assign(energy_.size(), 1.0);
    d.theta2.resize(energy_.size());
    for (std::size_t i = 0; i < energy_.size(); ++i) {
        const double e = std::max(energy_[i], 1e-30);
        d.r[i] = mf_[i] / e;
        d.theta2[i] = std::max(sigma2_ / e, 1e-12);
    }
    return demap_chip_level(d, apriori, *cfg_);
}

std::unique_ptr<FrameReceiver> make_receiver(ReceiverKind kind, const SystemConfig& cfg,
                                             const WalshMatrix& w, const SymbolBlock& truth,
                                             double sigma2) {
    switch (kind) {
        case ReceiverKind::ChipLevel:
            return std::make_unique<ChipLevelReceiver>(cfg, w, sigma2);
        case ReceiverKind::SymbolLevel:
            return std::make_unique<SymbolLevelReceiver>(cfg, w, sigma2);
        case ReceiverKind::Mfb:
            return std::make_unique<MfbReceiver>(cfg, w, truth, sigma2);
    }
    throw ConfigError("receiver", "unknown receiver kind");
}

}  // namespace cpcdma
