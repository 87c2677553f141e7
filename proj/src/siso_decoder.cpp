#include "cpcdma/siso_decoder.hpp"

#include <algorithm>
#include <limits>

#include "cpcdma/errors.hpp"

namespace cpcdma {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Trellis Trellis::build(const SystemConfig& cfg) {
    Trellis t;
    const int m = cfg.constraint_len - 1;
    t.states = 1 << m;
    for (int s = 0; s < t.states; ++s) {
        for (int u = 0; u < 2; ++u) {
            const unsigned reg = (unsigned(u) << m) | unsigned(s);
            Branch b;
            b.out0 = std::uint8_t(__builtin_popcount(reg & cfg.generators[0]) & 1);
            b.out1 = std::uint8_t(__builtin_popcount(reg & cfg.generators[1]) & 1);
            b.next = int((unsigned(s) >> 1) | (unsigned(u) << (m - 1)));
            t.branch[s][u] = b;
        }
    }
    return t;
}

MaxLogMapDecoder::MaxLogMapDecoder(const SystemConfig& cfg)
    : trellis_(Trellis::build(cfg)), info_len_(cfg.info_bits()), tail_len_(cfg.tail_bits()) {
    const int steps = info_len_ + tail_len_;
    alpha_.assign(std::size_t(steps + 1) * 16, kNegInf);
    beta_.assign(std::size_t(steps + 1) * 16, kNegInf);
}

void MaxLogMapDecoder::decode(std::span<const double> coded_llrs, std::span<double> extrinsic_out,
                              std::vector<std::uint8_t>& info_out) {
    const int steps = info_len_ + tail_len_;
    if (int(coded_llrs.size()) != 2 * steps)
        throw BadLength("maxlog_decode: expected " + std::to_string(2 * steps) +
                        " coded LLRs, got " + std::to_string(coded_llrs.size()));
    if (extrinsic_out.size() != coded_llrs.size())
        throw BadLength("maxlog_decode: extrinsic buffer size mismatch");

    const int S = trellis_.states;
    // Bit metric: +llr/2 for a hypothesized 0, -llr/2 for a 1.
    auto gamma = [&](int step, const Trellis::Branch& b) {
        const double l0 = coded_llrs[2 * step];
        const double l1 = coded_llrs[2 * step + 1];
        return 0.5 * (b.out0 ? -l0 : l0) + 0.5 * (b.out1 ? -l1 : l1);
    };

    std::fill(alpha_.begin(), alpha_.end(), kNegInf);
    std::fill(beta_.begin(), beta_.end(), kNegInf);
    alpha_[0] = 0.0;
    for (int step = 0; step < steps; ++step) {
        const int umax = (step >= info_len_) ? 0 : 1;  // tail forces zeros
        double* a = alpha_.data() + std::size_t(step) * S;
        double* an = alpha_.data() + std::size_t(step + 1) * S;
        for (int s = 0; s < S; ++s) {
            if (a[s] == kNegInf) continue;
            for (int u = 0; u <= umax; ++u) {
                const auto& b = trellis_.branch[s][u];
                const double cand = a[s] + gamma(step, b);
                if (cand > an[b.next]) an[b.next] = cand;
            }
        }
    }
    beta_[std::size_t(steps) * S] = 0.0;  // zero termination
    for (int step = steps; step-- > 0;) {
        const int umax = (step >= info_len_) ? 0 : 1;
        double* bt = beta_.data() + std::size_t(step) * S;
        const double* bn = beta_.data() + std::size_t(step + 1) * S;
        for (int s = 0; s < S; ++s) {
            for (int u = 0; u <= umax; ++u) {
                const auto& b = trellis_.branch[s][u];
                if (bn[b.next] == kNegInf) continue;
                const double cand = bn[b.next] + gamma(step, b);
                if (cand > bt[s]) bt[s] = cand;
            }
        }
    }

    info_out.resize(info_len_);
    for (int step = 0; step < steps; ++step) {
        const int umax = (step >= info_len_) ? 0 : 1;
        const double* a = alpha_.data() + std::size_t(step) * S;
        const double* bn = beta_.data() + std::size_t(step + 1) * S;
        double best_c0[2] = {kNegInf, kNegInf};  // coded bit 0 equal to 0 / 1
        double best_c1[2] = {kNegInf, kNegInf};
        double best_u[2] = {kNegInf, kNegInf};
        for (int s = 0; s < S; ++s) {
            if (a[s] == kNegInf) continue;
            for (int u = 0; u <= umax; ++u) {
                const auto& b = trellis_.branch[s][u];
                if (bn[b.next] == kNegInf) continue;
                const double w = a[s] + gamma(step, b) + bn[b.next];
                if (w > best_c0[b.out0]) best_c0[b.out0] = w;
                if (w > best_c1[b.out1]) best_c1[b.out1] = w;
                if (w > best_u[u]) best_u[u] = w;
            }
        }
        const double post0 = best_c0[0] - best_c0[1];
        const double post1 = best_c1[0] - best_c1[1];
        extrinsic_out[2 * step] = post0 - coded_llrs[2 * step];
        extrinsic_out[2 * step + 1] = post1 - coded_llrs[2 * step + 1];
        if (step < info_len_) info_out[step] = (best_u[0] - best_u[1]) >= 0.0 ? 0 : 1;
    }
}

}  // namespace cpcdma
