#ifndef CPCDMA_SISO_DECODER_HPP
#define CPCDMA_SISO_DECODER_HPP

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cpcdma/config.hpp"

namespace cpcdma {

/// 16-state trellis of the rate-1/2 code. State holds the last four inputs,
/// most recent in the MSB; branch outputs are (first generator, second).
struct Trellis {
    struct Branch {
        int next = 0;
        std::uint8_t out0 = 0, out1 = 0;
    };
    int states = 0;
    std::array<std::array<Branch, 2>, 16> branch{};  // [state][input]

    static Trellis build(const SystemConfig& cfg);
};

/// Max-Log-MAP over the zero-terminated trellis. LLR convention throughout:
/// positive means bit 0 is more likely.
class MaxLogMapDecoder {
public:
    explicit MaxLogMapDecoder(const SystemConfig& cfg);

    /// coded_llrs: 2*(info+tail) a-priori values in code order.
    /// extrinsic_out: same length, a-posteriori minus the bit's own input.
    /// info_out: hard decisions on the info bits (tail dropped).
    void decode(std::span<const double> coded_llrs, std::span<double> extrinsic_out,
                std::vector<std::uint8_t>& info_out);

    int coded_length() const { return 2 * (info_len_ + tail_len_); }
    int info_length() const { return info_len_; }

private:
    Trellis trellis_;
    int info_len_ = 0;
    int tail_len_ = 0;
    std::vector<double> alpha_;  // (steps+1) x 16
    std::vector<double> beta_;
};

}  // namespace cpcdma

#endif
