#ifndef CPCDMA_ARQ_SIM_HPP
#define CPCDMA_ARQ_SIM_HPP

#include <cstdint>
#include <vector>

#include "cpcdma/config.hpp"
#include "cpcdma/receivers.hpp"
#include "cpcdma/siso_decoder.hpp"

namespace cpcdma {

struct ArqOutcome {
    int rounds_used = 0;
    bool success = false;
    int r_delivered = 0;  // R on success, 0 otherwise
};

/// Per-SNR-point accumulators. All sums are integers so aggregation order
/// (and therefore worker count) never changes the reported values.
struct ThroughputStats {
    std::int64_t sum_r = 0, sum_k = 0;
    std::int64_t sum_r2 = 0, sum_k2 = 0, sum_rk = 0;
    std::int64_t frames = 0;

    void add(const ArqOutcome& o);
    void merge(const ThroughputStats& o);

    double eta() const;           // E[R]/E[K] estimate
    double ci_halfwidth() const;  // 95% normal-approximation half width
    double mean_rounds() const;
};

/// Chase ARQ session for one frame: identical chips re-sent every round,
/// genie error detection (bit-exact info comparison) decides ACK/NACK after
/// each decoding attempt.
ArqOutcome run_frame(const SystemConfig& cfg, ReceiverKind kind, double ecn0_db,
                     std::uint64_t master_seed, std::uint64_t frame_index);

struct SweepPoint {
    double ecn0_db = 0.0;
    ThroughputStats stats;
};

/// Monte-Carlo sweep over cfg.snr_grid_db, frame-parallel. Results are
/// reproducible for a given (cfg, master_seed) regardless of thread count.
std::vector<SweepPoint> run_sweep(const SystemConfig& cfg, ReceiverKind kind,
                                  std::uint64_t master_seed, int threads, bool progress);

/// Counter/state-size probes that drive the real combining recursions through
/// a full K-round, N_iter-iteration schedule on dummy data.
struct CombiningCost {
    std::uint64_t state_reals = 0;
    std::uint64_t additions = 0;
};
CombiningCost chip_combining_cost(const SystemConfig& cfg);
CombiningCost symbol_combining_cost(const SystemConfig& cfg);

}  // namespace cpcdma

#endif
