#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "cpcdma/cli.hpp"
#include "cpcdma/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Monte-Carlo throughput simulator for multi-code CP-CDMA MIMO with Chase ARQ"};

    std::string config_path, preset, receiver, out_stem;
    long long seed = -1, frames = -1, threads = -1;
    double snr_start = 1e9, snr_stop = 1e9, snr_step = 1e9;
    bool quiet = false;

    app.add_option("--config", config_path, "key = value config file");
    app.add_option("--preset", preset, "named parameter preset (overrides config preset)");
    app.add_option("--receiver", receiver, "comma list of chip|symbol|mfb");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--frames", frames, "frames per SNR point");
    app.add_option("--out", out_stem, "output stem; writes <stem>.<receiver>.csv");
    app.add_option("--threads", threads, "worker threads (default: hardware)");
    app.add_option("--snr-start", snr_start, "grid start, dB");
    app.add_option("--snr-stop", snr_stop, "grid stop, dB");
    app.add_option("--snr-step", snr_step, "grid step, dB");
    app.add_flag("--quiet", quiet, "suppress progress output");

    CLI11_PARSE(app, argc, argv);

    try {
        cpcdma::RunManifest m =
            config_path.empty() ? cpcdma::default_manifest() : cpcdma::parse_config(config_path);
        // Flags override file values.
        if (!preset.empty()) cpcdma::apply_preset(m, preset);
        if (!receiver.empty()) cpcdma::apply_key(m, "receiver", receiver);
        if (seed >= 0) cpcdma::apply_key(m, "seed", std::to_string(seed));
        if (frames >= 0) cpcdma::apply_key(m, "frames", std::to_string(frames));
        if (threads >= 0) cpcdma::apply_key(m, "threads", std::to_string(threads));
        if (!out_stem.empty()) cpcdma::apply_key(m, "out", out_stem);
        if (snr_start < 1e8) cpcdma::apply_key(m, "snr_start", std::to_string(snr_start));
        if (snr_stop < 1e8) cpcdma::apply_key(m, "snr_stop", std::to_string(snr_stop));
        if (snr_step < 1e8) cpcdma::apply_key(m, "snr_step", std::to_string(snr_step));
        m.cfg.validate();
        return cpcdma::run(m, !quiet);
    } catch (const cpcdma::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
