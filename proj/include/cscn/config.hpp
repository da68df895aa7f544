#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cscn/spectra.hpp"

namespace cscn {

enum class OptimizerKind { AdaptiveMoment, MomentumSgd };

// Exactly one architecture is active per run.
enum class ArchMode {
    Dual,              // two encoders, non-shared parameters
    SingleMagnitude,   // baseline encoder-decoder on the magnitude cube
    SingleDerivative,  // baseline on the derivative cube
    Concat,            // one encoder on [magnitude ; derivative] channels
    Shared,            // two branches through one encoder
};

const char* to_string(OptimizerKind kind);
const char* to_string(ArchMode mode);

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::AdaptiveMoment;
    double learning_rate = 1e-4;
    double momentum = 0.9;
    int epochs = 50;
    double lambda = 1.0;
    std::uint64_t seed = 0;
    DerivativeSpec derivative{};

    int stages = 4;
    int channel_width = 64;             // schedule = width*(1..stages) when none given
    std::vector<int> channel_schedule;  // explicit override
    int fusion_channels = 128;
    int classes = 0;                    // C_g; 0 = take from the label mask
    int kernel = 3;
    int gn_groups = 8;
    int projection_dim = 128;

    ArchMode arch = ArchMode::Dual;
    bool no_cpfm = false;
    bool no_hd_loss = false;

    std::vector<int> schedule() const;
    bool uses_derivative() const { return arch != ArchMode::SingleMagnitude; }
    bool two_branches() const { return arch == ArchMode::Dual || arch == ArchMode::Shared; }
    bool hd_loss_active() const { return two_branches() && !no_hd_loss; }

    // Momentum SGD at lr 1e-3 for 600 epochs.
    static TrainConfig benchmark_preset();
};

void validate(const TrainConfig& cfg);

// Flat `key = value` text; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(const std::string& text);
TrainConfig config_from_key_values(const std::map<std::string, std::string>& kv, TrainConfig base = {});
std::string to_key_values(const TrainConfig& cfg);

// Parses a config file and applies the CSCN_SEED environment override.
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
void apply_env_overrides(TrainConfig& cfg);

}  // namespace cscn
