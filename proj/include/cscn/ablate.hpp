#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cscn/train.hpp"

namespace cscn {

enum class AblationAxis { Components, InputFormat, DerivativeOrder, Lambda, Stages, FusionChannels, Kernel };

AblationAxis parse_axis(const std::string& name);
const char* to_string(AblationAxis axis);

struct AblationVariant {
    std::string label;
    TrainConfig config;
};

// The enumerated variants of one axis, derived from `base`.
std::vector<AblationVariant> ablation_variants(const TrainConfig& base, AblationAxis axis);

struct AblationRow {
    std::string label;
    TrainConfig config;
    std::vector<RunRecord> runs;  // one per seed; models are dropped
    double mean_oa = 0.0;
    double mean_aa = 0.0;
    double mean_kappa = 0.0;
    double mean_cf1 = 0.0;
};

// Builds the dataset for one seed (a fixed dataset may ignore it).
using DatasetFactory = std::function<Dataset(std::uint64_t seed)>;
using AblationProgress = std::function<void(const std::string& label, std::uint64_t seed, const RunRecord&)>;

// Runs every variant on every seed. Each run is independent and seeded with
// its own seed; the dataset for seed s is shared by all variants.
std::vector<AblationRow> ablate(const TrainConfig& base, AblationAxis axis, const DatasetFactory& data,
                                const std::vector<std::uint64_t>& seeds, const AblationProgress& progress = {});

std::vector<AblationRow> run_variants(const std::vector<AblationVariant>& variants, const DatasetFactory& data,
                                      const std::vector<std::uint64_t>& seeds, const AblationProgress& progress = {});

// Desk-scale synthetic benchmark: Adam at lr 1e-3 for 60 epochs, 3 stages of
// width 8, 16 fusion and projection channels.
TrainConfig desk_benchmark_config();

// 32x32, 16 bands, 6 classes with confusable pairs {1,2} and {3,4}.
SynthSceneSpec benchmark_scene_spec();

// Scene seeded with seed + 100, split at `ratio` with the run seed.
DatasetFactory benchmark_datasets(double ratio = 0.3);

// label, seeds, mean_oa, mean_aa, mean_kappa, mean_cf1, then per-seed CF1.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace cscn
