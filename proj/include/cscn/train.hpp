#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cscn/config.hpp"
#include "cscn/data.hpp"
#include "cscn/error.hpp"
#include "cscn/losses.hpp"
#include "cscn/metrics.hpp"
#include "cscn/model.hpp"

namespace cscn {

struct Dataset {
    HsiCube cube;     // raw reflectance
    LabelMask mask;
    SplitMask split;
};

struct RunRecord {
    TrainConfig config;
    std::vector<LossBreakdown> trace;  // one entry per epoch
    EvalReport report;                 // test split only
    double seconds = 0.0;
    std::filesystem::path checkpoint;  // empty when not saved
    CscnModel model{nullptr};
};

// Thrown when a loss turns NaN/Inf; carries the trace up to and including the
// offending step.
struct DivergenceDetected : Error {
    DivergenceDetected(const std::string& what, std::vector<LossBreakdown> partial)
        : Error(what), trace(std::move(partial)) {}
    std::vector<LossBreakdown> trace;
};

struct TrainOptions {
    std::filesystem::path checkpoint;                       // save when non-empty
    std::function<void(int, const LossBreakdown&)> on_step;  // optional progress hook
};

// Full-image training: one forward/backward per epoch over the whole scene,
// with every loss restricted to train-split pixels.
RunRecord train(const Dataset& data, const TrainConfig& cfg, const TrainOptions& options = {});

// Argmax class labels (1..C_g) for every pixel, row-major.
std::vector<std::uint16_t> predict(CscnModel& model, const ModelInputs& inputs);

EvalReport evaluate_model(CscnModel& model, const ModelInputs& inputs, const LabelMask& mask,
                          const std::vector<std::uint8_t>& region);

struct Checkpoint {
    TrainConfig config;
    int magnitude_bands = 0;
    int derivative_bands = 0;
    int classes = 0;
    CscnModel model{nullptr};
};

// `<path>` holds the little-endian float32 parameter payload and
// `<path>.manifest` maps parameter names to (offset, shape).
void save_checkpoint(CscnModel& model, const TrainConfig& cfg, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);

EvalReport evaluate(const std::filesystem::path& checkpoint, const HsiCube& cube, const LabelMask& mask,
                    const SplitMask& split);

std::string trace_csv(const std::vector<LossBreakdown>& trace);

}  // namespace cscn
