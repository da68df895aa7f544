#pragma once

#include <utility>
#include <vector>

#include <torch/torch.h>

#include "cscn/network.hpp"

namespace cscn {

// Adaptive: per-point attention weights. Average: fixed 0.5/0.5 blend (the
// no-CPFM ablation). Single: one branch only, no blending.
enum class FusionMode { Adaptive, Average, Single };

// Per-point branch weights, each [1, 1, H, W]; magnitude + derivative = 1.
struct PointWeights {
    torch::Tensor magnitude;
    torch::Tensor derivative;
};

struct FusionStageConfig {
    int magnitude_channels = 1;
    int derivative_channels = 1;  // ignored in Single mode
    int fusion_channels = 128;
    int kernel = 3;
    int gn_groups = 8;
    FusionMode mode = FusionMode::Adaptive;
};

// Two-way softmax over the score pair at each point.
PointWeights pair_softmax(const torch::Tensor& score_magnitude, const torch::Tensor& score_derivative);

// A_M * X_M + A_D * X_D, broadcasting the weights over channels.
FeatureMap fuse_point(const FeatureMap& x_magnitude, const FeatureMap& x_derivative, const PointWeights& weights);

struct FusionStageOutput {
    FeatureMap refined;      // [1, C_f, h, w] at this stage's resolution
    PointWeights weights;    // undefined tensors in Single mode
};

// One CPFM stage: embed both branches to C_f, weigh them per point against the
// query state, blend, then refine with a conv block at C_f.
class FusionStageImpl : public nn::Module {
public:
    explicit FusionStageImpl(const FusionStageConfig& cfg);

    std::pair<FeatureMap, FeatureMap> embed(const FeatureMap& f_magnitude, const FeatureMap& f_derivative);
    PointWeights point_weights(const FeatureMap& state, const FeatureMap& x_magnitude,
                               const FeatureMap& x_derivative);

    // `state` is the upsampled fused map of the previous (deeper) stage; pass an
    // undefined tensor at the deepest stage to seed it from the embeddings.
    FusionStageOutput forward(const FeatureMap& state, const FeatureMap& f_magnitude, const FeatureMap& f_derivative);

    const FusionStageConfig& config() const { return cfg_; }

    nn::Conv2d embed_magnitude{nullptr};
    nn::Conv2d embed_derivative{nullptr};
    nn::Conv2d query{nullptr};
    nn::Conv2d key_magnitude{nullptr};
    nn::Conv2d key_derivative{nullptr};
    ConvBlock refine{nullptr};

private:
    FusionStageConfig cfg_;
};
TORCH_MODULE(FusionStage);

struct FusionOutput {
    FeatureMap fused;                    // stage-1 refined map, input to the head
    std::vector<PointWeights> weights;   // deepest stage first
};

// Progressive pathway from the deepest stage up to stage 1, bilinearly
// upsampling the refined map between stages.
class FusionPathwayImpl : public nn::Module {
public:
    FusionPathwayImpl(const std::vector<int>& magnitude_channels, const std::vector<int>& derivative_channels,
                      int fusion_channels, int kernel, int gn_groups, FusionMode mode);

    // Branch features shallowest first, as returned by Encoder::forward.
    // `derivative` may be empty in Single mode.
    FusionOutput forward(const std::vector<FeatureMap>& magnitude, const std::vector<FeatureMap>& derivative);

private:
    FusionMode mode_;
    nn::ModuleList stages_;
};
TORCH_MODULE(FusionPathway);

}  // namespace cscn
