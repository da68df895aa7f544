#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace cscn {

namespace nn = torch::nn;

// Feature maps are NCHW tensors with N = 1 (one scene per step).
using FeatureMap = torch::Tensor;

struct ConvBlockConfig {
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 3;
    int groups = 8;
};

struct EncoderConfig {
    int stages = 4;
    std::vector<int> channel_schedule{64, 128, 192, 256};
    int input_bands = 1;
    int kernel = 3;
    int gn_groups = 8;
};

// GN group count for `channels`: the requested count when it divides,
// otherwise the largest common divisor of the two.
int group_count(int channels, int requested);

// Linear schedule width*(1..stages); the default [64,128,192,256] is width 64.
std::vector<int> linear_schedule(int stages, int width);

// Spatial size after `stage` stride-2 halvings (ceil).
int stage_extent(int extent, int stage);

void validate(const ConvBlockConfig& cfg);
void validate(const EncoderConfig& cfg);

// ReLU(GN(Conv(x))) with "same" padding.
class ConvBlockImpl : public nn::Module {
public:
    explicit ConvBlockImpl(const ConvBlockConfig& cfg);
    FeatureMap forward(const FeatureMap& x);

    const ConvBlockConfig& config() const { return cfg_; }
    nn::Conv2d conv{nullptr};
    nn::GroupNorm norm{nullptr};

private:
    ConvBlockConfig cfg_;
};
TORCH_MODULE(ConvBlock);

// Stride-2 3x3 conv + ReLU, padding 1, so each spatial dim becomes ceil(d/2).
class DownsampleImpl : public nn::Module {
public:
    explicit DownsampleImpl(int channels);
    FeatureMap forward(const FeatureMap& x);

    nn::Conv2d conv{nullptr};
};
TORCH_MODULE(Downsample);

// N x (conv block, downsample). Returns the post-downsample feature of every
// stage, shallowest first.
class EncoderImpl : public nn::Module {
public:
    explicit EncoderImpl(const EncoderConfig& cfg);
    std::vector<FeatureMap> forward(const FeatureMap& x);

    const EncoderConfig& config() const { return cfg_; }

private:
    EncoderConfig cfg_;
    nn::ModuleList blocks_;
    nn::ModuleList downsamplers_;
};
TORCH_MODULE(Encoder);

struct MiniDecoderOutput {
    torch::Tensor logits;   // [1, C_g, H, W]
    FeatureMap last_feature;  // input to the 1x1 head
};

// Coarse per-branch predictor: N x (nearest upsample, conv block) walking
// back up the encoder's stage sizes, then a 1x1 conv to C_g.
class MiniDecoderImpl : public nn::Module {
public:
    MiniDecoderImpl(const EncoderConfig& cfg, int classes);
    // `sizes[s]` is the (H, W) of stage s, with sizes[0] the input size.
    MiniDecoderOutput forward(const FeatureMap& deepest, const std::vector<std::pair<int64_t, int64_t>>& sizes);

private:
    nn::ModuleList blocks_;
    nn::Conv2d head_{nullptr};
};
TORCH_MODULE(MiniDecoder);

// Bilinear upsample to full resolution, then 1x1 conv to C_g.
class ClassifyHeadImpl : public nn::Module {
public:
    ClassifyHeadImpl(int in_channels, int classes);
    torch::Tensor forward(const FeatureMap& fused, std::pair<int64_t, int64_t> output_size);

    nn::Conv2d conv{nullptr};
};
TORCH_MODULE(ClassifyHead);

FeatureMap resize_nearest(const FeatureMap& x, std::pair<int64_t, int64_t> size);
FeatureMap resize_bilinear(const FeatureMap& x, std::pair<int64_t, int64_t> size);

// Fan-in scaled uniform init of every parameter of `module` from a private
// generator: weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); norm
// layers get unit scale and zero shift.
void init_parameters(nn::Module& module, std::uint64_t seed);

std::int64_t parameter_count(const nn::Module& module);

}  // namespace cscn
