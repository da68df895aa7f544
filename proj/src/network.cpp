#include "cscn/network.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <ATen/CPUGeneratorImpl.h>

#include "cscn/error.hpp"

namespace cscn {

namespace F = torch::nn::functional;

int group_count(int channels, int requested) {
    if (channels < 1 || requested < 1) throw InvalidArgument("group count needs positive channels");
    return std::gcd(channels, requested);
}

std::vector<int> linear_schedule(int stages, int width) {
    std::vector<int> out(stages);
    for (int s = 0; s < stages; ++s) out[s] = width * (s + 1);
    return out;
}

int stage_extent(int extent, int stage) {
    for (int s = 0; s < stage; ++s) extent = (extent + 1) / 2;
    return extent;
}

void validate(const ConvBlockConfig& cfg) {
    if (cfg.in_channels < 1 || cfg.out_channels < 1) throw InvalidArgument("conv block channels must be positive");
    if (cfg.kernel != 3 && cfg.kernel != 5) throw InvalidArgument("conv block kernel must be 3 or 5");
    if (cfg.groups < 1 || cfg.out_channels % cfg.groups != 0) {
        throw InvalidArgument("GN groups must divide out_channels");
    }
}

void validate(const EncoderConfig& cfg) {
    if (cfg.stages < 2) throw InvalidArgument("encoder needs at least 2 stages");
    if (static_cast<int>(cfg.channel_schedule.size()) != cfg.stages) {
        throw InvalidArgument("channel schedule length must equal stage count");
    }
    if (cfg.input_bands < 1) throw InvalidArgument("encoder input bands must be positive");
    for (int c : cfg.channel_schedule)
        if (c < 1) throw InvalidArgument("channel schedule entries must be positive");
}

ConvBlockImpl::ConvBlockImpl(const ConvBlockConfig& cfg) : cfg_(cfg) {
    validate(cfg);
    conv = register_module(
        "conv", nn::Conv2d(nn::Conv2dOptions(cfg.in_channels, cfg.out_channels, cfg.kernel).padding(cfg.kernel / 2)));
    norm = register_module("norm", nn::GroupNorm(nn::GroupNormOptions(cfg.groups, cfg.out_channels)));
}

FeatureMap ConvBlockImpl::forward(const FeatureMap& x) {
    if (x.dim() != 4 || x.size(1) != cfg_.in_channels) {
        throw ChannelMismatch("conv block expects " + std::to_string(cfg_.in_channels) + " channels, got " +
                              (x.dim() == 4 ? std::to_string(x.size(1)) : std::string("a non-NCHW tensor")));
    }
    return torch::relu(norm->forward(conv->forward(x)));
}

DownsampleImpl::DownsampleImpl(int channels) {
    conv = register_module("conv", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).stride(2).padding(1)));
}

FeatureMap DownsampleImpl::forward(const FeatureMap& x) {
    if (x.size(2) < 2 || x.size(3) < 2) {
        throw TooSmall("cannot downsample a " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) +
                       " feature map");
    }
    return torch::relu(conv->forward(x));
}

EncoderImpl::EncoderImpl(const EncoderConfig& cfg) : cfg_(cfg) {
    validate(cfg);
    int in = cfg.input_bands;
    for (int s = 0; s < cfg.stages; ++s) {
        const int out = cfg.channel_schedule[s];
        blocks_->push_back(ConvBlock(ConvBlockConfig{in, out, cfg.kernel, group_count(out, cfg.gn_groups)}));
        downsamplers_->push_back(Downsample(out));
        in = out;
    }
    register_module("blocks", blocks_);
    register_module("downsamplers", downsamplers_);
}

std::vector<FeatureMap> EncoderImpl::forward(const FeatureMap& x) {
    if (x.dim() != 4 || x.size(1) != cfg_.input_bands) {
        throw ChannelMismatch("encoder expects " + std::to_string(cfg_.input_bands) + " input bands");
    }
    std::vector<FeatureMap> stages;
    FeatureMap h = x;
    for (int s = 0; s < cfg_.stages; ++s) {
        h = blocks_[s]->as<ConvBlockImpl>()->forward(h);
        h = downsamplers_[s]->as<DownsampleImpl>()->forward(h);
        stages.push_back(h);
    }
    return stages;
}

MiniDecoderImpl::MiniDecoderImpl(const EncoderConfig& cfg, int classes) {
    validate(cfg);
    const int n = cfg.stages;
    int in = cfg.channel_schedule[n - 1];
    for (int i = 1; i <= n; ++i) {
        const int out = i < n ? cfg.channel_schedule[n - 1 - i] : cfg.channel_schedule[0];
        blocks_->push_back(ConvBlock(ConvBlockConfig{in, out, cfg.kernel, group_count(out, cfg.gn_groups)}));
        in = out;
    }
    register_module("blocks", blocks_);
    head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(in, classes, 1)));
}

MiniDecoderOutput MiniDecoderImpl::forward(const FeatureMap& deepest,
                                           const std::vector<std::pair<int64_t, int64_t>>& sizes) {
    const auto n = blocks_->size();
    if (sizes.size() != n + 1) throw ShapeMismatch("mini decoder needs one size per stage plus the input size");
    FeatureMap h = deepest;
    for (std::size_t i = 1; i <= n; ++i) {
        h = resize_nearest(h, sizes[n - i]);
        h = blocks_[i - 1]->as<ConvBlockImpl>()->forward(h);
    }
    return {head_->forward(h), h};
}

ClassifyHeadImpl::ClassifyHeadImpl(int in_channels, int classes) {
    conv = register_module("conv", nn::Conv2d(nn::Conv2dOptions(in_channels, classes, 1)));
}

torch::Tensor ClassifyHeadImpl::forward(const FeatureMap& fused, std::pair<int64_t, int64_t> output_size) {
    return conv->forward(resize_bilinear(fused, output_size));
}

FeatureMap resize_nearest(const FeatureMap& x, std::pair<int64_t, int64_t> size) {
    if (x.size(2) == size.first && x.size(3) == size.second) return x;
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{size.first, size.second})
                                 .mode(torch::kNearest));
}

FeatureMap resize_bilinear(const FeatureMap& x, std::pair<int64_t, int64_t> size) {
    if (x.size(2) == size.first && x.size(3) == size.second) return x;
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{size.first, size.second})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
}

namespace {

void init_one(nn::Module& sub, at::Generator& gen) {
    if (auto* norm = sub.as<nn::GroupNormImpl>()) {
        norm->weight.fill_(1.0);
        norm->bias.zero_();
        return;
    }
    if (auto* norm = sub.as<nn::LayerNormImpl>()) {
        norm->weight.fill_(1.0);
        norm->bias.zero_();
        return;
    }
    torch::Tensor weight, bias;
    if (auto* conv = sub.as<nn::Conv2dImpl>()) {
        weight = conv->weight;
        bias = conv->bias;
    } else if (auto* linear = sub.as<nn::LinearImpl>()) {
        weight = linear->weight;
        bias = linear->bias;
    } else {
        return;
    }
    const double fan_in = static_cast<double>(weight[0].numel());
    const double bound = 1.0 / std::sqrt(fan_in);
    weight.uniform_(-bound, bound, gen);
    if (bias.defined()) bias.uniform_(-bound, bound, gen);
}

}  // namespace

void init_parameters(nn::Module& module, std::uint64_t seed) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    torch::NoGradGuard no_grad;
    init_one(module, gen);
    for (auto& sub : module.modules(/*include_self=*/false)) init_one(*sub, gen);
}

std::int64_t parameter_count(const nn::Module& module) {
    std::int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

}  // namespace cscn
