#include "cscn/fusion.hpp"

#include <cmath>

#include "cscn/error.hpp"

namespace cscn {

PointWeights pair_softmax(const torch::Tensor& score_magnitude, const torch::Tensor& score_derivative) {
    auto w = torch::softmax(torch::stack({score_magnitude, score_derivative}, 0), 0);
    return {w[0], w[1]};
}

FeatureMap fuse_point(const FeatureMap& x_magnitude, const FeatureMap& x_derivative, const PointWeights& weights) {
    if (!x_magnitude.sizes().equals(x_derivative.sizes())) throw SpatialMismatch("fused embeddings differ in shape");
    return weights.magnitude * x_magnitude + weights.derivative * x_derivative;
}

FusionStageImpl::FusionStageImpl(const FusionStageConfig& cfg) : cfg_(cfg) {
    const int cf = cfg.fusion_channels;
    if (cf < 1) throw InvalidArgument("fusion channels must be positive");
    embed_magnitude = register_module("embed_magnitude", nn::Conv2d(nn::Conv2dOptions(cfg.magnitude_channels, cf, 1)));
    if (cfg.mode != FusionMode::Single) {
        embed_derivative =
            register_module("embed_derivative", nn::Conv2d(nn::Conv2dOptions(cfg.derivative_channels, cf, 1)));
    }
    if (cfg.mode == FusionMode::Adaptive) {
        query = register_module("query", nn::Conv2d(nn::Conv2dOptions(cf, cf, 1).bias(false)));
        key_magnitude = register_module("key_magnitude", nn::Conv2d(nn::Conv2dOptions(cf, cf, 1).bias(false)));
        key_derivative = register_module("key_derivative", nn::Conv2d(nn::Conv2dOptions(cf, cf, 1).bias(false)));
    }
    refine = register_module("refine", ConvBlock(ConvBlockConfig{cf, cf, cfg.kernel, group_count(cf, cfg.gn_groups)}));
}

std::pair<FeatureMap, FeatureMap> FusionStageImpl::embed(const FeatureMap& f_magnitude,
                                                         const FeatureMap& f_derivative) {
    if (cfg_.mode == FusionMode::Single) return {embed_magnitude->forward(f_magnitude), FeatureMap{}};
    if (f_magnitude.size(2) != f_derivative.size(2) || f_magnitude.size(3) != f_derivative.size(3)) {
        throw SpatialMismatch("branch features must share spatial dims");
    }
    return {embed_magnitude->forward(f_magnitude), embed_derivative->forward(f_derivative)};
}

PointWeights FusionStageImpl::point_weights(const FeatureMap& state, const FeatureMap& x_magnitude,
                                            const FeatureMap& x_derivative) {
    if (cfg_.mode != FusionMode::Adaptive) throw InvalidArgument("point weights exist only in adaptive mode");
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.fusion_channels));
    auto q = query->forward(state);
    auto s_m = (q * key_magnitude->forward(x_magnitude)).sum(1, /*keepdim=*/true) * scale;
    auto s_d = (q * key_derivative->forward(x_derivative)).sum(1, /*keepdim=*/true) * scale;
    return pair_softmax(s_m, s_d);
}

FusionStageOutput FusionStageImpl::forward(const FeatureMap& state, const FeatureMap& f_magnitude,
                                           const FeatureMap& f_derivative) {
    auto [x_m, x_d] = embed(f_magnitude, f_derivative);
    if (cfg_.mode == FusionMode::Single) return {refine->forward(x_m), {}};

    PointWeights weights;
    if (cfg_.mode == FusionMode::Average) {
        auto half = torch::full({1, 1, x_m.size(2), x_m.size(3)}, 0.5, x_m.options());
        weights = {half, half};
    } else {
        FeatureMap query_state = state.defined() ? state : 0.5 * (x_m + x_d);
        if (query_state.size(2) != x_m.size(2) || query_state.size(3) != x_m.size(3)) {
            throw SpatialMismatch("fusion state does not match the stage resolution");
        }
        weights = point_weights(query_state, x_m, x_d);
    }
    return {refine->forward(fuse_point(x_m, x_d, weights)), weights};
}

FusionPathwayImpl::FusionPathwayImpl(const std::vector<int>& magnitude_channels,
                                     const std::vector<int>& derivative_channels, int fusion_channels, int kernel,
                                     int gn_groups, FusionMode mode)
    : mode_(mode) {
    if (mode != FusionMode::Single && magnitude_channels.size() != derivative_channels.size()) {
        throw InvalidArgument("branch stage counts differ");
    }
    for (std::size_t s = 0; s < magnitude_channels.size(); ++s) {
        FusionStageConfig cfg{magnitude_channels[s], mode == FusionMode::Single ? 0 : derivative_channels[s],
                              fusion_channels,        kernel,
                              gn_groups,              mode};
        stages_->push_back(FusionStage(cfg));
    }
    register_module("stages", stages_);
}

FusionOutput FusionPathwayImpl::forward(const std::vector<FeatureMap>& magnitude,
                                        const std::vector<FeatureMap>& derivative) {
    const std::size_t n = stages_->size();
    if (magnitude.size() != n || (mode_ != FusionMode::Single && derivative.size() != n)) {
        throw ShapeMismatch("fusion pathway got the wrong number of stage features");
    }
    FusionOutput out;
    FeatureMap state;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t s = n - 1 - k;  // deepest first
        const FeatureMap& f_d = mode_ == FusionMode::Single ? FeatureMap{} : derivative[s];
        auto stage = stages_[s]->as<FusionStageImpl>()->forward(state, magnitude[s], f_d);
        out.weights.push_back(stage.weights);
        if (s == 0) {
            out.fused = stage.refined;
        } else {
            state = resize_bilinear(stage.refined, {magnitude[s - 1].size(2), magnitude[s - 1].size(3)});
        }
    }
    return out;
}

}  // namespace cscn
