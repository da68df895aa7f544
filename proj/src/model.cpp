#include "cscn/model.hpp"

#include "cscn/error.hpp"

namespace cscn {

CscnModelImpl::CscnModelImpl(const TrainConfig& cfg, int magnitude_bands, int derivative_bands, int classes)
    : cfg_(cfg), magnitude_bands_(magnitude_bands), derivative_bands_(derivative_bands), classes_(classes) {
    validate(cfg);
    if (classes < 1) throw InvalidArgument("model needs at least one class");
    const auto schedule = cfg.schedule();

    EncoderConfig enc{cfg.stages, schedule, magnitude_bands, cfg.kernel, cfg.gn_groups};
    switch (cfg.arch) {
        case ArchMode::SingleDerivative: enc.input_bands = derivative_bands; break;
        case ArchMode::Concat: enc.input_bands = magnitude_bands + derivative_bands; break;
        case ArchMode::Shared:
            if (derivative_bands > magnitude_bands) throw InvalidArgument("derivative has more bands than magnitude");
            break;
        default: break;
    }
    encoder_primary_ = register_module("encoder_primary", Encoder(enc));
    if (cfg.arch == ArchMode::Dual) {
        EncoderConfig enc_d = enc;
        enc_d.input_bands = derivative_bands;
        encoder_derivative_ = register_module("encoder_derivative", Encoder(enc_d));
    }

    const FusionMode mode = !cfg.two_branches() ? FusionMode::Single
                            : cfg.no_cpfm       ? FusionMode::Average
                                                : FusionMode::Adaptive;
    fusion_ = register_module("fusion",
                              FusionPathway(schedule, schedule, cfg.fusion_channels, cfg.kernel, cfg.gn_groups, mode));
    head_ = register_module("head", ClassifyHead(cfg.fusion_channels, classes));

    if (cfg.hd_loss_active()) {
        EncoderConfig dec = enc;
        decoder_magnitude_ = register_module("decoder_magnitude", MiniDecoder(dec, classes));
        decoder_derivative_ = register_module("decoder_derivative", MiniDecoder(dec, classes));
        enc_head_magnitude_ =
            register_module("enc_head_magnitude", ClassFeatureHead(schedule.back(), cfg.projection_dim));
        dec_head_magnitude_ =
            register_module("dec_head_magnitude", ClassFeatureHead(schedule.front(), cfg.projection_dim));
        enc_head_derivative_ =
            register_module("enc_head_derivative", ClassFeatureHead(schedule.back(), cfg.projection_dim));
        dec_head_derivative_ =
            register_module("dec_head_derivative", ClassFeatureHead(schedule.front(), cfg.projection_dim));
    }
    init_parameters(*this, cfg.seed);
}

ForwardOutput CscnModelImpl::forward(const torch::Tensor& magnitude, const torch::Tensor& derivative) {
    const int64_t H = magnitude.size(2);
    const int64_t W = magnitude.size(3);
    if (cfg_.uses_derivative() && (derivative.size(2) != H || derivative.size(3) != W)) {
        throw SpatialMismatch("magnitude and derivative inputs differ in spatial size");
    }
    std::vector<std::pair<int64_t, int64_t>> sizes;
    for (int s = 0; s <= cfg_.stages; ++s) {
        sizes.emplace_back(stage_extent(static_cast<int>(H), s), stage_extent(static_cast<int>(W), s));
    }

    std::vector<FeatureMap> f_m, f_d;
    switch (cfg_.arch) {
        case ArchMode::Dual:
            f_m = encoder_primary_->forward(magnitude);
            f_d = encoder_derivative_->forward(derivative);
            break;
        case ArchMode::Shared: {
            namespace F = torch::nn::functional;
            auto padded = F::pad(derivative, F::PadFuncOptions({0, 0, 0, 0, 0, magnitude_bands_ - derivative.size(1)}));
            f_m = encoder_primary_->forward(magnitude);
            f_d = encoder_primary_->forward(padded);
            break;
        }
        case ArchMode::SingleMagnitude: f_m = encoder_primary_->forward(magnitude); break;
        case ArchMode::SingleDerivative: f_m = encoder_primary_->forward(derivative); break;
        case ArchMode::Concat: f_m = encoder_primary_->forward(torch::cat({magnitude, derivative}, 1)); break;
    }

    ForwardOutput out;
    auto fused = fusion_->forward(f_m, f_d);
    out.logits = head_->forward(fused.fused, {H, W});
    out.fusion_weights = std::move(fused.weights);

    if (cfg_.hd_loss_active()) {
        auto dm = decoder_magnitude_->forward(f_m.back(), sizes);
        auto dd = decoder_derivative_->forward(f_d.back(), sizes);
        out.branches.push_back({dm.logits, f_m.back(), dm.last_feature, enc_head_magnitude_, dec_head_magnitude_});
        out.branches.push_back({dd.logits, f_d.back(), dd.last_feature, enc_head_derivative_, dec_head_derivative_});
    }
    return out;
}

torch::Tensor to_tensor(const HsiCube& cube) {
    return torch::from_blob(const_cast<float*>(cube.data().data()), {1, cube.bands(), cube.height(), cube.width()},
                            torch::kFloat32)
        .clone();
}

ModelInputs prepare_inputs(const HsiCube& raw, const DerivativeSpec& spec) {
    return {to_tensor(normalize_bands(raw)), to_tensor(normalize_bands(derivative(raw, spec)))};
}

}  // namespace cscn
