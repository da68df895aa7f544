#pragma once

#include <vector>

#include <torch/torch.h>

#include "cscn/config.hpp"
#include "cscn/fusion.hpp"
#include "cscn/losses.hpp"
#include "cscn/network.hpp"

namespace cscn {

struct ForwardOutput {
    torch::Tensor logits;                    // [1, C_g, H, W]
    std::vector<PointWeights> fusion_weights;  // deepest stage first; empty tensors if not adaptive
    // Present only when the hybrid disparity loss is active.
    std::vector<BranchSupervision> branches;  // [magnitude, derivative]
};

// Whole network for one TrainConfig: branch encoder(s), fusion pathway, head,
// and (when the hybrid loss is on) the per-branch mini-decoders and
// class-feature heads.
class CscnModelImpl : public nn::Module {
public:
    CscnModelImpl(const TrainConfig& cfg, int magnitude_bands, int derivative_bands, int classes);

    // magnitude: [1, B, H, W]; derivative: [1, B', H, W] (ignored by the
    // magnitude-only baseline).
    ForwardOutput forward(const torch::Tensor& magnitude, const torch::Tensor& derivative);

    int magnitude_bands() const { return magnitude_bands_; }
    int derivative_bands() const { return derivative_bands_; }
    int classes() const { return classes_; }

private:
    TrainConfig cfg_;
    int magnitude_bands_;
    int derivative_bands_;
    int classes_;

    Encoder encoder_primary_{nullptr};
    Encoder encoder_derivative_{nullptr};
    FusionPathway fusion_{nullptr};
    ClassifyHead head_{nullptr};
    MiniDecoder decoder_magnitude_{nullptr};
    MiniDecoder decoder_derivative_{nullptr};
    ClassFeatureHead enc_head_magnitude_{nullptr};
    ClassFeatureHead dec_head_magnitude_{nullptr};
    ClassFeatureHead enc_head_derivative_{nullptr};
    ClassFeatureHead dec_head_derivative_{nullptr};
};
TORCH_MODULE(CscnModel);

// Network-ready inputs: the per-band normalised cube, and the derivative of
// the raw cube, normalised afterwards.
struct ModelInputs {
    torch::Tensor magnitude;
    torch::Tensor derivative;
};

ModelInputs prepare_inputs(const HsiCube& raw, const DerivativeSpec& spec);

torch::Tensor to_tensor(const HsiCube& cube);

}  // namespace cscn
