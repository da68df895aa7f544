#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

#include "cscn/data.hpp"
#include "cscn/network.hpp"

namespace cscn {

struct LossBreakdown {
    double ce = 0.0;
    double asl = 0.0;
    double ccl = 0.0;
    double total = 0.0;

    static std::string csv_header() { return "step,ce,asl,ccl,total"; }
    std::string csv_row(int step) const;

    bool operator==(const LossBreakdown&) const = default;
};

// [H, W] int64 tensor of class labels (0 = ignore).
torch::Tensor label_tensor(const LabelMask& mask);

// Nearest-neighbour resample of a label tensor to (h, w): source index
// floor(i * H / h).
torch::Tensor downsample_labels(const torch::Tensor& labels, int64_t height, int64_t width);

// Mean over labeled pixels of -log softmax(logits)[true class].
// logits: [1, C_g, H, W]; labels: [H, W] with classes 1..C_g.
torch::Tensor ce_loss(const torch::Tensor& logits, const torch::Tensor& labels);

// Per labeled pixel, -log max(softmax(R_M)_c, softmax(R_D)_c) at the true
// class, evaluated in the log domain. Ties pick the magnitude branch.
torch::Tensor adaptive_softmax_loss(const torch::Tensor& logits_magnitude, const torch::Tensor& logits_derivative,
                                    const torch::Tensor& labels);

// The unreduced per-pixel terms of the two losses above, labeled pixels only,
// in raster order.
torch::Tensor ce_terms(const torch::Tensor& logits, const torch::Tensor& labels);
torch::Tensor asl_terms(const torch::Tensor& logits_magnitude, const torch::Tensor& logits_derivative,
                        const torch::Tensor& labels);

struct ClassSums {
    torch::Tensor rows;          // [present, C] raw per-class feature sums
    std::vector<int> classes;    // 1-based class ids, ascending
};

// Sums feature vectors of every class present in `labels` at the feature's
// resolution. `labels` must already match x's spatial dims.
ClassSums class_sums(const FeatureMap& x, const torch::Tensor& labels, int classes);

struct ClassFeatureBank {
    torch::Tensor rows;          // [present, D_p], unit-norm
    std::vector<int> classes;
};

// LayerNorm -> MLP (C -> 2C -> C, ReLU) -> linear projection to D_p, applied
// row-wise to per-class feature sums.
class ClassFeatureHeadImpl : public nn::Module {
public:
    ClassFeatureHeadImpl(int channels, int projection_dim);

    torch::Tensor project(const torch::Tensor& sums);
    // Downsamples `labels` (full resolution) to x, aggregates, projects and
    // normalises each row.
    ClassFeatureBank forward(const FeatureMap& x, const torch::Tensor& labels, int classes);

    nn::LayerNorm norm{nullptr};
    nn::Linear hidden{nullptr};
    nn::Linear output{nullptr};
    nn::Linear projection{nullptr};
};
TORCH_MODULE(ClassFeatureHead);

// InfoNCE with identity targets between row-normalised q and k; rows must be
// aligned class-for-class. Zero when fewer than two rows.
torch::Tensor info_nce(const torch::Tensor& q, const torch::Tensor& k);

// Class-wise contrastive loss between encoder and decoder banks over the
// classes both contain.
torch::Tensor class_contrastive_loss(const ClassFeatureBank& encoder, const ClassFeatureBank& decoder);

struct TotalLoss {
    torch::Tensor total;
    LossBreakdown breakdown;
};

struct BranchSupervision {
    torch::Tensor coarse_logits;     // mini-decoder logits
    FeatureMap encoder_deepest;
    FeatureMap decoder_last;
    ClassFeatureHead encoder_head{nullptr};
    ClassFeatureHead decoder_head{nullptr};
};

// total = ce + lambda * (asl + ccl_M + ccl_D). Without branch supervision
// (single-branch or HD-loss-free variants) the total is ce alone.
TotalLoss total_loss(const torch::Tensor& final_logits, const BranchSupervision* magnitude,
                     const BranchSupervision* derivative, const torch::Tensor& labels, int classes, double lambda);

}  // namespace cscn
