#include "cscn/losses.hpp"

#include <algorithm>
#include <cstdio>

#include "cscn/error.hpp"

namespace cscn {

namespace F = torch::nn::functional;

std::string LossBreakdown::csv_row(int step) const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g", step, ce, asl, ccl, total);
    return buf;
}

torch::Tensor label_tensor(const LabelMask& mask) {
    std::vector<int64_t> values(mask.labels().begin(), mask.labels().end());
    return torch::tensor(values, torch::kInt64).reshape({mask.height(), mask.width()});
}

torch::Tensor downsample_labels(const torch::Tensor& labels, int64_t height, int64_t width) {
    const int64_t H = labels.size(0);
    const int64_t W = labels.size(1);
    if (H == height && W == width) return labels;
    auto rows = torch::arange(height, torch::kInt64).mul(H).div(height, "floor");
    auto cols = torch::arange(width, torch::kInt64).mul(W).div(width, "floor");
    return labels.index_select(0, rows).index_select(1, cols);
}

namespace {

// Log-probabilities at the true class for every labeled pixel: [n].
torch::Tensor true_class_log_probs(const torch::Tensor& logits, const torch::Tensor& labels) {
    if (logits.dim() != 4 || logits.size(0) != 1 || logits.size(2) != labels.size(0) ||
        logits.size(3) != labels.size(1)) {
        throw ShapeMismatch("logits must be [1, C, H, W] matching the label raster");
    }
    const int64_t C = logits.size(1);
    auto flat_labels = labels.reshape({-1});
    auto idx = flat_labels.gt(0).nonzero().reshape({-1});
    if (idx.numel() == 0) throw NoLabeledPixels("no labeled pixels in the loss mask");
    if (flat_labels.max().item<int64_t>() > C) throw ShapeMismatch("label exceeds logit channel count");
    auto log_probs = torch::log_softmax(logits[0].reshape({C, -1}), 0).index_select(1, idx);  // [C, n]
    auto target = flat_labels.index_select(0, idx).sub(1).unsqueeze(0);                       // [1, n]
    return log_probs.gather(0, target).squeeze(0);
}

}  // namespace

torch::Tensor ce_terms(const torch::Tensor& logits, const torch::Tensor& labels) {
    return -true_class_log_probs(logits, labels);
}

torch::Tensor asl_terms(const torch::Tensor& logits_magnitude, const torch::Tensor& logits_derivative,
                        const torch::Tensor& labels) {
    auto lm = true_class_log_probs(logits_magnitude, labels);
    auto ld = true_class_log_probs(logits_derivative, labels);
    // log is monotone, so the max of probabilities is the max of log-probabilities.
    return -torch::where(lm >= ld, lm, ld);
}

torch::Tensor ce_loss(const torch::Tensor& logits, const torch::Tensor& labels) {
    return ce_terms(logits, labels).mean();
}

torch::Tensor adaptive_softmax_loss(const torch::Tensor& logits_magnitude, const torch::Tensor& logits_derivative,
                                    const torch::Tensor& labels) {
    return asl_terms(logits_magnitude, logits_derivative, labels).mean();
}

ClassSums class_sums(const FeatureMap& x, const torch::Tensor& labels, int classes) {
    if (x.size(2) != labels.size(0) || x.size(3) != labels.size(1)) {
        throw SpatialMismatch("labels must match the feature resolution");
    }
    const int64_t C = x.size(1);
    auto onehot = torch::one_hot(labels.reshape({-1}), classes + 1)
                      .narrow(1, 1, classes)
                      .to(x.scalar_type());                  // [hw, classes], background dropped
    auto sums = x[0].reshape({C, -1}).matmul(onehot).t();    // [classes, C]
    auto counts = onehot.sum(0);

    ClassSums out;
    std::vector<int64_t> keep;
    auto counts_cpu = counts.to(torch::kDouble).contiguous();
    const double* cnt = counts_cpu.data_ptr<double>();
    for (int c = 0; c < classes; ++c) {
        if (cnt[c] > 0) {
            keep.push_back(c);
            out.classes.push_back(c + 1);
        }
    }
    out.rows = sums.index_select(0, torch::tensor(keep, torch::kInt64));
    return out;
}

ClassFeatureHeadImpl::ClassFeatureHeadImpl(int channels, int projection_dim) {
    norm = register_module("norm", nn::LayerNorm(nn::LayerNormOptions({channels})));
    hidden = register_module("hidden", nn::Linear(channels, 2 * channels));
    output = register_module("output", nn::Linear(2 * channels, channels));
    projection = register_module("projection", nn::Linear(channels, projection_dim));
}

torch::Tensor ClassFeatureHeadImpl::project(const torch::Tensor& sums) {
    auto h = norm->forward(sums);
    h = output->forward(torch::relu(hidden->forward(h)));
    return projection->forward(h);
}

ClassFeatureBank ClassFeatureHeadImpl::forward(const FeatureMap& x, const torch::Tensor& labels, int classes) {
    auto sums = class_sums(x, downsample_labels(labels, x.size(2), x.size(3)), classes);
    if (sums.classes.empty()) return {torch::empty({0, projection->options.out_features()}, x.options()), {}};
    return {F::normalize(project(sums.rows), F::NormalizeFuncOptions().p(2).dim(1)), sums.classes};
}

torch::Tensor info_nce(const torch::Tensor& q, const torch::Tensor& k) {
    if (q.size(0) != k.size(0)) throw ShapeMismatch("contrastive banks must have matching rows");
    if (q.size(0) < 2) return torch::zeros({}, q.options());
    auto qn = F::normalize(q, F::NormalizeFuncOptions().p(2).dim(1));
    auto kn = F::normalize(k, F::NormalizeFuncOptions().p(2).dim(1));
    auto logits = qn.matmul(kn.t());
    auto targets = torch::arange(q.size(0), torch::TensorOptions().dtype(torch::kInt64));
    return F::cross_entropy(logits, targets);
}

torch::Tensor class_contrastive_loss(const ClassFeatureBank& encoder, const ClassFeatureBank& decoder) {
    std::vector<int64_t> enc_idx, dec_idx;
    for (std::size_t i = 0; i < encoder.classes.size(); ++i) {
        auto it = std::find(decoder.classes.begin(), decoder.classes.end(), encoder.classes[i]);
        if (it == decoder.classes.end()) continue;
        enc_idx.push_back(static_cast<int64_t>(i));
        dec_idx.push_back(it - decoder.classes.begin());
    }
    if (enc_idx.size() < 2) return torch::zeros({}, encoder.rows.options());
    auto q = encoder.rows.index_select(0, torch::tensor(enc_idx, torch::kInt64));
    auto k = decoder.rows.index_select(0, torch::tensor(dec_idx, torch::kInt64));
    return info_nce(q, k);
}

TotalLoss total_loss(const torch::Tensor& final_logits, const BranchSupervision* magnitude,
                     const BranchSupervision* derivative, const torch::Tensor& labels, int classes, double lambda) {
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
    TotalLoss out;
    auto ce = ce_loss(final_logits, labels);
    out.breakdown.ce = ce.item<double>();
    out.total = ce;
    if (magnitude == nullptr || derivative == nullptr) {
        out.breakdown.total = out.breakdown.ce;
        return out;
    }

    auto asl = adaptive_softmax_loss(magnitude->coarse_logits, derivative->coarse_logits, labels);
    auto branch_ccl = [&](const BranchSupervision& b) {
        ClassFeatureHead enc_head = b.encoder_head, dec_head = b.decoder_head;
        auto enc = enc_head->forward(b.encoder_deepest, labels, classes);
        auto dec = dec_head->forward(b.decoder_last, labels, classes);
        return class_contrastive_loss(enc, dec);
    };
    auto ccl = branch_ccl(*magnitude) + branch_ccl(*derivative);
    if (lambda != 0.0) out.total = ce + lambda * (asl + ccl);
    out.breakdown.asl = asl.item<double>();
    out.breakdown.ccl = ccl.item<double>();
    out.breakdown.total = out.breakdown.ce + lambda * (out.breakdown.asl + out.breakdown.ccl);
    return out;
}

}  // namespace cscn
