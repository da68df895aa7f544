#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include <cmath>

#include "cscn/error.hpp"
#include "cscn/losses.hpp"
#include "gradcheck.hpp"

using namespace cscn;

namespace {

const auto f64 = torch::TensorOptions().dtype(torch::kFloat64);

// -log softmax(z)[c] for one pixel, by hand.
double nll_oracle(const std::vector<double>& z, int c) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return -(z[c] - m - std::log(s));
}

std::vector<double> pixel_logits(const torch::Tensor& logits, int r, int c) {
    std::vector<double> z;
    for (int64_t k = 0; k < logits.size(1); ++k) z.push_back(logits[0][k][r][c].item<double>());
    return z;
}

torch::Tensor labels_of(std::vector<int64_t> values, int64_t h, int64_t w) {
    return torch::tensor(values, torch::kInt64).reshape({h, w});
}

// Softmax probability of class `c` (0-based) at each pixel of a [1, C, H, W] tensor.
torch::Tensor prob_at(const torch::Tensor& logits, const torch::Tensor& labels) {
    auto p = torch::softmax(logits, 1)[0];
    return p.gather(0, (labels - 1).clamp_min(0).unsqueeze(0)).squeeze(0);
}

}  // namespace

TEST_CASE("cross-entropy closed forms") {
    auto labels = labels_of({1, 2, 3, 4}, 2, 2);
    CHECK(ce_loss(torch::zeros({1, 4, 2, 2}, f64), labels).item<double>() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    auto confident = torch::zeros({1, 4, 2, 2}, f64);
    for (int i = 0; i < 4; ++i) confident[0][i][i / 2][i % 2] = 200.0;
    CHECK(ce_loss(confident, labels).item<double>() == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(ce_loss(torch::zeros({1, 4, 2, 2}), torch::zeros({2, 2}, torch::kInt64)), NoLabeledPixels);
    CHECK_THROWS_AS(ce_loss(torch::zeros({1, 4, 3, 2}), labels), ShapeMismatch);
}

TEST_CASE("cross-entropy matches a per-pixel loop and ignores background") {
    torch::manual_seed(1);
    auto logits = torch::randn({1, 5, 3, 4}, f64) * 3;
    auto labels = labels_of({0, 1, 2, 3, 4, 5, 0, 0, 5, 4, 3, 2}, 3, 4);
    double sum = 0.0;
    int n = 0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) {
            const auto y = labels[r][c].item<int64_t>();
            if (y == 0) continue;
            sum += nll_oracle(pixel_logits(logits, r, c), static_cast<int>(y - 1));
            ++n;
        }
    CHECK(ce_loss(logits, labels).item<double>() == doctest::Approx(sum / n).epsilon(1e-12));
    CHECK(ce_terms(logits, labels).size(0) == n);
}

TEST_CASE("adaptive softmax loss hand example") {
    auto rm = torch::tensor({std::log(0.6), std::log(0.4)}, f64).reshape({1, 2, 1, 1});
    auto rd = torch::tensor({std::log(0.8), std::log(0.2)}, f64).reshape({1, 2, 1, 1});
    auto labels = labels_of({1}, 1, 1);
    CHECK(adaptive_softmax_loss(rm, rd, labels).item<double>() == doctest::Approx(-std::log(0.8)).epsilon(1e-12));
    CHECK(adaptive_softmax_loss(rm, rd, labels).item<double>() == doctest::Approx(0.2231).epsilon(1e-4));
    CHECK_THROWS_AS(adaptive_softmax_loss(rm, rd, labels_of({0}, 1, 1)), NoLabeledPixels);
}

TEST_CASE("adaptive softmax loss is dominated by both branch cross-entropies") {
    torch::manual_seed(2);
    auto labels = labels_of({1, 2, 3, 0, 3, 1}, 2, 3);
    for (int trial = 0; trial < 1000; ++trial) {
        auto rm = torch::randn({1, 3, 2, 3}) * 4;
        auto rd = torch::randn({1, 3, 2, 3}) * 4;
        auto asl = asl_terms(rm, rd, labels);
        auto bound = torch::minimum(ce_terms(rm, labels), ce_terms(rd, labels));
        REQUIRE((asl - bound).max().item<float>() <= 1e-7f);
        REQUIRE(asl.min().item<float>() >= 0.0f);
        const float mean_bound = std::min(ce_loss(rm, labels).item<float>(), ce_loss(rd, labels).item<float>());
        REQUIRE(adaptive_softmax_loss(rm, rd, labels).item<float>() <= mean_bound + 1e-7f);
        REQUIRE(std::fabs(adaptive_softmax_loss(rm, rm, labels).item<float>() - ce_loss(rm, labels).item<float>()) <=
                1e-7f);
    }
}

TEST_CASE("label downsampling picks floor(i * H / h)") {
    auto labels = torch::arange(35, torch::kInt64).reshape({5, 7});
    auto d = downsample_labels(labels, 3, 4);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) CHECK(d[i][j].item<int64_t>() == labels[i * 5 / 3][j * 7 / 4].item<int64_t>());
    CHECK(torch::equal(downsample_labels(labels, 5, 7), labels));
}

TEST_CASE("class sums") {
    SUBCASE("matches a per-class accumulation loop") {
        torch::manual_seed(3);
        auto x = torch::randn({1, 6, 4, 4}, f64);
        auto labels = labels_of({0, 1, 1, 3, 3, 3, 0, 1, 4, 4, 1, 0, 0, 3, 1, 4}, 4, 4);
        auto sums = class_sums(x, labels, 4);
        CHECK(sums.classes == std::vector<int>{1, 3, 4});
        for (std::size_t row = 0; row < sums.classes.size(); ++row) {
            for (int ch = 0; ch < 6; ++ch) {
                double acc = 0.0;
                for (int r = 0; r < 4; ++r)
                    for (int c = 0; c < 4; ++c)
                        if (labels[r][c].item<int64_t>() == sums.classes[row]) acc += x[0][ch][r][c].item<double>();
                CHECK(sums.rows[row][ch].item<double>() == doctest::Approx(acc).epsilon(1e-12));
            }
        }
    }
    SUBCASE("one class everywhere sums to area times the vector") {
        auto v = torch::tensor({0.5, -1.25, 2.0}, f64);
        auto x = v.reshape({1, 3, 1, 1}).expand({1, 3, 3, 5}).contiguous();
        auto sums = class_sums(x, torch::ones({3, 5}, torch::kInt64), 2);
        REQUIRE(sums.classes == std::vector<int>{1});
        CHECK(torch::allclose(sums.rows[0], v * 15));
    }
    SUBCASE("resolution mismatch") {
        CHECK_THROWS_AS(class_sums(torch::zeros({1, 2, 2, 2}), torch::ones({3, 3}, torch::kInt64), 1), SpatialMismatch);
    }
}

TEST_CASE("class feature head drops classes absent at the feature resolution") {
    torch::manual_seed(4);
    ClassFeatureHead head(4, 5);
    // Class 2 occupies only odd rows and columns, which nearest downsampling never samples.
    auto labels = torch::ones({4, 4}, torch::kInt64);
    labels[1][1] = 2;
    labels[3][3] = 2;
    auto bank = head->forward(torch::randn({1, 4, 2, 2}), labels, 3);
    CHECK(bank.classes == std::vector<int>{1});
    CHECK((bank.rows.sizes().vec() == std::vector<int64_t>{1, 5}));

    labels[0][2] = 3;
    auto two = head->forward(torch::randn({1, 4, 2, 2}), labels, 3);
    CHECK(two.classes == std::vector<int>{1, 3});
    CHECK((two.rows.norm(2, 1) - 1).abs().max().item<float>() <= 1e-6f);

    auto empty = head->forward(torch::randn({1, 4, 2, 2}), torch::zeros({4, 4}, torch::kInt64), 3);
    CHECK(empty.classes.empty());
    CHECK(empty.rows.size(0) == 0);
}

TEST_CASE("InfoNCE") {
    SUBCASE("orthonormal pair") {
        auto q = torch::eye(2, f64);
        const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
        CHECK(info_nce(q, q).item<double>() == doctest::Approx(expected).epsilon(1e-12));
        CHECK(info_nce(q, q).item<double>() == doctest::Approx(0.3133).epsilon(1e-4));
    }
    SUBCASE("single row is zero") {
        CHECK(info_nce(torch::randn({1, 4}), torch::randn({1, 4})).item<float>() == 0.0f);
    }
    SUBCASE("aligned orthogonal rows beat uniform logits") {
        for (int n = 2; n <= 6; ++n) {
            auto q = torch::eye(n, f64) * 3.0;
            CHECK(info_nce(q, q).item<double>() < std::log(static_cast<double>(n)));
        }
    }
    SUBCASE("matches a hand-written cross-entropy over cosine logits") {
        torch::manual_seed(5);
        auto q = torch::randn({4, 3}, f64), k = torch::randn({4, 3}, f64);
        double total = 0.0;
        for (int i = 0; i < 4; ++i) {
            std::vector<double> z;
            for (int j = 0; j < 4; ++j)
                z.push_back((q[i] / q[i].norm()).dot(k[j] / k[j].norm()).item<double>());
            total += nll_oracle(z, i);
        }
        CHECK(info_nce(q, k).item<double>() == doctest::Approx(total / 4).epsilon(1e-12));
    }
    SUBCASE("invariant to positive row scaling") {
        torch::manual_seed(6);
        auto q = torch::randn({5, 4}), k = torch::randn({5, 4});
        auto scale = torch::rand({5, 1}) * 10 + 0.1;
        CHECK(std::fabs(info_nce(q * scale, k).item<float>() - info_nce(q, k).item<float>()) <= 1e-6f);
        CHECK(std::fabs(info_nce(q * 7.5, k).item<float>() - info_nce(q, k).item<float>()) <= 1e-6f);
    }
    SUBCASE("row mismatch") {
        CHECK_THROWS_AS(info_nce(torch::randn({3, 2}), torch::randn({2, 2})), ShapeMismatch);
    }
}

TEST_CASE("class contrastive loss pairs the shared classes") {
    torch::manual_seed(7);
    auto e = torch::randn({3, 4}, f64), d = torch::randn({3, 4}, f64);
    ClassFeatureBank enc{e, {1, 2, 4}};
    ClassFeatureBank dec{d, {2, 3, 4}};
    auto expected = info_nce(torch::stack({e[1], e[2]}), torch::stack({d[0], d[2]}));
    CHECK(class_contrastive_loss(enc, dec).item<double>() == doctest::Approx(expected.item<double>()).epsilon(1e-12));
    ClassFeatureBank lone{d.narrow(0, 0, 1), {1}};
    CHECK(class_contrastive_loss(enc, lone).item<double>() == 0.0);
}

TEST_CASE("total loss") {
    torch::manual_seed(8);
    const int classes = 3;
    auto labels = labels_of({1, 2, 3, 1, 0, 2, 3, 3, 1, 2, 2, 1, 3, 0, 1, 2}, 4, 4);
    auto make_branch = [&](std::uint64_t seed) {
        BranchSupervision b;
        b.coarse_logits = torch::randn({1, classes, 4, 4});
        b.encoder_deepest = torch::randn({1, 6, 2, 2});
        b.decoder_last = torch::randn({1, 6, 4, 4});
        b.encoder_head = ClassFeatureHead(6, 8);
        b.decoder_head = ClassFeatureHead(6, 8);
        init_parameters(*b.encoder_head, seed);
        init_parameters(*b.decoder_head, seed + 1);
        return b;
    };
    auto m = make_branch(1), d = make_branch(3);
    auto logits = torch::randn({1, classes, 4, 4});

    SUBCASE("lambda = 0 is cross-entropy exactly") {
        auto out = total_loss(logits, &m, &d, labels, classes, 0.0);
        CHECK(torch::equal(out.total, ce_loss(logits, labels)));
        CHECK(out.breakdown.total == out.breakdown.ce);
    }
    SUBCASE("without branch supervision only cross-entropy remains") {
        auto out = total_loss(logits, nullptr, nullptr, labels, classes, 1.0);
        CHECK(torch::equal(out.total, ce_loss(logits, labels)));
        CHECK(out.breakdown.asl == 0.0);
        CHECK(out.breakdown.ccl == 0.0);
    }
    SUBCASE("breakdown identity") {
        for (double lambda : {0.25, 1.0, 3.0}) {
            auto out = total_loss(logits, &m, &d, labels, classes, lambda);
            const auto& b = out.breakdown;
            CHECK(std::fabs(b.total - (b.ce + lambda * (b.asl + b.ccl))) <= 1e-6);
            CHECK(std::fabs(out.total.item<double>() - b.total) <= 1e-6 * std::max(1.0, b.total));
            CHECK(b.asl == doctest::Approx(adaptive_softmax_loss(m.coarse_logits, d.coarse_logits, labels).item<double>()));
            CHECK(b.ccl > 0.0);
        }
    }
    SUBCASE("negative lambda") {
        CHECK_THROWS_AS(total_loss(logits, &m, &d, labels, classes, -1.0), InvalidArgument);
    }
    SUBCASE("csv row") {
        LossBreakdown b{1.5, 0.25, 0.125, 1.875};
        CHECK(LossBreakdown::csv_header() == "step,ce,asl,ccl,total");
        CHECK(b.csv_row(3) == "3,1.5,0.25,0.125,1.875");
    }
}

TEST_CASE("loss gradients match finite differences") {
    SUBCASE("adaptive softmax loss away from ties") {
        auto labels = labels_of({1, 2, 3, 2}, 2, 2);
        torch::Tensor rm, rd;
        for (int attempt = 0;; ++attempt) {
            REQUIRE(attempt < 100);
            torch::manual_seed(100 + attempt);
            rm = torch::randn({1, 3, 2, 2}, f64);
            rd = torch::randn({1, 3, 2, 2}, f64);
            if ((prob_at(rm, labels) - prob_at(rd, labels)).abs().min().item<double>() > 1e-2) break;
        }
        rm.requires_grad_(true);
        rd.requires_grad_(true);
        auto r = testing::grad_check([&] { return adaptive_softmax_loss(rm, rd, labels); }, {rm, rd});
        CHECK(r.checked == 24);
        CHECK(r.max_rel_err <= 1e-3);
    }
    SUBCASE("class contrastive loss through the feature heads") {
        torch::manual_seed(10);
        ClassFeatureHead enc(3, 4), dec(3, 4);
        init_parameters(*enc, 1);
        init_parameters(*dec, 2);
        enc->to(torch::kFloat64);
        dec->to(torch::kFloat64);
        auto labels = labels_of({1, 2, 2, 1}, 2, 2);
        auto xe = torch::randn({1, 3, 2, 2}, f64).requires_grad_(true);
        auto xd = torch::randn({1, 3, 2, 2}, f64).requires_grad_(true);
        auto loss = [&] { return class_contrastive_loss(enc->forward(xe, labels, 2), dec->forward(xd, labels, 2)); };
        std::vector<torch::Tensor> wrt{xe, xd};
        for (auto& p : enc->parameters()) wrt.push_back(p);
        for (auto& p : dec->parameters()) wrt.push_back(p);
        auto r = testing::grad_check(loss, wrt);
        CHECK(r.max_rel_err <= 1e-3);
    }
    SUBCASE("cross-entropy") {
        torch::manual_seed(11);
        auto logits = torch::randn({1, 3, 2, 2}, f64).requires_grad_(true);
        auto labels = labels_of({3, 0, 1, 2}, 2, 2);
        auto r = testing::grad_check([&] { return ce_loss(logits, labels); }, {logits});
        CHECK(r.max_rel_err <= 1e-3);
    }
}
