#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include <random>

#include "cscn/error.hpp"
#include "cscn/network.hpp"
#include "gradcheck.hpp"

using namespace cscn;

namespace {

void zero_biases(nn::Module& m) {
    torch::NoGradGuard no_grad;
    for (auto& p : m.named_parameters())
        if (p.key().find("bias") != std::string::npos) p.value().zero_();
}

std::vector<std::pair<int64_t, int64_t>> stage_sizes(int h, int w, int n) {
    std::vector<std::pair<int64_t, int64_t>> out;
    for (int s = 0; s <= n; ++s) out.emplace_back(stage_extent(h, s), stage_extent(w, s));
    return out;
}

}  // namespace

TEST_CASE("conv block") {
    torch::manual_seed(0);
    ConvBlock block(ConvBlockConfig{4, 16, 3, 8});
    init_parameters(*block, 1);

    SUBCASE("shape") {
        auto y = block->forward(torch::randn({1, 4, 8, 8}));
        CHECK((y.sizes().vec() == std::vector<int64_t>{1, 16, 8, 8}));
    }
    SUBCASE("nonnegative") {
        auto y = block->forward(torch::randn({1, 4, 9, 7}));
        CHECK(y.min().item<float>() >= 0.0f);
    }
    SUBCASE("zero in, zero bias -> zero out") {
        zero_biases(*block);
        auto y = block->forward(torch::zeros({1, 4, 5, 5}));
        CHECK(y.abs().max().item<float>() == 0.0f);
    }
    SUBCASE("channel mismatch") {
        CHECK_THROWS_AS(block->forward(torch::zeros({1, 3, 8, 8})), ChannelMismatch);
    }
    SUBCASE("config validation") {
        CHECK_THROWS_AS(ConvBlock(ConvBlockConfig{4, 12, 3, 8}), InvalidArgument);
        CHECK_THROWS_AS(ConvBlock(ConvBlockConfig{4, 16, 4, 8}), InvalidArgument);
        CHECK_NOTHROW(ConvBlock(ConvBlockConfig{4, 16, 5, 8}));
    }
}

TEST_CASE("group count") {
    CHECK(group_count(64, 8) == 8);
    CHECK(group_count(4, 8) == 4);
    CHECK(group_count(12, 8) == 4);
    CHECK(group_count(7, 8) == 1);
}

TEST_CASE("downsample") {
    Downsample down(3);
    init_parameters(*down, 2);
    CHECK((down->forward(torch::randn({1, 3, 8, 8})).sizes().vec() == std::vector<int64_t>{1, 3, 4, 4}));
    CHECK((down->forward(torch::randn({1, 3, 7, 7})).sizes().vec() == std::vector<int64_t>{1, 3, 4, 4}));
    CHECK((down->forward(torch::randn({1, 3, 5, 2})).sizes().vec() == std::vector<int64_t>{1, 3, 3, 1}));
    zero_biases(*down);
    CHECK(down->forward(torch::zeros({1, 3, 6, 6})).abs().max().item<float>() == 0.0f);
    CHECK_THROWS_AS(down->forward(torch::zeros({1, 3, 1, 6})), TooSmall);
    CHECK_THROWS_AS(down->forward(torch::zeros({1, 3, 6, 1})), TooSmall);
}

TEST_CASE("encoder shape walk") {
    EncoderConfig cfg;
    cfg.input_bands = 31;
    Encoder enc(cfg);
    init_parameters(*enc, 3);
    auto stages = enc->forward(torch::randn({1, 31, 32, 32}));
    REQUIRE(stages.size() == 4);
    const int sizes[] = {16, 8, 4, 2};
    const int channels[] = {64, 128, 192, 256};
    for (int s = 0; s < 4; ++s) {
        CHECK(stages[s].size(1) == channels[s]);
        CHECK(stages[s].size(2) == sizes[s]);
        CHECK(stages[s].size(3) == sizes[s]);
        CHECK(stages[s].min().item<float>() >= 0.0f);
    }
    CHECK((linear_schedule(4, 64) == std::vector<int>{64, 128, 192, 256}));
}

TEST_CASE("stage dims follow ceil halving for any size and depth") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> dim(5, 23);
    std::uniform_int_distribution<int> depth(2, 3);
    for (int trial = 0; trial < 12; ++trial) {
        EncoderConfig cfg;
        cfg.stages = depth(rng);
        cfg.channel_schedule = linear_schedule(cfg.stages, 4);
        cfg.input_bands = 3;
        const int h = dim(rng), w = dim(rng);
        Encoder enc(cfg);
        auto stages = enc->forward(torch::randn({1, 3, h, w}));
        int eh = h, ew = w;
        for (int s = 0; s < cfg.stages; ++s) {
            eh = (eh + 1) / 2;
            ew = (ew + 1) / 2;
            CHECK(stages[s].size(2) == eh);
            CHECK(stages[s].size(3) == ew);
            CHECK(stages[s].size(1) == cfg.channel_schedule[s]);
            CHECK(stage_extent(h, s + 1) == eh);
        }
    }
}

TEST_CASE("encoder validation") {
    EncoderConfig cfg;
    cfg.stages = 1;
    cfg.channel_schedule = {8};
    CHECK_THROWS_AS(Encoder{cfg}, InvalidArgument);
    cfg.stages = 3;
    CHECK_THROWS_AS(Encoder{cfg}, InvalidArgument);
    cfg.channel_schedule = {8, 16, 24};
    cfg.input_bands = 4;
    Encoder enc(cfg);
    CHECK_THROWS_AS(enc->forward(torch::zeros({1, 5, 8, 8})), ChannelMismatch);
}

TEST_CASE("separately initialised encoders differ on the same input") {
    EncoderConfig cfg;
    cfg.stages = 2;
    cfg.channel_schedule = {8, 16};
    cfg.input_bands = 5;
    Encoder a(cfg), b(cfg);
    init_parameters(*a, 10);
    init_parameters(*b, 11);
    auto x = torch::randn({1, 5, 8, 8});
    CHECK_FALSE(torch::equal(a->forward(x).back(), b->forward(x).back()));
}

TEST_CASE("initialisation is a pure function of the seed") {
    EncoderConfig cfg;
    cfg.stages = 2;
    cfg.channel_schedule = {8, 16};
    cfg.input_bands = 5;
    Encoder a(cfg), b(cfg);
    init_parameters(*a, 42);
    init_parameters(*b, 42);
    auto pa = a->parameters(), pb = b->parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(torch::equal(pa[i], pb[i]));
    CHECK(parameter_count(*a) == parameter_count(*b));

    // conv 5->8 (3x3) + GN(8) + down 8->8 + conv 8->16 + GN(16) + down 16->16
    const std::int64_t expected = (5 * 9 * 8 + 8) + 16 + (8 * 9 * 8 + 8) + (8 * 9 * 16 + 16) + 32 + (16 * 9 * 16 + 16);
    CHECK(parameter_count(*a) == expected);
}

TEST_CASE("mini decoder restores full resolution") {
    EncoderConfig cfg;
    cfg.input_bands = 6;
    cfg.channel_schedule = linear_schedule(4, 8);
    Encoder enc(cfg);
    MiniDecoder dec(cfg, 5);
    init_parameters(*enc, 1);
    init_parameters(*dec, 2);
    auto stages = enc->forward(torch::randn({1, 6, 32, 32}));
    auto out = dec->forward(stages.back(), stage_sizes(32, 32, 4));
    CHECK((out.logits.sizes().vec() == std::vector<int64_t>{1, 5, 32, 32}));
    CHECK(out.last_feature.size(1) == 8);
    CHECK(torch::isfinite(out.logits).all().item<bool>());

    auto odd = enc->forward(torch::randn({1, 6, 13, 10}));
    auto out_odd = dec->forward(odd.back(), stage_sizes(13, 10, 4));
    CHECK((out_odd.logits.sizes().vec() == std::vector<int64_t>{1, 5, 13, 10}));
    CHECK_THROWS_AS(dec->forward(odd.back(), stage_sizes(13, 10, 3)), ShapeMismatch);
}

TEST_CASE("classify head") {
    ClassifyHead head(16, 7);
    init_parameters(*head, 3);
    auto y = head->forward(torch::randn({1, 16, 16, 16}), {32, 32});
    CHECK((y.sizes().vec() == std::vector<int64_t>{1, 7, 32, 32}));
    CHECK(torch::isfinite(y).all().item<bool>());
}

TEST_CASE("micro encoder gradients match finite differences") {
    EncoderConfig cfg;
    cfg.stages = 2;
    cfg.channel_schedule = {4, 4};
    cfg.input_bands = 2;
    cfg.gn_groups = 2;
    Encoder enc(cfg);
    init_parameters(*enc, 7);
    enc->to(torch::kFloat64);
    auto x = torch::randn({1, 2, 4, 4}, torch::TensorOptions().dtype(torch::kFloat64).requires_grad(true));
    auto target = torch::randn({1, 4, 1, 1}, torch::kFloat64);
    auto loss = [&] {
        auto deepest = enc->forward(x).back();
        return ((deepest - target) * (deepest - target)).sum() + enc->forward(x).front().pow(2).mean();
    };
    std::vector<torch::Tensor> wrt{x};
    for (auto& p : enc->parameters()) wrt.push_back(p);
    auto r = testing::grad_check(loss, wrt);
    CHECK(r.checked > 100);
    CHECK(r.max_rel_err <= 1e-3);
}
