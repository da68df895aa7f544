#include "cscn/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "cscn/data.hpp"
#include "cscn/error.hpp"

namespace cscn {

HsiCube::HsiCube(int height, int width, int bands)
    : HsiCube(height, width, bands,
              std::vector<float>(static_cast<std::size_t>(height) * width * std::max(bands, 0), 0.0f)) {}

HsiCube::HsiCube(int height, int width, int bands, std::vector<float> data)
    : height_(height), width_(width), bands_(bands), data_(std::move(data)) {
    if (height < 1 || width < 1 || bands < 1) {
        throw InvalidArgument("cube dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(height) * width * bands) {
        throw InvalidArgument("cube data size does not match H*W*B");
    }
}

std::vector<float> HsiCube::spectrum(int row, int col) const {
    std::vector<float> out(bands_);
    for (int b = 0; b < bands_; ++b) out[b] = at(b, row, col);
    return out;
}

bool HsiCube::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void validate(const DerivativeSpec& spec, int bands) {
    if (spec.order != 1 && spec.order != 2) {
        throw InvalidArgument("derivative order must be 1 or 2");
    }
    if (spec.step < 1) {
        throw InvalidArgument("derivative step must be positive");
    }
    if (spec.order * spec.step >= bands) {
        throw InsufficientBands("order*step = " + std::to_string(spec.order * spec.step) +
                                " leaves no bands out of " + std::to_string(bands));
    }
}

void validate(const NoiseSpec& spec) {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!(spec.gaussian_sigma >= 0.0) || !(spec.stripe_amplitude >= 0.0) ||
        !in_unit(spec.salt_pepper_rate) || !in_unit(spec.stripe_fraction)) {
        throw InvalidArgument("noise rates/amplitudes out of range");
    }
}

void validate(const SynthSceneSpec& spec) {
    if (spec.class_count < 2 || spec.class_count > 255) {
        throw InvalidArgument("class_count must be in [2, 255]");
    }
    if (spec.bands < 4) throw InvalidArgument("synthetic scene needs at least 4 bands");
    if (spec.height < 1 || spec.width < 1) throw InvalidArgument("scene dims must be positive");
    if (!(spec.magnitude_noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
    std::vector<int> used(spec.class_count + 1, 0);
    for (auto [a, b] : spec.confusable_pairs) {
        if (a < 1 || b < 1 || a > spec.class_count || b > spec.class_count || a == b) {
            throw InvalidArgument("confusable pair indices must be distinct valid classes");
        }
        if (used[a]++ || used[b]++) {
            throw InvalidArgument("a class may appear in at most one confusable pair");
        }
    }
}

namespace {

// One first-difference pass; the inner expression is the whole arithmetic
// contract, so order 2 is literally this applied twice.
HsiCube first_difference(const HsiCube& cube, int step) {
    const int out_bands = cube.bands() - step;
    HsiCube out(cube.height(), cube.width(), out_bands);
    const float denom = static_cast<float>(step);
    for (int b = 0; b < out_bands; ++b) {
        auto lo = cube.band(b);
        auto hi = cube.band(b + step);
        auto dst = out.band(b);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (hi[i] - lo[i]) / denom;
    }
    return out;
}

}  // namespace

HsiCube derivative(const HsiCube& cube, const DerivativeSpec& spec) {
    validate(spec, cube.bands());
    HsiCube out = first_difference(cube, spec.step);
    if (spec.order == 2) out = first_difference(out, spec.step);
    return out;
}

HsiCube normalize_bands(const HsiCube& cube) {
    HsiCube out(cube.height(), cube.width(), cube.bands());
    const double n = static_cast<double>(cube.pixels());
    for (int b = 0; b < cube.bands(); ++b) {
        auto src = cube.band(b);
        auto dst = out.band(b);
        double mean = std::accumulate(src.begin(), src.end(), 0.0) / n;
        double var = 0.0;
        for (float v : src) var += (v - mean) * (v - mean);
        var /= n;
        if (var <= 0.0) continue;  // zero-variance band stays zero
        const double inv_std = 1.0 / std::sqrt(var);
        for (std::size_t i = 0; i < src.size(); ++i) {
            dst[i] = static_cast<float>((src[i] - mean) * inv_std);
        }
    }
    return out;
}

HsiCube degrade(const HsiCube& cube, const NoiseSpec& noise) {
    validate(noise);
    HsiCube out = cube;
    std::mt19937_64 rng(noise.seed);

    std::vector<float> band_min(cube.bands()), band_max(cube.bands());
    for (int b = 0; b < cube.bands(); ++b) {
        auto [lo, hi] = std::minmax_element(cube.band(b).begin(), cube.band(b).end());
        band_min[b] = *lo;
        band_max[b] = *hi;
    }

    if (noise.gaussian_sigma > 0.0) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int b = 0; b < out.bands(); ++b) {
            const double scale = noise.gaussian_sigma * (band_max[b] - band_min[b]);
            for (float& v : out.band(b)) v = static_cast<float>(v + scale * gauss(rng));
        }
    }

    const int stripe_cols = static_cast<int>(std::lround(noise.stripe_fraction * out.width()));
    if (noise.stripe_amplitude > 0.0 && stripe_cols > 0) {
        std::vector<int> cols(out.width());
        std::iota(cols.begin(), cols.end(), 0);
        std::shuffle(cols.begin(), cols.end(), rng);
        std::bernoulli_distribution sign(0.5);
        for (int k = 0; k < stripe_cols; ++k) {
            const float delta = static_cast<float>(sign(rng) ? noise.stripe_amplitude : -noise.stripe_amplitude);
            for (int b = 0; b < out.bands(); ++b) {
                for (int r = 0; r < out.height(); ++r) out.at(b, r, cols[k]) += delta;
            }
        }
    }

    const std::size_t total = out.data().size();
    const auto impulses = static_cast<std::size_t>(std::llround(noise.salt_pepper_rate * static_cast<double>(total)));
    if (impulses > 0) {
        std::vector<std::size_t> idx(total);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::bernoulli_distribution salt(0.5);
        for (std::size_t k = 0; k < impulses; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, total - 1);
            std::swap(idx[k], idx[pick(rng)]);
            const std::size_t e = idx[k];
            const int b = static_cast<int>(e / out.pixels());
            out.data()[e] = salt(rng) ? band_max[b] : band_min[b];
        }
    }
    return out;
}

std::pair<HsiCube, LabelMask> synth_scene(const SynthSceneSpec& spec) {
    validate(spec);
    const int k = spec.class_count;
    const int H = spec.height;
    const int W = spec.width;
    const int B = spec.bands;
    std::mt19937_64 rng(spec.seed);

    // Block layout: ~8 px cells, refined until every class can own a cell.
    int grid_rows = std::max(1, H / 8);
    int grid_cols = std::max(1, W / 8);
    if (grid_rows * grid_cols < k) {
        grid_rows = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
        grid_cols = (k + grid_rows - 1) / grid_rows;
    }
    if (grid_rows > H || grid_cols > W) {
        throw InfeasibleSpec(std::to_string(k) + " class regions cannot tile a " + std::to_string(H) + "x" +
                             std::to_string(W) + " scene");
    }
    std::vector<int> cell_class(grid_rows * grid_cols);
    for (std::size_t i = 0; i < cell_class.size(); ++i) cell_class[i] = static_cast<int>(i % k) + 1;
    std::shuffle(cell_class.begin(), cell_class.end(), rng);

    LabelMask mask(H, W, k);
    for (int r = 0; r < H; ++r) {
        const int gr = r * grid_rows / H;
        for (int c = 0; c < W; ++c) {
            const int gc = c * grid_cols / W;
            mask.at(r, c) = static_cast<std::uint16_t>(cell_class[gr * grid_cols + gc]);
        }
    }

    // Class signatures share one spectral shape. Paired classes also share a
    // brightness level and differ only in the band-to-band oscillation rate of
    // their zero-mean component; every other class oscillates at a common rate
    // and differs from the rest only in level, which differencing removes.
    std::vector<int> group(k + 1);
    std::iota(group.begin(), group.end(), 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double slow = 2.0 * std::numbers::pi / B;
    const double fast = 0.85 * std::numbers::pi;
    std::vector<double> omega(k + 1, 0.5 * (slow + fast));
    for (auto [a, b] : spec.confusable_pairs) {
        group[b] = group[a];
        omega[a] = slow;
        omega[b] = fast;
    }
    std::vector<int> leaders;
    for (int c = 1; c <= k; ++c)
        if (group[c] == c) leaders.push_back(c);
    std::shuffle(leaders.begin(), leaders.end(), rng);
    std::vector<double> level(k + 1, 0.5);
    for (std::size_t i = 0; i < leaders.size(); ++i) {
        level[leaders[i]] = leaders.size() == 1 ? 0.5 : 0.2 + 0.6 * static_cast<double>(i) / (leaders.size() - 1);
    }
    const double tilt = 0.3 * (unit(rng) - 0.5);
    const double bump_center = unit(rng) * (B - 1);
    const double bump_height = 0.2 * (unit(rng) - 0.5);
    std::vector<std::vector<double>> base(k + 1, std::vector<double>(B));
    for (int c = 1; c <= k; ++c) {
        for (int b = 0; b < B; ++b) {
            const double x = static_cast<double>(b) / (B - 1);
            const double d = (b - bump_center) / (0.2 * B);
            base[c][b] = level[group[c]] + tilt * (x - 0.5) + bump_height * std::exp(-d * d);
        }
    }

    // Per-pixel perturbation = illumination offset + tilt + oscillation + noise.
    // Pixels of a class are drawn in antithetic pairs (the partner gets the
    // negated perturbation), so each class mean equals its base spectrum.
    constexpr double kOffset = 0.1;
    constexpr double kAmplitude = 0.02;
    constexpr double kTilt = 0.3;
    std::normal_distribution<double> gauss(0.0, 1.0);
    HsiCube cube(H, W, B);
    std::vector<double> perturb(B);
    for (int c = 1; c <= k; ++c) {
        std::vector<std::pair<int, int>> members;
        for (int r = 0; r < H; ++r)
            for (int col = 0; col < W; ++col)
                if (mask.at(r, col) == c) members.emplace_back(r, col);
        for (std::size_t i = 0; i < members.size(); i += 2) {
            const bool has_partner = i + 1 < members.size();
            const double offset = kOffset * (2.0 * unit(rng) - 1.0);
            const double phase = 2.0 * std::numbers::pi * unit(rng);
            const double tilt = kTilt * (2.0 * unit(rng) - 1.0);
            for (int b = 0; b < B; ++b) {
                perturb[b] = offset + tilt * (static_cast<double>(b) / (B - 1) - 0.5) +
                             kAmplitude * std::cos(omega[c] * b + phase) + spec.magnitude_noise_sigma * gauss(rng);
                if (!has_partner) perturb[b] = 0.0;
            }
            auto [r0, c0] = members[i];
            for (int b = 0; b < B; ++b) cube.at(b, r0, c0) = static_cast<float>(base[c][b] + perturb[b]);
            if (has_partner) {
                auto [r1, c1] = members[i + 1];
                for (int b = 0; b < B; ++b) cube.at(b, r1, c1) = static_cast<float>(base[c][b] - perturb[b]);
            }
        }
    }
    return {std::move(cube), std::move(mask)};
}

}  // namespace cscn
