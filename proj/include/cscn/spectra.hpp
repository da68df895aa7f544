#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace cscn {

class LabelMask;

// H x W x B reflectance raster stored band-sequential: all of band 0 (row
// major), then band 1, and so on.
class HsiCube {
public:
    HsiCube() = default;
    HsiCube(int height, int width, int bands);
    HsiCube(int height, int width, int bands, std::vector<float> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int bands() const { return bands_; }
    std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }

    float& at(int band, int row, int col) { return data_[index(band, row, col)]; }
    float at(int band, int row, int col) const { return data_[index(band, row, col)]; }

    std::span<float> band(int b) { return {data_.data() + b * pixels(), pixels()}; }
    std::span<const float> band(int b) const { return {data_.data() + b * pixels(), pixels()}; }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    // Per-pixel spectrum, gathered across bands.
    std::vector<float> spectrum(int row, int col) const;

    bool all_finite() const;

private:
    std::size_t index(int band, int row, int col) const {
        return (static_cast<std::size_t>(band) * height_ + row) * width_ + col;
    }

    int height_ = 0;
    int width_ = 0;
    int bands_ = 0;
    std::vector<float> data_;
};

struct DerivativeSpec {
    int order = 1;
    int step = 1;

    // Band count left after differencing a cube with `bands` bands.
    int output_bands(int bands) const { return bands - order * step; }
};

// Rates and amplitudes for the mixed-noise degradation. `gaussian_sigma` is a
// fraction of each band's dynamic range; `stripe_amplitude` is absolute.
struct NoiseSpec {
    double gaussian_sigma = 0.05;
    double salt_pepper_rate = 0.01;
    double stripe_amplitude = 0.1;
    double stripe_fraction = 0.05;
    std::uint64_t seed = 0;

    static NoiseSpec none() { return {0.0, 0.0, 0.0, 0.0, 0}; }
};

struct SynthSceneSpec {
    int class_count = 4;
    int bands = 16;
    int height = 32;
    int width = 32;
    // 1-based class labels. Paired classes share one mean spectrum but
    // oscillate across bands at different rates.
    std::vector<std::pair<int, int>> confusable_pairs;
    double magnitude_noise_sigma = 0.01;
    std::uint64_t seed = 0;
};

// Finite-difference spectrum along the band axis. Order 2 is computed by
// applying the order-1 difference twice with the same step.
HsiCube derivative(const HsiCube& cube, const DerivativeSpec& spec);

// Per-band z-score over the H x W plane (population std). Constant bands
// become all zeros.
HsiCube normalize_bands(const HsiCube& cube);

// Adds Gaussian noise, then column stripes, then salt-and-pepper impulses.
// Deterministic for a given spec.seed.
HsiCube degrade(const HsiCube& cube, const NoiseSpec& noise);

std::pair<HsiCube, LabelMask> synth_scene(const SynthSceneSpec& spec);

void validate(const DerivativeSpec& spec, int bands);
void validate(const NoiseSpec& spec);
void validate(const SynthSceneSpec& spec);

}  // namespace cscn
