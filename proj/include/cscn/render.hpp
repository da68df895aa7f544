#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cscn {

using Rgb = std::array<std::uint8_t, 3>;

// Fixed colour per label; 0 (background) is black.
Rgb palette_color(int label);

// PNG byte streams; identical inputs give identical bytes.
std::string encode_label_png(const std::vector<std::uint16_t>& labels, int height, int width);
// Values are clamped to [0, 1] and mapped to round(255 * v).
std::string encode_gray_png(const std::vector<float>& values, int height, int width);

void render_labels(const std::vector<std::uint16_t>& labels, int height, int width, const std::filesystem::path& out);
void render_weights(const std::vector<float>& values, int height, int width, const std::filesystem::path& out);

}  // namespace cscn
