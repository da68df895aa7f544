#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cscn/spectra.hpp"

namespace cscn {

// Class map. 0 is background/unlabeled; 1..class_count are classes.
class LabelMask {
public:
    LabelMask() = default;
    LabelMask(int height, int width, int class_count);
    LabelMask(int height, int width, int class_count, std::vector<std::uint16_t> labels);

    int height() const { return height_; }
    int width() const { return width_; }
    int class_count() const { return class_count_; }
    std::size_t pixels() const { return labels_.size(); }

    std::uint16_t& at(int row, int col) { return labels_[static_cast<std::size_t>(row) * width_ + col]; }
    std::uint16_t at(int row, int col) const { return labels_[static_cast<std::size_t>(row) * width_ + col]; }

    std::vector<std::uint16_t>& labels() { return labels_; }
    const std::vector<std::uint16_t>& labels() const { return labels_; }

    // Pixel count per class, indexed 0..class_count (slot 0 is background).
    std::vector<std::size_t> class_histogram() const;
    std::size_t labeled_pixels() const;

    // Throws InvalidArgument when a label exceeds class_count or nothing is labeled.
    void validate() const;

private:
    int height_ = 0;
    int width_ = 0;
    int class_count_ = 0;
    std::vector<std::uint16_t> labels_;
};

struct SplitMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> train;
    std::vector<std::uint8_t> test;
};

enum class RasterDtype { F32LE, U16LE, U8 };

struct RasterHeader {
    int height = 0;
    int width = 0;
    int bands = 0;
    RasterDtype dtype = RasterDtype::F32LE;
    std::string interleave = "bsq";
    std::string endianness = "little";

    std::size_t payload_bytes() const;
};

const char* dtype_tag(RasterDtype dtype);
RasterDtype parse_dtype(const std::string& tag);

// `<base>.raw` payload plus `<base>.hdr.json` sidecar.
std::filesystem::path payload_path(const std::filesystem::path& base);
std::filesystem::path header_path(const std::filesystem::path& base);

RasterHeader read_header(const std::filesystem::path& base);

void save_cube(const HsiCube& cube, const std::filesystem::path& base);
HsiCube load_cube(const std::filesystem::path& base);

// Labels are stored with bands=1, dtype u16le. The class count travels in an
// extra "classes" header key; when absent the maximum label is used.
void save_labels(const LabelMask& mask, const std::filesystem::path& base);
LabelMask load_labels(const std::filesystem::path& base);

// Writes `<base>.train` and `<base>.test` as u8 rasters.
void save_split(const SplitMask& split, const std::filesystem::path& base);
SplitMask load_split(const std::filesystem::path& base);

// Per-class random draw of max(1, round(ratio * n_c)) training pixels.
SplitMask split(const LabelMask& mask, double ratio, std::uint64_t seed);

// Copy of `mask` where every pixel outside `region` is background.
LabelMask restrict_to(const LabelMask& mask, const std::vector<std::uint8_t>& region);

struct OneHot {
    int height = 0;
    int width = 0;
    int classes = 0;
    std::vector<float> values;  // [H][W][C]

    float at(int row, int col, int c) const {
        return values[(static_cast<std::size_t>(row) * width + col) * classes + c];
    }
};

OneHot one_hot(const LabelMask& mask);

}  // namespace cscn
