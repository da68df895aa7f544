#include "cscn/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include <json.hpp>

#include "cscn/error.hpp"
#include "cscn/io.hpp"

namespace cscn {

namespace fs = std::filesystem;
using json = nlohmann::json;

LabelMask::LabelMask(int height, int width, int class_count)
    : LabelMask(height, width, class_count,
                std::vector<std::uint16_t>(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), 0)) {}

LabelMask::LabelMask(int height, int width, int class_count, std::vector<std::uint16_t> labels)
    : height_(height), width_(width), class_count_(class_count), labels_(std::move(labels)) {
    if (height < 1 || width < 1) throw InvalidArgument("label mask dims must be positive");
    if (class_count < 1 || class_count > 65535) throw InvalidArgument("class_count out of range");
    if (labels_.size() != static_cast<std::size_t>(height) * width) {
        throw InvalidArgument("label data size does not match H*W");
    }
}

std::vector<std::size_t> LabelMask::class_histogram() const {
    std::vector<std::size_t> counts(class_count_ + 1, 0);
    for (auto v : labels_) {
        if (v > class_count_) throw InvalidArgument("label " + std::to_string(v) + " exceeds class_count");
        ++counts[v];
    }
    return counts;
}

std::size_t LabelMask::labeled_pixels() const {
    return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](auto v) { return v != 0; }));
}

void LabelMask::validate() const {
    class_histogram();
    if (labeled_pixels() == 0) throw InvalidArgument("label mask has no labeled pixels");
}

const char* dtype_tag(RasterDtype dtype) {
    switch (dtype) {
        case RasterDtype::F32LE: return "f32le";
        case RasterDtype::U16LE: return "u16le";
        case RasterDtype::U8: return "u8";
    }
    return "?";
}

RasterDtype parse_dtype(const std::string& tag) {
    if (tag == "f32le") return RasterDtype::F32LE;
    if (tag == "u16le") return RasterDtype::U16LE;
    if (tag == "u8") return RasterDtype::U8;
    throw UnsupportedDtype("unsupported dtype '" + tag + "'");
}

std::size_t RasterHeader::payload_bytes() const {
    std::size_t elem = dtype == RasterDtype::F32LE ? 4 : dtype == RasterDtype::U16LE ? 2 : 1;
    return static_cast<std::size_t>(height) * width * bands * elem;
}

fs::path payload_path(const fs::path& base) {
    auto p = base;
    p += ".raw";
    return p;
}

fs::path header_path(const fs::path& base) {
    auto p = base;
    p += ".hdr.json";
    return p;
}

namespace {

void write_header(const RasterHeader& h, const fs::path& base, const json& extra = json::object()) {
    json j = {{"height", h.height},   {"width", h.width},           {"bands", h.bands},
              {"dtype", dtype_tag(h.dtype)}, {"interleave", h.interleave}, {"byte_order", h.endianness}};
    for (auto& [key, value] : extra.items()) j[key] = value;
    write_file_atomic(header_path(base), j.dump(2) + "\n");
}

json read_header_json(const fs::path& base) {
    try {
        return json::parse(read_file(header_path(base)));
    } catch (const json::exception& e) {
        throw HeaderMismatch("malformed header " + header_path(base).string() + ": " + e.what());
    }
}

RasterHeader header_from_json(const json& j) {
    RasterHeader h;
    try {
        h.height = j.at("height").get<int>();
        h.width = j.at("width").get<int>();
        h.bands = j.at("bands").get<int>();
        h.dtype = parse_dtype(j.at("dtype").get<std::string>());
        h.interleave = j.value("interleave", "bsq");
        h.endianness = j.value("byte_order", "little");
    } catch (const json::exception& e) {
        throw HeaderMismatch(std::string("header missing field: ") + e.what());
    }
    if (h.height < 1 || h.width < 1 || h.bands < 1) throw HeaderMismatch("header dims must be positive");
    if (h.interleave != "bsq") throw UnsupportedDtype("only bsq interleave is supported");
    if (h.endianness != "little") throw UnsupportedDtype("only little-endian payloads are supported");
    return h;
}

template <typename T>
std::string encode_le(const std::vector<T>& values) {
    std::string out(values.size() * sizeof(T), '\0');
    for (std::size_t i = 0; i < values.size(); ++i) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &values[i], sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
        std::memcpy(out.data() + i * sizeof(T), bytes, sizeof(T));
    }
    return out;
}

template <typename T>
std::vector<T> decode_le(const std::string& payload) {
    std::vector<T> out(payload.size() / sizeof(T));
    for (std::size_t i = 0; i < out.size(); ++i) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, payload.data() + i * sizeof(T), sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
        std::memcpy(&out[i], bytes, sizeof(T));
    }
    return out;
}

std::string read_payload(const fs::path& base, const RasterHeader& h) {
    std::string payload = read_file(payload_path(base));
    if (payload.size() != h.payload_bytes()) {
        throw HeaderMismatch("payload " + payload_path(base).string() + " has " + std::to_string(payload.size()) +
                             " bytes, header implies " + std::to_string(h.payload_bytes()));
    }
    return payload;
}

void save_u8(const std::vector<std::uint8_t>& values, int height, int width, const fs::path& base) {
    RasterHeader h{height, width, 1, RasterDtype::U8};
    write_file_atomic(payload_path(base), encode_le(values));
    write_header(h, base);
}

std::vector<std::uint8_t> load_u8(const fs::path& base, int& height, int& width) {
    RasterHeader h = read_header(base);
    if (h.dtype != RasterDtype::U8 || h.bands != 1) throw UnsupportedDtype("expected a single-band u8 raster");
    height = h.height;
    width = h.width;
    return decode_le<std::uint8_t>(read_payload(base, h));
}

}  // namespace

RasterHeader read_header(const fs::path& base) { return header_from_json(read_header_json(base)); }

void save_cube(const HsiCube& cube, const fs::path& base) {
    RasterHeader h{cube.height(), cube.width(), cube.bands(), RasterDtype::F32LE};
    write_file_atomic(payload_path(base), encode_le(cube.data()));
    write_header(h, base);
}

HsiCube load_cube(const fs::path& base) {
    RasterHeader h = read_header(base);
    if (h.dtype != RasterDtype::F32LE) throw UnsupportedDtype("cube payload must be f32le");
    return HsiCube(h.height, h.width, h.bands, decode_le<float>(read_payload(base, h)));
}

void save_labels(const LabelMask& mask, const fs::path& base) {
    RasterHeader h{mask.height(), mask.width(), 1, RasterDtype::U16LE};
    write_file_atomic(payload_path(base), encode_le(mask.labels()));
    write_header(h, base, {{"classes", mask.class_count()}});
}

LabelMask load_labels(const fs::path& base) {
    json j = read_header_json(base);
    RasterHeader h = header_from_json(j);
    if (h.dtype != RasterDtype::U16LE || h.bands != 1) throw UnsupportedDtype("labels must be single-band u16le");
    auto labels = decode_le<std::uint16_t>(read_payload(base, h));
    int classes = j.value("classes", 0);
    if (classes <= 0) classes = std::max<int>(1, *std::max_element(labels.begin(), labels.end()));
    return LabelMask(h.height, h.width, classes, std::move(labels));
}

void save_split(const SplitMask& split, const fs::path& base) {
    auto train = base;
    train += ".train";
    auto test = base;
    test += ".test";
    save_u8(split.train, split.height, split.width, train);
    save_u8(split.test, split.height, split.width, test);
}

SplitMask load_split(const fs::path& base) {
    auto train = base;
    train += ".train";
    auto test = base;
    test += ".test";
    SplitMask s;
    int h2 = 0, w2 = 0;
    s.train = load_u8(train, s.height, s.width);
    s.test = load_u8(test, h2, w2);
    if (h2 != s.height || w2 != s.width) throw HeaderMismatch("train/test split rasters differ in size");
    return s;
}

SplitMask split(const LabelMask& mask, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split ratio must lie in (0, 1)");
    std::vector<std::vector<std::size_t>> members(mask.class_count() + 1);
    for (std::size_t i = 0; i < mask.pixels(); ++i) {
        auto v = mask.labels()[i];
        if (v > mask.class_count()) throw InvalidArgument("label exceeds class_count");
        if (v != 0) members[v].push_back(i);
    }
    SplitMask out{mask.height(), mask.width(), std::vector<std::uint8_t>(mask.pixels(), 0),
                  std::vector<std::uint8_t>(mask.pixels(), 0)};
    std::mt19937_64 rng(seed);
    for (int c = 1; c <= mask.class_count(); ++c) {
        auto& idx = members[c];
        if (idx.empty()) throw EmptyClass("class " + std::to_string(c) + " has no pixels");
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * idx.size())));
        for (std::size_t k = 0; k < idx.size(); ++k) (k < n_train ? out.train : out.test)[idx[k]] = 1;
    }
    return out;
}

LabelMask restrict_to(const LabelMask& mask, const std::vector<std::uint8_t>& region) {
    if (region.size() != mask.pixels()) throw ShapeMismatch("region size does not match mask");
    LabelMask out = mask;
    for (std::size_t i = 0; i < region.size(); ++i)
        if (!region[i]) out.labels()[i] = 0;
    return out;
}

OneHot one_hot(const LabelMask& mask) {
    OneHot out{mask.height(), mask.width(), mask.class_count(),
               std::vector<float>(mask.pixels() * mask.class_count(), 0.0f)};
    for (std::size_t i = 0; i < mask.pixels(); ++i) {
        auto v = mask.labels()[i];
        if (v > mask.class_count()) throw InvalidArgument("label exceeds class_count");
        if (v != 0) out.values[i * mask.class_count() + (v - 1)] = 1.0f;
    }
    return out;
}

}  // namespace cscn
