#pragma once

// Shared test helpers: seeded generators and independent oracles. Nothing in
// here calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cscn/data.hpp"
#include "cscn/metrics.hpp"
#include "cscn/spectra.hpp"

namespace cscn::testing {

inline HsiCube random_cube(std::mt19937_64& rng, int h, int w, int b, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    std::vector<float> data(static_cast<std::size_t>(h) * w * b);
    for (auto& v : data) v = u(rng);
    return HsiCube(h, w, b, std::move(data));
}

inline LabelMask random_mask(std::mt19937_64& rng, int h, int w, int classes, double background = 0.2) {
    LabelMask m(h, w, classes);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> cls(1, classes);
    for (auto& v : m.labels()) v = u(rng) < background ? 0 : static_cast<std::uint16_t>(cls(rng));
    return m;
}

// Literal per-pixel loops over the difference quotients, indexing the raw
// array by hand. Order 2 follows the nested quotient (Y'_j - Y'_i) / dn.
inline std::vector<float> brute_force_derivative(const std::vector<float>& data, int h, int w, int b, int order,
                                                 int step) {
    const int plane = h * w;
    const float dn = static_cast<float>(step);
    std::vector<float> out;
    const int out_bands = b - order * step;
    out.resize(static_cast<std::size_t>(out_bands) * plane);
    for (int p = 0; p < plane; ++p) {
        for (int i = 0; i < out_bands; ++i) {
            if (order == 1) {
                out[i * plane + p] = (data[(i + step) * plane + p] - data[i * plane + p]) / dn;
            } else {
                const float d_i = (data[(i + step) * plane + p] - data[i * plane + p]) / dn;
                const float d_j = (data[(i + 2 * step) * plane + p] - data[(i + step) * plane + p]) / dn;
                out[i * plane + p] = (d_j - d_i) / dn;
            }
        }
    }
    return out;
}

inline double rel_err(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-12});
    return std::fabs(a - b) / scale;
}

// Straight transcription of the metric definitions, one class at a time.
struct Reference {
    double oa, aa, kappa, cf1;
    std::vector<double> f1;
};

inline Reference brute_force(const std::vector<std::vector<long long>>& m) {
    const int n = static_cast<int>(m.size());
    double total = 0, diag = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            total += m[i][j];
            if (i == j) diag += m[i][j];
        }
    Reference r{};
    r.oa = diag / total;
    double pe = 0;
    for (int i = 0; i < n; ++i) {
        double row = 0, col = 0;
        for (int j = 0; j < n; ++j) {
            row += m[i][j];
            col += m[j][i];
        }
        pe += row * col;
    }
    pe /= total * total;
    r.kappa = pe == 1.0 ? 0.0 : (r.oa - pe) / (1.0 - pe);
    double recall_sum = 0, f1_sum = 0;
    int supported = 0;
    for (int c = 0; c < n; ++c) {
        double tp = m[c][c], row = 0, col = 0;
        for (int j = 0; j < n; ++j) {
            row += m[c][j];
            col += m[j][c];
        }
        const double precision = col > 0 ? tp / col : 0.0;
        const double recall = row > 0 ? tp / row : 0.0;
        const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
        r.f1.push_back(f1);
        if (row > 0) {
            ++supported;
            recall_sum += recall;
            f1_sum += f1;
        }
    }
    r.aa = recall_sum / supported;
    r.cf1 = f1_sum / supported;
    return r;
}

inline ConfusionMatrix to_matrix(const std::vector<std::vector<long long>>& m) {
    const int n = static_cast<int>(m.size());
    std::vector<std::int64_t> counts;
    for (const auto& row : m) counts.insert(counts.end(), row.begin(), row.end());
    return ConfusionMatrix(n, counts);
}

}  // namespace cscn::testing
