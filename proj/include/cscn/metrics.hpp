#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cscn/data.hpp"

namespace cscn {

// Rows are true classes, columns predicted classes; index i is class i+1.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int classes = 0);
    ConfusionMatrix(int classes, std::vector<std::int64_t> counts);

    int classes() const { return classes_; }
    std::int64_t& at(int truth, int pred) { return counts_[static_cast<std::size_t>(truth) * classes_ + pred]; }
    std::int64_t at(int truth, int pred) const { return counts_[static_cast<std::size_t>(truth) * classes_ + pred]; }
    std::int64_t total() const;
    const std::vector<std::int64_t>& counts() const { return counts_; }

    std::string to_csv() const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    int classes_ = 0;
    std::vector<std::int64_t> counts_;
};

struct EvalReport {
    double oa = 0.0;
    double aa = 0.0;
    double kappa = 0.0;
    std::vector<double> f1_per_class;
    std::vector<std::int64_t> support;
    double cf1 = 0.0;
    ConfusionMatrix confusion;

    std::string to_json() const;
    std::string to_table() const;

    bool operator==(const EvalReport&) const = default;
};

// Counts labeled pixels of `truth` that fall inside `region`. `pred` holds
// class labels 1..C per pixel in row-major order.
ConfusionMatrix confusion(const std::vector<std::uint16_t>& pred, const LabelMask& truth,
                          const std::vector<std::uint8_t>& region);

// Zero-support classes are left out of AA and CF1. A degenerate chance term
// (p_e == 1) yields kappa = 0.
EvalReport report(const ConfusionMatrix& cm);

}  // namespace cscn
