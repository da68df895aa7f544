#include "cscn/metrics.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cscn/error.hpp"

namespace cscn {

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes), counts_(static_cast<std::size_t>(classes) * classes, 0) {}

ConfusionMatrix::ConfusionMatrix(int classes, std::vector<std::int64_t> counts)
    : classes_(classes), counts_(std::move(counts)) {
    if (counts_.size() != static_cast<std::size_t>(classes) * classes) {
        throw InvalidArgument("confusion counts must be classes x classes");
    }
    for (auto v : counts_)
        if (v < 0) throw InvalidArgument("confusion counts must be nonnegative");
}

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

std::string ConfusionMatrix::to_csv() const {
    std::ostringstream out;
    out << "truth\\pred";
    for (int c = 0; c < classes_; ++c) out << ',' << c + 1;
    out << '\n';
    for (int t = 0; t < classes_; ++t) {
        out << t + 1;
        for (int p = 0; p < classes_; ++p) out << ',' << at(t, p);
        out << '\n';
    }
    return out.str();
}

ConfusionMatrix confusion(const std::vector<std::uint16_t>& pred, const LabelMask& truth,
                          const std::vector<std::uint8_t>& region) {
    if (pred.size() != truth.pixels() || region.size() != truth.pixels()) {
        throw ShapeMismatch("prediction, truth and region must share H*W");
    }
    const int C = truth.class_count();
    ConfusionMatrix cm(C);
    std::int64_t seen = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int t = truth.labels()[i];
        if (!region[i] || t == 0) continue;
        const int p = pred[i];
        if (p < 1 || p > C || t > C) throw InvalidArgument("label outside 1..C in confusion");
        ++cm.at(t - 1, p - 1);
        ++seen;
    }
    if (seen == 0) throw EmptyRegion("no labeled pixels inside the evaluation region");
    return cm;
}

EvalReport report(const ConfusionMatrix& cm) {
    const int C = cm.classes();
    const double total = static_cast<double>(cm.total());
    if (total <= 0) throw EmptyRegion("confusion matrix is empty");

    std::vector<double> row(C, 0.0), col(C, 0.0);
    double trace = 0.0;
    for (int t = 0; t < C; ++t) {
        for (int p = 0; p < C; ++p) {
            row[t] += static_cast<double>(cm.at(t, p));
            col[p] += static_cast<double>(cm.at(t, p));
        }
        trace += static_cast<double>(cm.at(t, t));
    }

    EvalReport r;
    r.confusion = cm;
    r.oa = trace / total;

    double recall_sum = 0.0, f1_sum = 0.0;
    int supported = 0;
    r.f1_per_class.assign(C, 0.0);
    r.support.assign(C, 0);
    for (int c = 0; c < C; ++c) {
        const double tp = static_cast<double>(cm.at(c, c));
        const double recall = row[c] > 0 ? tp / row[c] : 0.0;
        const double precision = col[c] > 0 ? tp / col[c] : 0.0;
        r.f1_per_class[c] = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        r.support[c] = static_cast<std::int64_t>(row[c]);
        if (row[c] > 0) {
            recall_sum += recall;
            f1_sum += r.f1_per_class[c];
            ++supported;
        }
    }
    r.aa = recall_sum / supported;
    r.cf1 = f1_sum / supported;

    double pe = 0.0;
    for (int c = 0; c < C; ++c) pe += row[c] * col[c];
    pe /= total * total;
    r.kappa = pe >= 1.0 ? 0.0 : (r.oa - pe) / (1.0 - pe);
    return r;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["oa"] = oa;
    j["aa"] = aa;
    j["kappa"] = kappa;
    j["cf1"] = cf1;
    j["f1_per_class"] = f1_per_class;
    j["support"] = support;
    std::vector<std::vector<std::int64_t>> rows(confusion.classes());
    for (int t = 0; t < confusion.classes(); ++t)
        for (int p = 0; p < confusion.classes(); ++p) rows[t].push_back(confusion.at(t, p));
    j["confusion"] = rows;
    return j.dump(2);
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "class  support      F1\n";
    for (std::size_t c = 0; c < f1_per_class.size(); ++c) {
        out << std::setw(5) << c + 1 << "  " << std::setw(7) << support[c] << "  " << std::setw(6) << f1_per_class[c]
            << (support[c] == 0 ? "  (no support)" : "") << '\n';
    }
    out << "OA     " << oa << "\nAA     " << aa << "\nKappa  " << kappa << "\nCF1    " << cf1 << '\n';
    return out.str();
}

}  // namespace cscn
