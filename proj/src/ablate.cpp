#include "cscn/ablate.hpp"

#include <cstdio>
#include <map>

namespace cscn {

AblationAxis parse_axis(const std::string& name) {
    static const std::map<std::string, AblationAxis> axes{
        {"components", AblationAxis::Components},      {"input-format", AblationAxis::InputFormat},
        {"derivative-order", AblationAxis::DerivativeOrder}, {"lambda", AblationAxis::Lambda},
        {"N", AblationAxis::Stages},                    {"stages", AblationAxis::Stages},
        {"C_f", AblationAxis::FusionChannels},          {"fusion-channels", AblationAxis::FusionChannels},
        {"kernel", AblationAxis::Kernel},
    };
    auto it = axes.find(name);
    if (it == axes.end()) throw ConfigError("unknown ablation axis '" + name + "'");
    return it->second;
}

const char* to_string(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::Components: return "components";
        case AblationAxis::InputFormat: return "input-format";
        case AblationAxis::DerivativeOrder: return "derivative-order";
        case AblationAxis::Lambda: return "lambda";
        case AblationAxis::Stages: return "N";
        case AblationAxis::FusionChannels: return "C_f";
        case AblationAxis::Kernel: return "kernel";
    }
    return "?";
}

namespace {

TrainConfig with_arch(TrainConfig cfg, ArchMode arch, bool cpfm, bool hd_loss) {
    cfg.arch = arch;
    cfg.no_cpfm = !cpfm;
    cfg.no_hd_loss = !hd_loss;
    return cfg;
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

}  // namespace

std::vector<AblationVariant> ablation_variants(const TrainConfig& base, AblationAxis axis) {
    std::vector<AblationVariant> out;
    const TrainConfig full = with_arch(base, ArchMode::Dual, true, true);
    switch (axis) {
        case AblationAxis::Components:
            out.push_back({"baseline", with_arch(base, ArchMode::SingleMagnitude, false, false)});
            out.push_back({"+dual", with_arch(base, ArchMode::Dual, false, false)});
            out.push_back({"+CPFM", with_arch(base, ArchMode::Dual, true, false)});
            out.push_back({"+HDLoss", full});
            break;
        case AblationAxis::InputFormat:
            out.push_back({"concatenation", with_arch(base, ArchMode::Concat, false, false)});
            out.push_back({"dual-shared", with_arch(base, ArchMode::Shared, false, false)});
            out.push_back({"dual-non-shared", with_arch(base, ArchMode::Dual, false, false)});
            break;
        case AblationAxis::DerivativeOrder:
            for (int order : {1, 2}) {
                const std::string tag = order == 1 ? "first-order" : "second-order";
                TrainConfig cfg = base;
                cfg.derivative.order = order;
                out.push_back({tag + "/single", with_arch(cfg, ArchMode::SingleDerivative, false, false)});
                out.push_back({tag + "/dual", with_arch(cfg, ArchMode::Dual, false, false)});
                out.push_back({tag + "/full", with_arch(cfg, ArchMode::Dual, true, true)});
            }
            break;
        case AblationAxis::Lambda:
            for (double lambda : {0.5, 1.0, 2.0, 3.0}) {
                TrainConfig cfg = full;
                cfg.lambda = lambda;
                out.push_back({fmt("lambda=%g", lambda), cfg});
            }
            break;
        case AblationAxis::Stages:
            for (int n : {3, 4, 5, 6}) {
                TrainConfig cfg = full;
                cfg.stages = n;
                cfg.channel_schedule.clear();
                out.push_back({fmt("N=%g", n), cfg});
            }
            break;
        case AblationAxis::FusionChannels:
            for (int cf : {64, 128, 192, 256}) {
                TrainConfig cfg = full;
                cfg.fusion_channels = cf;
                out.push_back({fmt("C_f=%g", cf), cfg});
            }
            break;
        case AblationAxis::Kernel:
            for (int k : {3, 5}) {
                TrainConfig cfg = full;
                cfg.kernel = k;
                out.push_back({fmt("kernel=%g", k), cfg});
            }
            break;
    }
    return out;
}

std::vector<AblationRow> run_variants(const std::vector<AblationVariant>& variants, const DatasetFactory& data,
                                      const std::vector<std::uint64_t>& seeds, const AblationProgress& progress) {
    std::vector<AblationRow> rows;
    for (const auto& v : variants) rows.push_back({v.label, v.config, {}, 0, 0, 0, 0});
    for (auto seed : seeds) {
        const Dataset dataset = data(seed);
        for (auto& row : rows) {
            TrainConfig cfg = row.config;
            cfg.seed = seed;
            RunRecord rec = train(dataset, cfg);
            rec.model = nullptr;
            if (progress) progress(row.label, seed, rec);
            row.runs.push_back(std::move(rec));
        }
    }
    for (auto& row : rows) {
        const double n = static_cast<double>(row.runs.size());
        for (const auto& r : row.runs) {
            row.mean_oa += r.report.oa / n;
            row.mean_aa += r.report.aa / n;
            row.mean_kappa += r.report.kappa / n;
            row.mean_cf1 += r.report.cf1 / n;
        }
    }
    return rows;
}

std::vector<AblationRow> ablate(const TrainConfig& base, AblationAxis axis, const DatasetFactory& data,
                                const std::vector<std::uint64_t>& seeds, const AblationProgress& progress) {
    return run_variants(ablation_variants(base, axis), data, seeds, progress);
}

TrainConfig desk_benchmark_config() {
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::AdaptiveMoment;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 60;
    cfg.stages = 3;
    cfg.channel_width = 8;
    cfg.fusion_channels = 16;
    cfg.projection_dim = 16;
    return cfg;
}

SynthSceneSpec benchmark_scene_spec() {
    SynthSceneSpec spec;
    spec.class_count = 6;
    spec.bands = 16;
    spec.height = 32;
    spec.width = 32;
    spec.confusable_pairs = {{1, 2}, {3, 4}};
    spec.magnitude_noise_sigma = 0.01;
    return spec;
}

DatasetFactory benchmark_datasets(double ratio) {
    return [ratio](std::uint64_t seed) {
        SynthSceneSpec spec = benchmark_scene_spec();
        spec.seed = seed + 100;
        auto [cube, mask] = synth_scene(spec);
        auto sp = split(mask, ratio, seed);
        return Dataset{std::move(cube), std::move(mask), std::move(sp)};
    };
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "label,seeds,mean_oa,mean_aa,mean_kappa,mean_cf1,per_seed_cf1\n";
    char buf[256];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f,%.6f,", row.label.c_str(), row.runs.size(), row.mean_oa,
                      row.mean_aa, row.mean_kappa, row.mean_cf1);
        out += buf;
        for (std::size_t i = 0; i < row.runs.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s%.6f", i ? ";" : "", row.runs[i].report.cf1);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

}  // namespace cscn
