#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cscn/ablate.hpp"
#include "cscn/io.hpp"
#include "cscn/render.hpp"
#include "cscn/train.hpp"

using namespace cscn;
namespace fs = std::filesystem;

namespace {

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
    std::vector<std::pair<int, int>> out;
    std::istringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        auto colon = item.find(':');
        if (colon == std::string::npos) throw InvalidArgument("pair must look like a:b, got '" + item + "'");
        out.emplace_back(std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1)));
    }
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::istringstream in(text);
    for (std::string item; std::getline(in, item, ',');) out.push_back(std::stoull(item));
    if (out.empty()) throw InvalidArgument("no seeds given");
    return out;
}

TrainConfig base_config(const std::string& path, bool preset, bool desk = false) {
    TrainConfig base = desk ? desk_benchmark_config() : preset ? TrainConfig::benchmark_preset() : TrainConfig{};
    if (!path.empty()) return load_config(path, base);
    apply_env_overrides(base);
    return base;
}

SplitMask split_or_draw(const std::string& split_base, const LabelMask& mask, double ratio, std::uint64_t seed) {
    if (!split_base.empty()) return load_split(split_base);
    return split(mask, ratio, seed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperspectral classification with spectral-derivative dual encoders"};
    app.require_subcommand(1);

    // synth
    SynthSceneSpec synth_spec;
    std::string synth_out, synth_pairs;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled scene");
    synth->add_option("--out", synth_out, "Output base path (cube at <out>, labels at <out>.labels)")->required();
    synth->add_option("--classes", synth_spec.class_count);
    synth->add_option("--bands", synth_spec.bands);
    synth->add_option("--height", synth_spec.height);
    synth->add_option("--width", synth_spec.width);
    synth->add_option("--pairs", synth_pairs, "Confusable class pairs, e.g. 1:2,3:4");
    synth->add_option("--noise", synth_spec.magnitude_noise_sigma);
    synth->add_option("--seed", synth_spec.seed);

    // derive
    std::string derive_in, derive_out;
    DerivativeSpec derive_spec;
    auto* derive = app.add_subcommand("derive", "Spectral derivative of a cube");
    derive->add_option("--in", derive_in)->required();
    derive->add_option("--out", derive_out)->required();
    derive->add_option("--order", derive_spec.order);
    derive->add_option("--step", derive_spec.step);

    // degrade
    std::string degrade_in, degrade_out;
    NoiseSpec noise;
    auto* degrade_cmd = app.add_subcommand("degrade", "Add Gaussian, stripe and salt-and-pepper noise");
    degrade_cmd->add_option("--in", degrade_in)->required();
    degrade_cmd->add_option("--out", degrade_out)->required();
    degrade_cmd->add_option("--gaussian", noise.gaussian_sigma);
    degrade_cmd->add_option("--salt-pepper", noise.salt_pepper_rate);
    degrade_cmd->add_option("--stripe-fraction", noise.stripe_fraction);
    degrade_cmd->add_option("--stripe-amplitude", noise.stripe_amplitude);
    degrade_cmd->add_option("--seed", noise.seed);

    // split
    std::string split_labels, split_out;
    double split_ratio = 0.1;
    std::uint64_t split_seed = 0;
    auto* split_cmd = app.add_subcommand("split", "Draw a per-class train/test split");
    split_cmd->add_option("--labels", split_labels)->required();
    split_cmd->add_option("--out", split_out)->required();
    split_cmd->add_option("--ratio", split_ratio);
    split_cmd->add_option("--seed", split_seed);

    // train
    std::string train_config, train_cube, train_labels, train_split, train_ckpt, train_trace;
    double train_ratio = 0.1;
    bool train_preset = false;
    int train_epochs = -1;
    auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    train_cmd->add_option("--config", train_config, "key = value config file");
    train_cmd->add_option("--cube", train_cube)->required();
    train_cmd->add_option("--labels", train_labels)->required();
    train_cmd->add_option("--split", train_split, "Split base path; drawn with --ratio when omitted");
    train_cmd->add_option("--ratio", train_ratio);
    train_cmd->add_option("--checkpoint", train_ckpt)->required();
    train_cmd->add_option("--trace", train_trace, "Per-epoch loss CSV");
    train_cmd->add_option("--epochs", train_epochs);
    train_cmd->add_flag("--benchmark-preset", train_preset);

    // eval
    std::string eval_ckpt, eval_cube, eval_labels, eval_split, eval_report, eval_pred, eval_weights;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
    eval_cmd->add_option("--cube", eval_cube)->required();
    eval_cmd->add_option("--labels", eval_labels)->required();
    eval_cmd->add_option("--split", eval_split)->required();
    eval_cmd->add_option("--report", eval_report, "JSON report path (stdout table otherwise)");
    eval_cmd->add_option("--predictions", eval_pred, "Prediction label raster base path");
    eval_cmd->add_option("--weights", eval_weights, "Directory for per-stage fusion weight PNGs");

    // ablate
    std::string ablate_axis, ablate_config, ablate_cube, ablate_labels, ablate_split, ablate_out, ablate_seeds = "0";
    double ablate_ratio = 0.1;
    bool ablate_preset = false, ablate_scene = false;
    auto* ablate_cmd = app.add_subcommand("ablate", "Sweep one ablation axis over several seeds");
    ablate_cmd->add_option("--axis", ablate_axis)->required();
    ablate_cmd->add_option("--config", ablate_config);
    ablate_cmd->add_option("--cube", ablate_cube);
    ablate_cmd->add_option("--labels", ablate_labels);
    ablate_cmd->add_option("--split", ablate_split, "Fixed split; otherwise drawn per seed with --ratio");
    ablate_cmd->add_option("--ratio", ablate_ratio);
    ablate_cmd->add_option("--seeds", ablate_seeds, "Comma-separated seeds");
    ablate_cmd->add_option("--out", ablate_out)->required();
    ablate_cmd->add_flag("--benchmark-preset", ablate_preset);
    ablate_cmd->add_flag("--desk-benchmark", ablate_scene,
                         "Desk-scale synthetic benchmark: regenerated scene per seed and its training settings");

    // render
    std::string render_in, render_out;
    int render_band = 0;
    auto* render_cmd = app.add_subcommand("render", "Render a label raster or one cube band to PNG");
    render_cmd->add_option("--in", render_in)->required();
    render_cmd->add_option("--out", render_out)->required();
    render_cmd->add_option("--band", render_band, "Band to render for float cubes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            if (!synth_pairs.empty()) synth_spec.confusable_pairs = parse_pairs(synth_pairs);
            auto [cube, mask] = synth_scene(synth_spec);
            save_cube(cube, synth_out);
            save_labels(mask, synth_out + ".labels");
        } else if (derive->parsed()) {
            save_cube(derivative(load_cube(derive_in), derive_spec), derive_out);
        } else if (degrade_cmd->parsed()) {
            save_cube(degrade(load_cube(degrade_in), noise), degrade_out);
        } else if (split_cmd->parsed()) {
            save_split(split(load_labels(split_labels), split_ratio, split_seed), split_out);
        } else if (train_cmd->parsed()) {
            TrainConfig cfg = base_config(train_config, train_preset);
            if (train_epochs > 0) cfg.epochs = train_epochs;
            Dataset data{load_cube(train_cube), load_labels(train_labels), {}};
            data.split = split_or_draw(train_split, data.mask, train_ratio, cfg.seed);
            TrainOptions opts;
            opts.checkpoint = train_ckpt;
            opts.on_step = [&](int epoch, const LossBreakdown& l) {
                if ((epoch + 1) % 10 == 0 || epoch + 1 == cfg.epochs)
                    std::fprintf(stderr, "epoch %d/%d  loss %.5f\n", epoch + 1, cfg.epochs, l.total);
            };
            auto rec = train(data, cfg, opts);
            if (!train_trace.empty()) write_file_atomic(train_trace, trace_csv(rec.trace));
            std::cout << rec.report.to_table();
        } else if (eval_cmd->parsed()) {
            const auto cube = load_cube(eval_cube);
            const auto mask = load_labels(eval_labels);
            const auto sp = load_split(eval_split);
            auto ck = load_checkpoint(eval_ckpt);
            if (cube.bands() != ck.magnitude_bands) {
                throw ShapeMismatch("cube has " + std::to_string(cube.bands()) + " bands, checkpoint expects " +
                                    std::to_string(ck.magnitude_bands));
            }
            torch::set_num_threads(1);
            const auto inputs = prepare_inputs(cube, ck.config.derivative);
            ck.model->eval();
            const auto pred = predict(ck.model, inputs);
            const auto rep = report(confusion(pred, mask, sp.test));
            if (eval_report.empty()) std::cout << rep.to_table();
            else write_file_atomic(eval_report, rep.to_json());
            if (!eval_pred.empty()) save_labels(LabelMask(cube.height(), cube.width(), ck.classes, pred), eval_pred);
            if (!eval_weights.empty()) {
                torch::NoGradGuard no_grad;
                auto out = ck.model->forward(inputs.magnitude, inputs.derivative);
                fs::create_directories(eval_weights);
                const int n = static_cast<int>(out.fusion_weights.size());
                for (int i = 0; i < n; ++i) {
                    const auto& w = out.fusion_weights[i];
                    if (!w.derivative.defined()) continue;
                    auto t = w.derivative.squeeze().contiguous();
                    std::vector<float> values(t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
                    const std::string name = "stage" + std::to_string(n - i) + "_derivative.png";
                    render_weights(values, static_cast<int>(t.size(0)), static_cast<int>(t.size(1)),
                                   fs::path(eval_weights) / name);
                }
            }
        } else if (ablate_cmd->parsed()) {
            const TrainConfig base = base_config(ablate_config, ablate_preset, ablate_scene);
            DatasetFactory factory;
            if (ablate_scene) {
                factory = ablate_cmd->count("--ratio") > 0 ? benchmark_datasets(ablate_ratio) : benchmark_datasets();
            } else {
                if (ablate_cube.empty() || ablate_labels.empty())
                    throw InvalidArgument("ablate needs --cube and --labels or --desk-benchmark");
                factory = [cube = load_cube(ablate_cube), mask = load_labels(ablate_labels),
                           &ablate_split, &ablate_ratio](std::uint64_t seed) {
                    return Dataset{cube, mask, split_or_draw(ablate_split, mask, ablate_ratio, seed)};
                };
            }
            auto rows = ablate(base, parse_axis(ablate_axis), factory, parse_seeds(ablate_seeds),
                               [](const std::string& label, std::uint64_t seed, const RunRecord& r) {
                                   std::fprintf(stderr, "%s seed=%llu cf1=%.4f oa=%.4f (%.1fs)\n", label.c_str(),
                                                static_cast<unsigned long long>(seed), r.report.cf1, r.report.oa,
                                                r.seconds);
                               });
            write_file_atomic(ablate_out, ablation_csv(rows));
        } else if (render_cmd->parsed()) {
            const auto hdr = read_header(render_in);
            if (hdr.dtype == RasterDtype::F32LE) {
                const auto cube = load_cube(render_in);
                if (render_band < 0 || render_band >= cube.bands()) throw InvalidArgument("band out of range");
                auto band = cube.band(render_band);
                std::vector<float> values(band.begin(), band.end());
                render_weights(values, cube.height(), cube.width(), render_out);
            } else {
                const auto mask = load_labels(render_in);
                render_labels(mask.labels(), mask.height(), mask.width(), render_out);
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
