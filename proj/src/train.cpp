#include "cscn/train.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include "cscn/io.hpp"

namespace cscn {

namespace {

torch::optim::Optimizer* make_optimizer(const TrainConfig& cfg, std::vector<torch::Tensor> params,
                                        std::unique_ptr<torch::optim::Optimizer>& holder) {
    if (cfg.optimizer == OptimizerKind::AdaptiveMoment) {
        holder = std::make_unique<torch::optim::Adam>(std::move(params), torch::optim::AdamOptions(cfg.learning_rate));
    } else {
        holder = std::make_unique<torch::optim::SGD>(
            std::move(params), torch::optim::SGDOptions(cfg.learning_rate).momentum(cfg.momentum));
    }
    return holder.get();
}

void check_dataset(const Dataset& data) {
    const auto& m = data.mask;
    if (m.height() != data.cube.height() || m.width() != data.cube.width()) {
        throw ShapeMismatch("label mask and cube differ in spatial size");
    }
    if (data.split.height != m.height() || data.split.width != m.width() || data.split.train.size() != m.pixels() ||
        data.split.test.size() != m.pixels()) {
        throw ShapeMismatch("split masks do not match the label raster");
    }
}

}  // namespace

RunRecord train(const Dataset& data, const TrainConfig& cfg, const TrainOptions& options) {
    validate(cfg);
    check_dataset(data);
    const auto start = std::chrono::steady_clock::now();
    torch::set_num_threads(1);

    const int classes = cfg.classes > 0 ? cfg.classes : data.mask.class_count();
    if (data.mask.class_count() > classes) throw ConfigError("config declares fewer classes than the label mask");

    const ModelInputs inputs = prepare_inputs(data.cube, cfg.derivative);
    CscnModel model(cfg, static_cast<int>(inputs.magnitude.size(1)), static_cast<int>(inputs.derivative.size(1)),
                    classes);
    model->train();

    // Test pixels never reach the loss: they are background from here on.
    const torch::Tensor labels = label_tensor(restrict_to(data.mask, data.split.train));

    std::unique_ptr<torch::optim::Optimizer> holder;
    auto* optimizer = make_optimizer(cfg, model->parameters(), holder);

    RunRecord record;
    record.config = cfg;
    record.trace.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        optimizer->zero_grad();
        auto out = model->forward(inputs.magnitude, inputs.derivative);
        const BranchSupervision* sup_m = out.branches.empty() ? nullptr : &out.branches[0];
        const BranchSupervision* sup_d = out.branches.empty() ? nullptr : &out.branches[1];
        auto loss = total_loss(out.logits, sup_m, sup_d, labels, classes, cfg.lambda);
        record.trace.push_back(loss.breakdown);
        if (!std::isfinite(loss.breakdown.total)) {
            throw DivergenceDetected("loss became non-finite at epoch " + std::to_string(epoch), record.trace);
        }
        loss.total.backward();
        optimizer->step();
        if (options.on_step) options.on_step(epoch, loss.breakdown);
    }

    record.report = evaluate_model(model, inputs, data.mask, data.split.test);
    if (!options.checkpoint.empty()) {
        save_checkpoint(model, cfg, options.checkpoint);
        record.checkpoint = options.checkpoint;
    }
    record.model = model;
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return record;
}

std::vector<std::uint16_t> predict(CscnModel& model, const ModelInputs& inputs) {
    torch::NoGradGuard no_grad;
    auto out = model->forward(inputs.magnitude, inputs.derivative);
    auto arg = out.logits.argmax(1).reshape({-1}).add(1).to(torch::kInt32).contiguous();
    const int32_t* p = arg.data_ptr<int32_t>();
    return std::vector<std::uint16_t>(p, p + arg.numel());
}

EvalReport evaluate_model(CscnModel& model, const ModelInputs& inputs, const LabelMask& mask,
                          const std::vector<std::uint8_t>& region) {
    return report(confusion(predict(model, inputs), mask, region));
}

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    p += ".manifest";
    return p;
}

void save_checkpoint(CscnModel& model, const TrainConfig& cfg, const std::filesystem::path& path) {
    std::ostringstream manifest;
    manifest << "cscn-checkpoint 1\n"
             << "magnitude_bands " << model->magnitude_bands() << '\n'
             << "derivative_bands " << model->derivative_bands() << '\n'
             << "classes " << model->classes() << '\n';
    std::istringstream kv(to_key_values(cfg));
    for (std::string line; std::getline(kv, line);) manifest << "config " << line << '\n';

    std::string payload;
    std::size_t offset = 0;
    for (const auto& item : model->named_parameters()) {
        auto t = item.value().detach().to(torch::kFloat32).contiguous();
        manifest << "param " << item.key() << ' ' << offset << ' ';
        for (int64_t d = 0; d < t.dim(); ++d) manifest << (d ? "," : "") << t.size(d);
        manifest << '\n';
        const auto n = static_cast<std::size_t>(t.numel());
        const std::size_t at = payload.size();
        payload.resize(at + n * 4);
        std::memcpy(payload.data() + at, t.data_ptr<float>(), n * 4);
        if constexpr (std::endian::native == std::endian::big) {
            for (std::size_t i = 0; i < n; ++i) std::reverse(payload.begin() + at + 4 * i, payload.begin() + at + 4 * i + 4);
        }
        offset += n;
    }
    write_file_atomic(path, payload);
    write_file_atomic(manifest_path(path), manifest.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::istringstream manifest(read_file(manifest_path(path)));
    const std::string payload = read_file(path);

    Checkpoint ck;
    std::map<std::string, std::string> cfg_kv;
    struct Entry {
        std::size_t offset;
        std::vector<int64_t> shape;
    };
    std::map<std::string, Entry> entries;
    std::string line;
    if (!std::getline(manifest, line) || line != "cscn-checkpoint 1") throw IoError("not a checkpoint manifest");
    while (std::getline(manifest, line)) {
        std::istringstream in(line);
        std::string tag;
        in >> tag;
        if (tag == "magnitude_bands") in >> ck.magnitude_bands;
        else if (tag == "derivative_bands") in >> ck.derivative_bands;
        else if (tag == "classes") in >> ck.classes;
        else if (tag == "config") {
            std::string rest;
            std::getline(in >> std::ws, rest);
            auto eq = rest.find('=');
            if (eq == std::string::npos) throw IoError("bad config line in manifest");
            cfg_kv[rest.substr(0, eq)] = rest.substr(eq + 1);
        } else if (tag == "param") {
            std::string name, shape;
            Entry e{};
            in >> name >> e.offset >> shape;
            std::istringstream dims(shape);
            for (std::string d; std::getline(dims, d, ',');) e.shape.push_back(std::stoll(d));
            entries[name] = std::move(e);
        } else if (!tag.empty()) {
            throw IoError("unknown manifest line: " + line);
        }
    }
    ck.config = config_from_key_values(cfg_kv);
    ck.model = CscnModel(ck.config, ck.magnitude_bands, ck.derivative_bands, ck.classes);

    torch::NoGradGuard no_grad;
    for (auto& item : ck.model->named_parameters()) {
        auto it = entries.find(item.key());
        if (it == entries.end()) throw ShapeMismatch("checkpoint lacks parameter " + item.key());
        auto& param = item.value();
        if (param.sizes().vec() != it->second.shape) throw ShapeMismatch("shape mismatch for " + item.key());
        const auto n = static_cast<std::size_t>(param.numel());
        if ((it->second.offset + n) * 4 > payload.size()) throw HeaderMismatch("checkpoint payload too short");
        std::vector<float> values(n);
        std::string bytes = payload.substr(it->second.offset * 4, n * 4);
        if constexpr (std::endian::native == std::endian::big) {
            for (std::size_t i = 0; i < n; ++i) std::reverse(bytes.begin() + 4 * i, bytes.begin() + 4 * i + 4);
        }
        std::memcpy(values.data(), bytes.data(), n * 4);
        param.copy_(torch::from_blob(values.data(), param.sizes(), torch::kFloat32));
    }
    if (entries.size() != ck.model->named_parameters().size()) throw ShapeMismatch("checkpoint has extra parameters");
    return ck;
}

EvalReport evaluate(const std::filesystem::path& checkpoint, const HsiCube& cube, const LabelMask& mask,
                    const SplitMask& split) {
    auto ck = load_checkpoint(checkpoint);
    if (cube.bands() != ck.magnitude_bands) {
        throw ShapeMismatch("cube has " + std::to_string(cube.bands()) + " bands, checkpoint expects " +
                            std::to_string(ck.magnitude_bands));
    }
    if (mask.height() != cube.height() || mask.width() != cube.width() || split.test.size() != mask.pixels()) {
        throw ShapeMismatch("cube, labels and split must share spatial size");
    }
    torch::set_num_threads(1);
    return evaluate_model(ck.model, prepare_inputs(cube, ck.config.derivative), mask, split.test);
}

std::string trace_csv(const std::vector<LossBreakdown>& trace) {
    std::string out = LossBreakdown::csv_header() + "\n";
    for (std::size_t i = 0; i < trace.size(); ++i) out += trace[i].csv_row(static_cast<int>(i)) + "\n";
    return out;
}

}  // namespace cscn
