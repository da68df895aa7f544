#include "cscn/config.hpp"

#include <cstdlib>
#include <sstream>

#include "cscn/error.hpp"
#include "cscn/io.hpp"
#include "cscn/network.hpp"

namespace cscn {

const char* to_string(OptimizerKind kind) {
    return kind == OptimizerKind::AdaptiveMoment ? "adaptive-moment" : "momentum-sgd";
}

const char* to_string(ArchMode mode) {
    switch (mode) {
        case ArchMode::Dual: return "dual";
        case ArchMode::SingleMagnitude: return "single-branch-magnitude";
        case ArchMode::SingleDerivative: return "single-branch-derivative";
        case ArchMode::Concat: return "concat-input";
        case ArchMode::Shared: return "shared-params";
    }
    return "?";
}

std::vector<int> TrainConfig::schedule() const {
    return channel_schedule.empty() ? linear_schedule(stages, channel_width) : channel_schedule;
}

TrainConfig TrainConfig::benchmark_preset() {
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::MomentumSgd;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 600;
    return cfg;
}

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (cfg.epochs < 1) throw ConfigError("epochs must be positive");
    if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (cfg.derivative.order != 1 && cfg.derivative.order != 2) throw ConfigError("derivative_order must be 1 or 2");
    if (cfg.derivative.step < 1) throw ConfigError("derivative_step must be positive");
    if (cfg.stages < 2) throw ConfigError("stages must be >= 2");
    if (static_cast<int>(cfg.schedule().size()) != cfg.stages) {
        throw ConfigError("channel_schedule length must equal stages");
    }
    if (cfg.channel_width < 1 || cfg.fusion_channels < 1 || cfg.projection_dim < 1 || cfg.gn_groups < 1) {
        throw ConfigError("widths must be positive");
    }
    if (cfg.kernel != 3 && cfg.kernel != 5) throw ConfigError("kernel must be 3 or 5");
    if (cfg.classes < 0) throw ConfigError("classes must be >= 0");
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto first = s.find_first_not_of(" \t\r");
        if (first == std::string::npos) return std::string{};
        const auto last = s.find_last_not_of(" \t\r");
        return s.substr(first, last - first + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(static_cast<int>(parse_int(key, item)));
    return out;
}

}  // namespace

TrainConfig config_from_key_values(const std::map<std::string, std::string>& kv, TrainConfig cfg) {
    int arch_switches = 0;
    auto set_arch = [&](const std::string& key, const std::string& v, ArchMode mode) {
        if (!parse_bool(key, v)) return;
        ++arch_switches;
        cfg.arch = mode;
    };
    for (const auto& [key, v] : kv) {
        if (key == "optimizer") {
            if (v == "adaptive-moment" || v == "adam") cfg.optimizer = OptimizerKind::AdaptiveMoment;
            else if (v == "momentum-sgd" || v == "sgd") cfg.optimizer = OptimizerKind::MomentumSgd;
            else throw ConfigError("optimizer: unknown tag '" + v + "'");
        } else if (key == "learning_rate") cfg.learning_rate = parse_double(key, v);
        else if (key == "momentum") cfg.momentum = parse_double(key, v);
        else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, v));
        else if (key == "lambda") cfg.lambda = parse_double(key, v);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, v));
        else if (key == "derivative_order") cfg.derivative.order = static_cast<int>(parse_int(key, v));
        else if (key == "derivative_step") cfg.derivative.step = static_cast<int>(parse_int(key, v));
        else if (key == "stages") cfg.stages = static_cast<int>(parse_int(key, v));
        else if (key == "channel_width") cfg.channel_width = static_cast<int>(parse_int(key, v));
        else if (key == "channel_schedule") cfg.channel_schedule = v.empty() ? std::vector<int>{} : parse_int_list(key, v);
        else if (key == "fusion_channels") cfg.fusion_channels = static_cast<int>(parse_int(key, v));
        else if (key == "classes") cfg.classes = static_cast<int>(parse_int(key, v));
        else if (key == "kernel") cfg.kernel = static_cast<int>(parse_int(key, v));
        else if (key == "gn_groups") cfg.gn_groups = static_cast<int>(parse_int(key, v));
        else if (key == "projection_dim") cfg.projection_dim = static_cast<int>(parse_int(key, v));
        else if (key == "single_branch_magnitude") set_arch(key, v, ArchMode::SingleMagnitude);
        else if (key == "single_branch_derivative") set_arch(key, v, ArchMode::SingleDerivative);
        else if (key == "concat_input") set_arch(key, v, ArchMode::Concat);
        else if (key == "shared_params") set_arch(key, v, ArchMode::Shared);
        else if (key == "no_cpfm") cfg.no_cpfm = parse_bool(key, v);
        else if (key == "no_hd_loss") cfg.no_hd_loss = parse_bool(key, v);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    if (arch_switches > 1) throw ConfigError("at most one architecture switch may be set");
    validate(cfg);
    return cfg;
}

std::string to_key_values(const TrainConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "optimizer=" << to_string(cfg.optimizer) << '\n'
        << "learning_rate=" << cfg.learning_rate << '\n'
        << "momentum=" << cfg.momentum << '\n'
        << "epochs=" << cfg.epochs << '\n'
        << "lambda=" << cfg.lambda << '\n'
        << "seed=" << cfg.seed << '\n'
        << "derivative_order=" << cfg.derivative.order << '\n'
        << "derivative_step=" << cfg.derivative.step << '\n'
        << "stages=" << cfg.stages << '\n'
        << "channel_width=" << cfg.channel_width << '\n'
        << "channel_schedule=";
    for (std::size_t i = 0; i < cfg.channel_schedule.size(); ++i) out << (i ? "," : "") << cfg.channel_schedule[i];
    out << '\n'
        << "fusion_channels=" << cfg.fusion_channels << '\n'
        << "classes=" << cfg.classes << '\n'
        << "kernel=" << cfg.kernel << '\n'
        << "gn_groups=" << cfg.gn_groups << '\n'
        << "projection_dim=" << cfg.projection_dim << '\n'
        << "single_branch_magnitude=" << (cfg.arch == ArchMode::SingleMagnitude) << '\n'
        << "single_branch_derivative=" << (cfg.arch == ArchMode::SingleDerivative) << '\n'
        << "concat_input=" << (cfg.arch == ArchMode::Concat) << '\n'
        << "shared_params=" << (cfg.arch == ArchMode::Shared) << '\n'
        << "no_cpfm=" << cfg.no_cpfm << '\n'
        << "no_hd_loss=" << cfg.no_hd_loss << '\n';
    return out.str();
}

void apply_env_overrides(TrainConfig& cfg) {
    if (const char* seed = std::getenv("CSCN_SEED"); seed != nullptr && *seed != '\0') {
        cfg.seed = static_cast<std::uint64_t>(parse_int("CSCN_SEED", seed));
    }
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
    TrainConfig cfg = config_from_key_values(parse_key_values(read_file(path)), base);
    apply_env_overrides(cfg);
    return cfg;
}

}  // namespace cscn
