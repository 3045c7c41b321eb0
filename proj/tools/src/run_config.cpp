#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lungseg/errors.hpp"

namespace lungseg::cli {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        throw UsageError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw UsageError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
}

template <class T>
std::string format_number(T v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view raw) {
    const std::string_view value = trim(raw);
    if (key == "dataset_root") dataset_root = std::string(value);
    else if (key == "output_dir") output_dir = std::string(value);
    else if (key == "manifest") manifest = std::string(value);
    else if (key == "model") model = std::string(value);
    else if (key == "method") method = value.empty() ? std::nullopt : std::optional(metrics::parse_method(value));
    else if (key == "working_size") working_size = parse_number<int>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "invert_input") invert_input = parse_bool(key, value);
    else if (key == "overlay_gutter") overlay_gutter = parse_number<int>(key, value);
    else if (key == "threshold") threshold = parse_number<float>(key, value);
    else if (key == "phantom_size") phantom_size = parse_number<int>(key, value);
    else if (key == "depth") unet.depth = parse_number<int>(key, value);
    else if (key == "base_channels") unet.base_channels = parse_number<int>(key, value);
    else if (key == "learning_rate") train.learning_rate = parse_number<double>(key, value);
    else if (key == "epochs") train.epochs = parse_number<int>(key, value);
    else if (key == "batch_size") train.batch_size = parse_number<int>(key, value);
    else if (key == "loss_mix") train.loss_mix = parse_number<double>(key, value);
    else if (key == "folds") train.folds = parse_number<int>(key, value);
    else if (key == "sure_fg_fraction") pipeline.sure_foreground_fraction = parse_number<double>(key, value);
    else throw UsageError("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::dump() const {
    std::ostringstream os;
    os << "dataset_root = " << dataset_root.string() << '\n'
       << "output_dir = " << output_dir.string() << '\n'
       << "manifest = " << manifest.string() << '\n'
       << "model = " << model.string() << '\n'
       << "method = " << (method ? metrics::method_key(*method) : "") << '\n'
       << "working_size = " << working_size << '\n'
       << "seed = " << seed << '\n'
       << "invert_input = " << (invert_input ? "true" : "false") << '\n'
       << "overlay_gutter = " << overlay_gutter << '\n'
       << "threshold = " << format_number(threshold) << '\n'
       << "phantom_size = " << phantom_size << '\n'
       << "depth = " << unet.depth << '\n'
       << "base_channels = " << unet.base_channels << '\n'
       << "learning_rate = " << format_number(train.learning_rate) << '\n'
       << "epochs = " << train.epochs << '\n'
       << "batch_size = " << train.batch_size << '\n'
       << "loss_mix = " << format_number(train.loss_mix) << '\n'
       << "folds = " << train.folds << '\n'
       << "sure_fg_fraction = " << format_number(pipeline.sure_foreground_fraction) << '\n';
    return os.str();
}

void RunConfig::validate(bool uses_unet) const {
    if (working_size <= 0) throw InvalidConfig("working_size must be positive");
    if (overlay_gutter < 0) throw InvalidConfig("overlay_gutter must be non-negative");
    if (!(threshold >= 0.0f && threshold < 1.0f)) throw InvalidConfig("threshold must lie in [0, 1)");
    if (phantom_size < 16) throw InvalidConfig("phantom_size must be at least 16");
    if (!(pipeline.sure_foreground_fraction > 0.0 && pipeline.sure_foreground_fraction < 1.0)) {
        throw InvalidConfig("sure_fg_fraction must lie in (0, 1)");
    }
    if (uses_unet) unet_config().validate();
    train_config().validate();
}

fs::path RunConfig::resolved_output_dir() const {
    if (!output_dir.empty()) return output_dir;
    if (!dataset_root.empty()) return dataset_root;
    return ".";
}

fs::path RunConfig::resolved_manifest() const {
    if (!manifest.empty()) return manifest;
    if (!dataset_root.empty()) return dataset_root / "manifest.csv";
    return resolved_output_dir() / "manifest.csv";
}

UNetConfig RunConfig::unet_config() const {
    UNetConfig c = unet;
    c.input_size = working_size;
    return c;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig c = train;
    c.seed = seed;
    return c;
}

void apply_config_text(RunConfig& cfg, std::string_view text) {
    std::size_t lineno = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

void apply_config_file(RunConfig& cfg, const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FileMissing(path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str());
}

}  // namespace lungseg::cli
