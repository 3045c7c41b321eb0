#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "lungseg/classical.hpp"
#include "lungseg/metrics.hpp"
#include "lungseg/train.hpp"
#include "lungseg/unet.hpp"

namespace lungseg::cli {

/// Effective settings of one invocation. Precedence, lowest first: built-in
/// defaults, --config file, --set key=value, dedicated flags.
struct RunConfig {
    std::filesystem::path dataset_root;
    std::filesystem::path output_dir;  // empty: dataset_root, else "."
    std::filesystem::path manifest;    // empty: <dataset_root or output>/manifest.csv
    std::filesystem::path model;
    std::optional<metrics::Method> method;
    int working_size = 128;
    std::uint64_t seed = 42;
    bool invert_input = true;  // raw inputs store dense tissue as low values
    int overlay_gutter = 4;
    float threshold = 0.5f;
    int phantom_size = 128;
    UNetConfig unet;
    TrainConfig train;
    classical::PipelineOptions pipeline;

    /// Throws UsageError for an unknown key or an unparsable value.
    void set(std::string_view key, std::string_view value);

    /// Every key, one `key = value` line each, in a fixed order.
    std::string dump() const;

    /// Throws InvalidConfig. The working size must be divisible by 2^depth
    /// only when the UNet takes part.
    void validate(bool uses_unet) const;

    std::filesystem::path resolved_output_dir() const;
    std::filesystem::path resolved_manifest() const;
    UNetConfig unet_config() const;
    TrainConfig train_config() const;
};

/// Applies `key = value` lines on top of `cfg`. Blank lines and lines
/// starting with '#' are skipped.
void apply_config_text(RunConfig& cfg, std::string_view text);

/// Throws FileMissing.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

}  // namespace lungseg::cli
