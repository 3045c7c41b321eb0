#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lungseg/dataset.hpp"
#include "lungseg/image.hpp"
#include "lungseg/metrics.hpp"
#include "lungseg/train.hpp"
#include "lungseg/unet.hpp"
#include "run_config.hpp"

namespace lungseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;  // some entries failed, the rest were written
inline constexpr int kExitUsage = 2;    // usage, config, or a failure that stopped the command

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes N phantoms as <root>/images/<id>.raw (12-bit big-endian, dense
/// tissue low) and <root>/masks/<id>.png. Returns the ids.
std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root, int count, std::uint64_t seed,
                                                 int side);

/// Manifest rows with relative paths resolved against the manifest's folder.
std::vector<ManifestRow> load_manifest(const std::filesystem::path& path);

/// Runs `method` on `img` at the configured working size and returns a mask
/// at the image's own dimensions. `model` is required for the UNet.
BinaryMask segment_image(metrics::Method method, const GrayImage& img, const Model* model, const RunConfig& cfg);

struct SplitFile {
    SplitSpec split;
    std::vector<std::vector<std::size_t>> folds;
    std::vector<std::string> ids;  // manifest ids, index order
};

void write_split_json(const SplitFile& split, const std::filesystem::path& path);

/// Throws FileMissing, DecodeError (including a split that is not a
/// partition of the listed ids).
SplitFile read_split_json(const std::filesystem::path& path);

/// Mean over folds 0..folds-1 of each fold's last-epoch validation DICE;
/// final retrain records are skipped. NaN when no fold has records.
double cross_validation_mean_dice(const std::vector<TrainRecord>& records, int folds);

}  // namespace lungseg::cli
