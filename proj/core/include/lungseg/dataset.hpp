#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lungseg/image.hpp"

namespace lungseg {

struct DatasetEntry {
    std::string id;
    GrayImage image;
    std::optional<BinaryMask> mask;
};

/// Index-level train / validation / test assignment.
struct SplitSpec {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;

    /// Train and val together: the pool that cross-validation runs over.
    std::vector<std::size_t> pool() const;
};

/// Random-access entry provider. Training only reaches data through this, so a
/// wrapper can observe exactly which indices were consumed.
class EntrySource {
public:
    virtual ~EntrySource() = default;
    virtual std::size_t size() const = 0;
    virtual const DatasetEntry& entry(std::size_t index) const = 0;
};

class VectorSource final : public EntrySource {
public:
    explicit VectorSource(const std::vector<DatasetEntry>& entries) : entries_(&entries) {}
    std::size_t size() const override { return entries_->size(); }
    const DatasetEntry& entry(std::size_t index) const override { return entries_->at(index); }

private:
    const std::vector<DatasetEntry>* entries_;
};

/// Sizes are floor(n * r_val / sum) and floor(n * r_test / sum); everything
/// else goes to train. Assignment follows a seeded shuffle of 0..n-1.
/// Throws TooFewEntries for n < 3.
SplitSpec split_dataset(std::size_t n, std::uint64_t seed, std::array<unsigned, 3> ratios = {8, 1, 1});

/// True when train/val/test are pairwise disjoint and cover 0..n-1 exactly.
bool split_is_valid(const SplitSpec& split, std::size_t n);

/// Partitions `pool` (order preserved) into k contiguous folds whose sizes
/// differ by at most one; the first (size mod k) folds carry the extra entry.
std::vector<std::vector<std::size_t>> kfold_partition(const std::vector<std::size_t>& pool, std::size_t k);

// ---------------------------------------------------------------------------
// On-disk layout: <root>/images/<stem>.{raw,img,png,pgm}, <root>/masks/<stem>.{png,pgm}

struct ManifestRow {
    std::string id;
    std::filesystem::path image_path;
    std::filesystem::path mask_path;  // empty when unpaired
    int width = 0;
    int height = 0;
};

struct PairingResult {
    std::vector<ManifestRow> rows;
    std::vector<std::string> unpaired;  // image stems with no mask
};

/// Pairs images with masks by filename stem. Throws MissingImagesDir.
PairingResult pair_dataset(const std::filesystem::path& root, bool invert_input = true);

/// Loads an image by extension: .raw / .img are square JSRT-style rasters
/// whose side is inferred from the byte count; PNG / PGM are read as v / 255.
GrayImage load_image(const std::filesystem::path& path, bool invert_input);

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Loads manifest rows into entries. When `working_size` > 0 both image and
/// mask are resampled to that square size; otherwise the mask is resampled
/// to the image's dimensions.
DatasetEntry load_entry(const ManifestRow& row, bool invert_input, int working_size);

}  // namespace lungseg
