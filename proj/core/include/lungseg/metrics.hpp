#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lungseg/image.hpp"

namespace lungseg::metrics {

struct Confusion {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Pixelwise counts. Throws DimMismatch.
Confusion confusion(const BinaryMask& pred, const BinaryMask& truth);

// Both metrics are 1.0 when pred and truth are both empty and 0.0 when exactly one is.
double dice(const Confusion& c);
double iou(const Confusion& c);
double dice(const BinaryMask& pred, const BinaryMask& truth);
double iou(const BinaryMask& pred, const BinaryMask& truth);

enum class Method { CCA, Watershed, UNet };

std::string_view method_key(Method m);          // "cca", "watershed", "unet"
std::string_view method_display_name(Method m);  // row label in the comparison table
Method parse_method(std::string_view key);       // throws UsageError

struct PairScore {
    std::string entry_id;
    double iou = 0.0;
    double dice = 0.0;
    Confusion counts;
};

PairScore score_pair(std::string entry_id, const BinaryMask& pred, const BinaryMask& truth);

struct MethodReport {
    Method method = Method::CCA;
    std::vector<PairScore> scores;
    double mean_iou_pct = 0.0;
    double mean_dice_pct = 0.0;
};

/// Unweighted mean over images, times 100. Throws EmptyScores.
MethodReport aggregate(Method method, std::vector<PairScore> scores);

struct TableRow {
    std::string name;
    double iou_pct = 0.0;
    double dice_pct = 0.0;
};

/// Three-column markdown table (Name of Approach | IoU Metric | DICE Score),
/// values to one decimal place.
std::string render_comparison_table(const std::vector<TableRow>& rows);
std::string render_comparison_table(const std::vector<MethodReport>& reports);

/// `method,entry_id,iou,dice,tp,fp,fn,tn`
void write_scores_csv(const std::vector<MethodReport>& reports, const std::filesystem::path& path);

/// `method,mean_iou_pct,mean_dice_pct,n_images`
void write_summary_csv(const std::vector<MethodReport>& reports, const std::filesystem::path& path);

}  // namespace lungseg::metrics
