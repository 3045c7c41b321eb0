#include "lungseg/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "lungseg/errors.hpp"

namespace lungseg::metrics {

Confusion confusion(const BinaryMask& pred, const BinaryMask& truth) {
    if (!same_dims(pred, truth)) throw DimMismatch("prediction and truth differ in size");
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.data[i] != 0, t = truth.data[i] != 0;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double dice(const Confusion& c) {
    const auto den = 2 * c.tp + c.fp + c.fn;
    if (den == 0) return 1.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(den);
}

double iou(const Confusion& c) {
    const auto den = c.tp + c.fp + c.fn;
    if (den == 0) return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(den);
}

double dice(const BinaryMask& pred, const BinaryMask& truth) { return dice(confusion(pred, truth)); }
double iou(const BinaryMask& pred, const BinaryMask& truth) { return iou(confusion(pred, truth)); }

std::string_view method_key(Method m) {
    switch (m) {
        case Method::CCA: return "cca";
        case Method::Watershed: return "watershed";
        case Method::UNet: return "unet";
    }
    return "?";
}

std::string_view method_display_name(Method m) {
    switch (m) {
        case Method::CCA: return "Connected Component Analysis";
        case Method::Watershed: return "Watershed Algorithm";
        case Method::UNet: return "U-Net Model";
    }
    return "?";
}

Method parse_method(std::string_view key) {
    for (Method m : {Method::CCA, Method::Watershed, Method::UNet}) {
        if (key == method_key(m)) return m;
    }
    throw UsageError("unknown method '" + std::string(key) + "' (expected cca, watershed or unet)");
}

PairScore score_pair(std::string entry_id, const BinaryMask& pred, const BinaryMask& truth) {
    PairScore s;
    s.entry_id = std::move(entry_id);
    s.counts = confusion(pred, truth);
    s.iou = iou(s.counts);
    s.dice = dice(s.counts);
    return s;
}

MethodReport aggregate(Method method, std::vector<PairScore> scores) {
    if (scores.empty()) throw EmptyScores(std::string(method_key(method)) + " has no scores");
    MethodReport r;
    r.method = method;
    double si = 0.0, sd = 0.0;
    for (const auto& s : scores) {
        si += s.iou;
        sd += s.dice;
    }
    const auto n = static_cast<double>(scores.size());
    r.mean_iou_pct = 100.0 * si / n;
    r.mean_dice_pct = 100.0 * sd / n;
    r.scores = std::move(scores);
    return r;
}

namespace {

std::string one_decimal(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

}  // namespace

std::string render_comparison_table(const std::vector<TableRow>& rows) {
    std::string out = "| Name of Approach | IoU Metric | DICE Score |\n";
    out += "|:---:|:---:|:---:|\n";
    for (const auto& r : rows) {
        out += "| " + r.name + " | " + one_decimal(r.iou_pct) + " | " + one_decimal(r.dice_pct) + " |\n";
    }
    return out;
}

std::string render_comparison_table(const std::vector<MethodReport>& reports) {
    std::vector<TableRow> rows;
    for (const auto& r : reports) {
        rows.push_back({std::string(method_display_name(r.method)), r.mean_iou_pct, r.mean_dice_pct});
    }
    return render_comparison_table(rows);
}

void write_scores_csv(const std::vector<MethodReport>& reports, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError(path.string());
    out << "method,entry_id,iou,dice,tp,fp,fn,tn\n";
    char buf[64];
    for (const auto& r : reports) {
        for (const auto& s : r.scores) {
            out << method_key(r.method) << ',' << s.entry_id;
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g", s.iou, s.dice);
            out << buf << ',' << s.counts.tp << ',' << s.counts.fp << ',' << s.counts.fn << ',' << s.counts.tn << '\n';
        }
    }
}

void write_summary_csv(const std::vector<MethodReport>& reports, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError(path.string());
    out << "method,mean_iou_pct,mean_dice_pct,n_images\n";
    char buf[96];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", r.mean_iou_pct, r.mean_dice_pct);
        out << method_key(r.method) << buf << r.scores.size() << '\n';
    }
}

}  // namespace lungseg::metrics
