#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "lungseg/checkpoint.hpp"
#include "lungseg/classical.hpp"
#include "lungseg/errors.hpp"
#include "lungseg/imgio.hpp"
#include "lungseg/phantom.hpp"
#include "lungseg/rng.hpp"
#include "lungseg/train.hpp"

namespace lungseg::cli {

namespace fs = std::filesystem;
using metrics::Method;

namespace {

constexpr Method kAllMethods[] = {Method::CCA, Method::Watershed, Method::UNet};

std::string pad_id(int i, int count) {
    const int width = std::max<int>(3, static_cast<int>(std::to_string(count - 1).size()));
    std::string digits = std::to_string(i);
    return "phantom_" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(width, digits.size()), '0') +
           digits;
}

fs::path relative_to(const fs::path& p, const fs::path& base) {
    const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal());
    return rel.empty() ? p : rel;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw WriteError(dir.string() + ": " + ec.message());
}

// Runs fn(i) for i in [0, n) on a small pool; results are read back in order
// by the caller, so output stays independent of scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
}

std::optional<Model> load_model_if(bool needed, const RunConfig& cfg) {
    if (!needed) return std::nullopt;
    if (cfg.model.empty()) throw ModelRequired("the unet method needs --model");
    return load_checkpoint(cfg.model);
}

std::vector<Method> requested_methods(const RunConfig& cfg) {
    if (cfg.method) return {*cfg.method};
    return {std::begin(kAllMethods), std::end(kAllMethods)};
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& cfg, int synthetic, std::ostream& out, std::ostream& err) {
    if (cfg.dataset_root.empty()) throw UsageError("ingest needs --dataset-root");
    if (synthetic < 0) throw UsageError("--synthetic must be non-negative");
    if (synthetic > 0) {
        write_synthetic_dataset(cfg.dataset_root, synthetic, cfg.seed, cfg.phantom_size);
        out << "wrote " << synthetic << " synthetic phantoms under " << cfg.dataset_root.string() << '\n';
    }
    const fs::path out_dir = cfg.resolved_output_dir();
    ensure_dir(out_dir);
    const fs::path manifest = out_dir / "manifest.csv";

    PairingResult paired;
    try {
        paired = pair_dataset(cfg.dataset_root, cfg.invert_input);
    } catch (const MissingImagesDir&) {
        write_manifest({}, manifest);
        throw;
    }
    for (auto& row : paired.rows) {
        row.image_path = relative_to(row.image_path, out_dir);
        if (!row.mask_path.empty()) row.mask_path = relative_to(row.mask_path, out_dir);
    }
    write_manifest(paired.rows, manifest);
    for (const auto& id : paired.unpaired) err << "warning: no mask for " << id << '\n';
    out << "manifest: " << paired.rows.size() << " entries, " << paired.unpaired.size() << " without masks -> "
        << manifest.string() << '\n';
    if (paired.rows.empty()) throw EmptyDataset(cfg.dataset_root.string() + "/images has no images");
    return kExitOk;
}

int cmd_segment(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (!cfg.method) throw UsageError("segment needs --method cca|watershed|unet");
    const Method method = *cfg.method;
    const std::optional<Model> model = load_model_if(method == Method::UNet, cfg);
    const auto rows = load_manifest(cfg.resolved_manifest());
    const fs::path out_dir = cfg.resolved_output_dir();
    ensure_dir(out_dir);

    const io::OverlayStyle style{cfg.overlay_gutter};
    std::vector<std::string> failures(rows.size());
    std::vector<char> overlaid(rows.size(), 0);
    parallel_for(rows.size(), [&](std::size_t i) {
        try {
            const DatasetEntry e = load_entry(rows[i], cfg.invert_input, 0);
            const BinaryMask mask = segment_image(method, e.image, model ? &*model : nullptr, cfg);
            io::write_mask_png(mask, out_dir / (e.id + "_mask.png"));
            if (e.mask) {
                const int s = cfg.working_size;
                const bool same = e.image.width == s && e.image.height == s;
                const GrayImage img = same ? e.image : io::resize_bilinear(e.image, s, s);
                const BinaryMask pred = same ? mask : io::resize_nearest(mask, s, s);
                const BinaryMask truth = same ? *e.mask : io::resize_nearest(*e.mask, s, s);
                io::write_overlay_panel(img, pred, truth, out_dir / (e.id + "_overlay.png"), style);
                overlaid[i] = 1;
            }
        } catch (const std::exception& ex) {
            failures[i] = ex.what();
            if (failures[i].empty()) failures[i] = "unknown error";
        }
    });

    std::size_t failed = 0, overlays = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!failures[i].empty()) {
            ++failed;
            err << "error: " << rows[i].id << ": " << failures[i] << '\n';
        }
        overlays += overlaid[i];
    }
    out << metrics::method_key(method) << ": " << rows.size() - failed << " masks, " << overlays << " overlays, "
        << failed << " failed -> " << out_dir.string() << '\n';
    return failed ? kExitPartial : kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    const auto rows = load_manifest(cfg.resolved_manifest());
    for (const auto& r : rows) {
        if (r.mask_path.empty()) throw MissingMask(r.id);
    }
    if (rows.empty()) throw EmptyDataset(cfg.resolved_manifest().string());
    std::vector<DatasetEntry> entries;
    entries.reserve(rows.size());
    for (const auto& r : rows) entries.push_back(load_entry(r, cfg.invert_input, cfg.working_size));
    const VectorSource source(entries);

    const TrainConfig tcfg = cfg.train_config();
    Model model(cfg.unet_config(), cfg.seed);
    const TrainResult result = train(model, source, tcfg, [&](const TrainRecord& r) {
        char line[160];
        std::snprintf(line, sizeof line, "%s %2d epoch %3d train_loss %.5f val_loss %.5f val_dice %.4f\n",
                      r.fold == tcfg.folds ? "final" : "fold ", r.fold, r.epoch, r.train_loss, r.val_loss,
                      r.val_dice);
        out << line << std::flush;
    });

    const fs::path out_dir = cfg.resolved_output_dir();
    ensure_dir(out_dir);
    save_checkpoint(model, out_dir / "model.ckpt");
    write_train_records_csv(result.records, out_dir / "train_records.csv");
    SplitFile sf{result.split, result.folds, {}};
    for (const auto& r : rows) sf.ids.push_back(r.id);
    write_split_json(sf, out_dir / "split.json");

    char line[96];
    std::snprintf(line, sizeof line, "cross-validation mean DICE %.4f over %d folds\n",
                  cross_validation_mean_dice(result.records, tcfg.folds), tcfg.folds);
    out << line << "wrote model.ckpt, train_records.csv, split.json -> " << out_dir.string() << '\n';
    return kExitOk;
}

std::vector<metrics::MethodReport> score_methods(const RunConfig& cfg, const std::vector<ManifestRow>& rows,
                                                 const std::vector<Method>& methods, const Model* model) {
    for (const auto& r : rows) {
        if (r.mask_path.empty()) throw MissingMask(r.id);
    }
    std::vector<DatasetEntry> entries(rows.size());
    parallel_for(rows.size(), [&](std::size_t i) { entries[i] = load_entry(rows[i], cfg.invert_input, 0); });

    std::vector<metrics::MethodReport> reports;
    for (const Method m : methods) {
        std::vector<metrics::PairScore> scores(entries.size());
        std::vector<std::string> failures(entries.size());
        parallel_for(entries.size(), [&](std::size_t i) {
            try {
                const BinaryMask pred = segment_image(m, entries[i].image, model, cfg);
                scores[i] = metrics::score_pair(entries[i].id, pred, *entries[i].mask);
            } catch (const std::exception& ex) {
                failures[i] = ex.what();
            }
        });
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (!failures[i].empty()) {
                throw Error("method_failed", std::string(metrics::method_key(m)) + " on " + entries[i].id + ": " +
                                                 failures[i]);
            }
        }
        reports.push_back(metrics::aggregate(m, std::move(scores)));
    }
    return reports;
}

void write_report(const std::vector<metrics::MethodReport>& reports, const fs::path& out_dir,
                  const std::string& stem, const std::string& footer, std::ostream& out) {
    ensure_dir(out_dir);
    const std::string table = metrics::render_comparison_table(reports) + "\n" + footer;
    {
        std::ofstream md(out_dir / (stem + ".md"), std::ios::binary | std::ios::trunc);
        md << table;
        if (!md) throw WriteError((out_dir / (stem + ".md")).string());
    }
    metrics::write_scores_csv(reports, out_dir / (stem + "_scores.csv"));
    metrics::write_summary_csv(reports, out_dir / (stem + "_summary.csv"));
    out << table;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
    const auto methods = requested_methods(cfg);
    const bool uses_unet = std::ranges::find(methods, Method::UNet) != methods.end();
    const std::optional<Model> model = load_model_if(uses_unet, cfg);
    std::vector<ManifestRow> rows;
    for (auto& r : load_manifest(cfg.resolved_manifest())) {
        if (!r.mask_path.empty()) rows.push_back(std::move(r));
    }
    if (rows.empty()) throw EmptyDataset("no manifest entry has a truth mask");
    const auto reports = score_methods(cfg, rows, methods, model ? &*model : nullptr);
    write_report(reports, cfg.resolved_output_dir(), "evaluate",
                 "Macro mean over " + std::to_string(rows.size()) + " images.\n", out);
    return kExitOk;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
    const auto methods = requested_methods(cfg);
    const bool uses_unet = std::ranges::find(methods, Method::UNet) != methods.end();
    const std::optional<Model> model = load_model_if(uses_unet, cfg);
    const auto all_rows = load_manifest(cfg.resolved_manifest());

    SplitSpec split;
    const fs::path split_path = cfg.model.empty() ? fs::path{} : cfg.model.parent_path() / "split.json";
    if (!split_path.empty() && fs::exists(split_path)) {
        const SplitFile sf = read_split_json(split_path);
        if (sf.ids.size() != all_rows.size()) {
            throw InvalidConfig(split_path.string() + " lists " + std::to_string(sf.ids.size()) +
                                " entries but the manifest has " + std::to_string(all_rows.size()));
        }
        for (std::size_t i = 0; i < all_rows.size(); ++i) {
            if (sf.ids[i] != all_rows[i].id) {
                throw InvalidConfig(split_path.string() + " does not match the manifest at entry " + all_rows[i].id);
            }
        }
        split = sf.split;
    } else {
        split = split_dataset(all_rows.size(), cfg.seed);
    }

    std::vector<ManifestRow> rows;
    for (const std::size_t i : split.test) rows.push_back(all_rows[i]);
    const auto reports = score_methods(cfg, rows, methods, model ? &*model : nullptr);

    std::string footer = "Macro mean over the " + std::to_string(rows.size()) + " test entries of " +
                         std::to_string(all_rows.size()) + ".\n";
    if (uses_unet) {
        const fs::path records_path = cfg.model.parent_path() / "train_records.csv";
        if (fs::exists(records_path)) {
            const auto records = read_train_records_csv(records_path);
            int folds = 0;
            for (const auto& r : records) folds = std::max(folds, r.fold);
            const double cv = cross_validation_mean_dice(records, folds);
            if (!std::isnan(cv)) {
                char line[96];
                std::snprintf(line, sizeof line, "U-Net %d-fold cross-validation mean DICE: %.1f\n", folds,
                              cv * 100.0);
                footer += line;
            }
        }
    }
    write_report(reports, cfg.resolved_output_dir(), "compare", footer, out);
    return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> write_synthetic_dataset(const fs::path& root, int count, std::uint64_t seed, int side) {
    ensure_dir(root / "images");
    ensure_dir(root / "masks");
    PhantomConfig pc;
    pc.size = side;
    SplitMix64 rng(seed);
    std::vector<std::string> ids;
    for (int i = 0; i < count; ++i) {
        const Phantom p = generate_phantom(rng.next(), pc);
        const std::string id = pad_id(i, count);
        io::write_jsrt_raw(p.image, root / "images" / (id + ".raw"), true);
        io::write_mask_png(p.truth, root / "masks" / (id + ".png"));
        ids.push_back(id);
    }
    return ids;
}

std::vector<ManifestRow> load_manifest(const fs::path& path) {
    auto rows = read_manifest(path);
    const fs::path base = path.parent_path();
    for (auto& r : rows) {
        if (r.image_path.is_relative()) r.image_path = base / r.image_path;
        if (!r.mask_path.empty() && r.mask_path.is_relative()) r.mask_path = base / r.mask_path;
    }
    return rows;
}

BinaryMask segment_image(Method method, const GrayImage& img, const Model* model, const RunConfig& cfg) {
    const int s = cfg.working_size;
    const bool same = img.width == s && img.height == s;
    const GrayImage work = same ? img : io::resize_bilinear(img, s, s);
    BinaryMask mask;
    switch (method) {
        case Method::CCA: mask = classical::cca_lung_pipeline(work, cfg.pipeline); break;
        case Method::Watershed: mask = classical::watershed_lung_pipeline(work, cfg.pipeline); break;
        case Method::UNet:
            if (!model) throw ModelRequired("the unet method needs a model");
            mask = predict_mask(*model, work, cfg.threshold);
            break;
    }
    return same ? mask : io::resize_nearest(mask, img.width, img.height);
}

void write_split_json(const SplitFile& sf, const fs::path& path) {
    nlohmann::json j;
    j["seed"] = sf.split.seed;
    j["n"] = sf.ids.size();
    j["ids"] = sf.ids;
    j["train"] = sf.split.train;
    j["val"] = sf.split.val;
    j["test"] = sf.split.test;
    j["folds"] = sf.folds;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw WriteError(path.string());
}

SplitFile read_split_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FileMissing(path.string());
    SplitFile sf;
    try {
        const nlohmann::json j = nlohmann::json::parse(in);
        sf.split.seed = j.at("seed").get<std::uint64_t>();
        sf.ids = j.at("ids").get<std::vector<std::string>>();
        sf.split.train = j.at("train").get<std::vector<std::size_t>>();
        sf.split.val = j.at("val").get<std::vector<std::size_t>>();
        sf.split.test = j.at("test").get<std::vector<std::size_t>>();
        sf.folds = j.at("folds").get<std::vector<std::vector<std::size_t>>>();
        if (j.at("n").get<std::size_t>() != sf.ids.size()) throw DecodeError(path.string() + ": n disagrees with ids");
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError(path.string() + ": " + e.what());
    }
    if (!split_is_valid(sf.split, sf.ids.size())) throw DecodeError(path.string() + ": not a partition of the ids");
    return sf;
}

double cross_validation_mean_dice(const std::vector<TrainRecord>& records, int folds) {
    std::map<int, const TrainRecord*> last;
    for (const auto& r : records) {
        if (r.fold < 0 || r.fold >= folds) continue;
        auto& slot = last[r.fold];
        if (!slot || r.epoch > slot->epoch) slot = &r;
    }
    if (last.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (const auto& [fold, r] : last) sum += r->val_dice;
    return sum / static_cast<double>(last.size());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Lung field segmentation: Otsu + connected components, marker watershed, and a UNet."};
    app.name("lungseg");
    app.require_subcommand(0, 1);

    std::optional<std::string> dataset_root, out_dir, manifest, model, method, config;
    std::optional<std::uint64_t> seed;
    std::optional<int> size;
    std::vector<std::string> sets;
    bool dump_config = false;
    int synthetic = 0;

    app.add_option("--dataset-root", dataset_root, "Folder holding images/ and masks/ (and manifest.csv)");
    app.add_option("--out", out_dir, "Output folder (default: dataset root, else .)");
    app.add_option("--manifest", manifest, "Manifest CSV (default: <dataset-root>/manifest.csv)");
    app.add_option("--model", model, "UNet checkpoint");
    app.add_option("--method", method, "cca | watershed | unet");
    app.add_option("--seed", seed, "Seed for the split, shuffles, init and phantoms (default 42)");
    app.add_option("--size", size, "Working size in pixels (default 128)");
    app.add_option("--config", config, "Flat key = value config file");
    app.add_option("--set", sets, "Override one config key: key=value (repeatable)");
    app.add_flag("--dump-config", dump_config, "Print the effective config and exit");

    auto* ingest = app.add_subcommand("ingest", "Pair images/ with masks/ and write manifest.csv");
    ingest->add_option("--synthetic", synthetic, "Generate N lung phantoms under the dataset root first");
    auto* segment = app.add_subcommand("segment", "Write <id>_mask.png (and <id>_overlay.png) per entry");
    auto* train_cmd = app.add_subcommand("train", "Cross-validate and train the UNet; write model.ckpt");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score methods on every entry with a truth mask");
    auto* compare = app.add_subcommand("compare", "Score all methods on the test split; write compare.md");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << "run with --help for usage\n";
        return kExitUsage;
    }

    RunConfig cfg;
    bool uses_unet = false;
    try {
        if (config) apply_config_file(cfg, *config);
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (dataset_root) cfg.dataset_root = *dataset_root;
        if (out_dir) cfg.output_dir = *out_dir;
        if (manifest) cfg.manifest = *manifest;
        if (model) cfg.model = *model;
        if (method) cfg.method = metrics::parse_method(*method);
        if (seed) cfg.seed = *seed;
        if (size) cfg.working_size = *size;

        if (dump_config) {
            out << cfg.dump();
            return kExitOk;
        }
        const bool ranking = evaluate_cmd->parsed() || compare->parsed();
        uses_unet = train_cmd->parsed() || cfg.method == Method::UNet || (ranking && !cfg.method);
        cfg.validate(uses_unet);

        if (ingest->parsed()) return cmd_ingest(cfg, synthetic, out, err);
        if (segment->parsed()) return cmd_segment(cfg, out, err);
        if (train_cmd->parsed()) return cmd_train(cfg, out);
        if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, out);
        if (compare->parsed()) return cmd_compare(cfg, out);
        err << "error: no subcommand given\n" << app.help();
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace lungseg::cli
