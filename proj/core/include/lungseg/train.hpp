#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "lungseg/dataset.hpp"
#include "lungseg/unet.hpp"

namespace lungseg {

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 50;
    int batch_size = 4;
    double loss_mix = 0.5;  // weight of BCE; soft Dice gets 1 - loss_mix
    int folds = 10;
    std::uint64_t seed = 42;

    /// Throws InvalidConfig.
    void validate() const;
};

struct TrainRecord {
    int fold = 0;   // folds == the final retrain on the whole pool
    int epoch = 0;  // 0-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_dice = 0.0;
};

struct TrainResult {
    SplitSpec split;
    std::vector<std::vector<std::size_t>> folds;
    std::vector<TrainRecord> records;
};

/// Per-epoch progress callback.
using TrainObserver = std::function<void(const TrainRecord&)>;

/// Trains `model` in place on `train_idx` for tcfg.epochs epochs, evaluating
/// on `eval_idx` after every epoch. Batches follow a shuffle seeded with
/// tcfg.seed + epoch. Only the listed indices are ever read from `data`.
std::vector<TrainRecord> fit(Model& model, const EntrySource& data, const std::vector<std::size_t>& train_idx,
                             const std::vector<std::size_t>& eval_idx, const TrainConfig& tcfg, int fold_label,
                             const TrainObserver& observer = {});

/// Splits `data` 8:1:1 with tcfg.seed, runs tcfg.folds-fold cross-validation
/// over train+val (each fold starts from `model`'s current weights), then
/// retrains `model` itself on the whole train+val pool. Final-retrain records
/// carry fold == tcfg.folds and are evaluated on the pool. Test entries are
/// never read. Throws EmptyDataset, MissingMask, TooFewEntries.
TrainResult train(Model& model, const EntrySource& data, const TrainConfig& tcfg, const TrainObserver& observer = {});

struct EvalResult {
    double loss = 0.0;       // mean mixed loss per entry
    double mean_dice = 0.0;  // mean Dice of thresholded predictions
};

EvalResult evaluate(const Model& model, const EntrySource& data, const std::vector<std::size_t>& indices,
                    double loss_mix, float threshold = 0.5f);

/// `fold,epoch,train_loss,val_loss,val_dice` with round-trip precision.
void write_train_records_csv(const std::vector<TrainRecord>& records, const std::filesystem::path& path);
std::vector<TrainRecord> read_train_records_csv(const std::filesystem::path& path);

}  // namespace lungseg
