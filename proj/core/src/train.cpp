#include "lungseg/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lungseg/errors.hpp"
#include "lungseg/losses.hpp"
#include "lungseg/metrics.hpp"
#include "lungseg/optim.hpp"
#include "lungseg/rng.hpp"

namespace lungseg {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be > 0");
    if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
    if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
    if (!(loss_mix >= 0.0 && loss_mix <= 1.0)) throw InvalidConfig("loss_mix must lie in [0, 1]");
    if (folds < 2) throw InvalidConfig("folds must be >= 2");
}

namespace {

struct Batch {
    nn::Tensor<float> images;
    nn::Tensor<float> masks;
};

Batch make_batch(const EntrySource& data, const std::vector<std::size_t>& indices, std::size_t begin,
                 std::size_t end, int input_size) {
    std::vector<const GrayImage*> imgs;
    std::vector<const BinaryMask*> masks;
    for (std::size_t k = begin; k < end; ++k) {
        const DatasetEntry& e = data.entry(indices[k]);
        if (!e.mask) throw MissingMask(e.id);
        if (e.image.width != input_size || e.image.height != input_size || !same_dims(*e.mask, e.image)) {
            throw ShapeMismatch("entry " + e.id + " is not resized to the model input size " +
                                std::to_string(input_size));
        }
        imgs.push_back(&e.image);
        masks.push_back(&*e.mask);
    }
    return {images_to_tensor<float>(imgs), masks_to_tensor<float>(masks)};
}

void check_masks(const EntrySource& data, const std::vector<std::size_t>& indices) {
    for (std::size_t i : indices) {
        const DatasetEntry& e = data.entry(i);
        if (!e.mask) throw MissingMask(e.id);
    }
}

}  // namespace

EvalResult evaluate(const Model& model, const EntrySource& data, const std::vector<std::size_t>& indices,
                    double loss_mix, float threshold) {
    EvalResult r;
    if (indices.empty()) return r;
    const int s = model.config().input_size;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Batch b = make_batch(data, indices, k, k + 1, s);
        const nn::Tensor<float> out = model.forward(b.images);
        r.loss += nn::mixed_loss(out, b.masks, loss_mix).value;
        BinaryMask pred(s, s);
        for (std::size_t i = 0; i < out.size(); ++i) pred.data[i] = out.data[i] > threshold ? 1 : 0;
        r.mean_dice += metrics::dice(pred, *data.entry(indices[k]).mask);
    }
    r.loss /= static_cast<double>(indices.size());
    r.mean_dice /= static_cast<double>(indices.size());
    return r;
}

std::vector<TrainRecord> fit(Model& model, const EntrySource& data, const std::vector<std::size_t>& train_idx,
                             const std::vector<std::size_t>& eval_idx, const TrainConfig& tcfg, int fold_label,
                             const TrainObserver& observer) {
    tcfg.validate();
    if (train_idx.empty()) throw EmptyDataset("no training entries");
    const nn::AdamConfig adam{tcfg.learning_rate};
    const int s = model.config().input_size;
    const auto bs = static_cast<std::size_t>(tcfg.batch_size);

    std::vector<TrainRecord> records;
    std::vector<std::size_t> order = train_idx;
    nn::UNet<float>::Cache cache;
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        order = train_idx;
        seeded_shuffle(order, tcfg.seed + static_cast<std::uint64_t>(epoch));

        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += bs) {
            const std::size_t end = std::min(order.size(), begin + bs);
            const Batch b = make_batch(data, order, begin, end, s);
            model.zero_grad();
            const nn::Tensor<float> out = model.forward(b.images, cache);
            const auto loss = nn::mixed_loss(out, b.masks, tcfg.loss_mix);
            model.backward(cache, loss.grad);
            for (auto& p : model.parameters()) nn::adam_step(p, adam);
            loss_sum += static_cast<double>(loss.value) * static_cast<double>(end - begin);
        }

        TrainRecord rec;
        rec.fold = fold_label;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        const EvalResult ev = evaluate(model, data, eval_idx, tcfg.loss_mix);
        rec.val_loss = ev.loss;
        rec.val_dice = ev.mean_dice;
        records.push_back(rec);
        if (observer) observer(rec);
    }
    return records;
}

TrainResult train(Model& model, const EntrySource& data, const TrainConfig& tcfg, const TrainObserver& observer) {
    tcfg.validate();
    if (data.size() == 0) throw EmptyDataset("dataset has no entries");

    TrainResult result;
    result.split = split_dataset(data.size(), tcfg.seed);
    const std::vector<std::size_t> pool = result.split.pool();
    check_masks(data, pool);
    result.folds = kfold_partition(pool, static_cast<std::size_t>(tcfg.folds));

    const Model initial = model;
    for (std::size_t f = 0; f < result.folds.size(); ++f) {
        std::vector<std::size_t> fold_train;
        for (std::size_t g = 0; g < result.folds.size(); ++g) {
            if (g != f) fold_train.insert(fold_train.end(), result.folds[g].begin(), result.folds[g].end());
        }
        Model fold_model = initial;
        auto recs = fit(fold_model, data, fold_train, result.folds[f], tcfg, static_cast<int>(f), observer);
        result.records.insert(result.records.end(), recs.begin(), recs.end());
    }

    model = initial;
    auto recs = fit(model, data, pool, pool, tcfg, tcfg.folds, observer);
    result.records.insert(result.records.end(), recs.begin(), recs.end());
    return result;
}

void write_train_records_csv(const std::vector<TrainRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError(path.string());
    out << "fold,epoch,train_loss,val_loss,val_dice\n";
    char buf[128];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", r.fold, r.epoch, r.train_loss, r.val_loss,
                      r.val_dice);
        out << buf;
    }
    if (!out) throw WriteError(path.string());
}

std::vector<TrainRecord> read_train_records_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileMissing(path.string());
    std::string line;
    std::getline(in, line);
    if (line != "fold,epoch,train_loss,val_loss,val_dice") throw DecodeError(path.string() + ": unexpected header");
    std::vector<TrainRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        TrainRecord r;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf", &r.fold, &r.epoch, &r.train_loss, &r.val_loss,
                        &r.val_dice) != 5) {
            throw DecodeError(path.string() + ": malformed row '" + line + "'");
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace lungseg
