#include "lungseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "lungseg/errors.hpp"
#include "lungseg/imgio.hpp"
#include "lungseg/rng.hpp"

namespace lungseg {

namespace fs = std::filesystem;

std::vector<std::size_t> SplitSpec::pool() const {
    std::vector<std::size_t> out = train;
    out.insert(out.end(), val.begin(), val.end());
    return out;
}

SplitSpec split_dataset(std::size_t n, std::uint64_t seed, std::array<unsigned, 3> ratios) {
    if (n < 3) throw TooFewEntries("split needs at least 3 entries, got " + std::to_string(n));
    const std::size_t total = std::size_t{ratios[0]} + ratios[1] + ratios[2];
    if (total == 0) throw InvalidConfig("split ratios sum to zero");

    const std::size_t n_val = n * ratios[1] / total;
    const std::size_t n_test = n * ratios[2] / total;
    const std::size_t n_train = n - n_val - n_test;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    seeded_shuffle(order, seed);

    SplitSpec s;
    s.seed = seed;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return s;
}

bool split_is_valid(const SplitSpec& split, std::size_t n) {
    std::vector<int> seen(n, 0);
    for (const auto* part : {&split.train, &split.val, &split.test}) {
        for (std::size_t i : *part) {
            if (i >= n || seen[i]++) return false;
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

std::vector<std::vector<std::size_t>> kfold_partition(const std::vector<std::size_t>& pool, std::size_t k) {
    if (k < 2) throw InvalidConfig("folds must be >= 2");
    if (pool.size() < k) {
        throw TooFewEntries("cannot form " + std::to_string(k) + " folds from " + std::to_string(pool.size()) +
                            " entries");
    }
    std::vector<std::vector<std::size_t>> folds(k);
    const std::size_t base = pool.size() / k, extra = pool.size() % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].assign(pool.begin() + static_cast<std::ptrdiff_t>(pos),
                        pool.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return folds;
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool is_raw(const fs::path& p) {
    const auto ext = lower(p.extension().string());
    return ext == ".raw" || ext == ".img";
}

bool is_raster(const fs::path& p) {
    const auto ext = lower(p.extension().string());
    return ext == ".png" || ext == ".pgm";
}

int raw_side(const fs::path& p) {
    const auto bytes = fs::file_size(p);
    const auto side = static_cast<std::uintmax_t>(std::llround(std::sqrt(static_cast<double>(bytes / 2))));
    if (side == 0 || side * side * 2 != bytes) {
        constexpr std::size_t jsrt_bytes = std::size_t{io::kJsrtSide} * io::kJsrtSide * 2;
        throw SizeMismatch(jsrt_bytes, static_cast<std::size_t>(bytes));
    }
    return static_cast<int>(side);
}

}  // namespace

GrayImage load_image(const fs::path& path, bool invert_input) {
    if (!fs::exists(path)) throw FileMissing(path.string());
    if (is_raw(path)) {
        const int side = raw_side(path);
        return io::read_jsrt_raw(path, {side, side, invert_input});
    }
    return io::read_gray(path);
}

PairingResult pair_dataset(const fs::path& root, bool invert_input) {
    const fs::path images = root / "images";
    if (!fs::is_directory(images)) throw MissingImagesDir(images.string());

    std::map<std::string, fs::path> masks;
    if (fs::is_directory(root / "masks")) {
        for (const auto& e : fs::directory_iterator(root / "masks")) {
            if (e.is_regular_file() && is_raster(e.path())) masks.emplace(e.path().stem().string(), e.path());
        }
    }

    std::map<std::string, fs::path> found;
    for (const auto& e : fs::directory_iterator(images)) {
        if (e.is_regular_file() && (is_raw(e.path()) || is_raster(e.path()))) {
            found.emplace(e.path().stem().string(), e.path());
        }
    }

    PairingResult out;
    for (const auto& [stem, path] : found) {
        ManifestRow row;
        row.id = stem;
        row.image_path = path;
        if (is_raw(path)) {
            row.width = row.height = raw_side(path);
        } else {
            const GrayImage img = load_image(path, invert_input);
            row.width = img.width;
            row.height = img.height;
        }
        if (auto it = masks.find(stem); it != masks.end()) {
            row.mask_path = it->second;
        } else {
            out.unpaired.push_back(stem);
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

void write_manifest(const std::vector<ManifestRow>& rows, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError(path.string());
    out << "id,image_path,mask_path,width,height\n";
    for (const auto& r : rows) {
        out << r.id << ',' << r.image_path.string() << ',' << r.mask_path.string() << ',' << r.width << ','
            << r.height << '\n';
    }
    if (!out) throw WriteError(path.string());
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FileMissing(path.string());
    std::string line;
    if (!std::getline(in, line) || line != "id,image_path,mask_path,width,height") {
        throw DecodeError(path.string() + ": unexpected manifest header");
    }
    std::vector<ManifestRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (line.back() == ',') f.emplace_back();
        if (f.size() != 5) throw DecodeError(path.string() + ": malformed row '" + line + "'");
        ManifestRow r;
        r.id = f[0];
        r.image_path = f[1];
        r.mask_path = f[2];
        try {
            r.width = std::stoi(f[3]);
            r.height = std::stoi(f[4]);
        } catch (const std::logic_error&) {
            throw DecodeError(path.string() + ": bad dimensions in row '" + line + "'");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

DatasetEntry load_entry(const ManifestRow& row, bool invert_input, int working_size) {
    DatasetEntry e;
    e.id = row.id;
    e.image = load_image(row.image_path, invert_input);
    if (!row.mask_path.empty()) {
        BinaryMask m = io::read_mask(row.mask_path);
        if (!same_dims(m, e.image)) m = io::resize_nearest(m, e.image.width, e.image.height);
        e.mask = std::move(m);
    }
    if (working_size > 0 && (e.image.width != working_size || e.image.height != working_size)) {
        e.image = io::resize_bilinear(e.image, working_size, working_size);
        if (e.mask) e.mask = io::resize_nearest(*e.mask, working_size, working_size);
    }
    return e;
}

}  // namespace lungseg
