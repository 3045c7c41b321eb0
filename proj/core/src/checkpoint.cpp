#include "lungseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include "lungseg/errors.hpp"

namespace lungseg {

namespace {

constexpr std::string_view kMagic = "LUNGSEG1";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string_view take(std::size_t n) {
        need(n);
        std::string_view s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw CheckpointError("truncated checkpoint");
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model) {
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    const UNetConfig& cfg = model.config();
    put_u32(out, static_cast<std::uint32_t>(cfg.depth));
    put_u32(out, static_cast<std::uint32_t>(cfg.base_channels));
    put_u32(out, static_cast<std::uint32_t>(cfg.input_size));
    for (const auto& p : model.parameters()) {
        const nn::Shape s = p.value.shape;
        for (std::size_t d : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<std::uint32_t>(d));
        for (float v : p.value.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

Model deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (r.take(kMagic.size()) != kMagic) throw CheckpointError("bad magic");
    UNetConfig cfg;
    cfg.depth = static_cast<int>(r.u32());
    cfg.base_channels = static_cast<int>(r.u32());
    cfg.input_size = static_cast<int>(r.u32());
    Model model(cfg);
    for (auto& p : model.parameters()) {
        const nn::Shape s{r.u32(), r.u32(), r.u32(), r.u32()};
        if (!(s == p.value.shape)) {
            throw CheckpointError("parameter " + p.name + " has shape " + s.str() + ", expected " + p.value.shape.str());
        }
        for (float& v : p.value.data) v = r.f32();
    }
    if (!r.done()) throw CheckpointError("trailing bytes after last parameter");
    return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw WriteError(path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw WriteError(path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileMissing(path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize_checkpoint(bytes);
    } catch (const InvalidConfig& e) {
        throw CheckpointError(std::string("invalid architecture: ") + e.what());
    }
}

}  // namespace lungseg
