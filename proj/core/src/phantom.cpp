#include "lungseg/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "lungseg/rng.hpp"

namespace lungseg {

double Ellipse::radius(double x, double y) const noexcept {
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return std::sqrt(dx * dx + dy * dy);
}

Phantom render_phantom(const std::vector<Ellipse>& lungs, const PhantomConfig& cfg, std::uint64_t noise_seed) {
    const int S = cfg.size;
    Phantom p{GrayImage(S, S), BinaryMask(S, S), lungs};
    SplitMix64 rng(noise_seed);
    for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            double r = 2.0;
            for (const auto& e : lungs) r = std::min(r, e.radius(px, py));
            const bool inside = r <= 1.0;
            const double base =
                inside ? cfg.lung_level + (cfg.edge_level - cfg.lung_level) * std::pow(r, cfg.profile_power)
                       : cfg.field_level;
            const double v = base + cfg.noise_sigma * rng.normal();
            p.image.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            p.truth.set(x, y, inside);
        }
    }
    return p;
}

Phantom generate_phantom(std::uint64_t seed, const PhantomConfig& cfg) {
    SplitMix64 rng(seed);
    const double S = cfg.size;
    std::vector<Ellipse> lungs;
    for (int side = 0; side < 2; ++side) {
        Ellipse e;
        const double mid = side == 0 ? 0.30 : 0.70;
        e.cx = S * rng.uniform(mid - 0.05, mid + 0.05);
        e.cy = S * rng.uniform(0.42, 0.55);
        e.rx = S * rng.uniform(0.10, 0.16);
        e.ry = S * rng.uniform(0.22, 0.32);
        lungs.push_back(e);
    }
    return render_phantom(lungs, cfg, rng.next());
}

}  // namespace lungseg
