#pragma once

#include <cstdint>
#include <vector>

#include "lungseg/image.hpp"

namespace lungseg {

struct Ellipse {
    double cx = 0, cy = 0;  // center, pixels
    double rx = 0, ry = 0;  // semi-axes, pixels

    /// Normalized elliptical radius; <= 1 inside.
    double radius(double x, double y) const noexcept;
    bool contains(double x, double y) const noexcept { return radius(x, y) <= 1.0; }
};

struct PhantomConfig {
    int size = 128;
    double noise_sigma = 0.05;
    double field_level = 0.75;  // body brightness
    double lung_level = 0.20;   // lung brightness at the center of each field
    double edge_level = 0.60;   // lung brightness at the rim
    double profile_power = 4.0; // lung brightness rises as r^power from center to rim
};

struct Phantom {
    GrayImage image;
    BinaryMask truth;
    std::vector<Ellipse> lungs;
};

/// Renders dark ellipses on a bright field with additive Gaussian noise
/// (clamped to [0, 1]). Inside an ellipse the brightness climbs from
/// lung_level at the center to edge_level at the rim. Pixels whose center
/// lies inside any ellipse are truth.
Phantom render_phantom(const std::vector<Ellipse>& lungs, const PhantomConfig& cfg, std::uint64_t noise_seed);

/// Lung-like phantom: one ellipse per hemithorax with seeded centers and axes.
Phantom generate_phantom(std::uint64_t seed, const PhantomConfig& cfg = {});

}  // namespace lungseg
