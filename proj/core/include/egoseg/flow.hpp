#pragma once

#include <filesystem>
#include <vector>

#include "egoseg/image.hpp"

namespace egoseg::flow {

/// Dense per-pixel displacement (u along x, v along y) from one frame to the next.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> u;
    std::vector<double> v;

    FlowField() = default;
    FlowField(int w, int h) : width(w), height(h), u(std::size_t(w) * std::size_t(h)), v(u.size()) {}
    std::size_t index(int x, int y) const { return std::size_t(y) * std::size_t(width) + std::size_t(x); }
    /// Largest |u| or |v| over the field.
    double max_abs() const;
};

struct FlowParams {
    /// Smoothness weight in 8-bit intensity units.
    double alpha = 15.0;
    /// Jacobi sweeps per pyramid level.
    int iterations = 200;
    /// 1 = single scale. More levels handle displacements beyond a couple of pixels.
    int pyramid_levels = 1;
};

/// Horn-Schunck flow from `prev` to `curr` on luminance (R+G+B)/3. With a
/// pyramid, each finer level re-linearises the brightness constraint around
/// the upsampled coarse flow by warping `curr`. Throws on resolution mismatch.
FlowField compute_flow(const Frame& prev, const Frame& curr, const FlowParams& params = {});

/// Horn-Schunck objective of `flow` for the single-scale linearisation:
/// sum (Ix u + Iy v + It)^2 + alpha^2 (|grad u|^2 + |grad v|^2).
double horn_schunck_energy(const Frame& prev, const Frame& curr, const FlowField& flow, double alpha);

/// Forward warp: each foreground pixel moves to round(p + flow(p)); targets
/// outside the frame are dropped. Holes are then filled by a radius-1 closing,
/// keeping only closing pixels whose flow traces back into the source mask.
BinaryMask warp_mask(const BinaryMask& mask, const FlowField& flow);

/// Mean flow over the foreground of `mask` (zero for an empty mask).
std::pair<double, double> mean_flow(const FlowField& flow, const BinaryMask& mask);

/// Middlebury `.flo` dump (float32, interleaved u/v).
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);
/// Color-wheel visualisation: hue encodes direction, saturation magnitude.
Frame visualize(const FlowField& flow);

} // namespace egoseg::flow
