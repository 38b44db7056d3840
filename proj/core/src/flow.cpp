#include "egoseg/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

namespace egoseg::flow {

double FlowField::max_abs() const {
    double m = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) m = std::max({m, std::abs(u[i]), std::abs(v[i])});
    return m;
}

namespace {

struct Plane {
    int w = 0, h = 0;
    std::vector<double> px;

    Plane() = default;
    Plane(int w_, int h_) : w(w_), h(h_), px(std::size_t(w_) * std::size_t(h_), 0.0) {}
    double at(int x, int y) const {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return px[std::size_t(y) * std::size_t(w) + std::size_t(x)];
    }
    double& operator()(int x, int y) { return px[std::size_t(y) * std::size_t(w) + std::size_t(x)]; }
    double bilinear(double x, double y) const {
        const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
        const double fx = x - x0, fy = y - y0;
        return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
               fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
    }
};

Plane luminance_plane(const Frame& f) {
    Plane p(f.width(), f.height());
    const auto px = f.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) p.px[i] = luminance(px[i]);
    return p;
}

Plane downsample(const Plane& p) {
    Plane out((p.w + 1) / 2, (p.h + 1) / 2);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            out(x, y) = 0.25 * (p.at(2 * x, 2 * y) + p.at(2 * x + 1, 2 * y) + p.at(2 * x, 2 * y + 1) +
                                p.at(2 * x + 1, 2 * y + 1));
    return out;
}

struct Derivatives {
    Plane ix, iy, it;
};

// Spatial derivatives by central differences of the two-frame average;
// temporal derivative as the frame difference.
Derivatives derivatives(const Plane& a, const Plane& b) {
    Derivatives d{Plane(a.w, a.h), Plane(a.w, a.h), Plane(a.w, a.h)};
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            d.ix(x, y) = 0.25 * (a.at(x + 1, y) - a.at(x - 1, y) + b.at(x + 1, y) - b.at(x - 1, y));
            d.iy(x, y) = 0.25 * (a.at(x, y + 1) - a.at(x, y - 1) + b.at(x, y + 1) - b.at(x, y - 1));
            d.it(x, y) = b.at(x, y) - a.at(x, y);
        }
    return d;
}

// Horn-Schunck neighbourhood average: 1/6 for 4-neighbours, 1/12 for diagonals.
double local_mean(const Plane& p, int x, int y) {
    return (p.at(x - 1, y) + p.at(x + 1, y) + p.at(x, y - 1) + p.at(x, y + 1)) / 6.0 +
           (p.at(x - 1, y - 1) + p.at(x + 1, y - 1) + p.at(x - 1, y + 1) + p.at(x + 1, y + 1)) / 12.0;
}

// Jacobi iterations on the flow (u, v), linearised around (u0, v0).
void horn_schunck(const Derivatives& d, const Plane& u0, const Plane& v0, Plane& u, Plane& v, double alpha,
                  int iterations) {
    const double a2 = alpha * alpha;
    Plane un(u.w, u.h), vn(v.w, v.h);
    for (int it = 0; it < iterations; ++it) {
        for (int y = 0; y < u.h; ++y)
            for (int x = 0; x < u.w; ++x) {
                const double ub = local_mean(u, x, y), vb = local_mean(v, x, y);
                const double ix = d.ix.at(x, y), iy = d.iy.at(x, y);
                const double r = ix * (ub - u0.at(x, y)) + iy * (vb - v0.at(x, y)) + d.it.at(x, y);
                const double k = r / (a2 + ix * ix + iy * iy);
                un(x, y) = ub - ix * k;
                vn(x, y) = vb - iy * k;
            }
        std::swap(u.px, un.px);
        std::swap(v.px, vn.px);
    }
}

Plane upsample_flow(const Plane& coarse, int w, int h) {
    Plane out(w, h);
    const double sx = double(coarse.w) / w, sy = double(coarse.h) / h;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out(x, y) = coarse.bilinear((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5) / sx;
    return out;
}

} // namespace

FlowField compute_flow(const Frame& prev, const Frame& curr, const FlowParams& params) {
    if (prev.width() != curr.width() || prev.height() != curr.height())
        throw Error("optical flow needs frames of equal resolution");
    if (params.iterations < 0 || params.pyramid_levels < 1 || !(params.alpha > 0.0))
        throw Error("invalid optical flow parameters");

    std::vector<Plane> pa{luminance_plane(prev)}, pb{luminance_plane(curr)};
    for (int l = 1; l < params.pyramid_levels; ++l) {
        if (std::min(pa.back().w, pa.back().h) < 16) break;
        pa.push_back(downsample(pa.back()));
        pb.push_back(downsample(pb.back()));
    }

    Plane u, v;
    for (int l = int(pa.size()) - 1; l >= 0; --l) {
        const Plane& a = pa[std::size_t(l)];
        const Plane& b = pb[std::size_t(l)];
        if (u.px.empty()) {
            u = Plane(a.w, a.h);
            v = Plane(a.w, a.h);
        } else {
            u = upsample_flow(u, a.w, a.h);
            v = upsample_flow(v, a.w, a.h);
        }
        Derivatives d;
        if (l == int(pa.size()) - 1) {
            d = derivatives(a, b);
        } else {
            Plane warped(a.w, a.h);
            for (int y = 0; y < a.h; ++y)
                for (int x = 0; x < a.w; ++x) warped(x, y) = b.bilinear(x + u(x, y), y + v(x, y));
            d = derivatives(a, warped);
        }
        const Plane u0 = u, v0 = v;
        horn_schunck(d, u0, v0, u, v, params.alpha, params.iterations);
    }

    FlowField f(prev.width(), prev.height());
    f.u = std::move(u.px);
    f.v = std::move(v.px);
    return f;
}

double horn_schunck_energy(const Frame& prev, const Frame& curr, const FlowField& flow, double alpha) {
    const Plane a = luminance_plane(prev), b = luminance_plane(curr);
    if (flow.width != a.w || flow.height != a.h) throw Error("flow field does not match frames");
    const auto d = derivatives(a, b);
    double e = 0.0;
    const auto U = [&](int x, int y) { return flow.u[flow.index(std::clamp(x, 0, a.w - 1), std::clamp(y, 0, a.h - 1))]; };
    const auto V = [&](int x, int y) { return flow.v[flow.index(std::clamp(x, 0, a.w - 1), std::clamp(y, 0, a.h - 1))]; };
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            const double r = d.ix.at(x, y) * U(x, y) + d.iy.at(x, y) * V(x, y) + d.it.at(x, y);
            const double ux = U(x + 1, y) - U(x, y), uy = U(x, y + 1) - U(x, y);
            const double vx = V(x + 1, y) - V(x, y), vy = V(x, y + 1) - V(x, y);
            e += r * r + alpha * alpha * (ux * ux + uy * uy + vx * vx + vy * vy);
        }
    return e;
}

BinaryMask warp_mask(const BinaryMask& mask, const FlowField& flow) {
    if (flow.width != mask.width() || flow.height != mask.height()) throw Error("flow field does not match mask");
    const int w = mask.width(), h = mask.height();
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            const std::size_t i = mask.index(x, y);
            const long tx = std::lround(x + flow.u[i]);
            const long ty = std::lround(y + flow.v[i]);
            if (tx >= 0 && ty >= 0 && tx < w && ty < h) out.set(int(tx), int(ty), true);
        }
    const BinaryMask filled = close(out, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!filled.at(x, y) || out.at(x, y)) continue;
            const std::size_t i = mask.index(x, y);
            const long sx = std::lround(x - flow.u[i]);
            const long sy = std::lround(y - flow.v[i]);
            if (sx >= 0 && sy >= 0 && sx < w && sy < h && mask.at(int(sx), int(sy))) out.set(x, y, true);
        }
    return out;
}

std::pair<double, double> mean_flow(const FlowField& flow, const BinaryMask& mask) {
    double su = 0.0, sv = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < mask.pixel_count(); ++i)
        if (mask[i]) {
            su += flow.u[i];
            sv += flow.v[i];
            ++n;
        }
    if (n == 0) return {0.0, 0.0};
    return {su / double(n), sv / double(n)};
}

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write flow file " + path.string());
    const float magic = 202021.25f;
    const std::int32_t w = flow.width, h = flow.height;
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        const float uv[2] = {float(flow.u[i]), float(flow.v[i])};
        out.write(reinterpret_cast<const char*>(uv), 8);
    }
}

FlowField read_flo(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    float magic = 0;
    std::int32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || magic != 202021.25f || w <= 0 || h <= 0) throw Error("not a flow file: " + path.string());
    FlowField f(w, h);
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        float uv[2];
        in.read(reinterpret_cast<char*>(uv), 8);
        f.u[i] = uv[0];
        f.v[i] = uv[1];
    }
    if (!in) throw Error("truncated flow file: " + path.string());
    return f;
}

Frame visualize(const FlowField& flow) {
    double peak = 0.0;
    for (std::size_t i = 0; i < flow.u.size(); ++i) peak = std::max(peak, std::hypot(flow.u[i], flow.v[i]));
    Frame img(flow.width, flow.height, Rgb{255, 255, 255});
    if (peak <= 0.0) return img;
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        const double hue = (std::atan2(flow.v[i], flow.u[i]) + std::numbers::pi) / (2 * std::numbers::pi) * 6.0;
        const double sat = std::hypot(flow.u[i], flow.v[i]) / peak;
        const int sector = int(hue) % 6;
        const double f = hue - std::floor(hue);
        const double p = 1 - sat, q = 1 - sat * f, t = 1 - sat * (1 - f);
        double r = 1, g = 1, b = 1;
        switch (sector) {
        case 0: r = 1; g = t; b = p; break;
        case 1: r = q; g = 1; b = p; break;
        case 2: r = p; g = 1; b = t; break;
        case 3: r = p; g = q; b = 1; break;
        case 4: r = t; g = p; b = 1; break;
        default: r = 1; g = p; b = q; break;
        }
        img.pixels()[i] = {std::uint8_t(std::lround(255 * r)), std::uint8_t(std::lround(255 * g)),
                           std::uint8_t(std::lround(255 * b))};
    }
    return img;
}

} // namespace egoseg::flow
