#include "egoseg/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <regex>

#include <png.h>

namespace egoseg {

namespace fs = std::filesystem;

Frame::Frame(int width, int height, Rgb fill, int number)
    : width_(width), height_(height), number_(number) {
    if (width <= 0 || height <= 0) throw Error("frame dimensions must be positive");
    pixels_.assign(std::size_t(width) * std::size_t(height), fill);
}

Frame::Frame(int width, int height, std::vector<Rgb> pixels, int number)
    : width_(width), height_(height), number_(number), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) throw Error("frame dimensions must be positive");
    if (pixels_.size() != std::size_t(width) * std::size_t(height))
        throw Error("pixel count does not match frame dimensions");
}

BinaryMask::BinaryMask(int width, int height, bool fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw Error("mask dimensions must be positive");
    bits_.assign(std::size_t(width) * std::size_t(height), fill ? 1 : 0);
}

std::size_t BinaryMask::count() const {
    return std::size_t(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::operator~() const {
    BinaryMask out = *this;
    for (auto& b : out.bits_) b = b ? 0 : 1;
    return out;
}

BinaryMask& BinaryMask::operator&=(const BinaryMask& o) {
    if (!same_shape(o)) throw Error("mask dimension mismatch");
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= o.bits_[i];
    return *this;
}

BinaryMask& BinaryMask::operator|=(const BinaryMask& o) {
    if (!same_shape(o)) throw Error("mask dimension mismatch");
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= o.bits_[i];
    return *this;
}

BinaryMask operator-(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) throw Error("mask dimension mismatch");
    BinaryMask out = a;
    for (std::size_t i = 0; i < out.bits_.size(); ++i) out.bits_[i] = a.bits_[i] && !b.bits_[i];
    return out;
}

bool BinaryMask::subset_of(const BinaryMask& o) const {
    if (!same_shape(o)) throw Error("mask dimension mismatch");
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i] && !o.bits_[i]) return false;
    return true;
}

BoundingBox bounding_box(const BinaryMask& mask) {
    BoundingBox box{mask.width(), mask.height(), -1, -1};
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(x, y)) {
                box.x0 = std::min(box.x0, x);
                box.y0 = std::min(box.y0, y);
                box.x1 = std::max(box.x1, x);
                box.y1 = std::max(box.y1, y);
            }
    if (box.x1 < 0) return {};
    return box;
}

// ---------------------------------------------------------------------------
// Polygons

long long SeedPolygon::doubled_area() const {
    long long a = 0;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = vertices[i];
        const Point& q = vertices[(i + 1) % n];
        a += (long long)p.x * q.y - (long long)q.x * p.y;
    }
    return a;
}

namespace {

long long cross(Point o, Point a, Point b) {
    return (long long)(a.x - o.x) * (b.y - o.y) - (long long)(a.y - o.y) * (b.x - o.x);
}

bool on_segment(Point p, Point a, Point b) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

int sign(long long v) { return (v > 0) - (v < 0); }

bool segments_intersect(Point a, Point b, Point c, Point d) {
    const int d1 = sign(cross(c, d, a));
    const int d2 = sign(cross(c, d, b));
    const int d3 = sign(cross(a, b, c));
    const int d4 = sign(cross(a, b, d));
    if (d1 != d2 && d3 != d4 && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0) return true;
    if (d1 == 0 && on_segment(a, c, d)) return true;
    if (d2 == 0 && on_segment(b, c, d)) return true;
    if (d3 == 0 && on_segment(c, a, b)) return true;
    if (d4 == 0 && on_segment(d, a, b)) return true;
    return false;
}

} // namespace

void SeedPolygon::validate(int width, int height) const {
    const std::size_t n = vertices.size();
    if (n < 3) throw Error("seed polygon needs at least 3 vertices");
    if (doubled_area() == 0) throw Error("seed polygon has zero area");
    for (const Point& p : vertices)
        if (p.x < 0 || p.y < 0 || p.x > width || p.y > height)
            throw Error("seed polygon vertex (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                        ") lies outside the frame");
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = vertices[i], b = vertices[(i + 1) % n];
        if (a == b) throw Error("seed polygon has repeated consecutive vertices");
        for (std::size_t j = i + 1; j < n; ++j) {
            const Point c = vertices[j], d = vertices[(j + 1) % n];
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) {
                // Neighbouring edges share one endpoint; they must not fold back onto each other.
                const Point shared = (j == i + 1) ? b : a;
                const Point p = (j == i + 1) ? a : b;
                const Point q = (j == i + 1) ? d : c;
                if (cross(shared, p, q) == 0 &&
                    (long long)(p.x - shared.x) * (q.x - shared.x) + (long long)(p.y - shared.y) * (q.y - shared.y) > 0)
                    throw Error("seed polygon is not simple");
                continue;
            }
            if (segments_intersect(a, b, c, d)) throw Error("seed polygon is not simple");
        }
    }
}

BinaryMask rasterize(const SeedPolygon& poly, int width, int height) {
    poly.validate(width, height);
    BinaryMask mask(width, height);
    const std::size_t n = poly.vertices.size();
    std::vector<double> xs;
    for (int y = 0; y < height; ++y) {
        const double yc = y + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const Point a = poly.vertices[i], b = poly.vertices[(i + 1) % n];
            if ((a.y > yc) != (b.y > yc))
                xs.push_back(a.x + (yc - a.y) * double(b.x - a.x) / double(b.y - a.y));
        }
        std::sort(xs.begin(), xs.end());
        // A center is inside when an odd number of crossings lie strictly to its right.
        std::size_t right = 0;
        for (int x = 0; x < width; ++x) {
            const double xc = x + 0.5;
            while (right < xs.size() && xs[right] <= xc) ++right;
            if ((xs.size() - right) % 2 == 1) mask.set(x, y, true);
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Morphology

namespace {

std::vector<int> half_widths(int radius) {
    const double r = radius + 0.5;
    std::vector<int> hw(std::size_t(2 * radius + 1));
    for (int dy = -radius; dy <= radius; ++dy)
        hw[std::size_t(dy + radius)] = int(std::floor(std::sqrt(r * r - double(dy) * dy)));
    return hw;
}

// prefix[y * (w + 1) + x] = number of set bits in row y before column x.
std::vector<int> row_prefix(const BinaryMask& m) {
    const int w = m.width(), h = m.height();
    std::vector<int> p(std::size_t(h) * std::size_t(w + 1), 0);
    for (int y = 0; y < h; ++y) {
        int* row = &p[std::size_t(y) * std::size_t(w + 1)];
        for (int x = 0; x < w; ++x) row[x + 1] = row[x] + (m.at(x, y) ? 1 : 0);
    }
    return p;
}

} // namespace

std::vector<Point> disk_offsets(int radius) {
    if (radius < 0) throw Error("radius must be non-negative");
    std::vector<Point> out;
    const auto hw = half_widths(radius);
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -hw[std::size_t(dy + radius)]; dx <= hw[std::size_t(dy + radius)]; ++dx) out.push_back({dx, dy});
    return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    if (radius < 0) throw Error("radius must be non-negative");
    if (radius == 0) return mask;
    const int w = mask.width(), h = mask.height();
    const auto hw = half_widths(radius);
    const auto prefix = row_prefix(mask);
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            for (int dy = -radius; dy <= radius; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= h) continue;
                const int k = hw[std::size_t(dy + radius)];
                const int lo = std::max(0, x - k), hi = std::min(w, x + k + 1);
                const int* row = &prefix[std::size_t(yy) * std::size_t(w + 1)];
                if (row[hi] - row[lo] > 0) {
                    out.set(x, y, true);
                    break;
                }
            }
        }
    return out;
}

BinaryMask erode(const BinaryMask& mask, int radius, Border border) {
    if (radius < 0) throw Error("radius must be non-negative");
    if (radius == 0) return mask;
    const int w = mask.width(), h = mask.height();
    const auto hw = half_widths(radius);
    const auto prefix = row_prefix(mask);
    const bool outside_fg = border == Border::foreground;
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            bool keep = true;
            for (int dy = -radius; dy <= radius && keep; ++dy) {
                const int yy = y + dy;
                const int k = hw[std::size_t(dy + radius)];
                if (yy < 0 || yy >= h) {
                    keep = outside_fg;
                    continue;
                }
                int lo = x - k, hi = x + k + 1;
                if (lo < 0 || hi > w) {
                    if (!outside_fg) {
                        keep = false;
                        continue;
                    }
                    lo = std::max(lo, 0);
                    hi = std::min(hi, w);
                }
                const int* row = &prefix[std::size_t(yy) * std::size_t(w + 1)];
                keep = row[hi] - row[lo] == hi - lo;
            }
            if (keep) out.set(x, y, true);
        }
    return out;
}

BinaryMask close(const BinaryMask& mask, int radius) {
    return erode(dilate(mask, radius), radius, Border::foreground);
}

// ---------------------------------------------------------------------------
// PNG I/O

namespace {

struct PngImage {
    png_image image{};
    PngImage() {
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngImage() { png_image_free(&image); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

std::vector<std::uint8_t> read_png_raw(const fs::path& path, std::uint32_t format, int& w, int& h) {
    PngImage png;
    if (!png_image_begin_read_from_file(&png.image, path.c_str()))
        throw Error("cannot read image " + path.string() + ": " + png.image.message);
    png.image.format = format;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png.image));
    if (!png_image_finish_read(&png.image, nullptr, buf.data(), 0, nullptr))
        throw Error("cannot decode image " + path.string() + ": " + png.image.message);
    w = int(png.image.width);
    h = int(png.image.height);
    return buf;
}

void write_png_raw(const fs::path& path, std::uint32_t format, int w, int h, const void* data) {
    PngImage png;
    png.image.width = std::uint32_t(w);
    png.image.height = std::uint32_t(h);
    png.image.format = format;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!png_image_write_to_file(&png.image, path.c_str(), 0, data, 0, nullptr))
        throw Error("cannot write image " + path.string() + ": " + png.image.message);
}

} // namespace

Frame read_png(const fs::path& path) {
    int w = 0, h = 0;
    const auto buf = read_png_raw(path, PNG_FORMAT_RGB, w, h);
    std::vector<Rgb> px(std::size_t(w) * std::size_t(h));
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = {buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
    return Frame(w, h, std::move(px));
}

void write_png(const fs::path& path, const Frame& frame) {
    std::vector<std::uint8_t> buf;
    buf.reserve(frame.pixel_count() * 3);
    for (const Rgb& c : frame.pixels()) {
        buf.push_back(c.r);
        buf.push_back(c.g);
        buf.push_back(c.b);
    }
    write_png_raw(path, PNG_FORMAT_RGB, frame.width(), frame.height(), buf.data());
}

BinaryMask read_mask_png(const fs::path& path) {
    int w = 0, h = 0;
    const auto buf = read_png_raw(path, PNG_FORMAT_GRAY, w, h);
    BinaryMask m(w, h);
    for (std::size_t i = 0; i < buf.size(); ++i) m.set(i, buf[i] >= 128);
    return m;
}

void write_mask_png(const fs::path& path, const BinaryMask& mask) {
    std::vector<std::uint8_t> buf(mask.pixel_count());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = mask[i] ? 255 : 0;
    write_png_raw(path, PNG_FORMAT_GRAY, mask.width(), mask.height(), buf.data());
}

std::pair<int, int> png_dimensions(const fs::path& path) {
    PngImage png;
    if (!png_image_begin_read_from_file(&png.image, path.c_str()))
        throw Error("cannot read image " + path.string() + ": " + png.image.message);
    return {int(png.image.width), int(png.image.height)};
}

// ---------------------------------------------------------------------------
// Sequences

std::string frame_file_name(int number) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d.png", number);
    return buf;
}

FrameSequence FrameSequence::open(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("frame directory not found: " + dir.string());
    static const std::regex name_re(R"((\d{6})\.png)");
    std::map<int, fs::path> numbered;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && std::regex_match(name, m, name_re))
            numbered.emplace(std::stoi(m[1].str()), entry.path());
    }
    if (numbered.empty()) throw Error("no frames found in " + dir.string());

    FrameSequence seq;
    seq.dir_ = dir;
    int expected = 1;
    for (const auto& [number, path] : numbered) {
        if (number != expected) throw Error("frame sequence has a gap: missing " + frame_file_name(expected));
        const auto [w, h] = png_dimensions(path);
        if (seq.files_.empty()) {
            seq.width_ = w;
            seq.height_ = h;
        } else if (w != seq.width_ || h != seq.height_) {
            throw Error("frame " + path.filename().string() + " has resolution " + std::to_string(w) + "x" +
                        std::to_string(h) + ", expected " + std::to_string(seq.width_) + "x" +
                        std::to_string(seq.height_));
        }
        seq.files_.push_back(path);
        ++expected;
    }
    return seq;
}

const fs::path& FrameSequence::path(int number) const {
    if (number < 1 || number > length()) throw Error("frame number out of range: " + std::to_string(number));
    return files_[std::size_t(number - 1)];
}

Frame FrameSequence::frame(int number) const {
    Frame f = read_png(path(number));
    if (f.width() != width_ || f.height() != height_)
        throw Error("frame " + path(number).filename().string() + " changed resolution since the sequence was opened");
    f.set_number(number);
    return f;
}

} // namespace egoseg
