#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace egoseg {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Mean of the three channels, the luminance used by gradient and flow code.
inline double luminance(Rgb c) { return (double(c.r) + double(c.g) + double(c.b)) / 3.0; }

struct Point {
    int x = 0;
    int y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Row-major 8-bit RGB raster. `number` is the 1-based position of the frame
/// in its sequence (0 when the frame does not belong to a sequence).
class Frame {
public:
    Frame() = default;
    Frame(int width, int height, Rgb fill = {}, int number = 0);
    Frame(int width, int height, std::vector<Rgb> pixels, int number = 0);

    int width() const { return width_; }
    int height() const { return height_; }
    int number() const { return number_; }
    void set_number(int n) { number_ = n; }
    std::size_t pixel_count() const { return pixels_.size(); }
    bool empty() const { return pixels_.empty(); }

    Rgb at(int x, int y) const { return pixels_[index(x, y)]; }
    Rgb& at(int x, int y) { return pixels_[index(x, y)]; }
    std::span<const Rgb> pixels() const { return pixels_; }
    std::span<Rgb> pixels() { return pixels_; }

    std::size_t index(int x, int y) const { return std::size_t(y) * std::size_t(width_) + std::size_t(x); }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int number_ = 0;
    std::vector<Rgb> pixels_;
};

/// Per-pixel object labeling; true marks the object (foreground).
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return bits_.size(); }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

    /// Number of foreground pixels.
    std::size_t count() const;
    bool none() const { return count() == 0; }

    std::size_t index(int x, int y) const { return std::size_t(y) * std::size_t(width_) + std::size_t(x); }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    bool same_shape(const BinaryMask& o) const { return width_ == o.width_ && height_ == o.height_; }

    std::span<const std::uint8_t> bits() const { return bits_; }

    BinaryMask operator~() const;
    BinaryMask& operator&=(const BinaryMask& o);
    BinaryMask& operator|=(const BinaryMask& o);
    friend BinaryMask operator&(BinaryMask a, const BinaryMask& b) { return a &= b; }
    friend BinaryMask operator|(BinaryMask a, const BinaryMask& b) { return a |= b; }
    /// Set difference a \ b.
    friend BinaryMask operator-(const BinaryMask& a, const BinaryMask& b);
    /// True when every foreground pixel of this mask is foreground in `o`.
    bool subset_of(const BinaryMask& o) const;

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Inclusive axis-aligned bounds of the foreground; `empty` when the mask has none.
struct BoundingBox {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
    bool empty() const { return x1 < x0 || y1 < y0; }
};
BoundingBox bounding_box(const BinaryMask& mask);

/// A user seed: a simple polygon in pixel coordinates.
struct SeedPolygon {
    std::vector<Point> vertices;

    /// Twice the signed area (shoelace).
    long long doubled_area() const;
    /// Throws egoseg::Error unless the polygon has >= 3 vertices, non-zero area,
    /// every vertex within [0,width]x[0,height], and no self-intersections.
    void validate(int width, int height) const;
};

/// Even-odd point-in-polygon test at pixel centers (x + 0.5, y + 0.5).
BinaryMask rasterize(const SeedPolygon& poly, int width, int height);

/// Morphology with a digital disk: offsets (dx, dy) with dx^2 + dy^2 <= (r + 1/2)^2.
/// Radius 1 gives the full 3x3 neighbourhood.
enum class Border { background, foreground };
BinaryMask dilate(const BinaryMask& mask, int radius);
/// Pixels whose whole disk is foreground. With Border::background, disk
/// offsets falling outside the frame count as background.
BinaryMask erode(const BinaryMask& mask, int radius, Border border = Border::background);
/// Dilation followed by erosion with out-of-frame treated as foreground, so the
/// result always contains the input.
BinaryMask close(const BinaryMask& mask, int radius);
std::vector<Point> disk_offsets(int radius);

/// Numbered PNG frames on disk: `000001.png`, `000002.png`, ... (1-based, 6 digits).
class FrameSequence {
public:
    /// Scans `dir`, checks numbering has no gaps and every frame shares one
    /// resolution. Throws egoseg::Error naming the offending file otherwise.
    static FrameSequence open(const std::filesystem::path& dir);

    const std::filesystem::path& directory() const { return dir_; }
    int length() const { return int(files_.size()); }
    int width() const { return width_; }
    int height() const { return height_; }
    /// Loads frame `number` (1-based).
    Frame frame(int number) const;
    const std::filesystem::path& path(int number) const;

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> files_;
    int width_ = 0;
    int height_ = 0;
};

/// Zero-padded 6-digit file name for a frame number, e.g. 7 -> "000007.png".
std::string frame_file_name(int number);

Frame read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Frame& frame);
/// Grayscale PNG, 255 = foreground, 0 = background. Reading thresholds at 128.
BinaryMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
/// Reads only the header to get (width, height).
std::pair<int, int> png_dimensions(const std::filesystem::path& path);

} // namespace egoseg
