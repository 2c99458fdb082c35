#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivanet/geometry.hpp"
#include "ivanet/tensor.hpp"

namespace ivanet {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file; the message names the file and byte offset.
struct ParseError : std::runtime_error {
    ParseError(const std::string& file, std::size_t offset, const std::string& what);
    std::string file;
    std::size_t offset;
};

/// One training example: image [3,S,S] in [0,1], class-labeled boxes and a
/// per-pixel class mask (row-major S x S, 0 = background).
struct GroundTruthSample {
    Tensor image;
    std::vector<GtBox> boxes;
    std::vector<std::uint8_t> mask;

    std::size_t size() const { return image.dim(1); }
};

struct Dataset {
    std::size_t image_size = 0;
    std::size_t num_classes = 0;
    std::uint64_t seed = 0;
    std::vector<GroundTruthSample> samples;
};

enum class ShapeKind { rectangle, ellipse, triangle, cross };

/// A generated sample plus the full (unoccluded) raster of each object, in
/// the same order as the sample's boxes.
struct SyntheticImage {
    GroundTruthSample sample;
    std::vector<std::vector<std::uint8_t>> object_masks;
};

struct ShapesOptions {
    std::size_t min_objects = 1;
    std::size_t max_objects = 4;
    double min_extent = 0.15;
    double max_extent = 0.60;
    /// Objects whose visible area falls below this fraction of their full
    /// raster cause the image to be redrawn.
    double min_visible_fraction = 0.3;
    /// Minimum per-class occurrence count, enforced when attainable.
    std::size_t min_class_count = 5;
};

/// Deterministic "shapes" images: 1-4 flat-colored objects (class k is
/// ShapeKind k-1) over colored noise; later objects occlude earlier ones.
/// Masks show visible pixels, boxes the full shape extent.
std::vector<SyntheticImage> generate_shapes(std::size_t n, std::size_t size, std::size_t num_classes,
                                            std::uint64_t seed, const ShapesOptions& opts = {});

/// Generates and writes images/NNNNNN.ppm, masks/NNNNNN.pgm,
/// annotations.txt and meta.txt under `out_dir`.
void generate_shapes_dataset(std::size_t n, std::size_t size, std::size_t num_classes, std::uint64_t seed,
                             const std::filesystem::path& out_dir, const ShapesOptions& opts = {});

void write_dataset(const Dataset& dataset, const std::filesystem::path& out_dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Binary PPM (P6) / PGM (P5) with maxval 255.
struct RasterImage {
    std::size_t width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> pixels;
};
RasterImage read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const RasterImage& image);

/// 8-bit interleaved RGB to a [3,H,W] tensor in [0,1], and back (rounding).
Tensor image_to_tensor(const RasterImage& rgb);
RasterImage tensor_to_image(const Tensor& chw);

/// Writes `bytes` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace ivanet
