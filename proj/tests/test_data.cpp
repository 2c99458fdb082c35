#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ivanet/checkpoint.hpp"
#include "ivanet/dataset.hpp"
#include "ivanet/gradient_suite.hpp"

using namespace ivanet;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ivanet_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
    }
    return files;
}

}  // namespace

TEST(Shapes, SameSeedGivesIdenticalTree) {
    const fs::path a = scratch_dir("gen_a"), b = scratch_dir("gen_b");
    generate_shapes_dataset(12, 32, 4, 9, a);
    generate_shapes_dataset(12, 32, 4, 9, b);
    const auto ta = tree(a), tb = tree(b);
    EXPECT_EQ(ta.size(), 12u * 2 + 2);
    EXPECT_TRUE(ta == tb);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Shapes, DifferentSeedsDiffer) {
    const auto a = generate_shapes(4, 32, 4, 1), b = generate_shapes(4, 32, 4, 2);
    EXPECT_FALSE(a[0].sample.image.bit_equal(b[0].sample.image));
}

TEST(Shapes, BoxesAreTightAroundFullRaster) {
    const auto images = generate_shapes(100, 64, 4, 3);
    for (const auto& img : images) {
        ASSERT_EQ(img.object_masks.size(), img.sample.boxes.size());
        for (std::size_t o = 0; o < img.object_masks.size(); ++o) {
            std::size_t minx = 64, miny = 64, maxx = 0, maxy = 0;
            for (std::size_t y = 0; y < 64; ++y)
                for (std::size_t x = 0; x < 64; ++x) {
                    if (!img.object_masks[o][y * 64 + x]) continue;
                    minx = std::min(minx, x);
                    maxx = std::max(maxx, x);
                    miny = std::min(miny, y);
                    maxy = std::max(maxy, y);
                }
            const Box& b = img.sample.boxes[o].box;
            EXPECT_LE(std::abs(b.xmin * 64 - static_cast<double>(minx)), 1.0);
            EXPECT_LE(std::abs(b.ymin * 64 - static_cast<double>(miny)), 1.0);
            EXPECT_LE(std::abs(b.xmax * 64 - static_cast<double>(maxx + 1)), 1.0);
            EXPECT_LE(std::abs(b.ymax * 64 - static_cast<double>(maxy + 1)), 1.0);
            const double extent = std::max(b.width(), b.height());
            EXPECT_GE(extent, 0.15 - 1e-9);
            EXPECT_LE(extent, 0.6 + 1e-9);
        }
    }
}

TEST(Shapes, MaskPixelsBelongToOneVisibleObject) {
    const auto images = generate_shapes(50, 32, 5, 4);
    for (const auto& img : images) {
        const auto& s = img.sample;
        for (std::size_t p = 0; p < s.mask.size(); ++p) {
            if (s.mask[p] == 0) {
                for (const auto& m : img.object_masks) EXPECT_EQ(m[p], 0);
                continue;
            }
            // The topmost (last drawn) object covering p owns the pixel.
            std::optional<std::size_t> top;
            for (std::size_t o = 0; o < img.object_masks.size(); ++o) {
                if (img.object_masks[o][p]) top = o;
            }
            ASSERT_TRUE(top.has_value());
            EXPECT_EQ(s.mask[p], s.boxes[*top].class_id);
        }
        EXPECT_GE(s.boxes.size(), 1u);
        EXPECT_LE(s.boxes.size(), 4u);
        for (double v : s.image.data()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Shapes, EveryClassAppearsAtLeastFiveTimes) {
    for (std::uint64_t seed : {0, 1, 2, 3, 4}) {
        const auto images = generate_shapes(100, 64, 4, seed);
        std::vector<int> count(4, 0);
        for (const auto& img : images)
            for (const GtBox& b : img.sample.boxes) ++count[static_cast<std::size_t>(b.class_id)];
        for (std::size_t c = 1; c < 4; ++c) EXPECT_GE(count[c], 5) << "seed " << seed << " class " << c;
    }
}

TEST(Shapes, RejectsUnsupportedClassCount) {
    EXPECT_THROW(generate_shapes(4, 32, 6, 0), ConfigError);
    EXPECT_THROW(generate_shapes(4, 32, 1, 0), ConfigError);
}

TEST(DatasetIo, RoundTrip) {
    const fs::path dir = scratch_dir("roundtrip");
    const auto images = generate_shapes(3, 32, 4, 5);
    Dataset d{32, 4, 5, {}};
    for (const auto& img : images) d.samples.push_back(img.sample);
    write_dataset(d, dir);
    const Dataset back = load_dataset(dir);
    ASSERT_EQ(back.samples.size(), 3u);
    EXPECT_EQ(back.image_size, 32u);
    EXPECT_EQ(back.num_classes, 4u);
    EXPECT_EQ(back.seed, 5u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& a = d.samples[i];
        const auto& b = back.samples[i];
        EXPECT_EQ(a.mask, b.mask);
        ASSERT_EQ(a.boxes.size(), b.boxes.size());
        for (std::size_t k = 0; k < a.boxes.size(); ++k) {
            EXPECT_EQ(a.boxes[k].class_id, b.boxes[k].class_id);
            EXPECT_EQ(a.boxes[k].box.xmin, b.boxes[k].box.xmin);
            EXPECT_EQ(a.boxes[k].box.ymax, b.boxes[k].box.ymax);
        }
        for (std::size_t p = 0; p < a.image.numel(); ++p) EXPECT_LE(std::abs(a.image[p] - b.image[p]), 1.0 / 255);
    }
    fs::remove_all(dir);
}

TEST(DatasetIo, MalformedAnnotationNamesFileAndOffset) {
    const fs::path dir = scratch_dir("malformed");
    generate_shapes_dataset(2, 32, 4, 6, dir);
    {
        std::ofstream f(dir / "annotations.txt", std::ios::app);
        f << "0 1 0.1 0.2 zzz 0.4\n";
    }
    try {
        load_dataset(dir);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(e.file.find("annotations.txt"), std::string::npos);
        EXPECT_GT(e.offset, 0u);
    }
    fs::remove_all(dir);
}

TEST(DatasetIo, TruncatedImageIsParseError) {
    const fs::path dir = scratch_dir("pnm");
    generate_shapes_dataset(1, 32, 4, 7, dir);
    const fs::path img = dir / "images" / "000000.ppm";
    const std::string bytes = read_file(img);
    write_file_atomic(img, bytes.substr(0, bytes.size() / 2));
    EXPECT_THROW(read_pnm(img), ParseError);
    EXPECT_THROW(load_dataset(dir), ParseError);
    fs::remove_all(dir);
}

TEST(DatasetIo, MissingDirectoryIsIoError) {
    EXPECT_THROW(load_dataset("/nonexistent/ivanet/data"), IoError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    SplitMix64 rng(1);
    Checkpoint c;
    c.tensors.emplace("a.w", random_tensor({2, 3, 3, 3}, rng));
    c.tensors.emplace("b", Tensor({2}, {-0.0, 1e-300}));
    c.step = 42;
    c.config = "lr0 = 0.0001\n";
    const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(c));
    ASSERT_EQ(back.tensors.size(), 2u);
    for (const auto& [k, v] : c.tensors) EXPECT_TRUE(v.bit_equal(back.tensors.at(k))) << k;
    EXPECT_EQ(back.step, 42u);
    EXPECT_EQ(back.config, c.config);
    EXPECT_EQ(serialize_checkpoint(c).substr(0, 8), "IVNT0001");

    const fs::path dir = scratch_dir("ckpt");
    save_checkpoint(dir / "m.ckpt", c);
    EXPECT_EQ(read_file(dir / "m.ckpt"), serialize_checkpoint(c));
    EXPECT_TRUE(load_checkpoint(dir / "m.ckpt").tensors.at("a.w").bit_equal(c.tensors.at("a.w")));
    fs::remove_all(dir);
}

TEST(Checkpoint, TruncationIsParseErrorAtEveryLength) {
    Checkpoint c;
    c.tensors.emplace("w", Tensor({2, 2}, {1, 2, 3, 4}));
    c.config = "x";
    const std::string bytes = serialize_checkpoint(c);
    for (std::size_t n = 0; n < bytes.size(); ++n) {
        EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, n)), ParseError) << "length " << n;
    }
    EXPECT_THROW(deserialize_checkpoint("XXXX0001" + bytes.substr(8)), ParseError);
    EXPECT_THROW(deserialize_checkpoint(bytes + "z"), ParseError);
}
