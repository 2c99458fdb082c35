#include "ivanet/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ivanet/config.hpp"
#include "ivanet/rng.hpp"

namespace ivanet {

namespace fs = std::filesystem;

ParseError::ParseError(const std::string& f, std::size_t off, const std::string& what)
    : std::runtime_error(f + ": byte " + std::to_string(off) + ": " + what), file(f), offset(off) {}

namespace {

// Six-decimal text form used on disk; in-memory boxes pass through it so a
// written dataset reads back identically.
double six_decimals(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::strtod(buf, nullptr);
}

std::string file_name(std::size_t index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.%s", index, ext);
    return buf;
}

struct Rgb {
    int r, g, b;
};

Rgb random_object_color(SplitMix64& rng, std::span<const Rgb> others) {
    Rgb c{};
    for (int attempt = 0; attempt < 100; ++attempt) {
        int ch[3];
        for (int& v : ch) v = static_cast<int>(rng.uniform_int(0, 255));
        const int peak = std::max({ch[0], ch[1], ch[2], 1});
        const int target = static_cast<int>(rng.uniform_int(153, 255));
        for (int& v : ch) v = v * target / peak;
        c = {ch[0], ch[1], ch[2]};
        const bool distinct = std::all_of(others.begin(), others.end(), [&](const Rgb& o) {
            return std::abs(o.r - c.r) + std::abs(o.g - c.g) + std::abs(o.b - c.b) >= 90;
        });
        if (distinct) break;
    }
    return c;
}

// Full raster of one shape inside its w x h bounding region. Pixel centers
// are tested in doubled integer coordinates so rasterization is exact.
std::vector<std::uint8_t> rasterize(ShapeKind kind, std::int64_t w, std::int64_t h) {
    std::vector<std::uint8_t> r(static_cast<std::size_t>(w * h), 0);
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const std::int64_t u = 2 * x + 1, v = 2 * y + 1;
            bool inside = false;
            switch (kind) {
                case ShapeKind::rectangle: inside = true; break;
                case ShapeKind::ellipse: {
                    const std::int64_t du = u - w, dv = v - h;
                    inside = du * du * h * h + dv * dv * w * w <= w * w * h * h;
                    break;
                }
                case ShapeKind::triangle: {
                    // Apex (w, 0), base corners (0, 2h) and (2w, 2h).
                    const std::int64_t left = (0 - w) * (v - 0) - (2 * h - 0) * (u - w);
                    const std::int64_t right = (2 * w - w) * (v - 0) - (2 * h - 0) * (u - w);
                    inside = left <= 0 && right >= 0 && v <= 2 * h;
                    break;
                }
                case ShapeKind::cross: {
                    const std::int64_t tx = std::max<std::int64_t>(1, w / 3), ty = std::max<std::int64_t>(1, h / 3);
                    inside = std::abs(u - w) <= tx || std::abs(v - h) <= ty;
                    break;
                }
            }
            r[static_cast<std::size_t>(y * w + x)] = inside ? 1 : 0;
        }
    }
    return r;
}

SyntheticImage render_image(SplitMix64& rng, std::size_t size, std::size_t num_classes, const ShapesOptions& opts) {
    const auto s = static_cast<std::int64_t>(size);
    const auto lo = std::max<std::int64_t>(2, static_cast<std::int64_t>(std::ceil(opts.min_extent * s)));
    const auto hi = std::max<std::int64_t>(lo, static_cast<std::int64_t>(std::floor(opts.max_extent * s)));
    const std::size_t plane = size * size;

    for (;;) {
        std::vector<std::uint8_t> rgb(plane * 3);
        for (auto& v : rgb) v = static_cast<std::uint8_t>(rng.uniform_int(0, 115));
        std::vector<std::uint8_t> mask(plane, 0);
        std::vector<int> owner(plane, -1);

        const auto count = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(opts.min_objects),
                                                                     static_cast<std::int64_t>(opts.max_objects)));
        SyntheticImage out;
        std::vector<Rgb> colors;
        std::vector<std::size_t> areas;
        for (std::size_t o = 0; o < count; ++o) {
            const int cls = static_cast<int>(rng.uniform_int(1, static_cast<std::int64_t>(num_classes) - 1));
            const auto kind = static_cast<ShapeKind>(cls - 1);
            const std::int64_t w = rng.uniform_int(lo, hi), h = rng.uniform_int(lo, hi);
            const std::int64_t x0 = rng.uniform_int(0, s - w), y0 = rng.uniform_int(0, s - h);
            const Rgb color = random_object_color(rng, colors);
            colors.push_back(color);

            const auto local = rasterize(kind, w, h);
            std::vector<std::uint8_t> full(plane, 0);
            std::int64_t minx = s, miny = s, maxx = -1, maxy = -1;
            std::size_t area = 0;
            for (std::int64_t y = 0; y < h; ++y) {
                for (std::int64_t x = 0; x < w; ++x) {
                    if (!local[static_cast<std::size_t>(y * w + x)]) continue;
                    const auto p = static_cast<std::size_t>((y0 + y) * s + (x0 + x));
                    full[p] = 1;
                    ++area;
                    minx = std::min(minx, x0 + x);
                    maxx = std::max(maxx, x0 + x);
                    miny = std::min(miny, y0 + y);
                    maxy = std::max(maxy, y0 + y);
                    mask[p] = static_cast<std::uint8_t>(cls);
                    owner[p] = static_cast<int>(o);
                    rgb[p * 3 + 0] = static_cast<std::uint8_t>(color.r);
                    rgb[p * 3 + 1] = static_cast<std::uint8_t>(color.g);
                    rgb[p * 3 + 2] = static_cast<std::uint8_t>(color.b);
                }
            }
            const double inv = 1.0 / static_cast<double>(s);
            out.sample.boxes.push_back({cls,
                                        {six_decimals(static_cast<double>(minx) * inv),
                                         six_decimals(static_cast<double>(miny) * inv),
                                         six_decimals(static_cast<double>(maxx + 1) * inv),
                                         six_decimals(static_cast<double>(maxy + 1) * inv)}});
            out.object_masks.push_back(std::move(full));
            areas.push_back(area);
        }

        std::vector<std::size_t> visible(count, 0);
        for (int o : owner) {
            if (o >= 0) ++visible[static_cast<std::size_t>(o)];
        }
        bool ok = true;
        for (std::size_t o = 0; o < count; ++o) {
            if (static_cast<double>(visible[o]) < opts.min_visible_fraction * static_cast<double>(areas[o])) ok = false;
        }
        if (!ok) continue;

        out.sample.mask = std::move(mask);
        out.sample.image = image_to_tensor({size, size, 3, std::move(rgb)});
        return out;
    }
}

std::uint64_t parse_uint(const std::map<std::string, std::string>& kv, const std::string& key,
                         const std::string& file) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(file, 0, "missing key '" + key + "'");
    try {
        std::size_t used = 0;
        const auto v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw ParseError(file, 0, "key '" + key + "' is not an unsigned integer: " + it->second);
    }
}

}  // namespace

std::vector<SyntheticImage> generate_shapes(std::size_t n, std::size_t size, std::size_t num_classes,
                                            std::uint64_t seed, const ShapesOptions& opts) {
    if (num_classes < 2 || num_classes > 5) {
        throw ConfigError("generate_shapes: num_classes must be in [2, 5] (4 shape kinds plus background)");
    }
    if (size < 8) throw ConfigError("generate_shapes: image size must be at least 8");
    if (opts.min_objects == 0 || opts.min_objects > opts.max_objects) {
        throw ConfigError("generate_shapes: invalid object count range");
    }
    SplitMix64 root(seed);
    const std::size_t kinds = num_classes - 1;
    // A class minimum is only demanded when even the fewest-object draw could
    // satisfy it.
    const bool enforce = n * opts.min_objects >= kinds * opts.min_class_count * 2;
    for (int round = 0;; ++round) {
        std::vector<SyntheticImage> images;
        images.reserve(n);
        std::vector<std::size_t> counts(num_classes, 0);
        for (std::size_t i = 0; i < n; ++i) {
            SplitMix64 rng = root.fork();
            images.push_back(render_image(rng, size, num_classes, opts));
            for (const GtBox& b : images.back().sample.boxes) ++counts[static_cast<std::size_t>(b.class_id)];
        }
        const bool balanced =
            std::all_of(counts.begin() + 1, counts.end(), [&](std::size_t c) { return c >= opts.min_class_count; });
        if (!enforce || balanced || round >= 100) return images;
    }
}

void generate_shapes_dataset(std::size_t n, std::size_t size, std::size_t num_classes, std::uint64_t seed,
                             const fs::path& out_dir, const ShapesOptions& opts) {
    Dataset ds;
    ds.image_size = size;
    ds.num_classes = num_classes;
    ds.seed = seed;
    for (auto& img : generate_shapes(n, size, num_classes, seed, opts)) ds.samples.push_back(std::move(img.sample));
    write_dataset(ds, out_dir);
}

void write_dataset(const Dataset& ds, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    if (!ec) fs::create_directories(out_dir / "masks", ec);
    if (ec) throw IoError("cannot create dataset directory " + out_dir.string() + ": " + ec.message());

    std::ostringstream ann;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const GroundTruthSample& s = ds.samples[i];
        write_pnm(out_dir / "images" / file_name(i, "ppm"), tensor_to_image(s.image));
        write_pnm(out_dir / "masks" / file_name(i, "pgm"), {s.size(), s.size(), 1, s.mask});
        for (const GtBox& b : s.boxes) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%zu %d %.6f %.6f %.6f %.6f\n", i, b.class_id, b.box.xmin, b.box.ymin,
                          b.box.xmax, b.box.ymax);
            ann << buf;
        }
    }
    write_file_atomic(out_dir / "annotations.txt", ann.str());
    std::ostringstream meta;
    meta << "size = " << ds.image_size << "\nclasses = " << ds.num_classes << "\nseed = " << ds.seed
         << "\ncount = " << ds.samples.size() << '\n';
    write_file_atomic(out_dir / "meta.txt", meta.str());
}

Dataset load_dataset(const fs::path& dir) {
    const fs::path meta_path = dir / "meta.txt";
    const auto kv = parse_key_values(read_file(meta_path), meta_path.string());
    Dataset ds;
    ds.image_size = parse_uint(kv, "size", meta_path.string());
    ds.num_classes = parse_uint(kv, "classes", meta_path.string());
    ds.seed = parse_uint(kv, "seed", meta_path.string());
    const std::size_t count = parse_uint(kv, "count", meta_path.string());
    if (ds.num_classes < 2 || ds.num_classes > 255) throw ParseError(meta_path.string(), 0, "invalid class count");

    for (std::size_t i = 0; i < count; ++i) {
        const fs::path img_path = dir / "images" / file_name(i, "ppm");
        const fs::path mask_path = dir / "masks" / file_name(i, "pgm");
        const RasterImage img = read_pnm(img_path);
        const RasterImage mask = read_pnm(mask_path);
        if (img.channels != 3 || img.width != ds.image_size || img.height != ds.image_size) {
            throw ParseError(img_path.string(), 0, "expected a " + std::to_string(ds.image_size) + "x" +
                                                       std::to_string(ds.image_size) + " RGB image");
        }
        if (mask.channels != 1 || mask.width != ds.image_size || mask.height != ds.image_size) {
            throw ParseError(mask_path.string(), 0, "mask size does not match the image");
        }
        for (std::uint8_t v : mask.pixels) {
            if (v >= ds.num_classes) throw ParseError(mask_path.string(), 0, "mask class id out of range");
        }
        GroundTruthSample s;
        s.image = image_to_tensor(img);
        s.mask = mask.pixels;
        ds.samples.push_back(std::move(s));
    }

    const fs::path ann_path = dir / "annotations.txt";
    const std::string ann = read_file(ann_path);
    std::size_t offset = 0;
    std::istringstream in(ann);
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        std::size_t id = 0;
        int cls = 0;
        Box b;
        if (!(fields >> id >> cls >> b.xmin >> b.ymin >> b.xmax >> b.ymax)) {
            throw ParseError(ann_path.string(), line_start, "expected 'image_id class xmin ymin xmax ymax'");
        }
        std::string rest;
        if (fields >> rest) throw ParseError(ann_path.string(), line_start, "trailing fields");
        if (id >= count) throw ParseError(ann_path.string(), line_start, "image id out of range");
        if (cls <= 0 || static_cast<std::size_t>(cls) >= ds.num_classes) {
            throw ParseError(ann_path.string(), line_start, "class id out of range");
        }
        if (!(b.xmin < b.xmax && b.ymin < b.ymax)) throw ParseError(ann_path.string(), line_start, "empty box");
        ds.samples[id].boxes.push_back({cls, b});
    }
    return ds;
}

RasterImage read_pnm(const fs::path& path) {
    const std::string bytes = read_file(path);
    const std::string name = path.string();
    std::size_t pos = 0;
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw ParseError(name, 0, "not a binary PGM/PPM file");
    }
    RasterImage img;
    img.channels = bytes[1] == '6' ? 3 : 1;
    pos = 2;
    auto next_number = [&]() -> std::size_t {
        for (;;) {
            while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        const std::size_t start = pos;
        std::size_t v = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
            if (v > 1u << 20) throw ParseError(name, start, "header value too large");
            ++pos;
        }
        if (pos == start) throw ParseError(name, start, "expected a header number");
        return v;
    };
    img.width = next_number();
    img.height = next_number();
    const std::size_t maxval = next_number();
    if (maxval != 255) throw ParseError(name, pos, "only maxval 255 is supported");
    if (img.width == 0 || img.height == 0) throw ParseError(name, pos, "zero image dimension");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw ParseError(name, pos, "missing whitespace after header");
    }
    ++pos;
    const std::size_t need = img.width * img.height * img.channels;
    if (bytes.size() - pos < need) {
        throw ParseError(name, bytes.size(), "truncated pixel data: need " + std::to_string(need) + " bytes");
    }
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return img;
}

void write_pnm(const fs::path& path, const RasterImage& img) {
    if (img.channels != 1 && img.channels != 3) throw IoError("write_pnm: 1 or 3 channels required");
    std::string out = (img.channels == 3 ? "P6\n" : "P5\n") + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n255\n";
    out.append(img.pixels.begin(), img.pixels.end());
    write_file_atomic(path, out);
}

Tensor image_to_tensor(const RasterImage& rgb) {
    if (rgb.channels != 3) throw ShapeError("image_to_tensor: RGB image required");
    const std::size_t plane = rgb.width * rgb.height;
    std::vector<double> chw(3 * plane);
    for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < 3; ++c) chw[c * plane + p] = static_cast<double>(rgb.pixels[p * 3 + c]) / 255.0;
    }
    return Tensor({3, rgb.height, rgb.width}, std::move(chw));
}

RasterImage tensor_to_image(const Tensor& chw) {
    if (chw.rank() != 3 || chw.dim(0) != 3) throw ShapeError("tensor_to_image: expected [3,H,W]");
    RasterImage img{chw.dim(2), chw.dim(1), 3, {}};
    const std::size_t plane = img.width * img.height;
    img.pixels.resize(plane * 3);
    for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = std::clamp(chw[c * plane + p], 0.0, 1.0);
            img.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    }
    return img;
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace ivanet
