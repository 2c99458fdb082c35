#include "ivanet/config.hpp"

#include <cstdio>
#include <functional>
#include <sstream>

namespace ivanet {

namespace {

struct Entry {
    std::string key, value;
    std::size_t offset;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<Entry> parse_entries(const std::string& text, const std::string& source) {
    std::vector<Entry> entries;
    std::size_t offset = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(source, line_start, "expected 'key = value'");
        entries.push_back({trim(t.substr(0, eq)), trim(t.substr(eq + 1)), line_start});
    }
    return entries;
}

double to_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
}

std::size_t to_size(const std::string& s) {
    if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument(s);
}

template <class T, class F>
std::vector<T> to_list(const std::string& s, F convert) {
    std::vector<T> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(convert(trim(item)));
    if (out.empty()) throw std::invalid_argument(s);
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        if constexpr (std::is_floating_point_v<T>) {
            out += fmt(xs[i]);
        } else {
            out += std::to_string(xs[i]);
        }
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"stem_channels", [](RunConfig& c, const std::string& v) { c.model.backbone.stem_channels = to_size(v); }},
        {"level_channels",
         [](RunConfig& c, const std::string& v) { c.model.backbone.level_channels = to_list<std::size_t>(v, to_size); }},
        {"blocks_per_level",
         [](RunConfig& c, const std::string& v) { c.model.backbone.blocks_per_level = to_list<std::size_t>(v, to_size); }},
        {"input_size", [](RunConfig& c, const std::string& v) { c.model.backbone.input_size = to_size(v); }},
        {"base_stride", [](RunConfig& c, const std::string& v) { c.model.backbone.base_stride = to_size(v); }},
        {"out_channels", [](RunConfig& c, const std::string& v) { c.model.ltd.out_channels = to_size(v); }},
        {"fuse_kernel", [](RunConfig& c, const std::string& v) { c.model.ltd.fuse_kernel = to_size(v); }},
        {"num_classes", [](RunConfig& c, const std::string& v) { c.model.anchors.num_classes = to_size(v); }},
        {"aspect_ratios",
         [](RunConfig& c, const std::string& v) { c.model.anchors.aspect_ratios = to_list<double>(v, to_double); }},
        {"scales", [](RunConfig& c, const std::string& v) { c.model.anchors.scales = to_list<double>(v, to_double); }},
        {"extra_scale", [](RunConfig& c, const std::string& v) { c.model.anchors.extra_scale = to_bool(v); }},
        {"variances",
         [](RunConfig& c, const std::string& v) {
             const auto xs = to_list<double>(v, to_double);
             if (xs.size() != 2) throw std::invalid_argument(v);
             c.model.anchors.variances = {xs[0], xs[1]};
         }},
        {"target_size",
         [](RunConfig& c, const std::string& v) {
             const auto xs = to_list<std::size_t>(v, to_size);
             if (xs.size() > 2) throw std::invalid_argument(v);
             c.model.pcm.target_h = xs[0];
             c.model.pcm.target_w = xs.back();
         }},
        {"mid_channels", [](RunConfig& c, const std::string& v) { c.model.pcm.mid_channels = to_size(v); }},
        {"match_threshold", [](RunConfig& c, const std::string& v) { c.model.detector.match_threshold = to_double(v); }},
        {"neg_ratio", [](RunConfig& c, const std::string& v) { c.model.detector.neg_ratio = to_double(v); }},
        {"score_threshold", [](RunConfig& c, const std::string& v) { c.model.detector.score_threshold = to_double(v); }},
        {"top_k", [](RunConfig& c, const std::string& v) { c.model.detector.top_k = to_size(v); }},
        {"nms_threshold", [](RunConfig& c, const std::string& v) { c.model.detector.nms_threshold = to_double(v); }},
        {"w", [](RunConfig& c, const std::string& v) { c.train.w = to_double(v); }},
        {"lr0", [](RunConfig& c, const std::string& v) { c.train.lr0 = to_double(v); }},
        {"decay_milestones",
         [](RunConfig& c, const std::string& v) {
             const auto xs = to_list<std::size_t>(v, to_size);
             if (xs.size() != 2) throw std::invalid_argument(v);
             c.train.decay_milestones = {xs[0], xs[1]};
         }},
        {"batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = to_size(v); }},
        {"max_steps", [](RunConfig& c, const std::string& v) { c.train.max_steps = to_size(v); }},
        {"beta1", [](RunConfig& c, const std::string& v) { c.train.beta1 = to_double(v); }},
        {"beta2", [](RunConfig& c, const std::string& v) { c.train.beta2 = to_double(v); }},
        {"adam_eps", [](RunConfig& c, const std::string& v) { c.train.adam_eps = to_double(v); }},
        {"seed", [](RunConfig& c, const std::string& v) { c.train.seed = to_size(v); }},
        {"mode", [](RunConfig& c, const std::string& v) { c.train.mode = parse_mode(v); }},
        {"augment", [](RunConfig& c, const std::string& v) { c.train.augment = to_bool(v); }},
    };
    return table;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source) {
    std::map<std::string, std::string> kv;
    for (Entry& e : parse_entries(text, source)) kv[e.key] = std::move(e.value);
    return kv;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
    RunConfig cfg;
    const auto& table = setters();
    for (const Entry& e : parse_entries(text, source)) {
        auto it = table.find(e.key);
        if (it == table.end()) throw ParseError(source, e.offset, "unknown key '" + e.key + "'");
        try {
            it->second(cfg, e.value);
        } catch (const std::exception&) {
            throw ParseError(source, e.offset, "invalid value for '" + e.key + "': " + e.value);
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_file(path), path.string()); }

std::string format_run_config(const RunConfig& c) {
    const auto& m = c.model;
    const auto& t = c.train;
    std::ostringstream os;
    os << "stem_channels = " << m.backbone.stem_channels << '\n'
       << "level_channels = " << join(m.backbone.level_channels) << '\n'
       << "blocks_per_level = " << join(m.backbone.blocks_per_level) << '\n'
       << "input_size = " << m.backbone.input_size << '\n'
       << "base_stride = " << m.backbone.base_stride << '\n'
       << "out_channels = " << m.ltd.out_channels << '\n'
       << "fuse_kernel = " << m.ltd.fuse_kernel << '\n'
       << "num_classes = " << m.anchors.num_classes << '\n'
       << "aspect_ratios = " << join(m.anchors.aspect_ratios) << '\n'
       << "scales = " << join(m.anchors.scales) << '\n'
       << "extra_scale = " << (m.anchors.extra_scale ? "true" : "false") << '\n'
       << "variances = " << fmt(m.anchors.variances[0]) << ", " << fmt(m.anchors.variances[1]) << '\n'
       << "target_size = " << m.pcm.target_h << ", " << m.pcm.target_w << '\n'
       << "mid_channels = " << m.pcm.mid_channels << '\n'
       << "match_threshold = " << fmt(m.detector.match_threshold) << '\n'
       << "neg_ratio = " << fmt(m.detector.neg_ratio) << '\n'
       << "score_threshold = " << fmt(m.detector.score_threshold) << '\n'
       << "top_k = " << m.detector.top_k << '\n'
       << "nms_threshold = " << fmt(m.detector.nms_threshold) << '\n'
       << "w = " << fmt(t.w) << '\n'
       << "lr0 = " << fmt(t.lr0) << '\n'
       << "decay_milestones = " << t.decay_milestones[0] << ", " << t.decay_milestones[1] << '\n'
       << "batch_size = " << t.batch_size << '\n'
       << "max_steps = " << t.max_steps << '\n'
       << "beta1 = " << fmt(t.beta1) << '\n'
       << "beta2 = " << fmt(t.beta2) << '\n'
       << "adam_eps = " << fmt(t.adam_eps) << '\n'
       << "seed = " << t.seed << '\n'
       << "mode = " << mode_name(t.mode) << '\n'
       << "augment = " << (t.augment ? "true" : "false") << '\n';
    return os.str();
}

}  // namespace ivanet
