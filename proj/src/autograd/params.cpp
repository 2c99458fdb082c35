#include "ivanet/params.hpp"

#include <cmath>

namespace ivanet {

const Tensor& param(const ParamMap& params, const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
}

namespace {
Tensor normal_weight(std::size_t out_ch, std::size_t in_ch, std::size_t kernel, double stddev, SplitMix64& rng) {
    std::vector<double> w(out_ch * in_ch * kernel * kernel);
    for (double& v : w) v = stddev * rng.normal();
    return Tensor({out_ch, in_ch, kernel, kernel}, std::move(w));
}
}  // namespace

Tensor he_normal(std::size_t out_ch, std::size_t in_ch, std::size_t kernel, SplitMix64& rng) {
    const std::size_t fan_in = in_ch * kernel * kernel;
    return normal_weight(out_ch, in_ch, kernel, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
}

void add_conv(ParamMap& params, const std::string& prefix, std::size_t out_ch, std::size_t in_ch, std::size_t kernel,
              SplitMix64& rng) {
    params[prefix + ".w"] = he_normal(out_ch, in_ch, kernel, rng);
    params[prefix + ".b"] = Tensor::zeros({out_ch});
}

void add_prediction_conv(ParamMap& params, const std::string& prefix, std::size_t out_ch, std::size_t in_ch,
                         std::size_t kernel, SplitMix64& rng) {
    params[prefix + ".w"] = normal_weight(out_ch, in_ch, kernel, 0.01, rng);
    params[prefix + ".b"] = Tensor::zeros({out_ch});
}

ParamMap bind(Tape& tape, const ParamMap& params) {
    ParamMap out;
    for (const auto& [name, value] : params) out.emplace(name, tape.leaf(value.detached()));
    return out;
}

std::size_t parameter_count(const ParamMap& params) {
    std::size_t n = 0;
    for (const auto& [name, value] : params) n += value.numel();
    return n;
}

ParamMap with_prefix(const ParamMap& params, const std::string& prefix) {
    ParamMap out;
    for (auto it = params.lower_bound(prefix); it != params.end() && it->first.starts_with(prefix); ++it) {
        out.insert(*it);
    }
    return out;
}

}  // namespace ivanet
