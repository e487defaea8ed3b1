// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "ceir/math.hpp"
#include "ceir/volume.hpp"

namespace ceir {

struct TfEntry {
    double alpha = 1.0;  // transfer alpha at the reference sample distance
    Rgb color;
};

/// Evenly spaced entries over the transitional range [iso, iso + delta_v], nearest first.
/// The last entry is fully opaque.
struct LocalTransferFunction {
    std::vector<TfEntry> entries;

    std::size_t size() const { return entries.size(); }

    void validate() const {
        if (entries.empty()) throw ConfigError("transfer function needs at least one entry");
        for (const auto& e : entries) {
            if (!(e.alpha >= 0.0 && e.alpha <= 1.0)) throw ConfigError("transfer alpha must be in [0,1]");
            for (int c = 0; c < 3; ++c)
                if (!(e.color[c] >= 0.0 && e.color[c] <= 1.0)) throw ConfigError("transfer color must be in [0,1]");
        }
        if (entries.back().alpha != 1.0) throw ConfigError("last transfer entry must be fully opaque");
    }

    static LocalTransferFunction monochrome(Rgb c, std::size_t n = 16, double alpha = 0.3) {
        LocalTransferFunction tf;
        tf.entries.assign(n, TfEntry{alpha, c});
        tf.entries.back().alpha = 1.0;
        return tf;
    }
};

enum class RateMode { shallow, deep };

/// Opacity-correction variant. `opacity` is 1-(1-a)^x; `literal` is a^x.
enum class AlphaForm { opacity, literal };

struct EnhanceParams {
    double isovalue = 0.5;
    double delta_v = 0.1;
    double std_sample_distance = 0.01;
    RateMode mode = RateMode::shallow;
    double deep_step = 0.0;  // 0 selects half the smallest cell extent
    int deep_max_steps = 256;
    AlphaForm alpha_form = AlphaForm::opacity;

    double density_factor() const { return delta_v / std_sample_distance; }

    double resolved_deep_step(const ScalarVolume& vol) const {
        return deep_step > 0.0 ? deep_step : 0.5 * vol.min_spacing();
    }

    void validate() const {
        if (!(isovalue > 0.0 && isovalue < 1.0)) throw ConfigError("isovalue must be in (0,1)");
        if (!(delta_v > 0.0)) throw ConfigError("delta_v must be > 0");
        if (!(std_sample_distance > 0.0)) throw ConfigError("std_sample_distance must be > 0");
        if (deep_step < 0.0) throw ConfigError("deep_step must be > 0");
        if (deep_max_steps < 1) throw ConfigError("deep_max_steps must be >= 1");
    }
};

/// Transfer-function document: isovalue, transition width, local entries, rate estimation mode.
struct TransferFunctionDoc {
    EnhanceParams params;
    LocalTransferFunction local;
};

inline Rgb rgb_from_json(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline TransferFunctionDoc tf_from_json(const nlohmann::json& j) {
    try {
        TransferFunctionDoc doc;
        auto& p = doc.params;
        p.isovalue = j.at("isovalue").get<double>();
        p.delta_v = j.at("delta_v").get<double>();
        p.std_sample_distance = j.at("std_sample_distance").get<double>();
        for (const auto& e : j.at("entries"))
            doc.local.entries.push_back({e.at("alpha").get<double>(), rgb_from_json(e.at("rgb"))});
        const std::string mode = j.value("mode", "shallow");
        if (mode == "shallow") p.mode = RateMode::shallow;
        else if (mode == "deep") p.mode = RateMode::deep;
        else throw ConfigError("mode must be \"shallow\" or \"deep\"");
        p.deep_step = j.value("deep_step", 0.0);
        p.deep_max_steps = j.value("deep_max_steps", 256);
        const std::string form = j.value("alpha_form", "opacity");
        if (form == "opacity") p.alpha_form = AlphaForm::opacity;
        else if (form == "literal") p.alpha_form = AlphaForm::literal;
        else throw ConfigError("alpha_form must be \"opacity\" or \"literal\"");
        p.validate();
        doc.local.validate();
        return doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid transfer function: ") + e.what());
    }
}

inline nlohmann::json tf_to_json(const TransferFunctionDoc& doc) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : doc.local.entries)
        entries.push_back({{"alpha", e.alpha}, {"rgb", {e.color.r, e.color.g, e.color.b}}});
    const auto& p = doc.params;
    nlohmann::json j = {{"isovalue", p.isovalue},
                        {"delta_v", p.delta_v},
                        {"std_sample_distance", p.std_sample_distance},
                        {"entries", entries},
                        {"mode", p.mode == RateMode::deep ? "deep" : "shallow"},
                        {"deep_max_steps", p.deep_max_steps}};
    if (p.deep_step > 0.0) j["deep_step"] = p.deep_step;
    if (p.alpha_form == AlphaForm::literal) j["alpha_form"] = "literal";
    return j;
}

inline TransferFunctionDoc load_tf(const std::filesystem::path& path) { return tf_from_json(read_json_file(path)); }

}  // namespace ceir
