// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/cli/run_config.hpp"

#include <set>
#include <type_traits>

#include <json.hpp>

#include "maskhit/error.hpp"

namespace maskhit {

using nlohmann::json;
using nlohmann::ordered_json;

TaskKind RunConfig::task_kind() const {
    if (!task) return TaskKind::kSurvival;
    return parse_synth_task(*task) == SynthTask::kSurvival ? TaskKind::kSurvival : TaskKind::kClassification;
}

void RunConfig::validate() const {
    if (task) parse_synth_task(*task);
    parse_model_kind(model);
    if (attn_hidden == 0) throw ConfigError("attn_hidden must be positive");
    synth.validate();
    encoder.validate();
    pretrain.validate();
    finetune.validate();
}

RunConfig preset_config(const std::string& name) {
    RunConfig c;
    c.preset = name;
    if (name == "desk") {
        c.encoder = EncoderConfig::desk();
        c.pretrain = PretrainConfig::desk();
        c.finetune = FinetuneConfig::desk(TaskKind::kSurvival);
    } else if (name == "paper") {
        c.encoder = EncoderConfig::paper();
        c.pretrain = PretrainConfig::paper();
        c.finetune = FinetuneConfig::paper(TaskKind::kSurvival);
        c.synth.feature_dim = 512;
        c.synth.grid_width = 64;
        c.synth.grid_height = 64;
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
    }
    return c;
}

namespace {

// One section of the config in either direction: reading from `src` (keys are
// tracked so leftovers can be reported) or writing into `dst`.
class Section {
public:
    Section(const json* src, ordered_json* dst, std::string path) : src_(src), dst_(dst), path_(std::move(path)) {}

    template <class T>
    void field(const char* key, T& value) {
        if (dst_) {
            (*dst_)[key] = value;
            return;
        }
        if (!src_->contains(key)) return;
        seen_.insert(key);
        const json& v = src_->at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(where(key) + " must be a boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
                if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned()) {
                    throw ConfigError(where(key) + " must be non-negative");
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
            } else {
                if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
            }
            value = v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }

    template <class T, class ToText, class FromText>
    void text_field(const char* key, T& value, ToText to_text, FromText from_text) {
        std::string s = to_text(value);
        field(key, s);
        if (!dst_) value = from_text(s);
    }

    void optional_text(const char* key, std::optional<std::string>& value) {
        if (dst_) {
            (*dst_)[key] = value ? json(*value) : json(nullptr);
            return;
        }
        if (!src_->contains(key)) return;
        if (src_->at(key).is_null()) {
            seen_.insert(key);
            value.reset();
            return;
        }
        std::string s;
        field(key, s);
        value = s;
    }

    template <class Fn>
    void section(const char* key, Fn&& fn) {
        if (dst_) {
            ordered_json child = ordered_json::object();
            Section sub(nullptr, &child, path_ + key + ".");
            fn(sub);
            (*dst_)[key] = std::move(child);
            return;
        }
        if (!src_->contains(key)) return;
        seen_.insert(key);
        const json& child = src_->at(key);
        if (!child.is_object()) throw ConfigError(where(key) + " must be an object");
        Section sub(&child, nullptr, path_ + key + ".");
        fn(sub);
        sub.finish();
    }

    void finish() const {
        if (!src_) return;
        for (const auto& [key, _] : src_->items()) {
            if (!seen_.contains(key)) throw ConfigError("unknown config key '" + path_ + key + "'");
        }
    }

private:
    std::string where(const char* key) const { return "config key '" + path_ + key + "'"; }

    const json* src_;
    ordered_json* dst_;
    std::string path_;
    std::set<std::string> seen_;
};

void bind(Section& s, RunConfig& c) {
    s.field("seed", c.seed);
    s.field("preset", c.preset);
    s.optional_text("task", c.task);
    s.field("store", c.store);
    s.field("out", c.out);
    s.field("checkpoint", c.checkpoint);
    s.field("model", c.model);
    s.field("attn_hidden", c.attn_hidden);
    s.field("freeze_backend", c.freeze_backend);
    s.section("synth", [&](Section& t) {
        SynthConfig& y = c.synth;
        t.field("slide_count", y.slide_count);
        t.field("grid_width", y.grid_width);
        t.field("grid_height", y.grid_height);
        t.field("feature_dim", y.feature_dim);
        t.field("prototypes", y.prototypes);
        t.field("noise_sigma", y.noise_sigma);
        t.field("tissue_fraction", y.tissue_fraction);
        t.field("potts_seeds", y.potts_seeds);
        t.field("num_classes", y.num_classes);
        t.field("class_purity", y.class_purity);
        t.field("motif_size", y.motif_size);
        t.field("hazard_scale", y.hazard_scale);
        t.field("base_hazard", y.base_hazard);
        t.field("censor_max_years", y.censor_max_years);
        t.field("prototype_seed", y.prototype_seed);
    });
    s.section("encoder", [&](Section& t) {
        EncoderConfig& e = c.encoder;
        t.field("layers", e.layers);
        t.field("heads", e.heads);
        t.field("dim", e.dim);
        t.field("region_side", e.region_side);
        t.field("mlp_ratio", e.mlp_ratio);
        t.field("dropout", e.dropout);
    });
    s.section("pretrain", [&](Section& t) {
        PretrainConfig& p = c.pretrain;
        t.field("mask_rate", p.mask_rate);
        t.field("batch_size", p.batch_size);
        t.field("total_steps", p.total_steps);
        t.field("warmup_steps", p.warmup_steps);
        t.field("peak_lr", p.peak_lr);
        t.field("floor_lr", p.floor_lr);
        t.field("train_fraction", p.train_fraction);
        t.field("monitor_interval", p.monitor_interval);
        t.field("monitor_regions", p.monitor_regions);
        t.field("min_foreground", p.min_foreground);
        t.field("alpha", p.loss.alpha);
        t.field("beta", p.loss.beta);
        t.field("tau", p.loss.tau);
        t.text_field("contrastive_sign", p.loss.sign, contrastive_sign_name, parse_contrastive_sign);
        t.field("weight_decay", p.adamw.weight_decay);
    });
    s.section("finetune", [&](Section& t) {
        FinetuneConfig& f = c.finetune;
        t.field("regions_train", f.regions_train);
        t.field("regions_eval", f.regions_eval);
        t.field("coverage_train", f.coverage_train);
        t.field("coverage_eval", f.coverage_eval);
        t.field("augment_symmetry", f.augment_symmetry);
        t.field("head_lr", f.head_lr);
        t.field("backend_lr", f.backend_lr);
        t.field("patience", f.patience);
        t.field("max_epochs", f.max_epochs);
        t.field("batch_size", f.batch_size);
        t.field("max_overlap", f.max_overlap);
        t.field("min_foreground", f.min_foreground);
        t.text_field("monitor", f.monitor, stop_monitor_name, parse_stop_monitor);
        t.field("folds", f.folds);
        t.field("repeats", f.repeats);
        t.field("weight_decay", f.adamw.weight_decay);
    });
    s.section("attnmap", [&](Section& t) {
        AttnmapConfig& a = c.attnmap;
        t.field("slide", a.slide);
        t.field("regions", a.regions);
        t.field("query", a.query);
        t.field("residual", a.residual);
        t.text_field(
            "order", a.order,
            [](RolloutOrder o) { return std::string(o == RolloutOrder::kLaterLeft ? "later-left" : "earlier-left"); },
            [](const std::string& s) {
                if (s == "later-left") return RolloutOrder::kLaterLeft;
                if (s == "earlier-left") return RolloutOrder::kEarlierLeft;
                throw ConfigError("attnmap.order must be 'later-left' or 'earlier-left'");
            });
        t.field("compare_checkpoint", a.compare_checkpoint);
    });
}

}  // namespace

RunConfig apply_config_text(RunConfig base, const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (doc.contains("preset")) {
        if (!doc["preset"].is_string()) throw ConfigError("config key 'preset' must be a string");
        const std::string name = doc["preset"].get<std::string>();
        if (name != base.preset) {
            RunConfig fresh = preset_config(name);
            fresh.seed = base.seed;
            base = std::move(fresh);
        }
    }
    Section root(&doc, nullptr, "");
    bind(root, base);
    root.finish();
    return base;
}

std::string dump_run_config(const RunConfig& config) {
    RunConfig copy = config;
    ordered_json doc = ordered_json::object();
    Section root(nullptr, &doc, "");
    bind(root, copy);
    return doc.dump(2) + "\n";
}

}  // namespace maskhit
