// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/cli/commands.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "maskhit/error.hpp"
#include "maskhit/featstore/manifest.hpp"
#include "maskhit/numcore/binary_io.hpp"
#include "maskhit/numcore/checkpoint.hpp"
#include "maskhit/trainer/cross_validate.hpp"

namespace fs = std::filesystem;

namespace maskhit {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string default_out(const RunConfig& c, const std::string& command) {
    if (!c.out.empty()) return c.out;
    const char* root = std::getenv(kRunRootEnv);
    const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
    return (base / (command + "-seed" + std::to_string(c.seed))).string();
}

// Creates the run directory and holds an advisory lock on it.
class RunDirectory {
public:
    explicit RunDirectory(const std::string& path) : path_(path) {
        std::error_code ec;
        fs::create_directories(path_, ec);
        if (ec) throw DataError("cannot create run directory '" + path + "': " + ec.message());
        const std::string lock = (path_ / ".lock").string();
        fd_ = ::open(lock.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
        if (fd_ < 0) throw DataError("cannot open lock file '" + lock + "'");
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            throw Error(ErrorKind::kOther, "run directory '" + path + "' is in use by another process");
        }
    }
    ~RunDirectory() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    RunDirectory(const RunDirectory&) = delete;
    RunDirectory& operator=(const RunDirectory&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    void write(const std::string& name, const std::string& bytes) const { write_file_bytes(file(name), bytes); }

private:
    fs::path path_;
    int fd_ = -1;
};

FeatureStore load_store(const RunConfig& c) {
    if (c.store.empty()) throw ConfigError("missing required key 'store' (--store)");
    return read_store(c.store);
}

SlideModelSpec model_spec(const RunConfig& c, const FeatureStore& store, ModelKind kind) {
    SlideModelSpec spec;
    spec.kind = kind;
    spec.task = c.task_kind();
    spec.outputs = task_outputs(store, spec.task);
    spec.feature_dim = store.feature_dim();
    spec.encoder = c.encoder;
    spec.attn_hidden = c.attn_hidden;
    spec.validate();
    return spec;
}

FinetuneConfig finetune_config(const RunConfig& c) {
    FinetuneConfig f = c.freeze_backend ? c.finetune.frozen_backend() : c.finetune;
    f.task = c.task_kind();
    f.seed = c.seed;
    return f;
}

std::string fold_checkpoint_name(std::size_t r, std::size_t k) {
    return "fold_r" + std::to_string(r) + "_k" + std::to_string(k) + ".mhck";
}

// Shared by finetune and baseline: cross-validation with per-fold checkpoints.
void run_cross_validation(const RunConfig& c, ModelKind kind, const std::string& command, std::ostream& out) {
    const FeatureStore store = load_store(c);
    const SlideModelSpec spec = model_spec(c, store, kind);
    ParamMap pretrained;
    const ParamMap* encoder_init = nullptr;
    if (kind == ModelKind::kMaskHIT) {
        if (c.checkpoint.empty()) throw ConfigError("missing required key 'checkpoint' (--checkpoint)");
        pretrained = read_checkpoint(c.checkpoint).params;
        encoder_init = &pretrained;
    }
    const std::string dir_path = default_out(c, command);
    RunDirectory dir(dir_path);
    dir.write("config.json", dump_run_config(c));

    const FinetuneConfig fc = finetune_config(c);
    // Scores come from the f32 checkpoint copy so `evaluate` reproduces them.
    auto hook = [&](std::size_t r, std::size_t k, SlideModel& model) {
        const std::string bytes = encode_checkpoint(Checkpoint{model.params, {}});
        model.params = decode_checkpoint(bytes).params;
        dir.write(fold_checkpoint_name(r, k), bytes);
    };
    const CrossValidationResult cv = cross_validate(store, spec, encoder_init, fc, hook);

    std::ostringstream folds;
    folds << "# slide_id\trepeat\tfold\n";
    for (std::size_t r = 0; r < cv.assignments.size(); ++r) {
        for (std::size_t i = 0; i < store.size(); ++i) {
            folds << store.slide(i).slide_id << '\t' << r << '\t' << cv.assignments[r][i] << '\n';
        }
    }
    dir.write("folds.tsv", folds.str());
    std::ostringstream log;
    log << "repeat\tfold\tepoch\ttrain_loss\tmonitor_loss\tmonitor_metric\tskipped_batches\n";
    for (const FoldOutcome& f : cv.folds) {
        for (const EpochLog& e : f.epochs) {
            log << f.repeat << '\t' << f.fold << '\t' << e.epoch << '\t' << g17(e.train_loss) << '\t'
                << g17(e.monitor_loss) << '\t' << g17(e.monitor_metric) << '\t' << e.skipped_batches << '\n';
        }
    }
    dir.write("train_log.tsv", log.str());
    dir.write("report.tsv", format_report_tsv(cv.report));
    dir.write("report.json", format_report_json(cv.report));
    out << cv.report.metric << " mean " << g17(cv.report.mean) << " sd " << g17(cv.report.sd) << " over "
        << cv.report.fold_values.size() << " folds; run directory " << dir_path << '\n';
}

std::vector<std::size_t> pick_regions_slide(const FeatureStore& store, const std::string& id) {
    if (store.size() == 0) throw DataError("store is empty");
    if (id.empty()) return {0};
    const auto found = store.find(id);
    if (!found) throw DataError("slide '" + id + "' not in store");
    return {*found};
}

Heatmap attention_heatmap(const RegionTensor& region, const RunConfig& c, const ParamMap& params) {
    const EncodedRegion enc = encode_region(region, c.encoder, params);
    const Tensor roll = rollout(enc.attentions, RolloutOptions{c.attnmap.residual, c.attnmap.order});
    return class_attention_map(roll, region.background, region.side, c.attnmap.query);
}

}  // namespace

void command_synth(const RunConfig& c, std::ostream& out) {
    if (!c.task) throw ConfigError("missing required key 'task' (--task or synth config)");
    SynthConfig sc = c.synth;
    sc.task = parse_synth_task(*c.task);
    const FeatureStore store = synth_generate(sc, c.seed);
    const std::string path = c.out.empty() ? default_out(c, "synth") + ".mhfs" : c.out;
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    write_store(store, path);

    std::vector<std::string> splits(store.size(), "unassigned");
    try {
        Rng rng = make_rng(c.seed, 1000);
        const auto folds = stratified_folds(store, c.task_kind(), c.finetune.folds, rng);
        for (std::size_t i = 0; i < folds.size(); ++i) splits[i] = "fold" + std::to_string(folds[i]);
    } catch (const DataError&) {
        // Too few slides per stratum; the manifest still lists every slide.
    }
    write_file_bytes(path + ".manifest.tsv", encode_manifest(manifest_for(store, splits)));
    write_file_bytes(path + ".config.json", dump_run_config(c));
    out << "wrote " << store.size() << " slides (" << synth_task_name(sc.task) << ", d=" << store.feature_dim()
        << ") to " << path << '\n';
}

void command_inspect(const RunConfig& c, std::ostream& out) {
    const FeatureStore store = load_store(c);
    std::size_t min_w = SIZE_MAX, max_w = 0, min_h = SIZE_MAX, max_h = 0, patches = 0;
    double fg_min = 1.0, fg_max = 0.0, fg_sum = 0.0;
    std::size_t events = 0, survival = 0;
    std::map<std::uint32_t, std::size_t> classes;
    for (const SlideRecord& s : store.slides()) {
        min_w = std::min<std::size_t>(min_w, s.grid_width);
        max_w = std::max<std::size_t>(max_w, s.grid_width);
        min_h = std::min<std::size_t>(min_h, s.grid_height);
        max_h = std::max<std::size_t>(max_h, s.grid_height);
        patches += s.patch_count();
        const double fg = static_cast<double>(s.foreground_count()) /
                          static_cast<double>(std::size_t{s.grid_width} * s.grid_height);
        fg_min = std::min(fg_min, fg);
        fg_max = std::max(fg_max, fg);
        fg_sum += fg;
        if (const auto* l = std::get_if<SurvivalLabel>(&s.label)) {
            ++survival;
            events += l->event ? 1 : 0;
        } else {
            ++classes[std::get<ClassLabel>(s.label).id];
        }
    }
    out << "slides\t" << store.size() << '\n';
    out << "feature_dim\t" << store.feature_dim() << '\n';
    if (store.size() == 0) return;
    out << "grid_width\t" << min_w << ".." << max_w << '\n';
    out << "grid_height\t" << min_h << ".." << max_h << '\n';
    out << "patches\t" << patches << '\n';
    out << "foreground_fraction\tmean " << g17(fg_sum / static_cast<double>(store.size())) << " min " << g17(fg_min)
        << " max " << g17(fg_max) << '\n';
    if (survival) out << "survival\t" << survival << " slides, " << events << " events\n";
    for (const auto& [id, n] : classes) out << "class " << id << '\t' << n << '\n';
    out << "valid\tyes\n";
}

void command_pretrain(const RunConfig& c, std::ostream& out) {
    const FeatureStore store = load_store(c);
    ParamMap params;
    if (!c.checkpoint.empty()) {
        params = read_checkpoint(c.checkpoint).params;
    } else {
        Rng init = make_rng(c.seed, 0);
        params = init_encoder_params(c.encoder, init);
    }
    PretrainConfig pc = c.pretrain;
    pc.seed = c.seed;
    const std::string dir_path = default_out(c, "pretrain");
    RunDirectory dir(dir_path);
    dir.write("config.json", dump_run_config(c));

    const PretrainResult r = pretrain(store, c.encoder, std::move(params), pc);
    std::ostringstream log;
    log << "step\tlr\tl2\tcontrastive\ttotal\n";
    for (const PretrainStepLog& s : r.steps) {
        log << s.step << '\t' << g17(s.lr) << '\t' << g17(s.l2) << '\t' << g17(s.contrastive) << '\t' << g17(s.total)
            << '\n';
    }
    dir.write("train_log.tsv", log.str());
    std::ostringstream mon;
    mon << "step\tmonitor_loss\n";
    for (const MonitorPoint& m : r.monitor) mon << m.step << '\t' << g17(m.loss) << '\n';
    dir.write("monitor_log.tsv", mon.str());
    write_checkpoint(dir.file("last.mhck"), Checkpoint{r.params, r.optimizer});
    write_checkpoint(dir.file("best.mhck"), Checkpoint{r.best_params, {}});
    if (r.diverged) throw DivergenceError("pretraining diverged: " + r.divergence_message + "; last good parameters kept");
    out << "monitor loss " << g17(r.initial_monitor()) << " -> " << g17(r.final_monitor()) << " after "
        << r.steps.size() << " steps; run directory " << dir_path << '\n';
}

void command_finetune(const RunConfig& c, std::ostream& out) {
    const ModelKind kind = parse_model_kind(c.model);
    if (kind != ModelKind::kMaskHIT) throw ConfigError("finetune trains the maskhit model; use baseline for MIL");
    run_cross_validation(c, kind, "finetune", out);
}

void command_baseline(const RunConfig& c, std::ostream& out) {
    RunConfig rc = c;
    if (parse_model_kind(rc.model) == ModelKind::kMaskHIT) rc.model = model_kind_name(ModelKind::kMilAP);
    run_cross_validation(rc, parse_model_kind(rc.model), "baseline", out);
}

void command_evaluate(const RunConfig& c, std::ostream& out) {
    if (c.checkpoint.empty()) throw ConfigError("missing required key 'checkpoint' (--checkpoint <run directory>)");
    const fs::path run(c.checkpoint);
    if (!fs::is_directory(run)) throw ConfigError("evaluate expects a finetune or baseline run directory");
    RunConfig rc = apply_config_text(preset_config("desk"), read_file_bytes((run / "config.json").string()));
    if (!c.store.empty()) rc.store = c.store;
    const FeatureStore store = load_store(rc);
    const ModelKind kind = parse_model_kind(rc.model);

    // folds.tsv: slide_id, repeat, fold
    std::map<std::size_t, std::vector<std::size_t>> assignments;
    {
        std::istringstream is(read_file_bytes((run / "folds.tsv").string()));
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::string id;
            std::size_t r = 0, k = 0;
            if (!(ls >> id >> r >> k)) throw DataError("folds.tsv: malformed line '" + line + "'");
            const auto idx = store.find(id);
            if (!idx) throw DataError("folds.tsv names slide '" + id + "' missing from the store");
            auto& a = assignments[r];
            if (a.empty()) a.assign(store.size(), SIZE_MAX);
            a[*idx] = k;
        }
    }
    const FinetuneConfig fc = finetune_config(rc);
    if (assignments.empty()) throw DataError("folds.tsv lists no slides");
    const SlideModelSpec spec = model_spec(rc, store, kind);
    std::vector<double> values;
    for (const auto& [r, fold_of] : assignments) {
        if (std::count(fold_of.begin(), fold_of.end(), SIZE_MAX)) throw DataError("folds.tsv does not cover the store");
        for (std::size_t k = 0; k < fc.folds; ++k) {
            const FoldSplit split = fold_split(fold_of, fc.folds, k);
            FinetuneConfig f = fc;
            f.seed = fold_seed(fc.seed, r, k);
            const SlideModel model{spec, read_checkpoint((run / fold_checkpoint_name(r, k)).string()).params};
            const Tensor scores = predict(store, model, split.test, eval_sampling(f));
            values.push_back(task_metric(scores, slide_targets(store, split.test, fc.task)));
        }
    }
    const EvalReport report = make_report(task_metric_name(fc.task), std::move(values));
    const std::string json = format_report_json(report);
    if (!c.out.empty()) {
        RunDirectory dir(c.out);
        dir.write("eval_report.json", json);
        dir.write("eval_report.tsv", format_report_tsv(report));
    }
    out << json;
}

void command_attnmap(const RunConfig& c, std::ostream& out) {
    if (c.checkpoint.empty()) throw ConfigError("missing required key 'checkpoint' (--checkpoint)");
    const FeatureStore store = load_store(c);
    const ParamMap params = read_checkpoint(c.checkpoint).params;
    check_encoder_params(params, c.encoder);
    ParamMap compare;
    if (!c.attnmap.compare_checkpoint.empty()) {
        compare = read_checkpoint(c.attnmap.compare_checkpoint).params;
        check_encoder_params(compare, c.encoder);
    }
    const std::size_t slide = pick_regions_slide(store, c.attnmap.slide).front();
    const SlideRecord& s = store.slide(slide);
    const auto side = static_cast<std::uint32_t>(c.encoder.region_side);
    const auto specs = systematic_regions(s, side, c.attnmap.regions, c.finetune.max_overlap, c.finetune.min_foreground);
    const std::string dir_path = default_out(c, "attnmap");
    RunDirectory dir(dir_path);
    dir.write("config.json", dump_run_config(c));
    std::ostringstream index;
    index << "region\tslide_id\tx0\ty0\tside\n";
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const RegionTensor region = gather_region(s, store.feature_dim(), specs[i]);
        const Heatmap map = attention_heatmap(region, c, params);
        const std::string stem = "region_" + std::to_string(i);
        export_heatmap(map, dir.file(stem + ".pgm"), HeatmapFormat::kPgm);
        export_heatmap(map, dir.file(stem + ".txt"), HeatmapFormat::kText);
        if (!compare.empty()) {
            const Heatmap diff = diff_map(map, attention_heatmap(region, c, compare));
            export_heatmap(diff, dir.file("diff_" + std::to_string(i) + ".pgm"), HeatmapFormat::kPgm);
            export_heatmap(diff, dir.file("diff_" + std::to_string(i) + ".txt"), HeatmapFormat::kText);
        }
        index << i << '\t' << s.slide_id << '\t' << specs[i].x0 << '\t' << specs[i].y0 << '\t' << specs[i].side << '\n';
    }
    dir.write("regions.tsv", index.str());
    out << "wrote " << specs.size() << " region maps for " << s.slide_id << " to " << dir_path << '\n';
}

int exit_code_for(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) return static_cast<int>(err->kind());
    return 1;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"MaskHIT: masked pretraining and slide-level fine-tuning on patch-feature grids"};
    app.require_subcommand(1);
    std::string config_path, preset, out_path, store, checkpoint, task, model;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Run seed");
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    auto* preset_opt = app.add_option("--preset", preset, "Named defaults")->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--out", out_path, "Output store path or run directory");
    app.add_option("--store", store, "Feature store path");
    app.add_option("--checkpoint", checkpoint, "Checkpoint file (evaluate: run directory)");
    app.add_option("--task", task, "survival | classification | spatial-classification");
    app.add_option("--model", model, "maskhit | mil-ap | mil-attn");
    app.fallthrough();

    using Command = void (*)(const RunConfig&, std::ostream&);
    const std::vector<std::tuple<const char*, const char*, Command>> commands{
        {"synth", "Generate a synthetic feature store", command_synth},
        {"inspect", "Validate a store and print a summary", command_inspect},
        {"pretrain", "Masked patch restoration pretraining", command_pretrain},
        {"finetune", "Cross-validated fine-tuning from a pretrained checkpoint", command_finetune},
        {"baseline", "Cross-validated MIL baseline", command_baseline},
        {"evaluate", "Re-score the fold models of a run directory", command_evaluate},
        {"attnmap", "Export class-token attention maps", command_attnmap},
    };
    std::vector<std::pair<CLI::App*, Command>> subs;
    for (const auto& [name, help, fn] : commands) subs.emplace_back(app.add_subcommand(name, help)->fallthrough(), fn);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : static_cast<int>(ErrorKind::kConfig);
    }

    try {
        RunConfig c = preset_config(*preset_opt ? preset : "desk");
        if (!config_path.empty()) {
            c = apply_config_text(std::move(c), read_file_bytes(config_path));
            if (*preset_opt && c.preset != preset) {
                throw ConfigError("--preset " + preset + " conflicts with config preset '" + c.preset + "'");
            }
        }
        if (*seed_opt) c.seed = seed;
        if (!out_path.empty()) c.out = out_path;
        if (!store.empty()) c.store = store;
        if (!checkpoint.empty()) c.checkpoint = checkpoint;
        if (!task.empty()) c.task = task;
        if (!model.empty()) c.model = model;
        c.finetune.task = c.task_kind();
        c.validate();
        for (const auto& [sub, fn] : subs) {
            if (sub->parsed()) fn(c, out);
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

}  // namespace maskhit
