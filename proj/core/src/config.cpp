#include "cfm/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "cfm/errors.hpp"

namespace cfm {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
    if (!obj.is_object()) throw UsageError("config: " + where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (std::string_view a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw UsageError("config: unknown key \"" + key + "\" in " + where);
    }
}

template <class V>
void maybe(const json& obj, const char* key, V& out) {
    if (auto it = obj.find(key); it != obj.end()) out = it->get<V>();
}

void parse_data(const json& j, RunConfig& cfg) {
    check_keys(j,
               {"n_classes", "semantic_len", "acoustic_len", "semantic_dim",
                "acoustic_dim", "omega0", "omega_step", "sigma_h", "sigma_e",
                "projection_seed", "n_train", "n_valid", "n_test"},
               "data");
    maybe(j, "n_classes", cfg.data.n_classes);
    maybe(j, "semantic_len", cfg.data.semantic_len);
    maybe(j, "acoustic_len", cfg.data.acoustic_len);
    maybe(j, "semantic_dim", cfg.data.semantic_dim);
    maybe(j, "acoustic_dim", cfg.data.acoustic_dim);
    maybe(j, "omega0", cfg.data.omega0);
    maybe(j, "omega_step", cfg.data.omega_step);
    maybe(j, "sigma_h", cfg.data.sigma_h);
    maybe(j, "sigma_e", cfg.data.sigma_e);
    maybe(j, "projection_seed", cfg.data.projection_seed);
    maybe(j, "n_train", cfg.n_train);
    maybe(j, "n_valid", cfg.n_valid);
    maybe(j, "n_test", cfg.n_test);
}

void parse_backbone(const json& j, VFConfig& vf, const std::string& where) {
    check_keys(j,
               {"layers", "dim", "heads", "ffn_dim", "use_alibi", "use_skips",
                "use_conv_embed"},
               where);
    maybe(j, "layers", vf.layers);
    maybe(j, "dim", vf.dim);
    maybe(j, "heads", vf.heads);
    maybe(j, "ffn_dim", vf.ffn_dim);
    maybe(j, "use_alibi", vf.use_alibi);
    maybe(j, "use_skips", vf.use_skips);
    maybe(j, "use_conv_embed", vf.use_conv_embed);
}

void parse_train(const json& j, TrainRunConfig& tr, const std::string& where) {
    check_keys(j,
               {"lr_peak", "warmup_steps", "total_steps", "batch_frames",
                "mask_ratio_lo", "mask_ratio_hi", "p_drop_text", "p_drop_ctx",
                "checkpoint_every", "log_every"},
               where);
    maybe(j, "lr_peak", tr.base.lr_peak);
    maybe(j, "warmup_steps", tr.base.warmup_steps);
    maybe(j, "total_steps", tr.base.total_steps);
    maybe(j, "batch_frames", tr.base.batch_frames);
    maybe(j, "mask_ratio_lo", tr.base.mask_ratio_lo);
    maybe(j, "mask_ratio_hi", tr.base.mask_ratio_hi);
    maybe(j, "p_drop_text", tr.base.cond_drop.p_text);
    maybe(j, "p_drop_ctx", tr.base.cond_drop.p_ctx);
    maybe(j, "checkpoint_every", tr.checkpoint_every);
    maybe(j, "log_every", tr.log_every);
}

SolverMethod parse_method(const std::string& name) {
    if (name == "euler") return SolverMethod::Euler;
    if (name == "midpoint") return SolverMethod::Midpoint;
    throw UsageError("config: solver method must be \"euler\" or \"midpoint\"");
}

const char* method_name(SolverMethod m) {
    return m == SolverMethod::Euler ? "euler" : "midpoint";
}

void parse_sampling(const json& j, SamplingConfig& s) {
    check_keys(j, {"method", "steps", "alpha_semantic", "alpha_acoustic", "sigma_min"},
               "sampling");
    if (auto it = j.find("method"); it != j.end()) {
        s.method = parse_method(it->get<std::string>());
    }
    maybe(j, "steps", s.steps);
    maybe(j, "alpha_semantic", s.alpha_semantic);
    maybe(j, "alpha_acoustic", s.alpha_acoustic);
    maybe(j, "sigma_min", s.sigma_min);
}

void parse_eval(const json& j, EvalConfig& e) {
    check_keys(j, {"n_gen", "sweep_steps"}, "eval");
    maybe(j, "n_gen", e.n_gen);
    if (auto it = j.find("sweep_steps"); it != j.end()) {
        e.sweep_steps = it->get<std::vector<int>>();
    }
}

json backbone_json(const VFConfig& vf) {
    return json{{"layers", vf.layers},       {"dim", vf.dim},
                {"heads", vf.heads},         {"ffn_dim", vf.ffn_dim},
                {"use_alibi", vf.use_alibi}, {"use_skips", vf.use_skips},
                {"use_conv_embed", vf.use_conv_embed}};
}

json train_json(const TrainRunConfig& tr) {
    return json{{"lr_peak", tr.base.lr_peak},
                {"warmup_steps", tr.base.warmup_steps},
                {"total_steps", tr.base.total_steps},
                {"batch_frames", tr.base.batch_frames},
                {"mask_ratio_lo", tr.base.mask_ratio_lo},
                {"mask_ratio_hi", tr.base.mask_ratio_hi},
                {"p_drop_text", tr.base.cond_drop.p_text},
                {"p_drop_ctx", tr.base.cond_drop.p_ctx},
                {"checkpoint_every", tr.checkpoint_every},
                {"log_every", tr.log_every}};
}

}  // namespace

void RunConfig::derive_channels() {
    const int ch = data.semantic_dim, ce = data.acoustic_dim, cd = data.cond_dim();
    stage1.in_channels = 2 * ch;
    stage1.out_channels = ch;
    stage1.cond_dim = cd;
    stage2.in_channels = 2 * ce + ch;
    stage2.out_channels = ce;
    stage2.cond_dim = cd;
    single_stage.in_channels = 2 * ce;
    single_stage.out_channels = ce;
    single_stage.cond_dim = cd;
}

void RunConfig::validate() const {
    data.validate();
    stage1.validate();
    stage2.validate();
    single_stage.validate();
    train_semantic.base.validate();
    train_acoustic.base.validate();
    train_single.base.validate();
    solver_check();
}

void RunConfig::solver_check() const {
    sampling.solver_semantic().validate();
    sampling.solver_acoustic().validate();
    PathParams check(sampling.sigma_min);
    (void)check;
    if (n_train < 1 || n_valid < 1 || n_test < 2) {
        throw RangeError("config: corpus sizes too small");
    }
    if (eval.n_gen < 1) throw RangeError("config: eval.n_gen must be >= 1");
    if (eval.sweep_steps.empty()) throw RangeError("config: empty sweep step list");
}

RunConfig default_run_config() {
    RunConfig cfg;

    cfg.stage1 = VFConfig{};
    cfg.stage1.layers = 4;
    cfg.stage1.dim = 48;
    cfg.stage1.heads = 4;
    cfg.stage1.ffn_dim = 96;

    cfg.stage2 = cfg.stage1;

    // Roughly the cascade's total parameter count in one backbone.
    cfg.single_stage = cfg.stage1;
    cfg.single_stage.layers = 8;

    auto tune = [](TrainRunConfig& tr, Stage stage, int total, int warmup,
                   int batch_frames) {
        tr.base.stage = stage;
        tr.base.total_steps = total;
        tr.base.warmup_steps = warmup;
        tr.base.batch_frames = batch_frames;
        tr.base.lr_peak = 1e-3;
    };
    tune(cfg.train_semantic, Stage::Semantic, 9000, 400, 256);
    tune(cfg.train_acoustic, Stage::Acoustic, 6000, 400, 512);
    tune(cfg.train_single, Stage::SingleStage, 6000, 400, 512);

    cfg.derive_channels();
    return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("config: JSON parse error: ") + e.what());
    }
    check_keys(j,
               {"seed", "data", "stage1", "stage2", "single", "train_semantic",
                "train_acoustic", "train_single", "sampling", "eval"},
               "config root");
    RunConfig cfg = default_run_config();
    try {
        maybe(j, "seed", cfg.seed);
        if (j.contains("data")) parse_data(j["data"], cfg);
        if (j.contains("stage1")) parse_backbone(j["stage1"], cfg.stage1, "stage1");
        if (j.contains("stage2")) parse_backbone(j["stage2"], cfg.stage2, "stage2");
        if (j.contains("single")) parse_backbone(j["single"], cfg.single_stage, "single");
        if (j.contains("train_semantic")) {
            parse_train(j["train_semantic"], cfg.train_semantic, "train_semantic");
        }
        if (j.contains("train_acoustic")) {
            parse_train(j["train_acoustic"], cfg.train_acoustic, "train_acoustic");
        }
        if (j.contains("train_single")) {
            parse_train(j["train_single"], cfg.train_single, "train_single");
        }
        if (j.contains("sampling")) parse_sampling(j["sampling"], cfg.sampling);
        if (j.contains("eval")) parse_eval(j["eval"], cfg.eval);
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    cfg.derive_channels();
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_run_config(buf.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["data"] = json{{"n_classes", cfg.data.n_classes},
                     {"semantic_len", cfg.data.semantic_len},
                     {"acoustic_len", cfg.data.acoustic_len},
                     {"semantic_dim", cfg.data.semantic_dim},
                     {"acoustic_dim", cfg.data.acoustic_dim},
                     {"omega0", cfg.data.omega0},
                     {"omega_step", cfg.data.omega_step},
                     {"sigma_h", cfg.data.sigma_h},
                     {"sigma_e", cfg.data.sigma_e},
                     {"projection_seed", cfg.data.projection_seed},
                     {"n_train", cfg.n_train},
                     {"n_valid", cfg.n_valid},
                     {"n_test", cfg.n_test}};
    j["stage1"] = backbone_json(cfg.stage1);
    j["stage2"] = backbone_json(cfg.stage2);
    j["single"] = backbone_json(cfg.single_stage);
    j["train_semantic"] = train_json(cfg.train_semantic);
    j["train_acoustic"] = train_json(cfg.train_acoustic);
    j["train_single"] = train_json(cfg.train_single);
    j["sampling"] = json{{"method", method_name(cfg.sampling.method)},
                         {"steps", cfg.sampling.steps},
                         {"alpha_semantic", cfg.sampling.alpha_semantic},
                         {"alpha_acoustic", cfg.sampling.alpha_acoustic},
                         {"sigma_min", cfg.sampling.sigma_min}};
    j["eval"] = json{{"n_gen", cfg.eval.n_gen}, {"sweep_steps", cfg.eval.sweep_steps}};
    return j.dump(2) + "\n";
}

std::string checkpoint_config_text(const VFConfig& vf, Stage stage, double sigma_min) {
    json j;
    j["stage"] = stage_name(stage);
    j["sigma_min"] = sigma_min;
    j["backbone"] = backbone_json(vf);
    j["in_channels"] = vf.in_channels;
    j["out_channels"] = vf.out_channels;
    j["cond_dim"] = vf.cond_dim;
    return j.dump();
}

const VFConfig& stage_config(const RunConfig& cfg, Stage stage) {
    switch (stage) {
        case Stage::Semantic: return cfg.stage1;
        case Stage::Acoustic: return cfg.stage2;
        case Stage::SingleStage: return cfg.single_stage;
    }
    throw UsageError("stage_config: bad stage");
}

const TrainRunConfig& stage_train_config(const RunConfig& cfg, Stage stage) {
    switch (stage) {
        case Stage::Semantic: return cfg.train_semantic;
        case Stage::Acoustic: return cfg.train_acoustic;
        case Stage::SingleStage: return cfg.train_single;
    }
    throw UsageError("stage_train_config: bad stage");
}

}  // namespace cfm
