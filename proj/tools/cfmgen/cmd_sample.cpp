#include <fstream>

#include <json.hpp>

#include "cfm/feature_file.hpp"
#include "commands.hpp"

using nlohmann::json;

namespace cfmgen {

namespace {

cfm::MaskTask parse_task(const std::string& name) {
    if (name == "ttm") return cfm::MaskTask::TTM;
    if (name == "continuation") return cfm::MaskTask::Continuation;
    if (name == "infilling") return cfm::MaskTask::Infilling;
    throw cfm::UsageError("sample: unknown task " + name);
}

cfm::Tensor load_context(const std::string& path, std::size_t frames,
                         std::size_t dim, const char* what) {
    cfm::Tensor t = cfm::read_features(path).to_tensor();
    if (t.rows() != frames || t.cols() != dim) {
        throw cfm::UsageError(std::string("sample: ") + what +
                              " context has shape " + t.shape_str() +
                              ", expected [" + std::to_string(frames) + " x " +
                              std::to_string(dim) + "]");
    }
    return t;
}

const char* method_str(cfm::SolverMethod m) {
    return m == cfm::SolverMethod::Euler ? "euler" : "midpoint";
}

}  // namespace

int cmd_sample(const SampleArgs& args) {
    cfm::RunConfig cfg = effective_config(args.common);
    if (args.common.dump_config) {
        dump_config(cfg);
        return 0;
    }
    if (!args.method.empty()) {
        if (args.method == "euler") cfg.sampling.method = cfm::SolverMethod::Euler;
        else if (args.method == "midpoint") cfg.sampling.method = cfm::SolverMethod::Midpoint;
        else throw cfm::UsageError("sample: method must be euler or midpoint");
    }
    if (args.steps > 0) cfg.sampling.steps = args.steps;
    if (args.alpha_h >= 0.0) cfg.sampling.alpha_semantic = args.alpha_h;
    if (args.alpha_e >= 0.0) cfg.sampling.alpha_acoustic = args.alpha_e;

    const cfm::MaskTask task = parse_task(args.task);
    const auto M = static_cast<std::size_t>(cfg.data.semantic_len);
    const auto N = static_cast<std::size_t>(cfg.data.acoustic_len);
    const auto Ch = static_cast<std::size_t>(cfg.data.semantic_dim);
    const auto Ce = static_cast<std::size_t>(cfg.data.acoustic_dim);

    cfm::Tensor h_ctx, e_ctx;
    if (task != cfm::MaskTask::TTM) {
        if (args.context_h.empty() || args.context_e.empty()) {
            throw cfm::UsageError("sample: this task needs --context-h and --context-e");
        }
        h_ctx = load_context(args.context_h, M, Ch, "semantic");
        e_ctx = load_context(args.context_e, N, Ce, "acoustic");
    }

    cfm::CascadeBundle<float> bundle = load_bundle(cfg, args.ckpt1, args.ckpt2);
    cfm::PathParams path(cfg.sampling.sigma_min);
    ensure_dir(args.common.out_dir);

    const float rate_h = 1.0f;
    const float rate_e = static_cast<float>(N) / static_cast<float>(M);
    json meta;
    meta["seed"] = cfg.seed;
    meta["task"] = args.task;
    meta["method"] = method_str(cfg.sampling.method);
    meta["steps"] = cfg.sampling.steps;
    meta["alpha_semantic"] = cfg.sampling.alpha_semantic;
    meta["alpha_acoustic"] = cfg.sampling.alpha_acoustic;
    meta["t1"] = args.t1;
    meta["t2"] = args.t2;
    json samples = json::array();

    for (int i = 0; i < args.n; ++i) {
        const int cls = args.class_id >= 0 ? args.class_id : i % cfg.data.n_classes;
        if (cls >= cfg.data.n_classes) {
            throw cfm::UsageError("sample: class id out of range");
        }
        double style = args.style;
        if (style < 0.0 || style > 1.0) {
            style = cfm::Rng(cfg.seed).fork("style", static_cast<std::uint64_t>(i)).uniform();
        }

        cfm::GenerationRequest<float> req;
        req.cond = cfm::make_cond_tokens(cfg.data, cls, style);
        req.task = task;
        req.t1_frac = args.t1;
        req.t2_frac = args.t2;
        req.h_ctx = h_ctx;
        req.e_ctx = e_ctx;
        req.solver1 = cfg.sampling.solver_semantic();
        req.solver2 = cfg.sampling.solver_acoustic();
        req.seed = cfm::Rng(cfg.seed).fork("sample", static_cast<std::uint64_t>(i)).next_u64();

        cfm::GenerateResult<float> r = cfm::generate(bundle, req, path);

        char name[64];
        std::snprintf(name, sizeof(name), "/sample%03d", i);
        const std::string base = args.common.out_dir + name;
        cfm::write_features(base + "_h.cfmf",
                            cfm::FeatureFile::from_tensor(r.h_hat, rate_h));
        cfm::write_features(base + "_e.cfmf",
                            cfm::FeatureFile::from_tensor(r.e_hat, rate_e));
        samples.push_back(json{{"index", i},
                               {"class", cls},
                               {"style", style},
                               {"seed", req.seed},
                               {"nfe_stage1", r.stage1_nfe},
                               {"nfe_stage2", r.stage2_nfe},
                               {"nfe_total", r.total_nfe}});
    }
    meta["samples"] = std::move(samples);
    std::ofstream os(args.common.out_dir + "/metadata.json",
                     std::ios::binary | std::ios::trunc);
    if (!os) throw cfm::IoError("sample: cannot write metadata.json");
    os << meta.dump(2) << "\n";
    log_line("sample: wrote " + std::to_string(args.n) + " " + args.task +
             " samples to " + args.common.out_dir);
    return 0;
}

}  // namespace cfmgen
