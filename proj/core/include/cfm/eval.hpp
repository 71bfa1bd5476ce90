#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cfm/cascade.hpp"
#include "cfm/metrics.hpp"
#include "cfm/synthdata.hpp"

namespace cfm {

struct EvalSettings {
    SolverConfig solver1;
    SolverConfig solver2;
    int n_gen = 100;
    std::uint64_t seed = 0;
};

struct EvalResult {
    double frechet_vs_ref = 0.0;
    double acc_semantic = 0.0;  // oracle on generated h
    double acc_acoustic = 0.0;  // oracle on generated e, rescaled frequencies
    int nfe_per_sample = 0;
};

struct SweepRow {
    int nfe = 0;
    int steps_stage1 = 0;
    int steps_stage2 = 0;
    double frechet = 0.0;
    double oracle_acc = 0.0;
};

struct AblationRow {
    std::string system;
    std::size_t params = 0;
    double frechet = 0.0;
    double oracle_acc = 0.0;
};

inline GaussianStats acoustic_stats(const std::vector<Example>& examples,
                                    std::size_t begin, std::size_t end) {
    std::vector<std::vector<double>> pooled;
    pooled.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        pooled.push_back(pooled_features(examples[i].e));
    }
    return gaussian_stats(pooled);
}

inline GaussianStats acoustic_stats(const std::vector<Example>& examples) {
    return acoustic_stats(examples, 0, examples.size());
}

/// Generates n_gen TTM samples with conditions cycled from the eval set
/// (fixed per-sample seeds) and scores them against the full reference set.
inline EvalResult evaluate_cascade(const CascadeBundle<float>& bundle,
                                   const DataSpec& spec,
                                   const std::vector<Example>& eval_set,
                                   const EvalSettings& settings,
                                   const PathParams& path) {
    if (eval_set.empty()) throw UsageError("evaluate_cascade: empty eval set");
    const GaussianStats ref = acoustic_stats(eval_set);
    std::vector<std::vector<double>> gen_pooled;
    gen_pooled.reserve(static_cast<std::size_t>(settings.n_gen));
    int hits_h = 0, hits_e = 0;
    EvalResult r;
    for (int i = 0; i < settings.n_gen; ++i) {
        const Example& ex = eval_set[static_cast<std::size_t>(i) % eval_set.size()];
        GenerationRequest<float> req;
        req.cond = ex.cond;
        req.task = MaskTask::TTM;
        req.solver1 = settings.solver1;
        req.solver2 = settings.solver2;
        req.seed = Rng(settings.seed).fork("eval-sample", static_cast<std::uint64_t>(i)).next_u64();
        GenerateResult<float> g = generate(bundle, req, path);
        r.nfe_per_sample = g.total_nfe;
        gen_pooled.push_back(pooled_features(g.e_hat));
        if (oracle_classify(g.h_hat, spec).first == ex.class_id) ++hits_h;
        if (oracle_classify(g.e_hat, spec, spec.acoustic_omega_scale()).first == ex.class_id) {
            ++hits_e;
        }
    }
    r.frechet_vs_ref = frechet(gaussian_stats(gen_pooled), ref);
    r.acc_semantic = static_cast<double>(hits_h) / settings.n_gen;
    r.acc_acoustic = static_cast<double>(hits_e) / settings.n_gen;
    return r;
}

/// One row per requested step count (both stages run the same step count);
/// rows come out sorted by NFE. Duplicate step counts produce duplicate rows.
inline std::vector<SweepRow> nfe_sweep(const CascadeBundle<float>& bundle,
                                       const DataSpec& spec,
                                       const std::vector<Example>& eval_set,
                                       const std::vector<int>& step_list,
                                       double alpha, const PathParams& path,
                                       int n_gen, std::uint64_t seed) {
    if (step_list.empty()) throw UsageError("nfe_sweep: empty step list");
    std::vector<SweepRow> rows;
    rows.reserve(step_list.size());
    for (int steps : step_list) {
        EvalSettings s;
        s.solver1 = SolverConfig{SolverMethod::Midpoint, steps, alpha};
        s.solver2 = SolverConfig{SolverMethod::Midpoint, steps, alpha};
        s.n_gen = n_gen;
        s.seed = seed;
        EvalResult r = evaluate_cascade(bundle, spec, eval_set, s, path);
        rows.push_back(SweepRow{r.nfe_per_sample, steps, steps, r.frechet_vs_ref,
                                r.acc_semantic});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const SweepRow& a, const SweepRow& b) { return a.nfe < b.nfe; });
    return rows;
}

/// Two-stage cascade vs the single-stage baseline at an identical NFE budget
/// and identical seeds. Oracle accuracy is measured on the acoustic output
/// for both systems (the single stage produces no semantic features).
inline std::vector<AblationRow> ablation_two_vs_one(
    const CascadeBundle<float>& bundle, const VectorFieldModel<float>& single_model,
    const DataSpec& spec, const std::vector<Example>& eval_set,
    const EvalSettings& settings, const PathParams& path) {
    if (eval_set.empty()) throw UsageError("ablation: empty eval set");
    const GaussianStats ref = acoustic_stats(eval_set);

    EvalResult two = evaluate_cascade(bundle, spec, eval_set, settings, path);

    // Match the cascade's per-sample budget with a longer single-stage solve.
    SolverConfig single_cfg = settings.solver2;
    const int per_step = single_cfg.evals_per_step() *
                         (single_cfg.guidance_alpha > 0.0 ? 2 : 1);
    single_cfg.steps = std::max(1, two.nfe_per_sample / per_step);

    std::vector<std::vector<double>> gen_pooled;
    int hits = 0;
    int nfe_single = 0;
    for (int i = 0; i < settings.n_gen; ++i) {
        const Example& ex = eval_set[static_cast<std::size_t>(i) % eval_set.size()];
        GenerationRequest<float> req;
        req.cond = ex.cond;
        req.task = MaskTask::TTM;
        req.solver2 = single_cfg;
        req.e_ctx = Tensor::zeros({static_cast<std::size_t>(spec.acoustic_len),
                                   static_cast<std::size_t>(spec.acoustic_dim)});
        req.seed = Rng(settings.seed).fork("eval-sample", static_cast<std::uint64_t>(i)).next_u64();
        SampleResult<float> g = single_stage_baseline(single_model, req, path);
        nfe_single = g.nfe;
        gen_pooled.push_back(pooled_features(g.features));
        if (oracle_classify(g.features, spec, spec.acoustic_omega_scale()).first ==
            ex.class_id) {
            ++hits;
        }
    }
    const double fd_single = frechet(gaussian_stats(gen_pooled), ref);
    (void)nfe_single;

    std::vector<AblationRow> rows;
    rows.push_back(AblationRow{
        "two_stage", bundle.stage1.param_count() + bundle.stage2.param_count(),
        two.frechet_vs_ref, two.acc_acoustic});
    rows.push_back(AblationRow{"single_stage", single_model.param_count(), fd_single,
                               static_cast<double>(hits) / settings.n_gen});
    return rows;
}

inline CsvTable sweep_csv(const std::vector<SweepRow>& rows) {
    CsvTable t;
    t.header = {"nfe", "steps_stage1", "steps_stage2", "frechet", "oracle_acc"};
    for (const auto& r : rows) {
        t.add_row({std::to_string(r.nfe), std::to_string(r.steps_stage1),
                   std::to_string(r.steps_stage2), format_sig6(r.frechet),
                   format_sig6(r.oracle_acc)});
    }
    return t;
}

inline CsvTable ablation_csv(const std::vector<AblationRow>& rows) {
    CsvTable t;
    t.header = {"system", "params", "frechet", "oracle_acc"};
    for (const auto& r : rows) {
        t.add_row({r.system, std::to_string(r.params), format_sig6(r.frechet),
                   format_sig6(r.oracle_acc)});
    }
    return t;
}

}  // namespace cfm
