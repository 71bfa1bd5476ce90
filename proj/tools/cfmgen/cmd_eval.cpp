#include "cfm/eval.hpp"
#include "commands.hpp"

namespace cfmgen {

int cmd_eval(const EvalArgs& args) {
    cfm::RunConfig cfg = effective_config(args.common);
    if (args.common.dump_config) {
        dump_config(cfg);
        return 0;
    }
    auto test_set = load_split(cfg, args.data_dir, "test");
    cfm::CascadeBundle<float> bundle = load_bundle(cfg, args.ckpt1, args.ckpt2);
    cfm::PathParams path(cfg.sampling.sigma_min);
    ensure_dir(args.common.out_dir);

    cfm::EvalSettings settings;
    settings.solver1 = cfg.sampling.solver_semantic();
    settings.solver2 = cfg.sampling.solver_acoustic();
    settings.n_gen = cfg.eval.n_gen;
    settings.seed = cfg.seed;

    cfm::EvalResult r = cfm::evaluate_cascade(bundle, cfg.data, test_set, settings, path);
    std::vector<cfm::SweepRow> rows = {cfm::SweepRow{
        r.nfe_per_sample, cfg.sampling.steps, cfg.sampling.steps, r.frechet_vs_ref,
        r.acc_semantic}};
    cfm::sweep_csv(rows).write(args.common.out_dir + "/eval.csv");
    log_line("eval: frechet " + cfm::format_sig6(r.frechet_vs_ref) +
             ", oracle accuracy " + cfm::format_sig6(r.acc_semantic) +
             " (acoustic " + cfm::format_sig6(r.acc_acoustic) + "), nfe " +
             std::to_string(r.nfe_per_sample));

    if (!args.ckpt_single.empty()) {
        auto single = load_stage_model(args.ckpt_single, cfg.single_stage,
                                       cfm::Stage::SingleStage, cfg.sampling.sigma_min);
        auto table =
            cfm::ablation_two_vs_one(bundle, single, cfg.data, test_set, settings, path);
        cfm::ablation_csv(table).write(args.common.out_dir + "/ablation.csv");
        log_line("eval: ablation two-stage frechet " +
                 cfm::format_sig6(table[0].frechet) + " vs single-stage " +
                 cfm::format_sig6(table[1].frechet));
    }
    return 0;
}

int cmd_sweep(const SweepArgs& args) {
    cfm::RunConfig cfg = effective_config(args.common);
    if (args.common.dump_config) {
        dump_config(cfg);
        return 0;
    }
    auto test_set = load_split(cfg, args.data_dir, "test");
    cfm::CascadeBundle<float> bundle = load_bundle(cfg, args.ckpt1, args.ckpt2);
    cfm::PathParams path(cfg.sampling.sigma_min);
    ensure_dir(args.common.out_dir);

    const std::vector<int>& steps = args.steps.empty() ? cfg.eval.sweep_steps : args.steps;
    auto rows = cfm::nfe_sweep(bundle, cfg.data, test_set, steps,
                               cfg.sampling.alpha_semantic, path, cfg.eval.n_gen,
                               cfg.seed);
    cfm::sweep_csv(rows).write(args.common.out_dir + "/sweep.csv");
    log_line("sweep: wrote " + std::to_string(rows.size()) + " rows to " +
             args.common.out_dir + "/sweep.csv");
    return 0;
}

}  // namespace cfmgen
