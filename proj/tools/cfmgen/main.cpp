#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "cfm/errors.hpp"
#include "commands.hpp"

namespace {

void add_common(CLI::App* sub, cfmgen::CommonArgs& common, bool with_out = true) {
    sub->add_option("--config", common.config_path, "JSON run configuration");
    sub->add_option("--seed", common.seed, "root seed (overrides the config)")
        ->each([&common](const std::string&) { common.seed_set = true; });
    if (with_out) {
        sub->add_option("--out", common.out_dir, "output directory")->required();
    }
    sub->add_flag("--dump-config", common.dump_config,
                  "print the effective config JSON and exit");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cfmgen: cascaded masked flow matching over feature sequences"};
    app.require_subcommand(1);

    cfmgen::CommonArgs gen_common;
    CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
    add_common(gen, gen_common);

    cfmgen::TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train one stage");
    add_common(train, train_args.common);
    train->add_option("--stage", train_args.stage, "semantic | acoustic | single")
        ->required();
    train->add_option("--data", train_args.data_dir, "corpus directory")->required();
    train->add_option("--resume", train_args.resume, "checkpoint to resume from");

    auto add_sample_like = [&](const char* name, const char* desc,
                               cfmgen::SampleArgs& sa, bool with_t1, bool with_t2) {
        CLI::App* sub = app.add_subcommand(name, desc);
        add_common(sub, sa.common);
        sub->add_option("--ckpt1", sa.ckpt1, "semantic-stage checkpoint")->required();
        sub->add_option("--ckpt2", sa.ckpt2, "acoustic-stage checkpoint")->required();
        sub->add_option("--n", sa.n, "number of samples");
        sub->add_option("--class", sa.class_id, "condition class id (-1 cycles)");
        sub->add_option("--style", sa.style, "condition style in [0,1]");
        sub->add_option("--steps", sa.steps, "solver steps per stage");
        sub->add_option("--alpha-h", sa.alpha_h, "semantic guidance strength");
        sub->add_option("--alpha-e", sa.alpha_e, "acoustic guidance strength");
        sub->add_option("--method", sa.method, "euler | midpoint");
        if (with_t1) {
            sub->add_option("--t1", sa.t1, "left boundary fraction");
            sub->add_option("--context-h", sa.context_h, "semantic context features")
                ->required();
            sub->add_option("--context-e", sa.context_e, "acoustic context features")
                ->required();
        }
        if (with_t2) sub->add_option("--t2", sa.t2, "right boundary fraction");
        return sub;
    };

    cfmgen::SampleArgs sample_args;
    sample_args.task = "ttm";
    add_sample_like("sample", "text-conditioned generation", sample_args, false, false);

    cfmgen::SampleArgs infill_args;
    infill_args.task = "infilling";
    infill_args.t1 = 0.15;
    infill_args.t2 = 0.85;
    add_sample_like("infill", "regenerate an interior span", infill_args, true, true);

    cfmgen::SampleArgs continue_args;
    continue_args.task = "continuation";
    continue_args.t1 = 0.3;
    continue_args.t2 = 1.0;
    add_sample_like("continue", "extend a given prefix", continue_args, true, false);

    cfmgen::EvalArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("eval", "distribution metrics on the test split");
    add_common(eval_cmd, eval_args.common);
    eval_cmd->add_option("--data", eval_args.data_dir, "corpus directory")->required();
    eval_cmd->add_option("--ckpt1", eval_args.ckpt1, "semantic-stage checkpoint")->required();
    eval_cmd->add_option("--ckpt2", eval_args.ckpt2, "acoustic-stage checkpoint")->required();
    eval_cmd->add_option("--compare-single", eval_args.ckpt_single,
                         "single-stage checkpoint for the ablation table");

    cfmgen::SweepArgs sweep_args;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "frechet distance across NFE budgets");
    add_common(sweep_cmd, sweep_args.common);
    sweep_cmd->add_option("--data", sweep_args.data_dir, "corpus directory")->required();
    sweep_cmd->add_option("--ckpt1", sweep_args.ckpt1, "semantic-stage checkpoint")->required();
    sweep_cmd->add_option("--ckpt2", sweep_args.ckpt2, "acoustic-stage checkpoint")->required();
    sweep_cmd->add_option("--steps", sweep_args.steps, "solver step counts")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cfmgen::cmd_gen_data(gen_common);
        if (train->parsed()) return cfmgen::cmd_train(train_args);
        if (app.get_subcommand("sample")->parsed()) return cfmgen::cmd_sample(sample_args);
        if (app.get_subcommand("infill")->parsed()) return cfmgen::cmd_sample(infill_args);
        if (app.get_subcommand("continue")->parsed()) return cfmgen::cmd_sample(continue_args);
        if (eval_cmd->parsed()) return cfmgen::cmd_eval(eval_args);
        if (sweep_cmd->parsed()) return cfmgen::cmd_sweep(sweep_args);
    } catch (const cfm::UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const cfm::RangeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const cfm::ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
