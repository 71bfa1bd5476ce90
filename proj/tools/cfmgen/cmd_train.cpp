#include <fstream>

#include "cfm/metrics.hpp"
#include "commands.hpp"

namespace cfmgen {

namespace {

cfm::Stage parse_stage(const std::string& name) {
    if (name == "semantic") return cfm::Stage::Semantic;
    if (name == "acoustic") return cfm::Stage::Acoustic;
    if (name == "single") return cfm::Stage::SingleStage;
    throw cfm::UsageError("train: stage must be semantic, acoustic or single");
}

cfm::BatchItem<float> make_item(const cfm::Example& ex, cfm::Stage stage,
                                const cfm::DataSpec& spec) {
    cfm::BatchItem<float> item;
    item.cond = ex.cond;
    switch (stage) {
        case cfm::Stage::Semantic:
            item.x1 = ex.h;
            break;
        case cfm::Stage::Acoustic:
            item.x1 = ex.e;
            item.aux = cfm::interpolate(ex.h, static_cast<std::size_t>(spec.acoustic_len));
            break;
        case cfm::Stage::SingleStage:
            item.x1 = ex.e;
            break;
    }
    return item;
}

}  // namespace

int cmd_train(const TrainArgs& args) {
    cfm::RunConfig cfg = effective_config(args.common);
    if (args.common.dump_config) {
        dump_config(cfg);
        return 0;
    }
    const cfm::Stage stage = parse_stage(args.stage);
    const cfm::VFConfig& vf_cfg = cfm::stage_config(cfg, stage);
    const cfm::TrainRunConfig& trc = cfm::stage_train_config(cfg, stage);
    const auto seq_len = static_cast<std::size_t>(
        stage == cfm::Stage::Semantic ? cfg.data.semantic_len : cfg.data.acoustic_len);

    auto corpus = load_split(cfg, args.data_dir, "train");
    if (corpus.empty()) throw cfm::UsageError("train: empty train split");
    ensure_dir(args.common.out_dir);

    cfm::PathParams path(cfg.sampling.sigma_min);
    const std::uint64_t init_seed =
        cfm::Rng(cfg.seed).fork("init", static_cast<std::uint64_t>(stage)).next_u64();
    auto model = cfm::init_vector_field<float>(vf_cfg, init_seed);

    cfm::TrainConfig tc = trc.base;
    tc.stage = stage;
    tc.seed = stage_train_seed(cfg.seed, stage);
    cfm::Trainer<float> trainer(model, tc, path);

    std::uint64_t start_step = 0;
    if (!args.resume.empty()) {
        cfm::Checkpoint ckpt = cfm::load_checkpoint(args.resume);
        cfm::restore_checkpoint(
            ckpt, cfm::checkpoint_config_text(vf_cfg, stage, cfg.sampling.sigma_min),
            model, &trainer.state());
        start_step = ckpt.step;
        log_line("train: resumed " + args.stage + " from step " +
                 std::to_string(start_step));
    }

    const std::string log_path =
        args.common.out_dir + "/loss_" + args.stage + ".csv";
    std::ofstream log(log_path, start_step == 0
                                    ? (std::ios::binary | std::ios::trunc)
                                    : (std::ios::binary | std::ios::app));
    if (!log) throw cfm::IoError("train: cannot open " + log_path);
    if (start_step == 0) log << "step,loss,lr\n";

    const std::string ckpt_path = args.common.out_dir + "/" + args.stage + ".ckpt";
    const std::size_t n_seq = std::max<std::size_t>(
        1, static_cast<std::size_t>(trc.base.batch_frames) / seq_len);

    double last_loss = 0.0;
    for (std::uint64_t step = start_step;
         step < static_cast<std::uint64_t>(tc.total_steps); ++step) {
        cfm::Rng pick = cfm::Rng(tc.seed).fork("batch", step);
        std::vector<cfm::BatchItem<float>> batch;
        batch.reserve(n_seq);
        for (std::size_t b = 0; b < n_seq; ++b) {
            const auto idx = static_cast<std::size_t>(
                pick.uniform_int(0, corpus.size() - 1));
            batch.push_back(make_item(corpus[idx], stage, cfg.data));
        }
        cfm::TrainStepResult r;
        try {
            r = trainer.step(batch, step);
        } catch (const cfm::NumericalError& e) {
            // last periodic checkpoint stays on disk
            log_line(std::string("train: aborted: ") + e.what());
            throw;
        }
        last_loss = r.loss;
        if (step % static_cast<std::uint64_t>(trc.log_every) == 0 ||
            step + 1 == static_cast<std::uint64_t>(tc.total_steps)) {
            log << step << "," << cfm::format_sig6(r.loss) << ","
                << cfm::format_sig6(r.lr) << "\n";
            log.flush();
        }
        if ((step + 1) % static_cast<std::uint64_t>(trc.checkpoint_every) == 0) {
            save_stage_checkpoint(ckpt_path, model, &trainer.state(), step + 1, stage,
                                  cfg.sampling.sigma_min);
        }
    }
    save_stage_checkpoint(ckpt_path, model, &trainer.state(),
                          static_cast<std::uint64_t>(tc.total_steps), stage,
                          cfg.sampling.sigma_min);
    log_line("train: " + args.stage + " finished at step " +
             std::to_string(tc.total_steps) + ", final loss " +
             cfm::format_sig6(last_loss) + ", checkpoint " + ckpt_path);
    return 0;
}

}  // namespace cfmgen
