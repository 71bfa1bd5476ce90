#include "commands.hpp"

namespace cfmgen {

int cmd_gen_data(const CommonArgs& common) {
    cfm::RunConfig cfg = effective_config(common);
    if (common.dump_config) {
        dump_config(cfg);
        return 0;
    }
    const std::string hash = write_corpus(cfg, common.out_dir);
    log_line("gen-data: wrote " + std::to_string(cfg.n_train) + "/" +
             std::to_string(cfg.n_valid) + "/" + std::to_string(cfg.n_test) +
             " train/valid/test examples to " + common.out_dir +
             " (hash " + hash + ")");
    return 0;
}

}  // namespace cfmgen
