#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfm/cascade.hpp"
#include "cfm/checkpoint.hpp"
#include "cfm/config.hpp"
#include "cfm/synthdata.hpp"

namespace cfmgen {

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    bool dump_config = false;
};

/// Effective config: file (or defaults) with flag overrides applied.
cfm::RunConfig effective_config(const CommonArgs& args);

/// Prints the effective config JSON to stdout (for --dump-config).
void dump_config(const cfm::RunConfig& cfg);

void ensure_dir(const std::string& path);

/// Writes train/valid/test splits as feature-file pairs plus manifest.json.
/// Returns the corpus hash.
std::string write_corpus(const cfm::RunConfig& cfg, const std::string& out_dir);

/// Reads one split back; verifies the manifest matches the active data spec.
std::vector<cfm::Example> load_split(const cfm::RunConfig& cfg,
                                     const std::string& data_dir,
                                     const std::string& split);

/// Stage checkpoint save/load with config-text validation.
void save_stage_checkpoint(const std::string& path,
                           const cfm::VectorFieldModel<float>& model,
                           const cfm::AdamState<float>* opt, std::uint64_t step,
                           cfm::Stage stage, double sigma_min);

cfm::VectorFieldModel<float> load_stage_model(const std::string& path,
                                              const cfm::VFConfig& expected,
                                              cfm::Stage stage, double sigma_min);

/// Bundle assembly from the two stage checkpoints.
cfm::CascadeBundle<float> load_bundle(const cfm::RunConfig& cfg,
                                      const std::string& ckpt1,
                                      const std::string& ckpt2);

std::uint64_t stage_train_seed(std::uint64_t root, cfm::Stage stage);

void log_line(const std::string& msg);

}  // namespace cfmgen
