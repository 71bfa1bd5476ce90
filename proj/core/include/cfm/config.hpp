#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfm/masking.hpp"
#include "cfm/path.hpp"
#include "cfm/sampler.hpp"
#include "cfm/synthdata.hpp"
#include "cfm/trainer.hpp"
#include "cfm/vectorfield.hpp"

namespace cfm {

/// Training schedule plus the run-keeping knobs around it.
struct TrainRunConfig {
    TrainConfig base;
    int checkpoint_every = 1000;
    int log_every = 25;
};

struct SamplingConfig {
    SolverMethod method = SolverMethod::Midpoint;
    int steps = 32;
    double alpha_semantic = 1.0;
    double alpha_acoustic = 1.0;
    double sigma_min = 1e-5;

    SolverConfig solver_semantic() const {
        return SolverConfig{method, steps, alpha_semantic};
    }
    SolverConfig solver_acoustic() const {
        return SolverConfig{method, steps, alpha_acoustic};
    }
};

struct EvalConfig {
    int n_gen = 100;
    std::vector<int> sweep_steps = {2, 4, 8, 16};
};

/// Whole-run configuration: data process, both stage backbones, the
/// single-stage ablation backbone, per-stage training, sampling and eval.
/// Model channel counts are always derived from the data spec.
struct RunConfig {
    std::uint64_t seed = 20260801;
    DataSpec data;
    int n_train = 2048;
    int n_valid = 128;
    int n_test = 256;
    VFConfig stage1;
    VFConfig stage2;
    VFConfig single_stage;
    TrainRunConfig train_semantic;
    TrainRunConfig train_acoustic;
    TrainRunConfig train_single;
    SamplingConfig sampling;
    EvalConfig eval;

    void derive_channels();
    void validate() const;

private:
    void solver_check() const;
};

/// Desk-scale defaults (channel counts derived).
RunConfig default_run_config();

/// Strict parse: unknown keys anywhere are an error. Values overlay the
/// defaults, so a partial config is valid.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Canonical JSON text of the full effective config; parsing it back
/// reproduces the run.
std::string run_config_to_json(const RunConfig& cfg);

/// Compact config blob stored in checkpoints: the backbone config, stage tag
/// and path parameter a checkpoint must agree on to be loadable.
std::string checkpoint_config_text(const VFConfig& vf, Stage stage, double sigma_min);

const VFConfig& stage_config(const RunConfig& cfg, Stage stage);
const TrainRunConfig& stage_train_config(const RunConfig& cfg, Stage stage);

}  // namespace cfm
