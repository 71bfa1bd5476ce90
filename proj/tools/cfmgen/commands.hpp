#pragma once

#include <string>
#include <vector>

#include "common.hpp"

namespace cfmgen {

int cmd_gen_data(const CommonArgs& common);

struct TrainArgs {
    CommonArgs common;
    std::string stage;  // semantic | acoustic | single
    std::string data_dir;
    std::string resume;
};
int cmd_train(const TrainArgs& args);

struct SampleArgs {
    CommonArgs common;
    std::string ckpt1;
    std::string ckpt2;
    std::string task = "ttm";  // ttm | continuation | infilling
    int n = 8;
    int class_id = -1;     // -1 cycles through classes
    double style = -1.0;   // outside [0,1] draws per sample
    double t1 = 0.0;
    double t2 = 1.0;
    std::string context_h;
    std::string context_e;
    int steps = 0;          // 0 keeps the config value
    double alpha_h = -1.0;  // negative keeps the config value
    double alpha_e = -1.0;
    std::string method;     // empty keeps the config value
};
int cmd_sample(const SampleArgs& args);

struct EvalArgs {
    CommonArgs common;
    std::string data_dir;
    std::string ckpt1;
    std::string ckpt2;
    std::string ckpt_single;  // enables the single-stage comparison
};
int cmd_eval(const EvalArgs& args);

struct SweepArgs {
    CommonArgs common;
    std::string data_dir;
    std::string ckpt1;
    std::string ckpt2;
    std::vector<int> steps;  // empty uses the config list
};
int cmd_sweep(const SweepArgs& args);

}  // namespace cfmgen
