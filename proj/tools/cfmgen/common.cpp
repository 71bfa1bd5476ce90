#include "common.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfm/errors.hpp"
#include "cfm/feature_file.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cfmgen {

cfm::RunConfig effective_config(const CommonArgs& args) {
    cfm::RunConfig cfg = args.config_path.empty()
        ? cfm::default_run_config()
        : cfm::load_run_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    cfg.validate();
    return cfg;
}

void dump_config(const cfm::RunConfig& cfg) {
    std::fputs(cfm::run_config_to_json(cfg).c_str(), stdout);
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec || !fs::is_directory(path)) {
        throw cfm::IoError("cannot create directory: " + path);
    }
}

void log_line(const std::string& msg) {
    std::fprintf(stderr, "%s\n", msg.c_str());
    std::fflush(stderr);
}

namespace {

std::string example_path(const std::string& dir, const std::string& split, int index,
                         char which) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "/ex%05d_%c.cfmf", index, which);
    return dir + "/" + split + buf;
}

void hash_floats(std::uint64_t& h, const std::vector<float>& data) {
    for (float v : data) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int b = 0; b < 4; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    }
}

json data_spec_json(const cfm::RunConfig& cfg) {
    return json{{"n_classes", cfg.data.n_classes},
                {"semantic_len", cfg.data.semantic_len},
                {"acoustic_len", cfg.data.acoustic_len},
                {"semantic_dim", cfg.data.semantic_dim},
                {"acoustic_dim", cfg.data.acoustic_dim},
                {"omega0", cfg.data.omega0},
                {"omega_step", cfg.data.omega_step},
                {"sigma_h", cfg.data.sigma_h},
                {"sigma_e", cfg.data.sigma_e},
                {"projection_seed", cfg.data.projection_seed}};
}

}  // namespace

std::string write_corpus(const cfm::RunConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    const float rate_h = 1.0f;
    const float rate_e = static_cast<float>(cfg.data.acoustic_len) /
                         static_cast<float>(cfg.data.semantic_len);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    json manifest;
    manifest["seed"] = cfg.seed;
    manifest["data"] = data_spec_json(cfg);
    const std::vector<std::pair<std::string, int>> splits = {
        {"train", cfg.n_train}, {"valid", cfg.n_valid}, {"test", cfg.n_test}};
    for (const auto& [name, count] : splits) {
        ensure_dir(out_dir + "/" + name);
        auto examples = cfm::gen_split(cfg.data, cfg.seed, name, count);
        json classes = json::array();
        json styles = json::array();
        for (int i = 0; i < count; ++i) {
            const cfm::Example& ex = examples[static_cast<std::size_t>(i)];
            cfm::write_features(example_path(out_dir, name, i, 'h'),
                                cfm::FeatureFile::from_tensor(ex.h, rate_h));
            cfm::write_features(example_path(out_dir, name, i, 'e'),
                                cfm::FeatureFile::from_tensor(ex.e, rate_e));
            hash_floats(hash, ex.h.storage());
            hash_floats(hash, ex.e.storage());
            classes.push_back(ex.class_id);
            styles.push_back(ex.style);
        }
        manifest["splits"][name] = json{{"count", count},
                                        {"classes", std::move(classes)},
                                        {"styles", std::move(styles)}};
    }
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(hash));
    manifest["corpus_hash"] = std::string(hex);
    std::ofstream os(out_dir + "/manifest.json", std::ios::binary | std::ios::trunc);
    if (!os) throw cfm::IoError("cannot write manifest in " + out_dir);
    os << manifest.dump(2) << "\n";
    return std::string(hex);
}

std::vector<cfm::Example> load_split(const cfm::RunConfig& cfg,
                                     const std::string& data_dir,
                                     const std::string& split) {
    std::ifstream is(data_dir + "/manifest.json");
    if (!is) throw cfm::IoError("no manifest.json in " + data_dir);
    json manifest;
    try {
        is >> manifest;
    } catch (const json::exception& e) {
        throw cfm::IoError(std::string("bad manifest: ") + e.what());
    }
    if (manifest["data"] != data_spec_json(cfg)) {
        throw cfm::UsageError("corpus in " + data_dir +
                              " was generated with a different data spec");
    }
    if (!manifest["splits"].contains(split)) {
        throw cfm::IoError("manifest has no split named " + split);
    }
    const json& info = manifest["splits"][split];
    const int count = info["count"].get<int>();
    std::vector<cfm::Example> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        cfm::Example ex;
        ex.class_id = info["classes"][static_cast<std::size_t>(i)].get<int>();
        ex.style = info["styles"][static_cast<std::size_t>(i)].get<double>();
        ex.cond = cfm::make_cond_tokens(cfg.data, ex.class_id, ex.style);
        ex.h = cfm::read_features(example_path(data_dir, split, i, 'h')).to_tensor();
        ex.e = cfm::read_features(example_path(data_dir, split, i, 'e')).to_tensor();
        out.push_back(std::move(ex));
    }
    return out;
}

void save_stage_checkpoint(const std::string& path,
                           const cfm::VectorFieldModel<float>& model,
                           const cfm::AdamState<float>* opt, std::uint64_t step,
                           cfm::Stage stage, double sigma_min) {
    const std::string cfg_text =
        cfm::checkpoint_config_text(model.config, stage, sigma_min);
    cfm::save_checkpoint(path, cfm::make_checkpoint(model, opt, step, cfg_text));
}

cfm::VectorFieldModel<float> load_stage_model(const std::string& path,
                                              const cfm::VFConfig& expected,
                                              cfm::Stage stage, double sigma_min) {
    cfm::Checkpoint ckpt = cfm::load_checkpoint(path);
    cfm::VectorFieldModel<float> model = cfm::init_vector_field<float>(expected, 0);
    const std::string expected_text =
        cfm::checkpoint_config_text(expected, stage, sigma_min);
    cfm::restore_checkpoint(ckpt, expected_text, model,
                            static_cast<cfm::AdamState<float>*>(nullptr));
    return model;
}

cfm::CascadeBundle<float> load_bundle(const cfm::RunConfig& cfg,
                                      const std::string& ckpt1,
                                      const std::string& ckpt2) {
    cfm::CascadeBundle<float> bundle;
    bundle.semantic_len = cfg.data.semantic_len;
    bundle.acoustic_len = cfg.data.acoustic_len;
    bundle.semantic_dim = cfg.data.semantic_dim;
    bundle.acoustic_dim = cfg.data.acoustic_dim;
    bundle.stage1 = load_stage_model(ckpt1, cfg.stage1, cfm::Stage::Semantic,
                                     cfg.sampling.sigma_min);
    bundle.stage2 = load_stage_model(ckpt2, cfg.stage2, cfm::Stage::Acoustic,
                                     cfg.sampling.sigma_min);
    bundle.validate();
    return bundle;
}

std::uint64_t stage_train_seed(std::uint64_t root, cfm::Stage stage) {
    return cfm::splitmix64(root ^ cfm::fnv1a64(cfm::stage_name(stage)) ^
                           0x7261696e5f736eULL);
}

}  // namespace cfmgen
