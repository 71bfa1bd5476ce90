#include <doctest.h>

#include "cfm/config.hpp"

using namespace cfm;

TEST_CASE("default config is valid and round-trips through JSON") {
    RunConfig cfg = default_run_config();
    CHECK_NOTHROW(cfg.validate());
    const std::string text = run_config_to_json(cfg);
    RunConfig parsed = parse_run_config(text);
    CHECK(run_config_to_json(parsed) == text);
    CHECK(parsed.stage1.in_channels == 2 * parsed.data.semantic_dim);
    CHECK(parsed.stage2.in_channels ==
          2 * parsed.data.acoustic_dim + parsed.data.semantic_dim);
}

TEST_CASE("unknown keys are rejected at every level") {
    CHECK_THROWS_AS(parse_run_config("{\"sed\": 1}"), UsageError);
    CHECK_THROWS_AS(parse_run_config("{\"data\": {\"n_class\": 4}}"), UsageError);
    CHECK_THROWS_AS(parse_run_config("{\"stage1\": {\"depth\": 4}}"), UsageError);
    CHECK_THROWS_AS(parse_run_config("{\"sampling\": {\"alpha\": 1.0}}"), UsageError);
    CHECK_THROWS_AS(parse_run_config("not json"), UsageError);
}

TEST_CASE("partial configs overlay the defaults") {
    RunConfig cfg = parse_run_config(
        "{\"seed\": 42, \"data\": {\"n_classes\": 3, \"semantic_dim\": 4},"
        " \"sampling\": {\"method\": \"euler\", \"steps\": 7}}");
    CHECK(cfg.seed == 42);
    CHECK(cfg.data.n_classes == 3);
    CHECK(cfg.data.semantic_dim == 4);
    CHECK(cfg.data.acoustic_dim == default_run_config().data.acoustic_dim);
    CHECK(cfg.sampling.method == SolverMethod::Euler);
    CHECK(cfg.sampling.steps == 7);
    // derived channel counts follow the overridden data spec
    CHECK(cfg.stage1.in_channels == 8);
    CHECK(cfg.stage1.cond_dim == 5);
}

TEST_CASE("bad values fail validation") {
    CHECK_THROWS_AS(parse_run_config("{\"sampling\": {\"method\": \"rk4\"}}"),
                    UsageError);
    CHECK_THROWS_AS(parse_run_config("{\"sampling\": {\"sigma_min\": 0.0}}"),
                    RangeError);
    CHECK_THROWS_AS(parse_run_config("{\"data\": {\"n_classes\": 0}}"), RangeError);
    CHECK_THROWS_AS(
        parse_run_config("{\"train_semantic\": {\"warmup_steps\": 50, \"total_steps\": 10}}"),
        RangeError);
}

TEST_CASE("checkpoint config text distinguishes stages and geometry") {
    RunConfig cfg = default_run_config();
    const std::string a =
        checkpoint_config_text(cfg.stage1, Stage::Semantic, cfg.sampling.sigma_min);
    const std::string b =
        checkpoint_config_text(cfg.stage2, Stage::Acoustic, cfg.sampling.sigma_min);
    const std::string a2 =
        checkpoint_config_text(cfg.stage1, Stage::Semantic, cfg.sampling.sigma_min);
    CHECK(a == a2);
    CHECK(a != b);
}
