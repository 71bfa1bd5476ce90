#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "cfm/feature_file.hpp"
#include "cfm/rng.hpp"
#include "cfm/synthdata.hpp"

using namespace cfm;

TEST_CASE("gen_example: reproducibility and shape contract") {
    DataSpec spec;
    Rng a(101), b(101);
    Example e1 = gen_example(spec, 2, a);
    Example e2 = gen_example(spec, 2, b);
    CHECK(e1.class_id == 2);
    CHECK(e1.style == e2.style);
    for (std::size_t i = 0; i < e1.h.numel(); ++i) CHECK(e1.h.at(i) == e2.h.at(i));
    for (std::size_t i = 0; i < e1.e.numel(); ++i) CHECK(e1.e.at(i) == e2.e.at(i));

    CHECK(e1.h.shape() == std::vector<std::size_t>{32, 8});
    CHECK(e1.e.shape() == std::vector<std::size_t>{128, 16});
    CHECK(e1.cond.tokens.shape() == std::vector<std::size_t>{2, 6});

    CHECK_THROWS_AS(gen_example(spec, 4, a), RangeError);
    CHECK_THROWS_AS(gen_example(spec, -1, a), RangeError);
}

TEST_CASE("hierarchical consistency: noiseless e is the projected h") {
    DataSpec spec;
    spec.sigma_h = 0.0;
    spec.sigma_e = 0.0;
    Rng rng(7);
    Example ex = gen_example(spec, 1, rng);
    const Tensor proj = class_projection(spec, 1);
    const Tensor h_aligned = interpolate(ex.h, 128);
    for (std::size_t n = 0; n < 128; ++n) {
        for (std::size_t j = 0; j < 16; ++j) {
            double acc = 0.0;
            for (std::size_t d = 0; d < 8; ++d) {
                acc += static_cast<double>(h_aligned.at(n, d)) *
                       static_cast<double>(proj.at(j, d));
            }
            CHECK(std::fabs(static_cast<double>(ex.e.at(n, j)) - acc) <= 1e-5);
        }
    }
}

TEST_CASE("oracle: perfect on clean data, score contract, near-uniform on noise") {
    DataSpec clean;
    clean.sigma_h = 0.0;
    clean.sigma_e = 0.0;

    SUBCASE("clean class-c samples classify as c for every class") {
        for (int c = 0; c < clean.n_classes; ++c) {
            Rng rng(300 + static_cast<std::uint64_t>(c));
            Example ex = gen_example(clean, c, rng);
            auto [pred, scores] = oracle_classify(ex.h, clean);
            CHECK(pred == c);
            CHECK(scores.size() == 4);
        }
    }

    SUBCASE("100% accuracy over 1000 clean examples") {
        auto split = gen_split(clean, 42, "oracle-check", 1000);
        int hits = 0;
        for (const auto& ex : split) {
            if (oracle_classify(ex.h, clean).first == ex.class_id) ++hits;
        }
        CHECK(hits == 1000);
    }

    SUBCASE("acoustic-rate classification works through the projection") {
        auto split = gen_split(clean, 43, "oracle-acoustic", 200);
        int hits = 0;
        for (const auto& ex : split) {
            if (oracle_classify(ex.e, clean, clean.acoustic_omega_scale()).first ==
                ex.class_id) {
                ++hits;
            }
        }
        CHECK(hits == 200);
    }

    SUBCASE("pure noise scores are near-uniform compared to clean gaps") {
        Rng rng(55);
        double clean_gap = 0.0, noise_gap = 0.0;
        const int trials = 1000;
        for (int i = 0; i < trials; ++i) {
            Rng ex_rng = rng.fork("clean", static_cast<std::uint64_t>(i));
            Example ex = gen_example(clean, i % 4, ex_rng);
            auto [cp, cs] = oracle_classify(ex.h, clean);
            clean_gap += *std::max_element(cs.begin(), cs.end()) -
                         *std::min_element(cs.begin(), cs.end());

            Tensor noise({32, 8});
            for (std::size_t k = 0; k < noise.numel(); ++k) {
                noise.at(k) = static_cast<float>(rng.normal());
            }
            auto [np, ns] = oracle_classify(noise, clean);
            CHECK(np >= 0);
            CHECK(np < 4);
            noise_gap += *std::max_element(ns.begin(), ns.end()) -
                         *std::min_element(ns.begin(), ns.end());
        }
        CHECK(noise_gap / trials <= clean_gap / trials / 10.0);
    }

    SUBCASE("too-short input is rejected") {
        Tensor shorty({4, 8});
        CHECK_THROWS_AS(oracle_classify(shorty, clean), RangeError);
    }
}

TEST_CASE("gen_split is reproducible and class-balanced") {
    DataSpec spec;
    auto s1 = gen_split(spec, 9, "train", 64);
    auto s2 = gen_split(spec, 9, "train", 64);
    REQUIRE(s1.size() == 64);
    std::uint64_t h1 = 0xcbf29ce484222325ULL, h2 = h1;
    auto mix = [](std::uint64_t& h, const Tensor& t) {
        for (std::size_t i = 0; i < t.numel(); ++i) {
            std::uint32_t bits;
            float v = t.at(i);
            std::memcpy(&bits, &v, sizeof(bits));
            h ^= bits;
            h *= 0x100000001b3ULL;
        }
    };
    for (std::size_t i = 0; i < s1.size(); ++i) {
        CHECK(s1[i].class_id == static_cast<int>(i % 4));
        mix(h1, s1[i].h);
        mix(h1, s1[i].e);
        mix(h2, s2[i].h);
        mix(h2, s2[i].e);
    }
    CHECK(h1 == h2);

    auto other = gen_split(spec, 10, "train", 64);
    std::uint64_t h3 = 0xcbf29ce484222325ULL;
    for (const auto& ex : other) {
        mix(h3, ex.h);
        mix(h3, ex.e);
    }
    CHECK(h1 != h3);
}

TEST_CASE("feature file: round trip and error paths") {
    Rng rng(71);
    Tensor t({9, 5});
    for (std::size_t i = 0; i < t.numel(); ++i) {
        t.at(i) = static_cast<float>(rng.uniform(-3, 3));
    }
    FeatureFile f = FeatureFile::from_tensor(t, 4.0f);
    const std::string path = "test_features.cfmf";
    write_features(path, f);
    FeatureFile g = read_features(path);
    CHECK(g.dim == 5);
    CHECK(g.frames == 9);
    CHECK(g.frame_rate == 4.0f);
    REQUIRE(g.data.size() == f.data.size());
    for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(f.data[i] == g.data[i]);
    Tensor back = g.to_tensor();
    CHECK(back.shape() == t.shape());

    SUBCASE("truncated payload") {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes(60);
        in.read(bytes.data(), 60);
        in.close();
        std::ofstream out(path + ".trunc", std::ios::binary);
        out.write(bytes.data(), 60);
        out.close();
        CHECK_THROWS_AS(read_features(path + ".trunc"), IoError);
        std::remove((path + ".trunc").c_str());
    }

    SUBCASE("bad magic") {
        std::ofstream out(path + ".bad", std::ios::binary);
        out.write("NOPE", 4);
        out.write("xxxxxxxxxxxxxxxx", 16);
        out.close();
        CHECK_THROWS_AS(read_features(path + ".bad"), IoError);
        std::remove((path + ".bad").c_str());
    }

    SUBCASE("zero dim rejected") {
        FeatureFile bad;
        bad.dim = 0;
        bad.frames = 0;
        CHECK_THROWS_AS(write_features(path + ".zero", bad), IoError);
    }

    std::remove(path.c_str());
}
