#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfm/tensor.hpp"

namespace cfm {

/// Frame-sequence container for interchange with external feature
/// extractors. Little-endian binary: magic "CFMF", u32 version=1, u32 dim,
/// u64 frames, f32 frame rate, then float32 frames row-major.
struct FeatureFile {
    static constexpr std::uint32_t kVersion = 1;

    std::uint32_t dim = 0;
    std::uint64_t frames = 0;
    float frame_rate = 1.0f;
    std::vector<float> data;  // frames * dim values

    Tensor to_tensor() const;
    static FeatureFile from_tensor(const Tensor& t, float frame_rate);
};

void write_features(const std::string& path, const FeatureFile& f);
FeatureFile read_features(const std::string& path);

}  // namespace cfm
