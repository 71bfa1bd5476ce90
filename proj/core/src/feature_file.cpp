#include "cfm/feature_file.hpp"

#include <cstring>
#include <fstream>

#include "cfm/errors.hpp"

namespace cfm {

Tensor FeatureFile::to_tensor() const {
    return Tensor({static_cast<std::size_t>(frames), static_cast<std::size_t>(dim)},
                  data);
}

FeatureFile FeatureFile::from_tensor(const Tensor& t, float frame_rate) {
    if (t.rank() != 2) throw ShapeError("FeatureFile: rank-2 tensor required");
    FeatureFile f;
    f.dim = static_cast<std::uint32_t>(t.cols());
    f.frames = static_cast<std::uint64_t>(t.rows());
    f.frame_rate = frame_rate;
    f.data = t.storage();
    return f;
}

namespace {

template <class V>
void put(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V get(std::istream& is, const char* what) {
    V v;
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw IoError(std::string("feature file: truncated ") + what);
    return v;
}

}  // namespace

void write_features(const std::string& path, const FeatureFile& f) {
    if (f.dim == 0) throw IoError("feature file: zero dim rejected");
    if (f.data.size() != static_cast<std::size_t>(f.frames) * f.dim) {
        throw IoError("feature file: payload size does not match header");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("feature file: cannot open for writing: " + path);
    os.write("CFMF", 4);
    put<std::uint32_t>(os, FeatureFile::kVersion);
    put<std::uint32_t>(os, f.dim);
    put<std::uint64_t>(os, f.frames);
    put<float>(os, f.frame_rate);
    os.write(reinterpret_cast<const char*>(f.data.data()),
             static_cast<std::streamsize>(f.data.size() * sizeof(float)));
    if (!os) throw IoError("feature file: write failed: " + path);
}

FeatureFile read_features(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("feature file: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CFMF", 4) != 0) {
        throw IoError("feature file: bad magic in " + path);
    }
    const auto version = get<std::uint32_t>(is, "version");
    if (version != FeatureFile::kVersion) {
        throw IoError("feature file: unsupported version " + std::to_string(version));
    }
    FeatureFile f;
    f.dim = get<std::uint32_t>(is, "dim");
    if (f.dim == 0) throw IoError("feature file: zero dim rejected");
    f.frames = get<std::uint64_t>(is, "frame count");
    f.frame_rate = get<float>(is, "frame rate");
    f.data.resize(static_cast<std::size_t>(f.frames) * f.dim);
    is.read(reinterpret_cast<char*>(f.data.data()),
            static_cast<std::streamsize>(f.data.size() * sizeof(float)));
    if (!is) throw IoError("feature file: truncated payload in " + path);
    return f;
}

}  // namespace cfm
