#pragma once
#include <ds2p/core.hpp>
#include <ds2p/rng.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace testutil {

inline ds2p::Matrix gaussian(ds2p::Index rows, ds2p::Index cols, std::uint64_t seed)
{
    ds2p::Rng rng(seed);
    ds2p::Matrix m(rows, cols);
    for (ds2p::Index j = 0; j < cols; ++j) {
        for (ds2p::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    }
    return m;
}

inline ds2p::Vector gaussian_vector(ds2p::Index n, std::uint64_t seed)
{
    return gaussian(n, 1, seed).col(0);
}

// Fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("ds2p_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testutil
