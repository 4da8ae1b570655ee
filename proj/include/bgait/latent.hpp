#pragma once

#include <Eigen/Core>
#include <vector>

namespace bgait {

inline constexpr int kWindowLen = 6;

// Six consecutive latent vectors, the recurrent filter's unit of work.
struct LatentWindow {
    std::vector<Eigen::VectorXf> vectors;  // length kWindowLen, each d_z wide

    int width() const { return vectors.empty() ? 0 : static_cast<int>(vectors[0].size()); }
};

}  // namespace bgait
