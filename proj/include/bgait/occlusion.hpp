#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bgait/latent.hpp"
#include "bgait/silhouette.hpp"

namespace bgait {

// Bernoulli keep/drop pattern: position i is kept iff its uniform draw
// exceeds the requested occlusion degree.
struct OcclusionMask {
    std::vector<bool> keep;
    double degree = 0.0;
    std::uint64_t seed = 0;

    int dropped_count() const;
    double dropped_fraction() const;
};

OcclusionMask sample_mask(int n, double degree, std::uint64_t seed);

// Dropped positions become all-zero latent vectors; kept positions are
// bit-identical to the input.
LatentWindow apply_mask_latent(const LatentWindow& window, const OcclusionMask& mask);

// Dropped frames are replaced by flagged all-zero placeholder frames.
GaitSequence occlude_sequence(const GaitSequence& seq, double degree, std::uint64_t seed);

void save_mask(const OcclusionMask& mask, const std::filesystem::path& file);

}  // namespace bgait
