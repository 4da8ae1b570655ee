#pragma once

#include <cstdint>

#include "bgait/silhouette.hpp"

namespace bgait {

struct SyntheticWalkerParams {
    int period = 30;            // frames per gait cycle
    double limb_amplitude = 14; // pixels, horizontal swing at the foot
    double torso_size = 16;     // pixels, torso half-width on the render canvas
    double phase_offset = 0.0;  // fraction in [0,1)
    double noise_rate = 0.0;    // fraction of pixels flipped per frame, <= 0.1
};

// Procedural walking silhouette: torso ellipse, head, two legs and one
// swinging arm whose inclinations vary sinusoidally with the period.
// Deterministic given (params, seed); exactly periodic when noise_rate = 0.
GaitSequence generate_synthetic_walker(const SyntheticWalkerParams& params, int n_frames,
                                       std::uint64_t seed,
                                       FrameGeometry geometry = FrameGeometry{});

// Ground-truth phase (fraction of gait cycle elapsed) for frame index i of a
// sequence produced by generate_synthetic_walker with these params.
double synthetic_phase(const SyntheticWalkerParams& params, int frame_index);

}  // namespace bgait
