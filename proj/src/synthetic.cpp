#include "bgait/synthetic.hpp"

#include <cmath>
#include <random>

namespace bgait {

namespace {

constexpr int kCanvas = 128;
constexpr double kPi = 3.14159265358979323846;

struct Canvas {
    Eigen::MatrixXf px = Eigen::MatrixXf::Zero(kCanvas, kCanvas);

    void fill_ellipse(double cx, double cy, double rx, double ry) {
        for (int r = 0; r < kCanvas; ++r)
            for (int c = 0; c < kCanvas; ++c) {
                const double dx = (c - cx) / rx, dy = (r - cy) / ry;
                if (dx * dx + dy * dy <= 1.0) px(r, c) = 1.0f;
            }
    }

    // Capsule: all pixels within `thickness` of the segment (x0,y0)-(x1,y1).
    void fill_segment(double x0, double y0, double x1, double y1, double thickness) {
        const double vx = x1 - x0, vy = y1 - y0;
        const double len2 = vx * vx + vy * vy;
        for (int r = 0; r < kCanvas; ++r)
            for (int c = 0; c < kCanvas; ++c) {
                double t = len2 > 0 ? ((c - x0) * vx + (r - y0) * vy) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double dx = c - (x0 + t * vx), dy = r - (y0 + t * vy);
                if (dx * dx + dy * dy <= thickness * thickness) px(r, c) = 1.0f;
            }
    }
};

}  // namespace

double synthetic_phase(const SyntheticWalkerParams& params, int frame_index) {
    const double p =
        params.phase_offset + static_cast<double>(frame_index % params.period) / params.period;
    return p - std::floor(p);
}

GaitSequence generate_synthetic_walker(const SyntheticWalkerParams& params, int n_frames,
                                       std::uint64_t seed, FrameGeometry geometry) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    GaitSequence seq;
    seq.sequence_id = "synthetic";
    for (int i = 0; i < n_frames; ++i) {
        const double phase = synthetic_phase(params, i);
        const double s = std::sin(2.0 * kPi * phase);
        const double c = std::cos(2.0 * kPi * phase);

        Canvas canvas;
        const double cx = kCanvas / 2.0;
        const double bob = 3.0 * s;  // full-period vertical bob
        const double hip_y = 78.0, foot_y = 118.0;

        canvas.fill_ellipse(cx, 22.0 + bob, 9.0, 10.0);  // head
        canvas.fill_ellipse(cx, 55.0 + bob, params.torso_size * 0.5 + 3.0, 25.0);
        canvas.fill_segment(cx, hip_y, cx + params.limb_amplitude * s, foot_y, 4.5);
        canvas.fill_segment(cx, hip_y, cx - params.limb_amplitude * s, foot_y, 3.5);
        // single swinging arm, a quarter cycle ahead of the legs so that
        // (legs, arm) = (sin, cos) makes the silhouette injective in phase
        canvas.fill_segment(cx, 42.0 + bob, cx - 0.8 * params.limb_amplitude * c, 72.0 + bob, 3.0);

        SilhouetteFrame frame = normalize_frame(canvas.px, geometry);
        if (params.noise_rate > 0.0) {
            for (int r = 0; r < frame.pixels.rows(); ++r)
                for (int c = 0; c < frame.pixels.cols(); ++c)
                    if (unif(rng) < params.noise_rate)
                        frame.pixels(r, c) = 1.0f - frame.pixels(r, c);
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

}  // namespace bgait
