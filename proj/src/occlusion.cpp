#include "bgait/occlusion.hpp"

#include <fstream>
#include <random>

#include "bgait/errors.hpp"

namespace bgait {

int OcclusionMask::dropped_count() const {
    int n = 0;
    for (bool k : keep)
        if (!k) ++n;
    return n;
}

double OcclusionMask::dropped_fraction() const {
    return keep.empty() ? 0.0 : static_cast<double>(dropped_count()) / keep.size();
}

OcclusionMask sample_mask(int n, double degree, std::uint64_t seed) {
    if (degree < 0.0 || degree > 1.0)
        throw DegreeOutOfRange("occlusion degree must lie in [0,1]");
    if (n < 1) throw DegreeOutOfRange("mask length must be >= 1");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    OcclusionMask mask;
    mask.degree = degree;
    mask.seed = seed;
    mask.keep.reserve(n);
    for (int i = 0; i < n; ++i) mask.keep.push_back(unif(rng) > degree);
    return mask;
}

LatentWindow apply_mask_latent(const LatentWindow& window, const OcclusionMask& mask) {
    if (mask.keep.size() != window.vectors.size())
        throw LengthMismatch("mask length != window length");
    LatentWindow out;
    out.vectors.reserve(window.vectors.size());
    for (std::size_t i = 0; i < window.vectors.size(); ++i) {
        if (mask.keep[i])
            out.vectors.push_back(window.vectors[i]);
        else
            out.vectors.push_back(Eigen::VectorXf::Zero(window.vectors[i].size()));
    }
    return out;
}

GaitSequence occlude_sequence(const GaitSequence& seq, double degree, std::uint64_t seed) {
    const OcclusionMask mask = sample_mask(std::max(seq.size(), 1), degree, seed);
    GaitSequence out;
    out.subject_label = seq.subject_label;
    out.sequence_id = seq.sequence_id;
    out.frames.reserve(seq.frames.size());
    for (int i = 0; i < seq.size(); ++i) {
        if (mask.keep[i])
            out.frames.push_back(seq.frames[i]);
        else
            out.frames.push_back(SilhouetteFrame::placeholder(seq.frames[i].geometry()));
    }
    return out;
}

void save_mask(const OcclusionMask& mask, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath("cannot write " + file.string());
    for (bool k : mask.keep) out << (k ? 1 : 0);
    out << "\n";
}

}  // namespace bgait
