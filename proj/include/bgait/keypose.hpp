#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "bgait/silhouette.hpp"

namespace bgait {

// Linear subspace over mean-centered flattened silhouettes. Basis columns
// are orthonormal principal components ordered by descending variance.
struct PcaSubspace {
    Eigen::VectorXf mean_frame;
    Eigen::MatrixXf basis;  // (W*H) x dim, orthonormal columns
    int dim = 0;
    FrameGeometry geometry;

    Eigen::VectorXf project(const SilhouetteFrame& frame) const;
    Eigen::VectorXf project_flat(const Eigen::VectorXf& flat) const;
    Eigen::MatrixXf back_project(const Eigen::VectorXf& embedding) const;
};

PcaSubspace fit_pca(const std::vector<SilhouetteFrame>& frames, int dim, int max_samples = 0);

// Ordered generic key poses in the PCA subspace plus the occlusion-state
// cost tau.
struct KeyPoseSet {
    std::vector<Eigen::VectorXf> embeddings;  // K entries, temporal phase order
    PcaSubspace subspace;
    double occlusion_threshold = 0.0;  // tau
    int k = 0;

    // Diagnostics from construction, kept for the report file.
    std::vector<double> phase_means;
    std::vector<int> member_counts;

    void save(const std::filesystem::path& file) const;
    static KeyPoseSet load(const std::filesystem::path& file);
    void write_report(const std::filesystem::path& file) const;
    void export_pose_images(const std::filesystem::path& dir) const;
};

struct CycleAnnotatedSequence {
    GaitSequence sequence;
    std::vector<double> phases;  // per-frame fraction of gait cycle in [0,1)
};

struct KeyPoseBuildOptions {
    double tau_percentile = 95.0;
    int max_iters = 100;
};

// Phase-constrained K-means: centroids are seeded from k equal-width phase
// bins and re-ordered by mean member phase after convergence, so index order
// follows temporal order within a gait cycle.
KeyPoseSet build_keyposes(const std::vector<CycleAnnotatedSequence>& sequences, int k,
                          const PcaSubspace& subspace, const KeyPoseBuildOptions& options = {});

// Cycle-period estimate from the autocorrelation of the per-frame
// foreground-area series; used to annotate real data with phases.
int estimate_period(const GaitSequence& seq);
std::vector<double> estimate_phases(const GaitSequence& seq);

}  // namespace bgait
