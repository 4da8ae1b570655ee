#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "bgait/config.hpp"
#include "bgait/evaluation.hpp"
#include "bgait/synthetic.hpp"

namespace bgait {

// Per-subject walker parameters: deterministic, visibly distinct gaits.
SyntheticWalkerParams walker_params_for_subject(int subject_index, std::uint64_t seed);

// n_subjects x seqs_per_subject sequences; labels "s00".."sNN", ids
// "s00_seq0" etc. Sequences of one subject differ by phase offset and noise
// seed only.
std::vector<GaitSequence> build_walker_corpus(int n_subjects, int seqs_per_subject,
                                              int frames_per_sequence, FrameGeometry geometry,
                                              std::uint64_t seed);

// Ground-truth-free cycle annotation via the period/phase estimators.
std::vector<CycleAnnotatedSequence> annotate_cycles(const std::vector<GaitSequence>& sequences);

// All trained stages of one pipeline run.
struct TrainedPipeline {
    KeyPoseSet keyposes;
    std::unique_ptr<CvaeModel> cvae;
    std::unique_ptr<BilstmModel> bilstm;
    std::unique_ptr<GeinetModel> geinet;

    PipelineHandles handles() { return {&keyposes, cvae.get(), bilstm.get(), geinet.get()}; }
};

// Per-frame states for one sequence under a key-pose set.
PoseAssignment assign_poses(const GaitSequence& seq, const KeyPoseSet& keyposes);

// Latent means of every frame (occluded placeholders become zero vectors).
std::vector<Eigen::VectorXf> encode_sequence_latents(const GaitSequence& seq,
                                                     const PoseAssignment& pa, int k,
                                                     CvaeModel& cvae);

// End-to-end training on an unoccluded labeled corpus: key poses, then the
// autoencoder on (frame, assigned state) pairs, then the latent filter on
// sliding windows, then the classifier on per-sequence energy images.
TrainedPipeline train_pipeline(const std::vector<GaitSequence>& corpus,
                               const PipelineConfig& config);

}  // namespace bgait
