#include "bgait/pipeline.hpp"

#include <random>

namespace bgait {

SyntheticWalkerParams walker_params_for_subject(int subject_index, std::uint64_t seed) {
    std::mt19937_64 rng(seed + 0x51ed2700dcee05abULL * (subject_index + 1));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto frac = [](double x) { return x - std::floor(x); };
    // Low-discrepancy spread plus a small seeded jitter: independent draws
    // occasionally produce near-twin subjects, which defeats the corpus's
    // purpose of visibly distinct gaits.
    SyntheticWalkerParams p;
    p.period = 22 + (subject_index * 7) % 16;                                      // 22..37
    p.limb_amplitude = 8.0 + 12.0 * frac(0.6180339887 * subject_index + 0.05 * unit(rng));
    p.torso_size = 10.0 + 12.0 * frac(0.4142135624 * subject_index + 0.05 * unit(rng));
    p.phase_offset = 0.0;
    p.noise_rate = 0.0;
    return p;
}

std::vector<GaitSequence> build_walker_corpus(int n_subjects, int seqs_per_subject,
                                              int frames_per_sequence, FrameGeometry geometry,
                                              std::uint64_t seed) {
    std::vector<GaitSequence> corpus;
    corpus.reserve(static_cast<std::size_t>(n_subjects) * seqs_per_subject);
    char label[16];
    for (int s = 0; s < n_subjects; ++s) {
        SyntheticWalkerParams base = walker_params_for_subject(s, seed);
        std::snprintf(label, sizeof(label), "s%02d", s);
        for (int q = 0; q < seqs_per_subject; ++q) {
            SyntheticWalkerParams p = base;
            p.phase_offset = static_cast<double>(q) / seqs_per_subject;
            GaitSequence seq = generate_synthetic_walker(
                p, frames_per_sequence, seed + 1000ULL * s + q, geometry);
            seq.subject_label = label;
            seq.sequence_id = std::string(label) + "_seq" + std::to_string(q);
            corpus.push_back(std::move(seq));
        }
    }
    return corpus;
}

std::vector<CycleAnnotatedSequence> annotate_cycles(
    const std::vector<GaitSequence>& sequences) {
    std::vector<CycleAnnotatedSequence> out;
    out.reserve(sequences.size());
    for (const auto& seq : sequences) out.push_back({seq, estimate_phases(seq)});
    return out;
}

PoseAssignment assign_poses(const GaitSequence& seq, const KeyPoseSet& keyposes) {
    return map_frames(distance_matrix(seq, keyposes), StateTransitionModel{keyposes.k});
}

std::vector<Eigen::VectorXf> encode_sequence_latents(const GaitSequence& seq,
                                                     const PoseAssignment& pa, int k,
                                                     CvaeModel& cvae) {
    const int n = seq.size();
    const int d = cvae.config().d_z;
    std::vector<Eigen::VectorXf> latents(n, Eigen::VectorXf::Zero(d));
    std::vector<int> vis;
    for (int i = 0; i < n; ++i)
        if (!seq.frames[i].is_occluded_placeholder && pa.states[i] != k + 1) vis.push_back(i);
    if (vis.empty()) return latents;
    nn::Matrix frames(cvae.config().geometry.pixel_count(), vis.size());
    nn::Matrix conds(kConditionBits, vis.size());
    for (std::size_t j = 0; j < vis.size(); ++j) {
        frames.col(j) = seq.frames[vis[j]].flatten();
        conds.col(j) = condition_vector(pa.states[vis[j]]).bits;
    }
    nn::Matrix mu, log_sigma;
    cvae.encode_batch(frames, conds, &mu, &log_sigma);
    for (std::size_t j = 0; j < vis.size(); ++j) latents[vis[j]] = mu.col(j);
    return latents;
}

TrainedPipeline train_pipeline(const std::vector<GaitSequence>& corpus,
                               const PipelineConfig& config) {
    if (corpus.empty()) throw EmptyCorpus("no training sequences");

    std::vector<SilhouetteFrame> all_frames;
    for (const auto& seq : corpus)
        for (const auto& f : seq.frames)
            if (!f.is_occluded_placeholder) all_frames.push_back(f);

    TrainedPipeline tp;
    PcaSubspace subspace = fit_pca(all_frames, config.pca_dim, config.pca_max_samples);
    tp.keyposes = build_keyposes(annotate_cycles(corpus), config.keypose_k, subspace,
                                 {config.tau_percentile, config.kmeans_max_iters});

    // frame-state pairs for the autoencoder
    std::vector<PoseAssignment> assignments;
    assignments.reserve(corpus.size());
    std::vector<std::pair<SilhouetteFrame, ConditionVector>> cvae_corpus;
    for (const auto& seq : corpus) {
        assignments.push_back(assign_poses(seq, tp.keyposes));
        const auto& pa = assignments.back();
        for (int i = 0; i < seq.size(); ++i) {
            if (pa.states[i] == tp.keyposes.k + 1) continue;  // skip occlusion-labeled frames
            cvae_corpus.emplace_back(seq.frames[i], condition_vector(pa.states[i]));
        }
    }
    tp.cvae = std::make_unique<CvaeModel>(
        train_cvae(cvae_corpus, CvaeConfig::from(config), config.cvae_train));

    // latent windows for the filter
    std::vector<std::vector<Eigen::VectorXf>> latent_seqs;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        latent_seqs.push_back(
            encode_sequence_latents(corpus[i], assignments[i], tp.keyposes.k, *tp.cvae));
    auto windows = make_training_windows(latent_seqs);
    BilstmTrainOptions bopts;
    bopts.degree_schedule = config.degree_schedule;
    bopts.freeze_masks = config.freeze_masks;
    tp.bilstm = std::make_unique<BilstmModel>(
        train_bilstm(windows, BilstmConfig::from(config), config.bilstm_train, bopts));

    // per-sequence energy images for the classifier
    std::vector<std::pair<SilhouetteFrame, std::string>> gallery;
    for (const auto& seq : corpus) gallery.emplace_back(compute_gei(seq), seq.subject_label);
    GeinetConfig gc;
    gc.geometry = config.geometry;
    tp.geinet = std::make_unique<GeinetModel>(
        train_geinet(gallery, gc, config.geinet_train));

    return tp;
}

}  // namespace bgait
