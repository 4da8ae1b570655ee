#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bgait/keypose.hpp"
#include "bgait/recognizer.hpp"
#include "bgait/temporal_filter.hpp"

namespace bgait {

// Overlap score 2*sum(F*F_hat) / (sum(F^2) + sum(F_hat^2)); two all-zero
// frames score 1 (empty masks agree perfectly).
double dice_score(const SilhouetteFrame& f, const SilhouetteFrame& f_hat);

struct EvalRecord {
    std::string sequence_id;
    std::string true_label;
    std::vector<Prediction> ranked;  // descending probability
    double occlusion_degree = 0.0;   // realized fraction
    double reconstruction_dice = -1.0;  // < 0 = not measured
};

// accuracy% at rank r = fraction of records with the true label in the top r.
std::vector<std::pair<int, double>> cmc_curve(const std::vector<EvalRecord>& records,
                                              int max_rank);

// Trained pipeline stages wired together for evaluation runs.
struct PipelineHandles {
    const KeyPoseSet* keyposes = nullptr;
    CvaeModel* cvae = nullptr;
    BilstmModel* bilstm = nullptr;
    GeinetModel* geinet = nullptr;
};

// Labels one probe end to end: pose assignment, latent reconstruction of
// occluded frames, energy image, ranked classification. When `clean` is
// given, reconstruction_dice averages dice over the occluded positions.
EvalRecord evaluate_probe(const GaitSequence& probe, const PipelineHandles& handles,
                          const GaitSequence* clean = nullptr);

struct SweepRow {
    double bucket_lo, bucket_hi;  // realized-fraction bucket [lo, hi)
    int n_probes = 0;
    int n_correct = 0;
    double accuracy_pct() const { return n_probes ? 100.0 * n_correct / n_probes : 0.0; }
};

struct SweepReport {
    std::vector<SweepRow> rows;
    double unoccluded_accuracy_pct = 0.0;
};

struct SweepOptions {
    std::vector<double> degrees{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    int trials_per_degree = 1;
    std::uint64_t seed = 7;
    int jobs = 1;
};

// Occludes each labeled probe at every scheduled degree and buckets rank-1
// hits by the realized occlusion fraction (decile buckets).
SweepReport occlusion_sweep(const std::vector<GaitSequence>& probes,
                            const PipelineHandles& handles, const SweepOptions& options);

struct KfoldResult {
    int k;
    std::vector<double> fold_accuracies_pct;
    double min, q1, median, q3, max;
};

// Stratified k-fold over a labeled energy-image gallery, retraining the
// classifier per fold.
std::vector<KfoldResult> kfold_robustness(
    const std::vector<std::pair<SilhouetteFrame, std::string>>& corpus,
    const std::vector<int>& k_values, const GeinetConfig& model_config,
    const TrainConfig& train_config);

void write_cmc_csv(const std::vector<std::pair<int, double>>& curve,
                   const std::filesystem::path& file);
void write_sweep_csv(const SweepReport& report, const std::filesystem::path& file);
void write_kfold_csv(const std::vector<KfoldResult>& results, const std::filesystem::path& file);
void write_records_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& file);

// Plot rasters (8-bit grayscale): line chart, bar chart, box plot.
void render_cmc_plot(const std::vector<std::pair<int, double>>& curve,
                     const std::filesystem::path& file);
void render_sweep_plot(const SweepReport& report, const std::filesystem::path& file);
void render_kfold_plot(const std::vector<KfoldResult>& results,
                       const std::filesystem::path& file);

}  // namespace bgait
