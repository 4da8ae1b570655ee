#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "bgait/cvae.hpp"
#include "bgait/latent.hpp"
#include "bgait/pose_graph.hpp"

namespace bgait {

struct BilstmConfig {
    int d_z = 64;
    int hidden = 256;  // per direction

    static BilstmConfig from(const PipelineConfig& p) { return {p.d_z, p.bilstm_hidden}; }
};

// Window-to-window latent filter: three stacked bidirectional recurrent
// stages and a recurrent output stage with a per-step linear projection
// back to latent width.
class BilstmModel {
public:
    BilstmModel(const BilstmConfig& config, std::uint64_t init_seed);

    const BilstmConfig& config() const { return config_; }

    // xs: window as kWindowLen matrices of (d_z x batch).
    std::vector<nn::Matrix> forward(const std::vector<nn::Matrix>& xs, bool training);
    void backward(const std::vector<nn::Matrix>& d_out);

    std::vector<nn::Param*> params();

    void save(const std::filesystem::path& file) const;
    static BilstmModel load(const std::filesystem::path& file);

private:
    BilstmConfig config_;
    std::unique_ptr<nn::BiLstm> b1_, b2_, b3_;
    std::unique_ptr<nn::Lstm> out_lstm_;
    std::unique_ptr<nn::TimeDistributedDense> out_proj_;
};

LatentWindow filter_window(const LatentWindow& w, BilstmModel& model);

// Dense stride-1 windows over each latent sequence; sequences shorter than
// the window are skipped (counted in *skipped when provided).
std::vector<LatentWindow> make_training_windows(
    const std::vector<std::vector<Eigen::VectorXf>>& sequences, int* skipped = nullptr);

struct BilstmEpochLog {
    int epoch;
    double l_mse;
};

struct BilstmTrainOptions {
    std::vector<double> degree_schedule{0.1, 0.3, 0.5, 0.7};
    bool freeze_masks = false;  // fresh Bernoulli mask per batch unless set
};

// Minimizes the MSE between the filtered masked window and the clean
// window; the mask degree cycles through degree_schedule per batch.
BilstmModel train_bilstm(const std::vector<LatentWindow>& windows,
                         const BilstmConfig& model_config, const TrainConfig& train_config,
                         const BilstmTrainOptions& options = {},
                         std::vector<BilstmEpochLog>* log = nullptr);

void write_bilstm_log(const std::vector<BilstmEpochLog>& log, const std::filesystem::path& file);

// Full reconstruction pass: encodes every frame to its latent mean (zeros
// for occluded frames), filters all stride-1 windows, averages overlapping
// outputs at occluded indices, and decodes them with the key pose
// interpolated cyclically between the nearest non-occluded neighbors.
// Non-occluded frames pass through bit-identical.
GaitSequence reconstruct_sequence(const GaitSequence& seq, const PoseAssignment& pa, int k,
                                  CvaeModel& cvae, BilstmModel& bilstm);

struct ReconstructionRow {
    int frame;
    bool was_occluded;
    int condition_state;
    double dice = -1.0;  // optional, < 0 when no ground truth
};
void write_reconstruction_report(const std::vector<ReconstructionRow>& rows,
                                 const std::filesystem::path& file);

// Condition states used by reconstruct_sequence for decoding, exposed for
// reporting: pass-through frames keep their assignment, occluded frames get
// the interpolated key pose.
std::vector<int> reconstruction_conditions(const PoseAssignment& pa, int k);

}  // namespace bgait
