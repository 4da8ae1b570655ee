#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "bgait/config.hpp"
#include "bgait/nn.hpp"
#include "bgait/silhouette.hpp"

namespace bgait {

// Gait energy image: per-pixel mean over the frames of one sequence.
SilhouetteFrame compute_gei(const GaitSequence& seq);

struct GeinetConfig {
    FrameGeometry geometry{64, 64};
    int conv1_channels = 18;  // 7x7 kernels
    int conv2_channels = 45;  // 5x5 kernels
    int n_classes = 0;
};

struct Prediction {
    std::string label;
    double score;  // softmax probability
};

// Two conv+pool stages and a softmax head over subject labels.
class GeinetModel {
public:
    GeinetModel(const GeinetConfig& config, std::vector<std::string> class_labels,
                std::uint64_t init_seed);

    const GeinetConfig& config() const { return config_; }
    const std::vector<std::string>& class_labels() const { return class_labels_; }

    // Columns are flattened energy images.
    nn::Matrix logits(const nn::Matrix& geis, bool training);
    void backward(const nn::Matrix& dlogits);
    std::vector<nn::Param*> params();

    // All classes ranked by descending probability; exact ties keep the
    // class-label registration order.
    std::vector<Prediction> classify(const SilhouetteFrame& gei);

    void save(const std::filesystem::path& file) const;
    static GeinetModel load(const std::filesystem::path& file);

private:
    GeinetConfig config_;
    std::vector<std::string> class_labels_;
    nn::Sequential net_;
};

struct GeinetEpochLog {
    int epoch;
    double l_ce;
    double accuracy;
};

GeinetModel train_geinet(const std::vector<std::pair<SilhouetteFrame, std::string>>& gallery,
                         const GeinetConfig& config, const TrainConfig& train_config,
                         std::vector<GeinetEpochLog>* log = nullptr);

struct PredictionRow {
    std::string sequence_id;
    std::string true_label;   // empty = unknown
    std::string top_label;
    double top_score;
};
void write_predictions(const std::vector<PredictionRow>& rows, const std::filesystem::path& file);

}  // namespace bgait
