#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bgait/silhouette.hpp"

namespace bgait {

struct TrainConfig {
    int epochs = 100;
    double learning_rate = 0.01;
    int batch_size = 32;
    std::uint64_t seed = 1;
};

// Every pipeline knob with a default; a serialized config plus the seeds is
// sufficient to reproduce a run bit-for-bit in single-threaded mode.
struct PipelineConfig {
    FrameGeometry geometry{64, 64};

    // keypose
    int pca_dim = 32;
    int pca_max_samples = 2000;
    int keypose_k = 16;
    double tau_percentile = 95.0;
    int kmeans_max_iters = 100;

    // cvae
    int d_z = 64;
    double lambda1 = 1.0;
    double lambda2 = 0.5;
    std::string kl_form = "summed";  // summed | standard
    int cvae_channels1 = 32;
    int cvae_channels2 = 64;
    int cvae_channels3 = 128;
    int cvae_cond_embed = 32;
    int cvae_shared_dense = 256;
    TrainConfig cvae_train{100, 0.001, 32, 1};

    // temporal filter
    int window_len = 6;
    int bilstm_hidden = 256;
    std::vector<double> degree_schedule{0.1, 0.3, 0.5, 0.7};
    bool freeze_masks = false;  // resample the occlusion mask each batch unless set
    TrainConfig bilstm_train{100, 0.001, 32, 2};

    // recognizer
    TrainConfig geinet_train{50, 0.001, 16, 3};

    std::uint64_t seed = 42;

    void save(const std::filesystem::path& file) const;
    static PipelineConfig load(const std::filesystem::path& file);

    // Applies `section.key = value` overrides onto *this.
    void apply_line(const std::string& line);
};

}  // namespace bgait
