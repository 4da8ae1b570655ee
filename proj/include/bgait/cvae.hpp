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

inline constexpr int kConditionBits = 17;  // 16 key poses + occlusion flag

// One-hot key-pose / occlusion condition.
struct ConditionVector {
    Eigen::VectorXf bits;  // length 17, exactly one bit set
};

// state 1..16 -> key-pose bit, state 17 -> occlusion bit.
ConditionVector condition_vector(int state_index);

struct LatentDistribution {
    Eigen::VectorXf mu;
    Eigen::VectorXf log_sigma;
};

struct LatentVector {
    Eigen::VectorXf z;
};

// z = mu + exp(log_sigma) * eps with eps ~ N(0,1) from a seeded generator.
LatentVector sample_latent(const LatentDistribution& dist, std::uint64_t seed);

struct CvaeLossReport {
    double l_rec = 0.0;
    double l_kl = 0.0;
    double l_total = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 0.5;
};

// Reconstruction and divergence terms for one frame pair. `kl_form`
// selects between the summed (mu^2 + sigma - log sigma - 1) divergence and
// the standard Gaussian KL.
CvaeLossReport cvae_loss(const SilhouetteFrame& f, const SilhouetteFrame& f_hat,
                         const LatentDistribution& dist, double lambda1, double lambda2,
                         const std::string& kl_form = "summed");

// Batched loss + analytic gradients; the training loop and the gradient
// checks both go through this path. Frames are flattened columns, values
// clamped to [eps, 1-eps] before the cross-entropy logs.
struct CvaeLossGrads {
    double l_rec, l_kl, l_total;
    nn::Matrix d_f_hat;      // dL/df_hat
    nn::Matrix d_mu;         // KL part only
    nn::Matrix d_log_sigma;  // KL part only
};
CvaeLossGrads cvae_loss_grads(const nn::Matrix& f, const nn::Matrix& f_hat,
                              const nn::Matrix& mu, const nn::Matrix& log_sigma, double lambda1,
                              double lambda2, const std::string& kl_form);

struct CvaeConfig {
    FrameGeometry geometry{64, 64};
    int d_z = 64;
    int channels1 = 32, channels2 = 64, channels3 = 128;
    int cond_embed = 32;
    int shared_dense = 256;
    double lambda1 = 1.0;
    double lambda2 = 0.5;
    std::string kl_form = "summed";

    static CvaeConfig from(const PipelineConfig& p);
};

class CvaeModel {
public:
    CvaeModel(const CvaeConfig& config, std::uint64_t init_seed);

    const CvaeConfig& config() const { return config_; }

    // Inference passes; columns are samples. These leave the model state
    // untouched and are safe to call concurrently.
    void encode_batch(const nn::Matrix& frames, const nn::Matrix& conds, nn::Matrix* mu,
                      nn::Matrix* log_sigma);
    nn::Matrix decode_batch(const nn::Matrix& z, const nn::Matrix& conds);

    // One training-mode pass through encoder, reparameterization and
    // decoder. The condition embedding is computed once and feeds both
    // halves, so its gradient accumulates from both concat points.
    struct TrainForward {
        nn::Matrix mu, log_sigma, z, f_hat;
    };
    TrainForward forward_train(const nn::Matrix& frames, const nn::Matrix& conds,
                               const nn::Matrix& eps);
    void backward_train(const nn::Matrix& d_f_hat, const nn::Matrix& d_mu_kl,
                        const nn::Matrix& d_log_sigma_kl, const TrainForward& cache);

    std::vector<nn::Param*> params();

    void save(const std::filesystem::path& file) const;
    static CvaeModel load(const std::filesystem::path& file);

private:
    CvaeConfig config_;
    nn::ImageShape bottleneck_;
    nn::Sequential cond_net_, enc_conv_, enc_shared_, dec_net_;
    std::unique_ptr<nn::Dense> enc_mu_, enc_log_sigma_;
    // training-mode caches for the two concat points
    nn::Matrix cond_embed_cache_;
    int conv_flat_ = 0;
};

LatentDistribution encode(const SilhouetteFrame& frame, const ConditionVector& c,
                          CvaeModel& model);
SilhouetteFrame decode(const LatentVector& z, const ConditionVector& c, CvaeModel& model);

struct CvaeEpochLog {
    int epoch;
    double l_rec, l_kl, l_total;
};

// Stochastic training per the weighted reconstruction + divergence
// objective; deterministic given config.seed in single-threaded mode.
CvaeModel train_cvae(const std::vector<std::pair<SilhouetteFrame, ConditionVector>>& corpus,
                     const CvaeConfig& model_config, const TrainConfig& train_config,
                     std::vector<CvaeEpochLog>* log = nullptr);

void write_loss_log(const std::vector<CvaeEpochLog>& log, const std::filesystem::path& file);

}  // namespace bgait
