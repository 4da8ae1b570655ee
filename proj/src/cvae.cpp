#include "bgait/cvae.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "bgait/errors.hpp"

namespace bgait {

namespace {
constexpr float kClampEps = 1e-7f;
}

ConditionVector condition_vector(int state_index) {
    if (state_index < 1 || state_index > kConditionBits)
        throw InvalidState("state index " + std::to_string(state_index) + " outside 1.." +
                           std::to_string(kConditionBits));
    ConditionVector c;
    c.bits = Eigen::VectorXf::Zero(kConditionBits);
    c.bits[state_index - 1] = 1.0f;
    return c;
}

LatentVector sample_latent(const LatentDistribution& dist, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    LatentVector v;
    v.z.resize(dist.mu.size());
    for (int i = 0; i < dist.mu.size(); ++i)
        v.z[i] = dist.mu[i] + std::exp(dist.log_sigma[i]) * normal(rng);
    return v;
}

CvaeLossGrads cvae_loss_grads(const nn::Matrix& f, const nn::Matrix& f_hat, const nn::Matrix& mu,
                              const nn::Matrix& log_sigma, double lambda1, double lambda2,
                              const std::string& kl_form) {
    const int b = static_cast<int>(f.cols());
    const long wh = f.rows();

    const Eigen::ArrayXXf fh = f_hat.array().min(1.0f - kClampEps).max(kClampEps);
    const Eigen::ArrayXXf ff = f.array();

    CvaeLossGrads out;
    out.l_rec = -static_cast<double>(
                    (ff * fh.log() + (1.0f - ff) * (1.0f - fh).log()).sum()) /
                (static_cast<double>(wh) * b);
    out.d_f_hat = (static_cast<float>(lambda1 / (static_cast<double>(wh) * b)) *
                   (-ff / fh + (1.0f - ff) / (1.0f - fh)))
                      .matrix();

    const Eigen::ArrayXXf sigma = log_sigma.array().exp();
    if (kl_form == "standard") {
        out.l_kl = 0.5 *
                   static_cast<double>(
                       (mu.array().square() + sigma.square() - 2.0f * log_sigma.array() - 1.0f)
                           .sum()) /
                   b;
        out.d_mu = (static_cast<float>(lambda2 / b) * mu.array()).matrix();
        out.d_log_sigma = (static_cast<float>(lambda2 / b) * (sigma.square() - 1.0f)).matrix();
    } else {
        out.l_kl = static_cast<double>(
                       (mu.array().square() + sigma - log_sigma.array() - 1.0f).sum()) /
                   b;
        out.d_mu = (static_cast<float>(lambda2 / b) * 2.0f * mu.array()).matrix();
        out.d_log_sigma = (static_cast<float>(lambda2 / b) * (sigma - 1.0f)).matrix();
    }
    out.l_total = lambda1 * out.l_rec + lambda2 * out.l_kl;
    return out;
}

CvaeLossReport cvae_loss(const SilhouetteFrame& f, const SilhouetteFrame& f_hat,
                         const LatentDistribution& dist, double lambda1, double lambda2,
                         const std::string& kl_form) {
    if (f.geometry() != f_hat.geometry())
        throw GeometryMismatch("cvae_loss: frames differ in geometry");
    const nn::Matrix ff = f.flatten();
    const nn::Matrix fh = f_hat.flatten();
    const nn::Matrix mu = dist.mu;
    const nn::Matrix ls = dist.log_sigma;
    const CvaeLossGrads g = cvae_loss_grads(ff, fh, mu, ls, lambda1, lambda2, kl_form);
    CvaeLossReport report;
    report.l_rec = g.l_rec;
    report.l_kl = g.l_kl;
    report.l_total = g.l_total;
    report.lambda1 = lambda1;
    report.lambda2 = lambda2;
    return report;
}

CvaeConfig CvaeConfig::from(const PipelineConfig& p) {
    CvaeConfig c;
    c.geometry = p.geometry;
    c.d_z = p.d_z;
    c.channels1 = p.cvae_channels1;
    c.channels2 = p.cvae_channels2;
    c.channels3 = p.cvae_channels3;
    c.cond_embed = p.cvae_cond_embed;
    c.shared_dense = p.cvae_shared_dense;
    c.lambda1 = p.lambda1;
    c.lambda2 = p.lambda2;
    c.kl_form = p.kl_form;
    return c;
}

CvaeModel::CvaeModel(const CvaeConfig& config, std::uint64_t init_seed) : config_(config) {
    if (config.geometry.width % 8 != 0 || config.geometry.height % 8 != 0)
        throw DimensionMismatch("cvae geometry must be divisible by 8");
    nn::Rng rng(init_seed);
    const int e = config.cond_embed;

    cond_net_.add(std::make_unique<nn::Dense>(kConditionBits, e, rng));
    cond_net_.add(std::make_unique<nn::Relu>());
    cond_net_.add(std::make_unique<nn::Dense>(e, e, rng));
    cond_net_.add(std::make_unique<nn::Relu>());
    cond_net_.add(std::make_unique<nn::Dense>(e, e, rng));
    cond_net_.add(std::make_unique<nn::Relu>());

    nn::ImageShape in{1, config.geometry.height, config.geometry.width};
    auto c1 = std::make_unique<nn::Conv2d>(in, config.channels1, 3, 2, 1, rng);
    auto s1 = c1->out_shape();
    auto c2 = std::make_unique<nn::Conv2d>(s1, config.channels2, 3, 2, 1, rng);
    auto s2 = c2->out_shape();
    auto c3 = std::make_unique<nn::Conv2d>(s2, config.channels3, 3, 2, 1, rng);
    bottleneck_ = c3->out_shape();
    conv_flat_ = bottleneck_.size();

    enc_conv_.add(std::move(c1));
    enc_conv_.add(std::make_unique<nn::BatchNorm>(s1));
    enc_conv_.add(std::make_unique<nn::Relu>());
    enc_conv_.add(std::move(c2));
    enc_conv_.add(std::make_unique<nn::BatchNorm>(s2));
    enc_conv_.add(std::make_unique<nn::Relu>());
    enc_conv_.add(std::move(c3));
    enc_conv_.add(std::make_unique<nn::BatchNorm>(bottleneck_));
    enc_conv_.add(std::make_unique<nn::Relu>());

    const int s = config.shared_dense;
    enc_shared_.add(std::make_unique<nn::Dense>(conv_flat_ + e, s, rng));
    enc_shared_.add(std::make_unique<nn::Relu>());
    enc_shared_.add(std::make_unique<nn::Dense>(s, s, rng));
    enc_shared_.add(std::make_unique<nn::Relu>());
    enc_mu_ = std::make_unique<nn::Dense>(s, config.d_z, rng);
    enc_log_sigma_ = std::make_unique<nn::Dense>(s, config.d_z, rng);

    dec_net_.add(std::make_unique<nn::Dense>(config.d_z + e, s, rng));
    dec_net_.add(std::make_unique<nn::Relu>());
    dec_net_.add(std::make_unique<nn::Dense>(s, conv_flat_, rng));
    dec_net_.add(std::make_unique<nn::Relu>());
    auto u1 = std::make_unique<nn::Upsample2>(bottleneck_);
    auto us1 = u1->out_shape();
    dec_net_.add(std::move(u1));
    auto d1 = std::make_unique<nn::Conv2d>(us1, config.channels2, 3, 1, 1, rng);
    auto ds1 = d1->out_shape();
    dec_net_.add(std::move(d1));
    dec_net_.add(std::make_unique<nn::BatchNorm>(ds1));
    dec_net_.add(std::make_unique<nn::Relu>());
    auto u2 = std::make_unique<nn::Upsample2>(ds1);
    auto us2 = u2->out_shape();
    dec_net_.add(std::move(u2));
    auto d2 = std::make_unique<nn::Conv2d>(us2, config.channels1, 3, 1, 1, rng);
    auto ds2 = d2->out_shape();
    dec_net_.add(std::move(d2));
    dec_net_.add(std::make_unique<nn::BatchNorm>(ds2));
    dec_net_.add(std::make_unique<nn::Relu>());
    auto u3 = std::make_unique<nn::Upsample2>(ds2);
    auto us3 = u3->out_shape();
    dec_net_.add(std::move(u3));
    dec_net_.add(std::make_unique<nn::Conv2d>(us3, 1, 3, 1, 1, rng));
    dec_net_.add(std::make_unique<nn::Sigmoid>());
}

namespace {

nn::Matrix vconcat(const nn::Matrix& top, const nn::Matrix& bottom) {
    nn::Matrix out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

}  // namespace

void CvaeModel::encode_batch(const nn::Matrix& frames, const nn::Matrix& conds, nn::Matrix* mu,
                             nn::Matrix* log_sigma) {
    const nn::Matrix cond_e = cond_net_.forward(conds, false);
    const nn::Matrix h = enc_conv_.forward(frames, false);
    const nn::Matrix s = enc_shared_.forward(vconcat(h, cond_e), false);
    if (mu) *mu = enc_mu_->forward(s, false);
    if (log_sigma) *log_sigma = enc_log_sigma_->forward(s, false);
}

nn::Matrix CvaeModel::decode_batch(const nn::Matrix& z, const nn::Matrix& conds) {
    if (z.rows() != config_.d_z) throw DimensionMismatch("latent width != d_z");
    const nn::Matrix cond_e = cond_net_.forward(conds, false);
    return dec_net_.forward(vconcat(z, cond_e), false);
}

CvaeModel::TrainForward CvaeModel::forward_train(const nn::Matrix& frames,
                                                 const nn::Matrix& conds, const nn::Matrix& eps) {
    TrainForward out;
    cond_embed_cache_ = cond_net_.forward(conds, true);
    const nn::Matrix h = enc_conv_.forward(frames, true);
    const nn::Matrix s = enc_shared_.forward(vconcat(h, cond_embed_cache_), true);
    out.mu = enc_mu_->forward(s, true);
    out.log_sigma = enc_log_sigma_->forward(s, true);
    out.z = out.mu + out.log_sigma.array().exp().matrix().cwiseProduct(eps);
    out.f_hat = dec_net_.forward(vconcat(out.z, cond_embed_cache_), true);
    return out;
}

void CvaeModel::backward_train(const nn::Matrix& d_f_hat, const nn::Matrix& d_mu_kl,
                               const nn::Matrix& d_log_sigma_kl, const TrainForward& cache) {
    const nn::Matrix d_dec_in = dec_net_.backward(d_f_hat);
    const nn::Matrix d_z = d_dec_in.topRows(config_.d_z);
    const nn::Matrix d_cond_dec = d_dec_in.bottomRows(config_.cond_embed);

    // Reparameterization: z = mu + exp(log_sigma) * eps, so
    // dz/dlog_sigma = z - mu.
    const nn::Matrix d_mu = d_mu_kl + d_z;
    const nn::Matrix d_log_sigma =
        d_log_sigma_kl + d_z.cwiseProduct(cache.z - cache.mu);

    const nn::Matrix d_s = enc_mu_->backward(d_mu) + enc_log_sigma_->backward(d_log_sigma);
    const nn::Matrix d_enc_in = enc_shared_.backward(d_s);
    enc_conv_.backward(d_enc_in.topRows(conv_flat_));
    cond_net_.backward(d_enc_in.bottomRows(config_.cond_embed) + d_cond_dec);
}

std::vector<nn::Param*> CvaeModel::params() {
    std::vector<nn::Param*> all;
    for (nn::Sequential* net : {&cond_net_, &enc_conv_, &enc_shared_, &dec_net_})
        for (nn::Param* p : net->params()) all.push_back(p);
    for (nn::Param* p : enc_mu_->params()) all.push_back(p);
    for (nn::Param* p : enc_log_sigma_->params()) all.push_back(p);
    return all;
}

void CvaeModel::save(const std::filesystem::path& file) const {
    CheckpointWriter w(file, "cvae");
    auto* self = const_cast<CvaeModel*>(this);
    w.write_i32(config_.geometry.width);
    w.write_i32(config_.geometry.height);
    w.write_i32(config_.d_z);
    w.write_i32(config_.channels1);
    w.write_i32(config_.channels2);
    w.write_i32(config_.channels3);
    w.write_i32(config_.cond_embed);
    w.write_i32(config_.shared_dense);
    w.write_f64(config_.lambda1);
    w.write_f64(config_.lambda2);
    w.write_string(config_.kl_form);
    nn::serialize_params(w, self->cond_net_);
    nn::serialize_params(w, self->enc_conv_);
    nn::serialize_params(w, self->enc_shared_);
    nn::serialize_params(w, *self->enc_mu_);
    nn::serialize_params(w, *self->enc_log_sigma_);
    nn::serialize_params(w, self->dec_net_);
    w.close();
}

CvaeModel CvaeModel::load(const std::filesystem::path& file) {
    CheckpointReader r(file, "cvae");
    CvaeConfig config;
    config.geometry.width = r.read_i32();
    config.geometry.height = r.read_i32();
    config.d_z = r.read_i32();
    config.channels1 = r.read_i32();
    config.channels2 = r.read_i32();
    config.channels3 = r.read_i32();
    config.cond_embed = r.read_i32();
    config.shared_dense = r.read_i32();
    config.lambda1 = r.read_f64();
    config.lambda2 = r.read_f64();
    config.kl_form = r.read_string();

    CvaeModel model(config, 0);
    nn::deserialize_params(r, model.cond_net_);
    nn::deserialize_params(r, model.enc_conv_);
    nn::deserialize_params(r, model.enc_shared_);
    nn::deserialize_params(r, *model.enc_mu_);
    nn::deserialize_params(r, *model.enc_log_sigma_);
    nn::deserialize_params(r, model.dec_net_);
    return model;
}

LatentDistribution encode(const SilhouetteFrame& frame, const ConditionVector& c,
                          CvaeModel& model) {
    if (frame.geometry() != model.config().geometry)
        throw GeometryMismatch("encode: frame geometry does not match model");
    nn::Matrix mu, log_sigma;
    model.encode_batch(frame.flatten(), c.bits, &mu, &log_sigma);
    return {mu.col(0), log_sigma.col(0)};
}

SilhouetteFrame decode(const LatentVector& z, const ConditionVector& c, CvaeModel& model) {
    if (z.z.size() != model.config().d_z)
        throw DimensionMismatch("decode: latent width != d_z");
    const nn::Matrix out = model.decode_batch(z.z, c.bits);
    const FrameGeometry g = model.config().geometry;
    SilhouetteFrame frame;
    frame.pixels.resize(g.height, g.width);
    int idx = 0;
    for (int r = 0; r < g.height; ++r)
        for (int col = 0; col < g.width; ++col) frame.pixels(r, col) = out(idx++, 0);
    return frame;
}

CvaeModel train_cvae(const std::vector<std::pair<SilhouetteFrame, ConditionVector>>& corpus,
                     const CvaeConfig& model_config, const TrainConfig& train_config,
                     std::vector<CvaeEpochLog>* log) {
    if (corpus.empty()) throw EmptyCorpus("train_cvae: empty corpus");

    const int n = static_cast<int>(corpus.size());
    const int wh = model_config.geometry.pixel_count();
    nn::Matrix frames(wh, n), conds(kConditionBits, n);
    for (int i = 0; i < n; ++i) {
        if (corpus[i].first.geometry() != model_config.geometry)
            throw GeometryMismatch("train_cvae: corpus frame geometry mismatch");
        frames.col(i) = corpus[i].first.flatten();
        conds.col(i) = corpus[i].second.bits;
    }

    CvaeModel model(model_config, train_config.seed);
    nn::Adam opt(model.params(), train_config.learning_rate);
    std::mt19937_64 shuffle_rng(train_config.seed + 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<float> normal(0.0f, 1.0f);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const int batch = std::max(1, std::min(train_config.batch_size, n));

    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double sum_rec = 0.0, sum_kl = 0.0, sum_total = 0.0;
        int steps = 0;
        for (int start = 0; start < n; start += batch) {
            const int b = std::min(batch, n - start);
            nn::Matrix fb(wh, b), cb(kConditionBits, b), eps(model_config.d_z, b);
            for (int j = 0; j < b; ++j) {
                fb.col(j) = frames.col(order[start + j]);
                cb.col(j) = conds.col(order[start + j]);
            }
            for (int c = 0; c < b; ++c)
                for (int r = 0; r < model_config.d_z; ++r) eps(r, c) = normal(shuffle_rng);

            auto fwd = model.forward_train(fb, cb, eps);
            auto loss = cvae_loss_grads(fb, fwd.f_hat, fwd.mu, fwd.log_sigma,
                                        model_config.lambda1, model_config.lambda2,
                                        model_config.kl_form);
            opt.zero_grad();
            model.backward_train(loss.d_f_hat, loss.d_mu, loss.d_log_sigma, fwd);
            opt.step();

            sum_rec += loss.l_rec;
            sum_kl += loss.l_kl;
            sum_total += loss.l_total;
            ++steps;
        }
        if (log)
            log->push_back({epoch + 1, sum_rec / steps, sum_kl / steps, sum_total / steps});
    }
    return model;
}

void write_loss_log(const std::vector<CvaeEpochLog>& log, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath("cannot write " + file.string());
    out << "epoch,l_rec,l_kl,l_total\n";
    for (const auto& row : log)
        out << row.epoch << "," << row.l_rec << "," << row.l_kl << "," << row.l_total << "\n";
}

}  // namespace bgait
