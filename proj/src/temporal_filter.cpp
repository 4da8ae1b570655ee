#include "bgait/temporal_filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "bgait/occlusion.hpp"

namespace bgait {

namespace {
constexpr const char* kTag = "bilstm";
}  // namespace

BilstmModel::BilstmModel(const BilstmConfig& config, std::uint64_t init_seed) : config_(config) {
    nn::Rng rng(init_seed);
    const int d = config_.d_z;
    const int h = config_.hidden;
    b1_ = std::make_unique<nn::BiLstm>(d, h, rng);
    b2_ = std::make_unique<nn::BiLstm>(2 * h, h, rng);
    b3_ = std::make_unique<nn::BiLstm>(2 * h, h, rng);
    out_lstm_ = std::make_unique<nn::Lstm>(2 * h, d, rng);
    out_proj_ = std::make_unique<nn::TimeDistributedDense>(d, d, rng);
}

std::vector<nn::Matrix> BilstmModel::forward(const std::vector<nn::Matrix>& xs, bool training) {
    auto h = b1_->forward(xs, training);
    h = b2_->forward(h, training);
    h = b3_->forward(h, training);
    h = out_lstm_->forward(h, training);
    return out_proj_->forward(h, training);
}

void BilstmModel::backward(const std::vector<nn::Matrix>& d_out) {
    auto d = out_proj_->backward(d_out);
    d = out_lstm_->backward(d);
    d = b3_->backward(d);
    d = b2_->backward(d);
    b1_->backward(d);
}

std::vector<nn::Param*> BilstmModel::params() {
    std::vector<nn::Param*> ps;
    for (nn::SeqLayer* l :
         {static_cast<nn::SeqLayer*>(b1_.get()), static_cast<nn::SeqLayer*>(b2_.get()),
          static_cast<nn::SeqLayer*>(b3_.get()), static_cast<nn::SeqLayer*>(out_lstm_.get()),
          static_cast<nn::SeqLayer*>(out_proj_.get())}) {
        auto sub = l->params();
        ps.insert(ps.end(), sub.begin(), sub.end());
    }
    return ps;
}

void BilstmModel::save(const std::filesystem::path& file) const {
    CheckpointWriter w(file, kTag);
    w.write_i32(config_.d_z);
    w.write_i32(config_.hidden);
    auto& self = const_cast<BilstmModel&>(*this);
    nn::serialize_params(w, *self.b1_);
    nn::serialize_params(w, *self.b2_);
    nn::serialize_params(w, *self.b3_);
    nn::serialize_params(w, *self.out_lstm_);
    nn::serialize_params(w, *self.out_proj_);
    w.close();
}

BilstmModel BilstmModel::load(const std::filesystem::path& file) {
    CheckpointReader r(file, kTag);
    BilstmConfig c;
    c.d_z = r.read_i32();
    c.hidden = r.read_i32();
    BilstmModel m(c, 0);
    nn::deserialize_params(r, *m.b1_);
    nn::deserialize_params(r, *m.b2_);
    nn::deserialize_params(r, *m.b3_);
    nn::deserialize_params(r, *m.out_lstm_);
    nn::deserialize_params(r, *m.out_proj_);
    return m;
}

LatentWindow filter_window(const LatentWindow& w, BilstmModel& model) {
    if (static_cast<int>(w.vectors.size()) != kWindowLen)
        throw LengthMismatch("window length != " + std::to_string(kWindowLen));
    std::vector<nn::Matrix> xs(kWindowLen);
    for (int t = 0; t < kWindowLen; ++t) xs[t] = w.vectors[t];
    auto ys = model.forward(xs, false);
    LatentWindow out;
    out.vectors.resize(kWindowLen);
    for (int t = 0; t < kWindowLen; ++t) out.vectors[t] = ys[t].col(0);
    return out;
}

std::vector<LatentWindow> make_training_windows(
    const std::vector<std::vector<Eigen::VectorXf>>& sequences, int* skipped) {
    std::vector<LatentWindow> windows;
    int n_skipped = 0;
    for (const auto& seq : sequences) {
        const int n = static_cast<int>(seq.size());
        if (n < kWindowLen) {
            ++n_skipped;
            continue;
        }
        for (int s = 0; s + kWindowLen <= n; ++s) {
            LatentWindow w;
            w.vectors.assign(seq.begin() + s, seq.begin() + s + kWindowLen);
            windows.push_back(std::move(w));
        }
    }
    if (skipped) *skipped = n_skipped;
    return windows;
}

BilstmModel train_bilstm(const std::vector<LatentWindow>& windows,
                         const BilstmConfig& model_config, const TrainConfig& train_config,
                         const BilstmTrainOptions& options, std::vector<BilstmEpochLog>* log) {
    if (windows.empty()) throw InsufficientData("no training windows");
    if (options.degree_schedule.empty())
        throw InsufficientData("empty degree schedule");
    const int n = static_cast<int>(windows.size());
    const int d = model_config.d_z;

    BilstmModel model(model_config, train_config.seed);
    nn::Adam opt(model.params(), train_config.learning_rate);
    std::mt19937_64 shuffle_rng(train_config.seed + 0x9e3779b97f4a7c15ULL);
    std::mt19937_64 mask_rng(train_config.seed ^ 0x2545f4914f6cdd1dULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // One persistent keep pattern per window when masks are frozen.
    std::vector<std::vector<bool>> frozen(options.freeze_masks ? n : 0);
    if (options.freeze_masks) {
        for (int i = 0; i < n; ++i) {
            const double deg = options.degree_schedule[i % options.degree_schedule.size()];
            frozen[i].resize(kWindowLen);
            for (int t = 0; t < kWindowLen; ++t) frozen[i][t] = unit(mask_rng) > deg;
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    long batch_counter = 0;
    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        long epoch_terms = 0;
        for (int start = 0; start < n; start += train_config.batch_size) {
            const int b = std::min(train_config.batch_size, n - start);
            const double deg =
                options.degree_schedule[batch_counter % options.degree_schedule.size()];
            ++batch_counter;

            std::vector<nn::Matrix> clean(kWindowLen), masked(kWindowLen);
            for (int t = 0; t < kWindowLen; ++t) {
                clean[t].setZero(d, b);
                masked[t].setZero(d, b);
            }
            for (int j = 0; j < b; ++j) {
                const int idx = order[start + j];
                for (int t = 0; t < kWindowLen; ++t) {
                    clean[t].col(j) = windows[idx].vectors[t];
                    const bool keep = options.freeze_masks ? frozen[idx][t]
                                                           : unit(mask_rng) > deg;
                    if (keep) masked[t].col(j) = windows[idx].vectors[t];
                }
            }

            auto ys = model.forward(masked, true);
            const double denom = static_cast<double>(kWindowLen) * d * b;
            std::vector<nn::Matrix> d_out(kWindowLen);
            double loss = 0.0;
            for (int t = 0; t < kWindowLen; ++t) {
                nn::Matrix diff = ys[t] - clean[t];
                loss += diff.cast<double>().array().square().sum();
                d_out[t] = (2.0 / denom) * diff;
            }
            loss /= denom;
            opt.zero_grad();
            model.backward(d_out);
            opt.step();
            epoch_loss += loss * b;
            epoch_terms += b;
        }
        if (log) log->push_back({epoch, epoch_loss / epoch_terms});
    }
    return model;
}

void write_bilstm_log(const std::vector<BilstmEpochLog>& log, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath(file.string());
    out << "epoch,l_mse\n";
    for (const auto& e : log) out << e.epoch << ',' << e.l_mse << '\n';
}

std::vector<int> reconstruction_conditions(const PoseAssignment& pa, int k) {
    const int n = static_cast<int>(pa.states.size());
    std::vector<bool> occ(n, false);
    for (int i : pa.occluded_indices) occ[i] = true;
    std::vector<int> conds(pa.states);
    const int n_clear = n - static_cast<int>(pa.occluded_indices.size());
    if (n_clear == 0) throw AllFramesOccluded("no visible frame to interpolate from");
    for (int i = 0; i < n; ++i) {
        if (!occ[i]) continue;
        // nearest visible neighbors, wrapping the sequence cyclically
        int p = (i + n - 1) % n;
        while (occ[p]) p = (p + n - 1) % n;
        int q = (i + 1) % n;
        while (occ[q]) q = (q + 1) % n;
        const int sp = pa.states[p], sq = pa.states[q];
        if (p == q) {
            conds[i] = sp;
            continue;
        }
        const int span = (q - p + n) % n;
        const int off = (i - p + n) % n;
        const int ring = ((sq - sp) % k + k) % k;
        const int step = static_cast<int>(std::lround(static_cast<double>(off) * ring / span));
        conds[i] = (sp - 1 + step) % k + 1;
    }
    return conds;
}

GaitSequence reconstruct_sequence(const GaitSequence& seq, const PoseAssignment& pa, int k,
                                  CvaeModel& cvae, BilstmModel& bilstm) {
    const int n = seq.size();
    if (n != static_cast<int>(pa.states.size()))
        throw LengthMismatch("sequence/assignment length mismatch");
    if (n < kWindowLen)
        throw SequenceTooShort(std::to_string(n) + " frames, need " +
                                            std::to_string(kWindowLen));
    std::vector<bool> occ(n, false);
    for (int i : pa.occluded_indices) occ[i] = true;
    for (int i = 0; i < n; ++i)
        if (seq.frames[i].is_occluded_placeholder) occ[i] = true;
    const int n_occ = static_cast<int>(std::count(occ.begin(), occ.end(), true));
    if (n_occ == n) throw AllFramesOccluded("sequence " + seq.sequence_id);

    PoseAssignment pa_eff = pa;
    pa_eff.occluded_indices.clear();
    for (int i = 0; i < n; ++i)
        if (occ[i]) pa_eff.occluded_indices.push_back(i);
    const std::vector<int> conds = reconstruction_conditions(pa_eff, k);

    const auto geom = cvae.config().geometry;
    const int d = cvae.config().d_z;

    // Latent means for visible frames, zeros at occluded positions.
    std::vector<Eigen::VectorXf> latents(n, Eigen::VectorXf::Zero(d));
    {
        std::vector<int> vis;
        for (int i = 0; i < n; ++i)
            if (!occ[i]) vis.push_back(i);
        nn::Matrix frames(geom.pixel_count(), vis.size());
        nn::Matrix cs(kConditionBits, vis.size());
        for (std::size_t j = 0; j < vis.size(); ++j) {
            const auto& f = seq.frames[vis[j]];
            if (!(f.geometry() == geom))
                throw GeometryMismatch("frame geometry != model geometry");
            frames.col(j) = f.flatten();
            const int state = pa.states[vis[j]];
            cs.col(j) = condition_vector(state == k + 1 ? kConditionBits : state).bits;
        }
        nn::Matrix mu, log_sigma;
        cvae.encode_batch(frames, cs, &mu, &log_sigma);
        for (std::size_t j = 0; j < vis.size(); ++j) latents[vis[j]] = mu.col(j);
    }

    // All stride-1 windows as one batch; overlapping outputs at occluded
    // positions are averaged.
    const int n_windows = n - kWindowLen + 1;
    std::vector<nn::Matrix> xs(kWindowLen);
    for (int t = 0; t < kWindowLen; ++t) {
        xs[t].setZero(d, n_windows);
        for (int s = 0; s < n_windows; ++s) xs[t].col(s) = latents[s + t];
    }
    auto ys = bilstm.forward(xs, false);
    std::vector<Eigen::VectorXf> filled(n, Eigen::VectorXf::Zero(d));
    std::vector<int> cover(n, 0);
    for (int s = 0; s < n_windows; ++s)
        for (int t = 0; t < kWindowLen; ++t) {
            filled[s + t] += ys[t].col(s);
            ++cover[s + t];
        }

    GaitSequence out;
    out.subject_label = seq.subject_label;
    out.sequence_id = seq.sequence_id;
    out.frames.resize(n);

    std::vector<int> occ_list;
    for (int i = 0; i < n; ++i) {
        if (!occ[i])
            out.frames[i] = seq.frames[i];  // bit-exact pass-through
        else
            occ_list.push_back(i);
    }
    if (!occ_list.empty()) {
        nn::Matrix z(d, occ_list.size());
        nn::Matrix cs(kConditionBits, occ_list.size());
        for (std::size_t j = 0; j < occ_list.size(); ++j) {
            const int i = occ_list[j];
            z.col(j) = filled[i] / static_cast<float>(cover[i]);
            cs.col(j) = condition_vector(conds[i]).bits;
        }
        nn::Matrix f_hat = cvae.decode_batch(z, cs);
        for (std::size_t j = 0; j < occ_list.size(); ++j) {
            SilhouetteFrame f;
            f.pixels.resize(geom.height, geom.width);
            for (int y = 0; y < geom.height; ++y)
                for (int x = 0; x < geom.width; ++x)
                    f.pixels(y, x) = f_hat(y * geom.width + x, j);
            out.frames[occ_list[j]] = std::move(f);
        }
    }
    return out;
}

void write_reconstruction_report(const std::vector<ReconstructionRow>& rows,
                                 const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath(file.string());
    out << "frame,was_occluded,condition_state,dice\n";
    for (const auto& r : rows) {
        out << r.frame << ',' << (r.was_occluded ? 1 : 0) << ',' << r.condition_state << ',';
        if (r.dice >= 0.0)
            out << r.dice;
        out << '\n';
    }
}

}  // namespace bgait
