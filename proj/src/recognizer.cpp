#include "bgait/recognizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace bgait {

namespace {
constexpr const char* kTag = "geinet";
}  // namespace

SilhouetteFrame compute_gei(const GaitSequence& seq) {
    if (seq.frames.empty()) throw EmptySequence("sequence " + seq.sequence_id);
    const auto geom = seq.frames.front().geometry();
    SilhouetteFrame gei;
    gei.pixels.setZero(geom.height, geom.width);
    for (const auto& f : seq.frames) {
        if (!(f.geometry() == geom))
            throw GeometryMismatch("mixed frame geometry in " + seq.sequence_id);
        gei.pixels += f.pixels;
    }
    gei.pixels /= static_cast<float>(seq.frames.size());
    return gei;
}

GeinetModel::GeinetModel(const GeinetConfig& config, std::vector<std::string> class_labels,
                         std::uint64_t init_seed)
    : config_(config), class_labels_(std::move(class_labels)) {
    if (config_.n_classes != static_cast<int>(class_labels_.size()))
        throw DimensionMismatch("n_classes != label count");
    nn::Rng rng(init_seed);
    nn::ImageShape in{1, config_.geometry.height, config_.geometry.width};
    auto c1 = std::make_unique<nn::Conv2d>(in, config_.conv1_channels, 7, 1, 3, rng);
    auto p1 = std::make_unique<nn::MaxPool2>(c1->out_shape());
    auto c2 = std::make_unique<nn::Conv2d>(p1->out_shape(), config_.conv2_channels, 5, 1, 2, rng);
    auto p2 = std::make_unique<nn::MaxPool2>(c2->out_shape());
    const int flat = p2->out_shape().size();
    net_.add(std::move(c1));
    net_.add(std::make_unique<nn::Relu>());
    net_.add(std::move(p1));
    net_.add(std::move(c2));
    net_.add(std::make_unique<nn::Relu>());
    net_.add(std::move(p2));
    net_.add(std::make_unique<nn::Dense>(flat, config_.n_classes, rng));
}

nn::Matrix GeinetModel::logits(const nn::Matrix& geis, bool training) {
    if (geis.rows() != config_.geometry.pixel_count())
        throw GeometryMismatch("energy image size != model geometry");
    return net_.forward(geis, training);
}

void GeinetModel::backward(const nn::Matrix& dlogits) { net_.backward(dlogits); }

std::vector<nn::Param*> GeinetModel::params() { return net_.params(); }

std::vector<Prediction> GeinetModel::classify(const SilhouetteFrame& gei) {
    nn::Matrix probs = nn::softmax(logits(gei.flatten(), false));
    std::vector<int> order(class_labels_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return probs(a, 0) > probs(b, 0); });
    std::vector<Prediction> out;
    out.reserve(order.size());
    for (int i : order) out.push_back({class_labels_[i], static_cast<double>(probs(i, 0))});
    return out;
}

void GeinetModel::save(const std::filesystem::path& file) const {
    CheckpointWriter w(file, kTag);
    w.write_i32(config_.geometry.width);
    w.write_i32(config_.geometry.height);
    w.write_i32(config_.conv1_channels);
    w.write_i32(config_.conv2_channels);
    w.write_i32(config_.n_classes);
    for (const auto& l : class_labels_) w.write_string(l);
    nn::serialize_params(w, const_cast<GeinetModel&>(*this).net_);
    w.close();
}

GeinetModel GeinetModel::load(const std::filesystem::path& file) {
    CheckpointReader r(file, kTag);
    GeinetConfig c;
    c.geometry.width = r.read_i32();
    c.geometry.height = r.read_i32();
    c.conv1_channels = r.read_i32();
    c.conv2_channels = r.read_i32();
    c.n_classes = r.read_i32();
    std::vector<std::string> labels(c.n_classes);
    for (auto& l : labels) l = r.read_string();
    GeinetModel m(c, std::move(labels), 0);
    nn::deserialize_params(r, m.net_);
    return m;
}

GeinetModel train_geinet(const std::vector<std::pair<SilhouetteFrame, std::string>>& gallery,
                         const GeinetConfig& config, const TrainConfig& train_config,
                         std::vector<GeinetEpochLog>* log) {
    if (gallery.empty()) throw EmptyGallery("no training energy images");

    std::map<std::string, int> index;  // ordered -> deterministic class order
    for (const auto& [gei, label] : gallery) index.emplace(label, 0);
    if (index.size() < 2) throw SingleClass("need at least two subjects");
    std::vector<std::string> labels;
    for (auto& [label, idx] : index) {
        idx = static_cast<int>(labels.size());
        labels.push_back(label);
    }

    GeinetConfig c = config;
    c.n_classes = static_cast<int>(labels.size());
    GeinetModel model(c, labels, train_config.seed);
    nn::Adam opt(model.params(), train_config.learning_rate);

    const int n = static_cast<int>(gallery.size());
    const int pixels = c.geometry.pixel_count();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(train_config.seed + 0x9e3779b97f4a7c15ULL);

    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        long correct = 0;
        for (int start = 0; start < n; start += train_config.batch_size) {
            const int b = std::min(train_config.batch_size, n - start);
            nn::Matrix x(pixels, b);
            std::vector<int> targets(b);
            for (int j = 0; j < b; ++j) {
                const auto& [gei, label] = gallery[order[start + j]];
                if (!(gei.geometry() == c.geometry))
                    throw GeometryMismatch("energy image geometry mismatch");
                x.col(j) = gei.flatten();
                targets[j] = index.at(label);
            }
            nn::Matrix lg = model.logits(x, true);
            nn::Matrix dlg;
            const float loss = nn::cross_entropy_loss(lg, targets, &dlg);
            for (int j = 0; j < b; ++j) {
                Eigen::Index best = 0;
                lg.col(j).maxCoeff(&best);
                if (static_cast<int>(best) == targets[j]) ++correct;
            }
            opt.zero_grad();
            model.backward(dlg);
            opt.step();
            epoch_loss += static_cast<double>(loss) * b;
        }
        if (log)
            log->push_back({epoch, epoch_loss / n, static_cast<double>(correct) / n});
    }
    return model;
}

void write_predictions(const std::vector<PredictionRow>& rows,
                       const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath(file.string());
    out << "sequence_id,true_label,predicted_label,score\n";
    for (const auto& r : rows)
        out << r.sequence_id << ',' << r.true_label << ',' << r.top_label << ',' << r.top_score
            << '\n';
}

}  // namespace bgait
