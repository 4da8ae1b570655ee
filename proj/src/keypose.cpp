#include "bgait/keypose.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "bgait/checkpoint.hpp"
#include "bgait/errors.hpp"

namespace bgait {

Eigen::VectorXf PcaSubspace::project(const SilhouetteFrame& frame) const {
    return project_flat(frame.flatten());
}

Eigen::VectorXf PcaSubspace::project_flat(const Eigen::VectorXf& flat) const {
    if (flat.size() != mean_frame.size())
        throw GeometryMismatch("frame size does not match subspace");
    return basis.transpose() * (flat - mean_frame);
}

Eigen::MatrixXf PcaSubspace::back_project(const Eigen::VectorXf& embedding) const {
    if (embedding.size() != dim) throw DimensionMismatch("embedding width != pca dim");
    Eigen::VectorXf flat = mean_frame + basis * embedding;
    Eigen::MatrixXf img(geometry.height, geometry.width);
    int idx = 0;
    for (int r = 0; r < geometry.height; ++r)
        for (int c = 0; c < geometry.width; ++c) img(r, c) = flat[idx++];
    return img;
}

PcaSubspace fit_pca(const std::vector<SilhouetteFrame>& frames, int dim, int max_samples) {
    if (frames.empty()) throw InsufficientData("fit_pca: no frames");
    if (dim < 1) throw DimTooLarge("fit_pca: dim must be >= 1");

    std::vector<int> take;
    const int n_all = static_cast<int>(frames.size());
    if (max_samples > 0 && n_all > max_samples) {
        for (int i = 0; i < max_samples; ++i)
            take.push_back(static_cast<int>(static_cast<long>(i) * n_all / max_samples));
    } else {
        take.resize(n_all);
        std::iota(take.begin(), take.end(), 0);
    }
    const int n = static_cast<int>(take.size());
    const FrameGeometry geometry = frames[0].geometry();
    const int wh = geometry.pixel_count();

    Eigen::MatrixXf data(n, wh);
    for (int i = 0; i < n; ++i) data.row(i) = frames[take[i]].flatten().transpose();
    Eigen::VectorXf mean = data.colwise().mean().transpose();
    data.rowwise() -= mean.transpose();

    Eigen::BDCSVD<Eigen::MatrixXf> svd(data, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const float tol = sv.size() > 0 ? sv[0] * 1e-5f : 0.0f;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > tol && sv[i] > 1e-12f) ++rank;
    if (dim > rank)
        throw DimTooLarge("fit_pca: dim " + std::to_string(dim) + " exceeds data rank " +
                          std::to_string(rank));

    PcaSubspace sub;
    sub.mean_frame = mean;
    sub.basis = svd.matrixV().leftCols(dim);
    sub.dim = dim;
    sub.geometry = geometry;
    // Sign convention: largest-magnitude coefficient of each component is
    // positive, so refits of the same data are bit-identical.
    for (int c = 0; c < dim; ++c) {
        int arg = 0;
        sub.basis.col(c).cwiseAbs().maxCoeff(&arg);
        if (sub.basis(arg, c) < 0) sub.basis.col(c) = -sub.basis.col(c);
    }
    return sub;
}

namespace {

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * (static_cast<double>(values.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

KeyPoseSet build_keyposes(const std::vector<CycleAnnotatedSequence>& sequences, int k,
                          const PcaSubspace& subspace, const KeyPoseBuildOptions& options) {
    if (k < 2) throw InsufficientData("build_keyposes: k must be >= 2");

    std::vector<Eigen::VectorXf> points;
    std::vector<double> phases;
    for (const auto& annotated : sequences) {
        if (annotated.phases.size() != annotated.sequence.frames.size())
            throw InsufficientData("build_keyposes: phase annotation length mismatch");
        for (std::size_t i = 0; i < annotated.sequence.frames.size(); ++i) {
            points.push_back(subspace.project(annotated.sequence.frames[i]));
            phases.push_back(annotated.phases[i]);
        }
    }
    const int n = static_cast<int>(points.size());
    if (n < k) throw InsufficientData("build_keyposes: fewer frames than clusters");

    std::set<std::vector<float>> distinct;
    for (const auto& p : points)
        distinct.insert(std::vector<float>(p.data(), p.data() + p.size()));
    if (static_cast<int>(distinct.size()) < k)
        throw InsufficientData("build_keyposes: fewer distinct frames than clusters");

    // Seed each centroid from its equal-width phase bin; an empty bin takes
    // the sample nearest its bin center in phase.
    std::vector<Eigen::VectorXf> centroids(k);
    std::vector<int> bin_count(k, 0);
    for (int c = 0; c < k; ++c) centroids[c] = Eigen::VectorXf::Zero(subspace.dim);
    for (int i = 0; i < n; ++i) {
        int b = std::min(k - 1, static_cast<int>(phases[i] * k));
        centroids[b] += points[i];
        ++bin_count[b];
    }
    for (int c = 0; c < k; ++c) {
        if (bin_count[c] > 0) {
            centroids[c] /= static_cast<float>(bin_count[c]);
        } else {
            const double center = (c + 0.5) / k;
            int best = 0;
            double best_d = 2.0;
            for (int i = 0; i < n; ++i) {
                double d = std::abs(phases[i] - center);
                d = std::min(d, 1.0 - d);
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            centroids[c] = points[best];
        }
    }

    // Constrained assignment: a frame may only join the cluster of its own
    // phase bin or a cyclically adjacent one. Without this the clusters
    // drift toward subject identity (body shape dominates pose in the
    // subspace) and the temporal ordering of the key poses collapses.
    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < options.max_iters; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            const int b = std::min(k - 1, static_cast<int>(phases[i] * k));
            int best = b;
            double best_d = (points[i] - centroids[b]).squaredNorm();
            for (int c : {(b + k - 1) % k, (b + 1) % k}) {
                const double d = (points[i] - centroids[c]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<Eigen::VectorXf> sums(k, Eigen::VectorXf::Zero(subspace.dim));
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            sums[assign[i]] += points[i];
            ++counts[assign[i]];
        }
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0) centroids[c] = sums[c] / static_cast<float>(counts[c]);
    }

    // Temporal ordering: sort centroids by the mean phase of their members.
    std::vector<double> phase_sum(k, 0.0);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
        phase_sum[assign[i]] += phases[i];
        ++counts[assign[i]];
    }
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> phase_mean(k, 0.0);
    for (int c = 0; c < k; ++c)
        phase_mean[c] = counts[c] > 0 ? phase_sum[c] / counts[c] : 1.0;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (phase_mean[a] != phase_mean[b]) return phase_mean[a] < phase_mean[b];
        return a < b;
    });

    KeyPoseSet set;
    set.k = k;
    set.subspace = subspace;
    for (int c = 0; c < k; ++c) {
        set.embeddings.push_back(centroids[order[c]]);
        set.phase_means.push_back(phase_mean[order[c]]);
        set.member_counts.push_back(counts[order[c]]);
    }

    std::vector<double> dists;
    dists.reserve(n);
    for (int i = 0; i < n; ++i)
        dists.push_back((points[i] - centroids[assign[i]]).norm());
    set.occlusion_threshold = std::max(percentile(dists, options.tau_percentile), 1e-6);
    return set;
}

void KeyPoseSet::save(const std::filesystem::path& file) const {
    CheckpointWriter w(file, "keyposes");
    w.write_i32(k);
    w.write_f64(occlusion_threshold);
    w.write_i32(subspace.dim);
    w.write_i32(subspace.geometry.width);
    w.write_i32(subspace.geometry.height);
    w.write_vector(subspace.mean_frame);
    w.write_matrix(subspace.basis);
    for (int c = 0; c < k; ++c) {
        w.write_vector(embeddings[c]);
        w.write_f64(c < static_cast<int>(phase_means.size()) ? phase_means[c] : 0.0);
        w.write_i32(c < static_cast<int>(member_counts.size()) ? member_counts[c] : 0);
    }
    w.close();
}

KeyPoseSet KeyPoseSet::load(const std::filesystem::path& file) {
    CheckpointReader r(file, "keyposes");
    KeyPoseSet set;
    set.k = r.read_i32();
    set.occlusion_threshold = r.read_f64();
    set.subspace.dim = r.read_i32();
    set.subspace.geometry.width = r.read_i32();
    set.subspace.geometry.height = r.read_i32();
    set.subspace.mean_frame = r.read_vector();
    set.subspace.basis = r.read_matrix();
    for (int c = 0; c < set.k; ++c) {
        set.embeddings.push_back(r.read_vector());
        set.phase_means.push_back(r.read_f64());
        set.member_counts.push_back(r.read_i32());
    }
    return set;
}

void KeyPoseSet::write_report(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) throw MissingPath("cannot write " + file.string());
    out << "key poses: " << k << "\n";
    out << "pca dim: " << subspace.dim << "\n";
    out << "tau: " << occlusion_threshold << "\n";
    for (int c = 0; c < k; ++c) {
        out << "pose " << (c + 1) << ": phase_mean=" << phase_means[c]
            << " members=" << member_counts[c] << "\n";
    }
}

void KeyPoseSet::export_pose_images(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    char name[32];
    for (int c = 0; c < k; ++c) {
        std::snprintf(name, sizeof(name), "keypose_%02d.pgm", c + 1);
        Eigen::MatrixXf img = subspace.back_project(embeddings[c]);
        write_pgm(img.cwiseMax(0.0f).cwiseMin(1.0f), dir / name);
    }
}

int estimate_period(const GaitSequence& seq) {
    const int n = seq.size();
    if (n < 4) return std::max(n, 1);
    std::vector<double> area(n);
    for (int i = 0; i < n; ++i) area[i] = seq.frames[i].pixels.sum();
    const double mean = std::accumulate(area.begin(), area.end(), 0.0) / n;
    int best_lag = 2;
    double best = -1e300;
    for (int lag = 2; lag <= n / 2; ++lag) {
        double acc = 0.0;
        for (int i = 0; i + lag < n; ++i) acc += (area[i] - mean) * (area[i + lag] - mean);
        acc /= n;  // biased estimate, penalizes long lags
        if (acc > best) {
            best = acc;
            best_lag = lag;
        }
    }
    return best_lag;
}

std::vector<double> estimate_phases(const GaitSequence& seq) {
    const int n = seq.size();
    const int period = estimate_period(seq);
    // Anchor phase zero at the maximum-area frame of the first cycle so that
    // phases are comparable across sequences.
    int anchor = 0;
    double best_area = -1.0;
    for (int i = 0; i < std::min(n, period); ++i) {
        const double a = seq.frames[i].pixels.sum();
        if (a > best_area) {
            best_area = a;
            anchor = i;
        }
    }
    std::vector<double> phases(n);
    for (int i = 0; i < n; ++i) {
        const int shifted = ((i - anchor) % period + period) % period;
        phases[i] = static_cast<double>(shifted) / period;
    }
    return phases;
}

}  // namespace bgait
