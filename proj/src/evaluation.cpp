#include "bgait/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include "bgait/occlusion.hpp"
#include "bgait/pose_graph.hpp"

namespace bgait {

namespace {

double percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double pos = p / 100.0 * (v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - lo;
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}
}  // namespace

double dice_score(const SilhouetteFrame& f, const SilhouetteFrame& f_hat) {
    if (!(f.geometry() == f_hat.geometry()))
        throw GeometryMismatch("dice operands differ in geometry");
    const double num = 2.0 * (f.pixels.array() * f_hat.pixels.array()).cast<double>().sum();
    const double den = f.pixels.array().square().cast<double>().sum() +
                       f_hat.pixels.array().square().cast<double>().sum();
    if (den == 0.0) return 1.0;
    return num / den;
}

std::vector<std::pair<int, double>> cmc_curve(const std::vector<EvalRecord>& records,
                                              int max_rank) {
    if (records.empty()) throw EmptyRecords("no evaluation records");
    std::vector<std::pair<int, double>> curve;
    for (int r = 1; r <= max_rank; ++r) {
        int hits = 0;
        for (const auto& rec : records) {
            const int top = std::min<int>(r, static_cast<int>(rec.ranked.size()));
            for (int i = 0; i < top; ++i)
                if (rec.ranked[i].label == rec.true_label) {
                    ++hits;
                    break;
                }
        }
        curve.emplace_back(r, 100.0 * hits / records.size());
    }
    return curve;
}

EvalRecord evaluate_probe(const GaitSequence& probe, const PipelineHandles& handles,
                          const GaitSequence* clean) {
    const auto m = distance_matrix(probe, *handles.keyposes);
    StateTransitionModel trans{handles.keyposes->k};
    const auto pa = map_frames(m, trans);
    GaitSequence rec = reconstruct_sequence(probe, pa, handles.keyposes->k, *handles.cvae,
                                            *handles.bilstm);
    EvalRecord out;
    out.sequence_id = probe.sequence_id;
    out.true_label = probe.subject_label;
    out.ranked = handles.geinet->classify(compute_gei(rec));

    int n_occ = 0;
    double dice_sum = 0.0;
    for (int i = 0; i < probe.size(); ++i) {
        if (!probe.frames[i].is_occluded_placeholder) continue;
        ++n_occ;
        if (clean) dice_sum += dice_score(clean->frames[i], rec.frames[i]);
    }
    out.occlusion_degree = probe.size() ? static_cast<double>(n_occ) / probe.size() : 0.0;
    if (clean && n_occ > 0) out.reconstruction_dice = dice_sum / n_occ;
    return out;
}

SweepReport occlusion_sweep(const std::vector<GaitSequence>& probes,
                            const PipelineHandles& handles, const SweepOptions& options) {
    if (probes.empty()) throw EmptySequence("no probe sequences");

    struct Task {
        const GaitSequence* probe;
        double degree;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    std::uint64_t counter = 0;
    for (const auto& p : probes)
        for (double d : options.degrees)
            for (int t = 0; t < options.trials_per_degree; ++t)
                tasks.push_back({&p, d, options.seed + 0x100 * counter++});

    std::vector<EvalRecord> records(tasks.size());
    std::vector<char> ok(tasks.size(), 0);
    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& t = tasks[i];
            GaitSequence occluded = occlude_sequence(*t.probe, t.degree, t.seed);
            try {
                records[i] = evaluate_probe(occluded, handles, t.probe);
                ok[i] = 1;
            } catch (const AllFramesOccluded&) {
                // fully blanked draw: no anchor to reconstruct from, skip
            }
        }
    };
    const int jobs = std::max(1, options.jobs);
    if (jobs == 1) {
        run_range(0, tasks.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (tasks.size() + jobs - 1) / jobs;
        for (int j = 0; j < jobs; ++j) {
            const std::size_t lo = std::min(tasks.size(), j * chunk);
            const std::size_t hi = std::min(tasks.size(), lo + chunk);
            if (lo < hi) pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    SweepReport report;
    for (int b = 0; b < 10; ++b) report.rows.push_back({b / 10.0, (b + 1) / 10.0, 0, 0});
    int clear_total = 0, clear_correct = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!ok[i]) continue;
        const auto& rec = records[i];
        const bool correct = !rec.ranked.empty() && rec.ranked.front().label == rec.true_label;
        const int b = std::min(9, static_cast<int>(rec.occlusion_degree * 10.0));
        ++report.rows[b].n_probes;
        if (correct) ++report.rows[b].n_correct;
        if (rec.occlusion_degree == 0.0) {
            ++clear_total;
            if (correct) ++clear_correct;
        }
    }
    report.unoccluded_accuracy_pct = clear_total ? 100.0 * clear_correct / clear_total : 0.0;
    return report;
}

std::vector<KfoldResult> kfold_robustness(
    const std::vector<std::pair<SilhouetteFrame, std::string>>& corpus,
    const std::vector<int>& k_values, const GeinetConfig& model_config,
    const TrainConfig& train_config) {
    if (corpus.empty()) throw EmptyGallery("empty fold corpus");

    std::map<std::string, std::vector<int>> by_class;
    for (int i = 0; i < static_cast<int>(corpus.size()); ++i)
        by_class[corpus[i].second].push_back(i);

    std::vector<KfoldResult> results;
    for (int k : k_values) {
        for (const auto& [label, idxs] : by_class)
            if (static_cast<int>(idxs.size()) < k)
                throw InsufficientPerClass("class " + label + " has " +
                                                        std::to_string(idxs.size()) +
                                                        " samples, need " + std::to_string(k));
        // round-robin stratified assignment
        std::vector<int> fold_of(corpus.size());
        for (const auto& [label, idxs] : by_class)
            for (std::size_t j = 0; j < idxs.size(); ++j) fold_of[idxs[j]] = j % k;

        KfoldResult res;
        res.k = k;
        for (int f = 0; f < k; ++f) {
            std::vector<std::pair<SilhouetteFrame, std::string>> train, test;
            for (std::size_t i = 0; i < corpus.size(); ++i)
                (fold_of[i] == f ? test : train).push_back(corpus[i]);
            TrainConfig tc = train_config;
            tc.seed = train_config.seed + 1000ULL * k + f;
            GeinetModel model = train_geinet(train, model_config, tc);
            int correct = 0;
            for (const auto& [gei, label] : test)
                if (model.classify(gei).front().label == label) ++correct;
            res.fold_accuracies_pct.push_back(test.empty() ? 0.0
                                                           : 100.0 * correct / test.size());
        }
        res.min = percentile(res.fold_accuracies_pct, 0);
        res.q1 = percentile(res.fold_accuracies_pct, 25);
        res.median = percentile(res.fold_accuracies_pct, 50);
        res.q3 = percentile(res.fold_accuracies_pct, 75);
        res.max = percentile(res.fold_accuracies_pct, 100);
        results.push_back(std::move(res));
    }
    return results;
}

void write_cmc_csv(const std::vector<std::pair<int, double>>& curve,
                   const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath(file.string());
    out << "rank,accuracy_pct\n";
    for (const auto& [r, a] : curve) out << r << ',' << a << '\n';
}

void write_sweep_csv(const SweepReport& report, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath(file.string());
    out << "bucket_lo,bucket_hi,n_probes,rank1_accuracy_pct\n";
    for (const auto& row : report.rows)
        out << row.bucket_lo << ',' << row.bucket_hi << ',' << row.n_probes << ','
            << row.accuracy_pct() << '\n';
    out << "unoccluded,,," << report.unoccluded_accuracy_pct << '\n';
}

void write_kfold_csv(const std::vector<KfoldResult>& results,
                     const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath(file.string());
    out << "k,fold,accuracy_pct,min,q1,median,q3,max\n";
    for (const auto& r : results)
        for (std::size_t f = 0; f < r.fold_accuracies_pct.size(); ++f)
            out << r.k << ',' << f << ',' << r.fold_accuracies_pct[f] << ',' << r.min << ','
                << r.q1 << ',' << r.median << ',' << r.q3 << ',' << r.max << '\n';
}

void write_records_csv(const std::vector<EvalRecord>& records,
                       const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath(file.string());
    out << "sequence_id,true_label,rank1_label,rank1_score,occlusion_degree,"
           "reconstruction_dice\n";
    for (const auto& r : records) {
        out << r.sequence_id << ',' << r.true_label << ','
            << (r.ranked.empty() ? "" : r.ranked.front().label) << ','
            << (r.ranked.empty() ? 0.0 : r.ranked.front().score) << ',' << r.occlusion_degree
            << ',';
        if (r.reconstruction_dice >= 0.0) out << r.reconstruction_dice;
        out << '\n';
    }
}

// ---- plot rendering ------------------------------------------------------

namespace {

struct Canvas {
    Canvas(int h, int w) { img.setOnes(h, w); }
    void set(int y, int x, float v) {
        if (y >= 0 && y < img.rows() && x >= 0 && x < img.cols()) img(y, x) = v;
    }
    void line(int y0, int x0, int y1, int x1, float v = 0.0f) {
        const int steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1});
        for (int s = 0; s <= steps; ++s) {
            const double t = static_cast<double>(s) / steps;
            set(static_cast<int>(std::lround(y0 + t * (y1 - y0))),
                static_cast<int>(std::lround(x0 + t * (x1 - x0))), v);
        }
    }
    void box(int y0, int x0, int y1, int x1, float v = 0.0f) {
        line(y0, x0, y0, x1, v);
        line(y1, x0, y1, x1, v);
        line(y0, x0, y1, x0, v);
        line(y0, x1, y1, x1, v);
    }
    Eigen::MatrixXf img;
};

constexpr int kPlotSize = 256;
constexpr int kMargin = 24;

int map_y(double value_pct) {  // 0..100 -> bottom..top
    return kMargin +
           static_cast<int>(std::lround((100.0 - value_pct) / 100.0 * (kPlotSize - 2 * kMargin)));
}

int map_x(double frac) {  // 0..1 -> left..right
    return kMargin + static_cast<int>(std::lround(frac * (kPlotSize - 2 * kMargin)));
}

Canvas axes() {
    Canvas c(kPlotSize, kPlotSize);
    c.line(kPlotSize - kMargin, kMargin, kPlotSize - kMargin, kPlotSize - kMargin);
    c.line(kMargin, kMargin, kPlotSize - kMargin, kMargin);
    return c;
}

}  // namespace

void render_cmc_plot(const std::vector<std::pair<int, double>>& curve,
                     const std::filesystem::path& file) {
    Canvas c = axes();
    const int n = static_cast<int>(curve.size());
    for (int i = 1; i < n; ++i)
        c.line(map_y(curve[i - 1].second), map_x(n > 1 ? (i - 1.0) / (n - 1) : 0.0),
               map_y(curve[i].second), map_x(n > 1 ? static_cast<double>(i) / (n - 1) : 1.0));
    write_pgm(c.img, file);
}

void render_sweep_plot(const SweepReport& report, const std::filesystem::path& file) {
    Canvas c = axes();
    const int n = static_cast<int>(report.rows.size());
    for (int i = 0; i < n; ++i) {
        if (report.rows[i].n_probes == 0) continue;
        const int x0 = map_x((i + 0.15) / n), x1 = map_x((i + 0.85) / n);
        const int y = map_y(report.rows[i].accuracy_pct());
        for (int x = x0; x <= x1; ++x) c.line(y, x, kPlotSize - kMargin, x, 0.5f);
        c.box(y, x0, kPlotSize - kMargin, x1);
    }
    write_pgm(c.img, file);
}

void render_kfold_plot(const std::vector<KfoldResult>& results,
                       const std::filesystem::path& file) {
    Canvas c = axes();
    const int n = static_cast<int>(results.size());
    for (int i = 0; i < n; ++i) {
        const auto& r = results[i];
        const int xc = map_x((i + 0.5) / n);
        const int x0 = map_x((i + 0.25) / n), x1 = map_x((i + 0.75) / n);
        c.box(map_y(r.q3), x0, map_y(r.q1), x1);
        c.line(map_y(r.median), x0, map_y(r.median), x1);
        c.line(map_y(r.max), xc, map_y(r.q3), xc);
        c.line(map_y(r.q1), xc, map_y(r.min), xc);
    }
    write_pgm(c.img, file);
}

}  // namespace bgait
