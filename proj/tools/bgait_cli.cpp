// Command-line orchestrator for the gait reconstruction pipeline.
#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "bgait/evaluation.hpp"
#include "bgait/occlusion.hpp"
#include "bgait/pipeline.hpp"

namespace fs = std::filesystem;
using namespace bgait;

namespace {

fs::path cache_dir() {
    if (const char* env = std::getenv("GOL_CACHE")) return fs::path(env);
    return fs::path("checkpoints");
}

struct Common {
    std::string config_file;
    std::uint64_t seed = 0;
    bool seed_set = false;

    PipelineConfig load() const {
        PipelineConfig cfg;
        if (!config_file.empty()) cfg = PipelineConfig::load(config_file);
        if (seed_set) cfg.seed = seed;
        return cfg;
    }
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("--config", common.config_file, "pipeline config file");
    cmd->add_option("--seed", common.seed, "seed override")
        ->each([&common](const std::string&) { common.seed_set = true; });
}

// Sequences listed in a manifest; relative paths resolve against the
// manifest's directory.
std::vector<GaitSequence> load_manifest_sequences(const fs::path& manifest,
                                                  FrameGeometry geometry) {
    const auto entries = read_manifest(manifest);
    const fs::path base = manifest.parent_path();
    std::vector<GaitSequence> seqs;
    seqs.reserve(entries.size());
    for (const auto& e : entries) {
        fs::path p(e.path);
        if (p.is_relative()) p = base / p;
        GaitSequence s = load_sequence(p, geometry);
        s.sequence_id = e.sequence_id;
        s.subject_label = e.subject_label;
        seqs.push_back(std::move(s));
    }
    return seqs;
}

void save_corpus(const std::vector<GaitSequence>& corpus, const fs::path& out) {
    fs::create_directories(out);
    std::vector<ManifestEntry> entries;
    for (const auto& seq : corpus) {
        save_sequence(seq, out / seq.sequence_id);
        entries.push_back({seq.sequence_id, seq.subject_label, seq.sequence_id});
    }
    write_manifest(entries, out / "manifest.txt");
}

template <typename Fn>
void parallel_for(int n, int jobs, Fn fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const int chunk = (n + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
        const int lo = std::min(n, j * chunk), hi = std::min(n, lo + chunk);
        if (lo < hi)
            pool.emplace_back([=]() {
                for (int i = lo; i < hi; ++i) fn(i);
            });
    }
    for (auto& th : pool) th.join();
}

struct ModelPaths {
    std::string keyposes, cvae, bilstm, geinet;

    fs::path keyposes_path() const {
        return keyposes.empty() ? cache_dir() / "keyposes.bin" : fs::path(keyposes);
    }
    fs::path cvae_path() const {
        return cvae.empty() ? cache_dir() / "cvae.bin" : fs::path(cvae);
    }
    fs::path bilstm_path() const {
        return bilstm.empty() ? cache_dir() / "bilstm.bin" : fs::path(bilstm);
    }
    fs::path geinet_path() const {
        return geinet.empty() ? cache_dir() / "geinet.bin" : fs::path(geinet);
    }
};

void add_model_flags(CLI::App* cmd, ModelPaths& mp, bool keyposes = false, bool cvae = false,
                     bool bilstm = false, bool geinet = false) {
    if (keyposes) cmd->add_option("--keyposes", mp.keyposes, "key-pose checkpoint");
    if (cvae) cmd->add_option("--cvae", mp.cvae, "autoencoder checkpoint");
    if (bilstm) cmd->add_option("--bilstm", mp.bilstm, "latent filter checkpoint");
    if (geinet) cmd->add_option("--geinet", mp.geinet, "classifier checkpoint");
}

int run(int argc, char** argv) {
    CLI::App app{"gait sequence reconstruction and recognition pipeline"};
    app.require_subcommand(1);

    Common common;
    ModelPaths mp;
    std::string data, clean_data, out = "out";
    int subjects = 20, seqs = 4, frames = 100;
    double degree = 0.5;
    int jobs = 1, trials = 1, max_rank = 5;
    std::vector<int> k_values{2, 3, 5};

    auto* c_synth = app.add_subcommand("synth-data", "generate a synthetic walker corpus");
    add_common(c_synth, common);
    c_synth->add_option("--out", out, "output root")->required();
    c_synth->add_option("--subjects", subjects);
    c_synth->add_option("--seqs", seqs, "sequences per subject");
    c_synth->add_option("--frames", frames, "frames per sequence");

    auto* c_keyposes = app.add_subcommand("build-keyposes", "fit the subspace and key poses");
    add_common(c_keyposes, common);
    c_keyposes->add_option("--data", data, "sequence manifest")->required();
    c_keyposes->add_option("--out", out, "report/image output dir");
    add_model_flags(c_keyposes, mp, true);

    auto* c_cvae = app.add_subcommand("train-cvae", "train the conditional autoencoder");
    add_common(c_cvae, common);
    c_cvae->add_option("--data", data, "sequence manifest")->required();
    c_cvae->add_option("--out", out, "loss log output dir");
    add_model_flags(c_cvae, mp, true, true);

    auto* c_bilstm = app.add_subcommand("train-bilstm", "train the latent window filter");
    add_common(c_bilstm, common);
    c_bilstm->add_option("--data", data, "sequence manifest")->required();
    c_bilstm->add_option("--out", out, "loss log output dir");
    add_model_flags(c_bilstm, mp, true, true, true);

    auto* c_geinet = app.add_subcommand("train-geinet", "train the energy-image classifier");
    add_common(c_geinet, common);
    c_geinet->add_option("--data", data, "sequence manifest")->required();
    c_geinet->add_option("--out", out, "log output dir");
    add_model_flags(c_geinet, mp, false, false, false, true);

    auto* c_label = app.add_subcommand("label", "per-frame state assignment");
    add_common(c_label, common);
    c_label->add_option("--data", data, "sequence manifest")->required();
    c_label->add_option("--out", out, "assignment output dir")->required();
    c_label->add_option("--jobs", jobs, "parallel workers");
    add_model_flags(c_label, mp, true);

    auto* c_occlude = app.add_subcommand("occlude", "blank random frames of each sequence");
    add_common(c_occlude, common);
    c_occlude->add_option("--data", data, "sequence manifest")->required();
    c_occlude->add_option("--out", out, "occluded corpus output dir")->required();
    c_occlude->add_option("--degree", degree, "occlusion degree");

    auto* c_rec = app.add_subcommand("reconstruct", "impute occluded frames");
    add_common(c_rec, common);
    c_rec->add_option("--data", data, "occluded sequence manifest")->required();
    c_rec->add_option("--out", out, "reconstructed corpus output dir")->required();
    c_rec->add_option("--jobs", jobs, "parallel workers");
    add_model_flags(c_rec, mp, true, true, true);

    auto* c_eval = app.add_subcommand("evaluate", "classify probes, report CMC");
    add_common(c_eval, common);
    c_eval->add_option("--data", data, "probe manifest")->required();
    c_eval->add_option("--clean", clean_data, "unoccluded ground-truth manifest");
    c_eval->add_option("--out", out, "report output dir")->required();
    c_eval->add_option("--jobs", jobs, "parallel workers");
    c_eval->add_option("--max-rank", max_rank);
    add_model_flags(c_eval, mp, true, true, true, true);

    auto* c_sweep = app.add_subcommand("sweep", "accuracy vs occlusion degree");
    add_common(c_sweep, common);
    c_sweep->add_option("--data", data, "unoccluded probe manifest")->required();
    c_sweep->add_option("--out", out, "report output dir")->required();
    c_sweep->add_option("--jobs", jobs, "parallel workers");
    c_sweep->add_option("--trials", trials, "occlusion draws per degree");
    add_model_flags(c_sweep, mp, true, true, true, true);

    auto* c_kfold = app.add_subcommand("kfold", "stratified k-fold classifier robustness");
    add_common(c_kfold, common);
    c_kfold->add_option("--data", data, "labeled sequence manifest")->required();
    c_kfold->add_option("--out", out, "report output dir")->required();
    c_kfold->add_option("--k", k_values, "fold counts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            app.exit(e);
            return 0;
        }
        std::cerr << "error module=cli cause=" << e.what() << '\n';
        std::cout << app.help();
        return 2;
    }

    PipelineConfig cfg = common.load();

    if (c_synth->parsed()) {
        auto corpus = build_walker_corpus(subjects, seqs, frames, cfg.geometry, cfg.seed);
        save_corpus(corpus, out);
        std::cout << "wrote " << corpus.size() << " sequences under " << out << '\n';
        return 0;
    }

    if (c_keyposes->parsed()) {
        auto corpus = load_manifest_sequences(data, cfg.geometry);
        std::vector<SilhouetteFrame> all;
        for (const auto& s : corpus)
            for (const auto& f : s.frames)
                if (!f.is_occluded_placeholder) all.push_back(f);
        PcaSubspace subspace = fit_pca(all, cfg.pca_dim, cfg.pca_max_samples);
        KeyPoseSet kp = build_keyposes(annotate_cycles(corpus), cfg.keypose_k, subspace,
                                       {cfg.tau_percentile, cfg.kmeans_max_iters});
        fs::create_directories(mp.keyposes_path().parent_path());
        kp.save(mp.keyposes_path());
        fs::create_directories(out);
        kp.write_report(fs::path(out) / "keypose_report.txt");
        kp.export_pose_images(fs::path(out) / "poses");
        std::cout << "key poses -> " << mp.keyposes_path() << '\n';
        return 0;
    }

    if (c_cvae->parsed()) {
        auto corpus = load_manifest_sequences(data, cfg.geometry);
        KeyPoseSet kp = KeyPoseSet::load(mp.keyposes_path());
        std::vector<std::pair<SilhouetteFrame, ConditionVector>> pairs;
        for (const auto& seq : corpus) {
            const auto pa = assign_poses(seq, kp);
            for (int i = 0; i < seq.size(); ++i) {
                if (pa.states[i] == kp.k + 1) continue;
                pairs.emplace_back(seq.frames[i], condition_vector(pa.states[i]));
            }
        }
        TrainConfig tc = cfg.cvae_train;
        std::vector<CvaeEpochLog> log;
        CvaeModel model = train_cvae(pairs, CvaeConfig::from(cfg), tc, &log);
        fs::create_directories(mp.cvae_path().parent_path());
        model.save(mp.cvae_path());
        fs::create_directories(out);
        write_loss_log(log, fs::path(out) / "cvae_loss.csv");
        std::cout << "autoencoder -> " << mp.cvae_path() << '\n';
        return 0;
    }

    if (c_bilstm->parsed()) {
        auto corpus = load_manifest_sequences(data, cfg.geometry);
        KeyPoseSet kp = KeyPoseSet::load(mp.keyposes_path());
        CvaeModel cvae = CvaeModel::load(mp.cvae_path());
        std::vector<std::vector<Eigen::VectorXf>> latent_seqs;
        for (const auto& seq : corpus)
            latent_seqs.push_back(
                encode_sequence_latents(seq, assign_poses(seq, kp), kp.k, cvae));
        int skipped = 0;
        auto windows = make_training_windows(latent_seqs, &skipped);
        if (skipped)
            std::cerr << "warning: skipped " << skipped << " sequences shorter than "
                      << kWindowLen << " frames\n";
        BilstmTrainOptions bopts{cfg.degree_schedule, cfg.freeze_masks};
        std::vector<BilstmEpochLog> log;
        BilstmModel model =
            train_bilstm(windows, BilstmConfig::from(cfg), cfg.bilstm_train, bopts, &log);
        fs::create_directories(mp.bilstm_path().parent_path());
        model.save(mp.bilstm_path());
        fs::create_directories(out);
        write_bilstm_log(log, fs::path(out) / "bilstm_loss.csv");
        std::cout << "latent filter -> " << mp.bilstm_path() << '\n';
        return 0;
    }

    if (c_geinet->parsed()) {
        auto corpus = load_manifest_sequences(data, cfg.geometry);
        std::vector<std::pair<SilhouetteFrame, std::string>> gallery;
        for (const auto& seq : corpus) gallery.emplace_back(compute_gei(seq), seq.subject_label);
        GeinetConfig gc;
        gc.geometry = cfg.geometry;
        std::vector<GeinetEpochLog> log;
        GeinetModel model = train_geinet(gallery, gc, cfg.geinet_train, &log);
        fs::create_directories(mp.geinet_path().parent_path());
        model.save(mp.geinet_path());
        fs::create_directories(out);
        std::ofstream lf(fs::path(out) / "geinet_log.csv");
        lf << "epoch,l_ce,accuracy\n";
        for (const auto& e : log) lf << e.epoch << ',' << e.l_ce << ',' << e.accuracy << '\n';
        std::cout << "classifier -> " << mp.geinet_path() << '\n';
        return 0;
    }

    if (c_label->parsed()) {
        auto corpus = load_manifest_sequences(data, cfg.geometry);
        KeyPoseSet kp = KeyPoseSet::load(mp.keyposes_path());
        fs::create_directories(out);
        std::vector<PoseAssignment> pas(corpus.size());
        parallel_for(static_cast<int>(corpus.size()), jobs,
                     [&](int i) { pas[i] = assign_poses(corpus[i], kp); });
        for (std::size_t i = 0; i < corpus.size(); ++i)
            save_assignment(pas[i], kp.k,
                            fs::path(out) / (corpus[i].sequence_id + "_states.txt"));
        std::cout << "labeled " << corpus.size() << " sequences -> " << out << '\n';
        return 0;
    }

    if (c_occlude->parsed()) {
        auto corpus = load_manifest_sequences(data, cfg.geometry);
        std::vector<GaitSequence> occluded;
        fs::create_directories(out);
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const std::uint64_t s = cfg.seed + 0x100 * i;
            occluded.push_back(occlude_sequence(corpus[i], degree, s));
            save_mask(sample_mask(corpus[i].size(), degree, s),
                      fs::path(out) / (corpus[i].sequence_id + "_mask.txt"));
        }
        save_corpus(occluded, out);
        std::cout << "occluded " << corpus.size() << " sequences -> " << out << '\n';
        return 0;
    }

    if (c_rec->parsed()) {
        auto corpus = load_manifest_sequences(data, cfg.geometry);
        KeyPoseSet kp = KeyPoseSet::load(mp.keyposes_path());
        CvaeModel cvae = CvaeModel::load(mp.cvae_path());
        BilstmModel bilstm = BilstmModel::load(mp.bilstm_path());
        std::vector<GaitSequence> recs(corpus.size());
        std::vector<std::vector<ReconstructionRow>> reports(corpus.size());
        parallel_for(static_cast<int>(corpus.size()), jobs, [&](int i) {
            const auto pa = assign_poses(corpus[i], kp);
            recs[i] = reconstruct_sequence(corpus[i], pa, kp.k, cvae, bilstm);
            const auto conds = reconstruction_conditions(pa, kp.k);
            for (int f = 0; f < corpus[i].size(); ++f)
                reports[i].push_back(
                    {f, corpus[i].frames[f].is_occluded_placeholder, conds[f], -1.0});
        });
        save_corpus(recs, out);
        for (std::size_t i = 0; i < corpus.size(); ++i)
            write_reconstruction_report(
                reports[i], fs::path(out) / (corpus[i].sequence_id + "_report.csv"));
        std::cout << "reconstructed " << corpus.size() << " sequences -> " << out << '\n';
        return 0;
    }

    if (c_eval->parsed()) {
        auto probes = load_manifest_sequences(data, cfg.geometry);
        std::vector<GaitSequence> clean;
        if (!clean_data.empty()) clean = load_manifest_sequences(clean_data, cfg.geometry);
        KeyPoseSet kp = KeyPoseSet::load(mp.keyposes_path());
        CvaeModel cvae = CvaeModel::load(mp.cvae_path());
        BilstmModel bilstm = BilstmModel::load(mp.bilstm_path());
        GeinetModel geinet = GeinetModel::load(mp.geinet_path());
        PipelineHandles handles{&kp, &cvae, &bilstm, &geinet};
        std::vector<EvalRecord> records(probes.size());
        parallel_for(static_cast<int>(probes.size()), jobs, [&](int i) {
            const GaitSequence* gt = nullptr;
            for (const auto& c : clean)
                if (c.sequence_id == probes[i].sequence_id) gt = &c;
            records[i] = evaluate_probe(probes[i], handles, gt);
        });
        fs::create_directories(out);
        write_records_csv(records, fs::path(out) / "records.csv");
        const auto curve = cmc_curve(records, max_rank);
        write_cmc_csv(curve, fs::path(out) / "cmc.csv");
        render_cmc_plot(curve, fs::path(out) / "cmc.pgm");
        std::cout << "rank-1 accuracy: " << curve.front().second << "% -> " << out << '\n';
        return 0;
    }

    if (c_sweep->parsed()) {
        auto probes = load_manifest_sequences(data, cfg.geometry);
        KeyPoseSet kp = KeyPoseSet::load(mp.keyposes_path());
        CvaeModel cvae = CvaeModel::load(mp.cvae_path());
        BilstmModel bilstm = BilstmModel::load(mp.bilstm_path());
        GeinetModel geinet = GeinetModel::load(mp.geinet_path());
        PipelineHandles handles{&kp, &cvae, &bilstm, &geinet};
        SweepOptions opts;
        opts.trials_per_degree = trials;
        opts.seed = cfg.seed;
        opts.jobs = jobs;
        SweepReport report = occlusion_sweep(probes, handles, opts);
        fs::create_directories(out);
        write_sweep_csv(report, fs::path(out) / "sweep.csv");
        render_sweep_plot(report, fs::path(out) / "sweep.pgm");
        std::cout << "sweep -> " << out << '\n';
        return 0;
    }

    if (c_kfold->parsed()) {
        auto corpus = load_manifest_sequences(data, cfg.geometry);
        std::vector<std::pair<SilhouetteFrame, std::string>> gallery;
        for (const auto& seq : corpus) gallery.emplace_back(compute_gei(seq), seq.subject_label);
        GeinetConfig gc;
        gc.geometry = cfg.geometry;
        auto results = kfold_robustness(gallery, k_values, gc, cfg.geinet_train);
        fs::create_directories(out);
        write_kfold_csv(results, fs::path(out) / "kfold.csv");
        render_kfold_plot(results, fs::path(out) / "kfold.pgm");
        std::cout << "kfold -> " << out << '\n';
        return 0;
    }

    std::cerr << "error module=cli cause=unknown command\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const PipelineError& e) {
        std::cerr << "error module=" << e.module_name() << " cause=" << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error module=cli cause=" << e.what() << '\n';
        return 1;
    }
}
