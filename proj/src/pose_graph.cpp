#include "bgait/pose_graph.hpp"

#include <fstream>
#include <limits>

#include "bgait/errors.hpp"

namespace bgait {

DistanceMatrix distance_matrix(const GaitSequence& seq, const KeyPoseSet& keyposes) {
    const int n = seq.size();
    const int k = keyposes.k;
    DistanceMatrix m;
    m.n_frames = n;
    m.n_states = k + 1;
    m.values.resize(n, k + 1);
    for (int i = 0; i < n; ++i) {
        if (seq.frames[i].geometry() != keyposes.subspace.geometry)
            throw GeometryMismatch("frame geometry does not match key-pose subspace");
        const Eigen::VectorXf e = keyposes.subspace.project(seq.frames[i]);
        for (int c = 0; c < k; ++c)
            m.values(i, c) = static_cast<double>((e - keyposes.embeddings[c]).norm());
        m.values(i, k) = keyposes.occlusion_threshold;
    }
    return m;
}

PoseAssignment map_frames(const DistanceMatrix& m, const StateTransitionModel& model) {
    const int n = m.n_frames;
    const int s = m.n_states;
    if (s != model.k + 1) throw GeometryMismatch("distance matrix states != model k + 1");

    constexpr double kInf = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd cost(n, s);
    Eigen::MatrixXi back(n, s);

    for (int j = 0; j < s; ++j) {
        cost(0, j) = m.values(0, j);
        back(0, j) = -1;
    }
    for (int i = 1; i < n; ++i) {
        for (int j = 0; j < s; ++j) {
            double best = kInf;
            int arg = -1;
            for (int p = 0; p < s; ++p) {
                if (!model.allowed(p + 1, j + 1)) continue;
                if (cost(i - 1, p) < best) {  // strict: ties keep lowest p
                    best = cost(i - 1, p);
                    arg = p;
                }
            }
            cost(i, j) = best + m.values(i, j);
            back(i, j) = arg;
        }
    }

    int last = 0;
    for (int j = 1; j < s; ++j)
        if (cost(n - 1, j) < cost(n - 1, last)) last = j;

    PoseAssignment pa;
    pa.states.resize(n);
    pa.total_cost = cost(n - 1, last);
    for (int i = n - 1; i >= 0; --i) {
        pa.states[i] = last + 1;
        last = back(i, last);
    }
    for (int i = 0; i < n; ++i)
        if (pa.states[i] == s) pa.occluded_indices.push_back(i);
    return pa;
}

std::vector<std::pair<int, int>> detect_occlusion_runs(const PoseAssignment& pa) {
    std::vector<std::pair<int, int>> runs;
    for (std::size_t i = 0; i < pa.occluded_indices.size();) {
        std::size_t j = i;
        while (j + 1 < pa.occluded_indices.size() &&
               pa.occluded_indices[j + 1] == pa.occluded_indices[j] + 1)
            ++j;
        runs.emplace_back(pa.occluded_indices[i], static_cast<int>(j - i + 1));
        i = j + 1;
    }
    return runs;
}

void save_assignment(const PoseAssignment& pa, int k, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath("cannot write " + file.string());
    for (std::size_t i = 0; i < pa.states.size(); ++i)
        out << i << " " << pa.states[i] << " " << (pa.states[i] == k + 1 ? 1 : 0) << "\n";
}

}  // namespace bgait
