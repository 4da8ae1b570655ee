#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <utility>
#include <vector>

#include "bgait/keypose.hpp"

namespace bgait {

// Cyclic key-pose transitions plus an always-reachable occlusion state.
// States are 1-based: 1..k are key poses, k+1 is the occlusion state.
struct StateTransitionModel {
    int k = 16;

    bool allowed(int from, int to) const {
        const int occluded = k + 1;
        if (from == occluded || to == occluded) return true;
        return to == from || to == (from % k) + 1;
    }
};

// N x (K+1) frame-to-state distances; the last column is constant tau.
struct DistanceMatrix {
    Eigen::MatrixXd values;
    int n_frames = 0;
    int n_states = 0;
};

struct PoseAssignment {
    std::vector<int> states;  // 1-based, k+1 = occluded
    double total_cost = 0.0;
    std::vector<int> occluded_indices;  // 0-based frame indices
};

DistanceMatrix distance_matrix(const GaitSequence& seq, const KeyPoseSet& keyposes);

// Minimum vertex-weight path through the transition DAG; any start state is
// permitted, ties break toward the lowest state index.
PoseAssignment map_frames(const DistanceMatrix& m, const StateTransitionModel& model);

// Maximal runs of consecutive occluded frames as (start_index, length).
std::vector<std::pair<int, int>> detect_occlusion_runs(const PoseAssignment& pa);

// One `<frame_index> <state_index> <is_occluded 0|1>` line per frame.
void save_assignment(const PoseAssignment& pa, int k, const std::filesystem::path& file);

}  // namespace bgait
