#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bgait/errors.hpp"

namespace bgait {

struct FrameGeometry {
    int width = 64;
    int height = 64;

    bool operator==(const FrameGeometry&) const = default;
    int pixel_count() const { return width * height; }
};

// One normalized binary silhouette. Pixels are stored row-major as an
// Eigen matrix of shape height x width with values in [0,1].
struct SilhouetteFrame {
    Eigen::MatrixXf pixels;  // rows = height, cols = width
    bool is_occluded_placeholder = false;

    FrameGeometry geometry() const {
        return {static_cast<int>(pixels.cols()), static_cast<int>(pixels.rows())};
    }
    Eigen::VectorXf flatten() const;

    static SilhouetteFrame placeholder(FrameGeometry geometry);
};

struct GaitSequence {
    std::vector<SilhouetteFrame> frames;
    std::string subject_label;  // empty = unlabeled
    std::string sequence_id;

    int size() const { return static_cast<int>(frames.size()); }
};

// Crops the tight foreground bounding box, rescales to `geometry` with the
// aspect ratio preserved by height, and centers the result horizontally on
// the foreground centroid with zero padding. Output pixels are exactly 0/1.
// Idempotent and invariant to foreground translation in the raw mask.
SilhouetteFrame normalize_frame(const Eigen::MatrixXf& raw_mask, FrameGeometry geometry);

// Directory-of-frames loader. Image files are read in lexicographic name
// order, binarized at 0.5 and normalized. A `meta.txt` sidecar with a
// `subject=<label>` line populates subject_label.
GaitSequence load_sequence(const std::filesystem::path& dir, FrameGeometry geometry);

// Writes frames as binary 8-bit PGM files `frame_%05d.pgm` plus meta.txt.
void save_sequence(const GaitSequence& seq, const std::filesystem::path& dir);

// 8-bit grayscale PGM (P5) I/O, values scaled to [0,1].
Eigen::MatrixXf read_pgm(const std::filesystem::path& file);
void write_pgm(const Eigen::MatrixXf& image, const std::filesystem::path& file);

// Manifest of a synthetic dataset: one `<sequence_id> <subject_label> <path>`
// line per sequence.
struct ManifestEntry {
    std::string sequence_id;
    std::string subject_label;
    std::string path;
};
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& file);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& file);

}  // namespace bgait
