#include "bgait/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bgait {

namespace fs = std::filesystem;

Eigen::VectorXf SilhouetteFrame::flatten() const {
    Eigen::VectorXf v(pixels.size());
    int idx = 0;
    for (int r = 0; r < pixels.rows(); ++r)
        for (int c = 0; c < pixels.cols(); ++c) v[idx++] = pixels(r, c);
    return v;
}

SilhouetteFrame SilhouetteFrame::placeholder(FrameGeometry geometry) {
    SilhouetteFrame f;
    f.pixels = Eigen::MatrixXf::Zero(geometry.height, geometry.width);
    f.is_occluded_placeholder = true;
    return f;
}

namespace {

struct BBox {
    int top, bottom, left, right;  // inclusive
    int height() const { return bottom - top + 1; }
    int width() const { return right - left + 1; }
};

BBox foreground_bbox(const Eigen::MatrixXf& mask) {
    int top = -1, bottom = -1, left = -1, right = -1;
    for (int r = 0; r < mask.rows(); ++r)
        for (int c = 0; c < mask.cols(); ++c)
            if (mask(r, c) > 0.5f) {
                if (top < 0) top = r;
                bottom = r;
                if (left < 0 || c < left) left = c;
                if (right < 0 || c > right) right = c;
            }
    if (top < 0) throw EmptyFrame("raw mask has no foreground pixel");
    return {top, bottom, left, right};
}

// Nearest-neighbor resample of a binary crop; identity when shapes match.
Eigen::MatrixXf resize_nearest(const Eigen::MatrixXf& in, int out_h, int out_w) {
    Eigen::MatrixXf out(out_h, out_w);
    const int in_h = static_cast<int>(in.rows());
    const int in_w = static_cast<int>(in.cols());
    for (int r = 0; r < out_h; ++r) {
        int sr = std::min(in_h - 1, static_cast<int>((r + 0.5) * in_h / out_h));
        for (int c = 0; c < out_w; ++c) {
            int sc = std::min(in_w - 1, static_cast<int>((c + 0.5) * in_w / out_w));
            out(r, c) = in(sr, sc) > 0.5f ? 1.0f : 0.0f;
        }
    }
    return out;
}

Eigen::MatrixXf normalize_once(const Eigen::MatrixXf& raw_mask, FrameGeometry geometry);

}  // namespace

SilhouetteFrame normalize_frame(const Eigen::MatrixXf& raw_mask, FrameGeometry geometry) {
    // Strong downscaling can drop bounding-box edge rows, so a single pass is
    // not always a fixed point of itself; iterate until it is.
    Eigen::MatrixXf cur = normalize_once(raw_mask, geometry);
    for (int iter = 0; iter < 4; ++iter) {
        Eigen::MatrixXf next = normalize_once(cur, geometry);
        if (next == cur) break;
        cur = std::move(next);
    }
    SilhouetteFrame frame;
    frame.pixels = std::move(cur);
    return frame;
}

namespace {

Eigen::MatrixXf normalize_once(const Eigen::MatrixXf& raw_mask, FrameGeometry geometry) {
    const BBox box = foreground_bbox(raw_mask);
    Eigen::MatrixXf crop = raw_mask.block(box.top, box.left, box.height(), box.width());

    // Scale by height; fall back to width when the scaled crop is too wide.
    int out_h = geometry.height;
    int out_w = static_cast<int>(std::lround(static_cast<double>(box.width()) * geometry.height /
                                             box.height()));
    out_w = std::max(out_w, 1);
    if (out_w > geometry.width) {
        out_w = geometry.width;
        out_h = std::max(1, static_cast<int>(std::lround(static_cast<double>(box.height()) *
                                                         geometry.width / box.width())));
    }
    Eigen::MatrixXf resized = resize_nearest(crop, out_h, out_w);

    // Horizontal placement: foreground centroid lands on the frame center.
    double cx_sum = 0.0;
    long n_fg = 0;
    for (int r = 0; r < resized.rows(); ++r)
        for (int c = 0; c < resized.cols(); ++c)
            if (resized(r, c) > 0.5f) {
                cx_sum += c;
                ++n_fg;
            }
    const double cx = n_fg > 0 ? cx_sum / n_fg : (out_w - 1) / 2.0;
    int left = static_cast<int>(std::lround((geometry.width - 1) / 2.0 - cx));
    left = std::clamp(left, 0, geometry.width - out_w);
    const int top = (geometry.height - out_h) / 2;

    Eigen::MatrixXf out = Eigen::MatrixXf::Zero(geometry.height, geometry.width);
    out.block(top, left, out_h, out_w) = resized;
    return out;
}

}  // namespace

Eigen::MatrixXf read_pgm(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw UnreadableImage("cannot open " + file.string());
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2")
        throw UnreadableImage("unsupported raster format in " + file.string());
    auto next_token = [&in, &file]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw UnreadableImage("truncated header in " + file.string());
    };
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw UnreadableImage("bad header in " + file.string());

    Eigen::MatrixXf img(h, w);
    if (magic == "P5") {
        in.get();  // single whitespace after maxval
        std::vector<std::uint8_t> buf(static_cast<size_t>(w) * h);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in) throw UnreadableImage("truncated pixel data in " + file.string());
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                img(r, c) = static_cast<float>(buf[static_cast<size_t>(r) * w + c]) / maxval;
    } else {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                int v;
                if (!(in >> v)) throw UnreadableImage("truncated pixel data in " + file.string());
                img(r, c) = static_cast<float>(v) / maxval;
            }
    }
    return img;
}

void write_pgm(const Eigen::MatrixXf& image, const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw MissingPath("cannot write " + file.string());
    out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
    for (int r = 0; r < image.rows(); ++r)
        for (int c = 0; c < image.cols(); ++c) {
            float v = std::clamp(image(r, c), 0.0f, 1.0f);
            out.put(static_cast<char>(std::lround(v * 255.0f)));
        }
}

GaitSequence load_sequence(const fs::path& dir, FrameGeometry geometry) {
    if (!fs::is_directory(dir)) throw MissingPath("no such directory: " + dir.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".pgm") files.push_back(entry.path());
    }
    if (files.empty()) throw MissingPath("no image files in " + dir.string());
    std::sort(files.begin(), files.end());

    GaitSequence seq;
    seq.sequence_id = dir.filename().string();
    for (const auto& file : files) {
        Eigen::MatrixXf raw = read_pgm(file);
        Eigen::MatrixXf binary = (raw.array() > 0.5f).cast<float>();
        if ((binary.array() > 0.5f).any()) {
            seq.frames.push_back(normalize_frame(binary, geometry));
        } else {
            seq.frames.push_back(SilhouetteFrame::placeholder(geometry));
        }
    }

    const fs::path meta = dir / "meta.txt";
    if (fs::exists(meta)) {
        std::ifstream in(meta);
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind("subject=", 0) == 0) seq.subject_label = line.substr(8);
        }
    }
    return seq;
}

void save_sequence(const GaitSequence& seq, const fs::path& dir) {
    fs::create_directories(dir);
    char name[32];
    for (int i = 0; i < seq.size(); ++i) {
        std::snprintf(name, sizeof(name), "frame_%05d.pgm", i);
        write_pgm(seq.frames[i].pixels, dir / name);
    }
    if (!seq.subject_label.empty()) {
        std::ofstream out(dir / "meta.txt");
        out << "subject=" << seq.subject_label << "\n";
    }
}

void write_manifest(const std::vector<ManifestEntry>& entries, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw MissingPath("cannot write " + file.string());
    for (const auto& e : entries)
        out << e.sequence_id << " " << e.subject_label << " " << e.path << "\n";
}

std::vector<ManifestEntry> read_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw MissingPath("cannot read " + file.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        if (ls >> e.sequence_id >> e.subject_label >> e.path) entries.push_back(e);
    }
    return entries;
}

}  // namespace bgait
