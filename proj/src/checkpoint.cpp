#include "bgait/checkpoint.hpp"

#include <cstring>

namespace bgait {

namespace {
constexpr char kMagic[4] = {'B', 'G', 'K', 'P'};
}

CheckpointWriter::CheckpointWriter(const std::filesystem::path& file, const std::string& type_tag)
    : out_(file, std::ios::binary), path_(file) {
    if (!out_) throw CheckpointError("cannot write " + file.string());
    out_.write(kMagic, 4);
    write_u32(kCheckpointVersion);
    write_string(type_tag);
}

void CheckpointWriter::write_u32(std::uint32_t v) { out_.write(reinterpret_cast<char*>(&v), 4); }
void CheckpointWriter::write_u64(std::uint64_t v) { out_.write(reinterpret_cast<char*>(&v), 8); }
void CheckpointWriter::write_i32(std::int32_t v) { out_.write(reinterpret_cast<char*>(&v), 4); }
void CheckpointWriter::write_f32(float v) { out_.write(reinterpret_cast<char*>(&v), 4); }
void CheckpointWriter::write_f64(double v) { out_.write(reinterpret_cast<char*>(&v), 8); }

void CheckpointWriter::write_string(const std::string& s) {
    write_u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void CheckpointWriter::write_matrix(const Eigen::MatrixXf& m) {
    write_u32(static_cast<std::uint32_t>(m.rows()));
    write_u32(static_cast<std::uint32_t>(m.cols()));
    out_.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(sizeof(float) * m.size()));
}

void CheckpointWriter::write_vector(const Eigen::VectorXf& v) {
    write_u32(static_cast<std::uint32_t>(v.size()));
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(sizeof(float) * v.size()));
}

void CheckpointWriter::close() {
    out_.close();
    if (!out_) throw CheckpointError("write failed for " + path_.string());
}

CheckpointReader::CheckpointReader(const std::filesystem::path& file,
                                   const std::string& expected_tag)
    : in_(file, std::ios::binary), path_(file) {
    if (!in_) throw CheckpointError("cannot read " + file.string());
    char magic[4];
    raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("not a checkpoint file: " + file.string());
    const std::uint32_t version = read_u32();
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " in " + file.string());
    const std::string tag = read_string();
    if (tag != expected_tag)
        throw CheckpointError("checkpoint type mismatch in " + file.string() + ": expected " +
                              expected_tag + ", found " + tag);
}

void CheckpointReader::raw(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError("truncated checkpoint: " + path_.string());
}

std::uint32_t CheckpointReader::read_u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
}
std::uint64_t CheckpointReader::read_u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
}
std::int32_t CheckpointReader::read_i32() {
    std::int32_t v;
    raw(&v, 4);
    return v;
}
float CheckpointReader::read_f32() {
    float v;
    raw(&v, 4);
    return v;
}
double CheckpointReader::read_f64() {
    double v;
    raw(&v, 8);
    return v;
}

std::string CheckpointReader::read_string() {
    const std::uint32_t n = read_u32();
    std::string s(n, '\0');
    if (n > 0) raw(s.data(), n);
    return s;
}

Eigen::MatrixXf CheckpointReader::read_matrix() {
    const std::uint32_t rows = read_u32();
    const std::uint32_t cols = read_u32();
    Eigen::MatrixXf m(rows, cols);
    if (m.size() > 0) raw(m.data(), sizeof(float) * m.size());
    return m;
}

Eigen::VectorXf CheckpointReader::read_vector() {
    const std::uint32_t n = read_u32();
    Eigen::VectorXf v(n);
    if (n > 0) raw(v.data(), sizeof(float) * n);
    return v;
}

}  // namespace bgait
