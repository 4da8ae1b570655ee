#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bgait/errors.hpp"

namespace bgait {

// Binary checkpoint container. Every file starts with a fixed magic, a
// format-version integer and a payload type tag; loading a mismatched
// version or tag is a hard error.
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointWriter {
public:
    CheckpointWriter(const std::filesystem::path& file, const std::string& type_tag);

    void write_u32(std::uint32_t v);
    void write_u64(std::uint64_t v);
    void write_i32(std::int32_t v);
    void write_f32(float v);
    void write_f64(double v);
    void write_string(const std::string& s);
    void write_matrix(const Eigen::MatrixXf& m);
    void write_vector(const Eigen::VectorXf& v);

    void close();

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class CheckpointReader {
public:
    CheckpointReader(const std::filesystem::path& file, const std::string& expected_tag);

    std::uint32_t read_u32();
    std::uint64_t read_u64();
    std::int32_t read_i32();
    float read_f32();
    double read_f64();
    std::string read_string();
    Eigen::MatrixXf read_matrix();
    Eigen::VectorXf read_vector();

private:
    void raw(void* dst, std::size_t n);
    std::ifstream in_;
    std::filesystem::path path_;
};

}  // namespace bgait
