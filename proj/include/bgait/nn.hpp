#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "bgait/checkpoint.hpp"

namespace bgait::nn {

// Activations are column batches: (features) x (batch). Image activations
// are flattened channel-major, pixel (c, y, x) at index c*H*W + y*W + x.
using Matrix = Eigen::MatrixXf;

struct Rng {
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    float normal(float stddev = 1.0f) {
        return std::normal_distribution<float>(0.0f, stddev)(gen);
    }
    float uniform(float lo, float hi) {
        return std::uniform_real_distribution<float>(lo, hi)(gen);
    }
    std::uint32_t index(std::uint32_t n) {
        return std::uniform_int_distribution<std::uint32_t>(0, n - 1)(gen);
    }
    std::mt19937_64 gen;
};

struct Param {
    Matrix value;
    Matrix grad;

    void init(int rows, int cols) {
        value.setZero(rows, cols);
        grad.setZero(rows, cols);
    }
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Matrix forward(const Matrix& x, bool training) = 0;
    virtual Matrix backward(const Matrix& dy) = 0;
    virtual std::vector<Param*> params() { return {}; }
    // Non-trainable state that must survive a checkpoint round trip.
    virtual std::vector<Matrix*> aux_state() { return {}; }
};

class Dense : public Layer {
public:
    Dense(int in, int out, Rng& rng, bool bias = true);
    Matrix forward(const Matrix& x, bool training) override;
    Matrix backward(const Matrix& dy) override;
    std::vector<Param*> params() override;

    Param weight;  // out x in
    Param bias_p;  // out x 1

private:
    bool use_bias_;
    Matrix x_;
};

class Relu : public Layer {
public:
    Matrix forward(const Matrix& x, bool training) override;
    Matrix backward(const Matrix& dy) override;

private:
    Matrix mask_;
};

class Sigmoid : public Layer {
public:
    Matrix forward(const Matrix& x, bool training) override;
    Matrix backward(const Matrix& dy) override;

private:
    Matrix y_;
};

struct ImageShape {
    int channels = 1, height = 0, width = 0;
    int size() const { return channels * height * width; }
};

class Conv2d : public Layer {
public:
    Conv2d(ImageShape in, int out_channels, int kernel, int stride, int pad, Rng& rng);
    Matrix forward(const Matrix& x, bool training) override;
    Matrix backward(const Matrix& dy) override;
    std::vector<Param*> params() override;

    ImageShape out_shape() const { return out_; }

    Param weight;  // out_channels x (in_channels * k * k)
    Param bias_p;  // out_channels x 1

private:
    Matrix im2col(const Matrix& x) const;
    ImageShape in_, out_;
    int kernel_, stride_, pad_;
    Matrix cols_;  // cached for backward
};

// Per-channel batch normalization over batch and spatial positions.
class BatchNorm : public Layer {
public:
    BatchNorm(ImageShape shape, float momentum = 0.9f, float eps = 1e-5f);
    Matrix forward(const Matrix& x, bool training) override;
    Matrix backward(const Matrix& dy) override;
    std::vector<Param*> params() override;
    std::vector<Matrix*> aux_state() override;

    Param gamma, beta;  // channels x 1

private:
    ImageShape shape_;
    float momentum_, eps_;
    Matrix running_mean_, running_var_;  // channels x 1
    Matrix xhat_;
    Eigen::VectorXf batch_inv_std_;
};

class MaxPool2 : public Layer {
public:
    explicit MaxPool2(ImageShape in);
    Matrix forward(const Matrix& x, bool training) override;
    Matrix backward(const Matrix& dy) override;
    ImageShape out_shape() const { return out_; }

private:
    ImageShape in_, out_;
    Eigen::MatrixXi argmax_;
};

// Nearest-neighbor 2x spatial upsampling; backward sum-pools gradients.
class Upsample2 : public Layer {
public:
    explicit Upsample2(ImageShape in);
    Matrix forward(const Matrix& x, bool training) override;
    Matrix backward(const Matrix& dy) override;
    ImageShape out_shape() const { return out_; }

private:
    ImageShape in_, out_;
};

class Sequential : public Layer {
public:
    Sequential() = default;
    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    Matrix forward(const Matrix& x, bool training) override;
    Matrix backward(const Matrix& dy) override;
    std::vector<Param*> params() override;
    std::vector<Matrix*> aux_state() override;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Recurrent layers process a fixed-length sequence of column batches.
class SeqLayer {
public:
    virtual ~SeqLayer() = default;
    virtual std::vector<Matrix> forward(const std::vector<Matrix>& xs, bool training) = 0;
    virtual std::vector<Matrix> backward(const std::vector<Matrix>& dys) = 0;
    virtual std::vector<Param*> params() = 0;
};

// Single-direction LSTM; zero initial state, gate order (i, f, g, o).
class Lstm : public SeqLayer {
public:
    Lstm(int input, int hidden, Rng& rng, bool reverse = false);
    std::vector<Matrix> forward(const std::vector<Matrix>& xs, bool training) override;
    std::vector<Matrix> backward(const std::vector<Matrix>& dys) override;
    std::vector<Param*> params() override;

    Param wx;  // 4h x input
    Param wh;  // 4h x hidden
    Param bias_p;  // 4h x 1

private:
    int input_, hidden_;
    bool reverse_;
    std::vector<Matrix> xs_, gates_, cs_, hs_;  // caches
};

// Forward and reverse LSTM over the same input, outputs concatenated.
class BiLstm : public SeqLayer {
public:
    BiLstm(int input, int hidden, Rng& rng);
    std::vector<Matrix> forward(const std::vector<Matrix>& xs, bool training) override;
    std::vector<Matrix> backward(const std::vector<Matrix>& dys) override;
    std::vector<Param*> params() override;

private:
    int hidden_;
    Lstm fwd_, bwd_;
};

// The same Dense applied independently at every timestep.
class TimeDistributedDense : public SeqLayer {
public:
    TimeDistributedDense(int in, int out, Rng& rng);
    std::vector<Matrix> forward(const std::vector<Matrix>& xs, bool training) override;
    std::vector<Matrix> backward(const std::vector<Matrix>& dys) override;
    std::vector<Param*> params() override;

    Dense dense;

private:
    std::vector<Matrix> xs_;
};

class Adam {
public:
    Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);
    void step();
    void zero_grad();
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    std::vector<Param*> params_;
    std::vector<Matrix> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

// Column-wise softmax.
Matrix softmax(const Matrix& logits);

// Mean cross-entropy over the batch for integer targets; also emits the
// logits gradient.
float cross_entropy_loss(const Matrix& logits, const std::vector<int>& targets, Matrix* dlogits);

void serialize_params(CheckpointWriter& w, Layer& layer);
void deserialize_params(CheckpointReader& r, Layer& layer);
void serialize_params(CheckpointWriter& w, SeqLayer& layer);
void deserialize_params(CheckpointReader& r, SeqLayer& layer);

}  // namespace bgait::nn
