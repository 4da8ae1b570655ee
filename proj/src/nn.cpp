#include "bgait/nn.hpp"

#include <cmath>

#include "bgait/errors.hpp"

namespace bgait::nn {

namespace {

void uniform_init(Param& p, int rows, int cols, float scale, Rng& rng) {
    p.init(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) p.value(r, c) = rng.uniform(-scale, scale);
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(int in, int out, Rng& rng, bool bias) : use_bias_(bias) {
    uniform_init(weight, out, in, 1.0f / std::sqrt(static_cast<float>(in)), rng);
    bias_p.init(out, 1);
}

Matrix Dense::forward(const Matrix& x, bool training) {
    if (training) x_ = x;  // inference keeps the layer state untouched
    Matrix y = weight.value * x;
    if (use_bias_) y.colwise() += Eigen::VectorXf(bias_p.value.col(0));
    return y;
}

Matrix Dense::backward(const Matrix& dy) {
    weight.grad += dy * x_.transpose();
    if (use_bias_) bias_p.grad.col(0) += dy.rowwise().sum();
    return weight.value.transpose() * dy;
}

std::vector<Param*> Dense::params() {
    if (use_bias_) return {&weight, &bias_p};
    return {&weight};
}

// ---------------------------------------------------------------------------
// Elementwise activations

Matrix Relu::forward(const Matrix& x, bool training) {
    if (!training) return x.cwiseMax(0.0f);
    mask_ = (x.array() > 0.0f).cast<float>();
    return x.cwiseProduct(mask_);
}

Matrix Relu::backward(const Matrix& dy) { return dy.cwiseProduct(mask_); }

Matrix Sigmoid::forward(const Matrix& x, bool training) {
    Matrix y = (1.0f / (1.0f + (-x.array()).exp())).matrix();
    if (training) y_ = y;
    return y;
}

Matrix Sigmoid::backward(const Matrix& dy) {
    return (dy.array() * y_.array() * (1.0f - y_.array())).matrix();
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(ImageShape in, int out_channels, int kernel, int stride, int pad, Rng& rng)
    : in_(in), kernel_(kernel), stride_(stride), pad_(pad) {
    out_.channels = out_channels;
    out_.height = (in.height + 2 * pad - kernel) / stride + 1;
    out_.width = (in.width + 2 * pad - kernel) / stride + 1;
    const int fan_in = in.channels * kernel * kernel;
    uniform_init(weight, out_channels, fan_in, 1.0f / std::sqrt(static_cast<float>(fan_in)), rng);
    bias_p.init(out_channels, 1);
}

Matrix Conv2d::im2col(const Matrix& x) const {
    const int b = static_cast<int>(x.cols());
    const int patch = in_.channels * kernel_ * kernel_;
    const int opix = out_.height * out_.width;
    Matrix cols = Matrix::Zero(patch, static_cast<long>(opix) * b);
    for (int s = 0; s < b; ++s) {
        for (int oy = 0; oy < out_.height; ++oy)
            for (int ox = 0; ox < out_.width; ++ox) {
                const long col = static_cast<long>(s) * opix + oy * out_.width + ox;
                for (int c = 0; c < in_.channels; ++c)
                    for (int ky = 0; ky < kernel_; ++ky) {
                        const int y = oy * stride_ - pad_ + ky;
                        if (y < 0 || y >= in_.height) continue;
                        for (int kx = 0; kx < kernel_; ++kx) {
                            const int xx = ox * stride_ - pad_ + kx;
                            if (xx < 0 || xx >= in_.width) continue;
                            cols((c * kernel_ + ky) * kernel_ + kx, col) =
                                x(c * in_.height * in_.width + y * in_.width + xx, s);
                        }
                    }
            }
    }
    return cols;
}

Matrix Conv2d::forward(const Matrix& x, bool training) {
    const int b = static_cast<int>(x.cols());
    const int opix = out_.height * out_.width;
    Matrix cols = im2col(x);
    Matrix y = weight.value * cols;  // out_c x (opix*b)
    if (training) cols_ = std::move(cols);
    y.colwise() += Eigen::VectorXf(bias_p.value.col(0));

    Matrix out(out_.size(), b);
    for (int s = 0; s < b; ++s)
        for (int c = 0; c < out_.channels; ++c)
            for (int p = 0; p < opix; ++p)
                out(c * opix + p, s) = y(c, static_cast<long>(s) * opix + p);
    return out;
}

Matrix Conv2d::backward(const Matrix& dy) {
    const int b = static_cast<int>(dy.cols());
    const int opix = out_.height * out_.width;

    Matrix dy_flat(out_.channels, static_cast<long>(opix) * b);
    for (int s = 0; s < b; ++s)
        for (int c = 0; c < out_.channels; ++c)
            for (int p = 0; p < opix; ++p)
                dy_flat(c, static_cast<long>(s) * opix + p) = dy(c * opix + p, s);

    weight.grad += dy_flat * cols_.transpose();
    bias_p.grad.col(0) += dy_flat.rowwise().sum();

    Matrix dcols = weight.value.transpose() * dy_flat;
    Matrix dx = Matrix::Zero(in_.size(), b);
    for (int s = 0; s < b; ++s) {
        for (int oy = 0; oy < out_.height; ++oy)
            for (int ox = 0; ox < out_.width; ++ox) {
                const long col = static_cast<long>(s) * opix + oy * out_.width + ox;
                for (int c = 0; c < in_.channels; ++c)
                    for (int ky = 0; ky < kernel_; ++ky) {
                        const int y = oy * stride_ - pad_ + ky;
                        if (y < 0 || y >= in_.height) continue;
                        for (int kx = 0; kx < kernel_; ++kx) {
                            const int xx = ox * stride_ - pad_ + kx;
                            if (xx < 0 || xx >= in_.width) continue;
                            dx(c * in_.height * in_.width + y * in_.width + xx, s) +=
                                dcols((c * kernel_ + ky) * kernel_ + kx, col);
                        }
                    }
            }
    }
    return dx;
}

std::vector<Param*> Conv2d::params() { return {&weight, &bias_p}; }

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(ImageShape shape, float momentum, float eps)
    : shape_(shape), momentum_(momentum), eps_(eps) {
    gamma.init(shape.channels, 1);
    gamma.value.setOnes();
    beta.init(shape.channels, 1);
    running_mean_ = Matrix::Zero(shape.channels, 1);
    running_var_ = Matrix::Ones(shape.channels, 1);
}

Matrix BatchNorm::forward(const Matrix& x, bool training) {
    const int b = static_cast<int>(x.cols());
    const int spatial = shape_.height * shape_.width;
    const long n = static_cast<long>(b) * spatial;
    Matrix y(x.rows(), b);

    if (!training) {
        for (int c = 0; c < shape_.channels; ++c) {
            const auto block = x.middleRows(c * spatial, spatial);
            const float inv_std = 1.0f / std::sqrt(running_var_(c, 0) + eps_);
            y.middleRows(c * spatial, spatial) =
                ((block.array() - running_mean_(c, 0)) * inv_std * gamma.value(c, 0) +
                 beta.value(c, 0))
                    .matrix();
        }
        return y;
    }

    xhat_.resize(x.rows(), b);
    batch_inv_std_.resize(shape_.channels);
    for (int c = 0; c < shape_.channels; ++c) {
        const auto block = x.middleRows(c * spatial, spatial);
        const float mean = block.sum() / n;
        const float var = (block.array() - mean).square().sum() / n;
        running_mean_(c, 0) = momentum_ * running_mean_(c, 0) + (1.0f - momentum_) * mean;
        running_var_(c, 0) = momentum_ * running_var_(c, 0) + (1.0f - momentum_) * var;
        const float inv_std = 1.0f / std::sqrt(var + eps_);
        batch_inv_std_[c] = inv_std;
        xhat_.middleRows(c * spatial, spatial) = ((block.array() - mean) * inv_std).matrix();
        y.middleRows(c * spatial, spatial) =
            (xhat_.middleRows(c * spatial, spatial).array() * gamma.value(c, 0) + beta.value(c, 0))
                .matrix();
    }
    return y;
}

Matrix BatchNorm::backward(const Matrix& dy) {
    const int b = static_cast<int>(dy.cols());
    const int spatial = shape_.height * shape_.width;
    const float n = static_cast<float>(static_cast<long>(b) * spatial);
    Matrix dx(dy.rows(), b);

    for (int c = 0; c < shape_.channels; ++c) {
        const auto dyb = dy.middleRows(c * spatial, spatial);
        const auto xh = xhat_.middleRows(c * spatial, spatial);
        const float sum_dy = dyb.sum();
        const float sum_dy_xhat = dyb.cwiseProduct(xh).sum();
        gamma.grad(c, 0) += sum_dy_xhat;
        beta.grad(c, 0) += sum_dy;
        dx.middleRows(c * spatial, spatial) =
            ((gamma.value(c, 0) * batch_inv_std_[c] / n) *
             (n * dyb.array() - sum_dy - xh.array() * sum_dy_xhat))
                .matrix();
    }
    return dx;
}

std::vector<Param*> BatchNorm::params() { return {&gamma, &beta}; }
std::vector<Matrix*> BatchNorm::aux_state() { return {&running_mean_, &running_var_}; }

// ---------------------------------------------------------------------------
// MaxPool2

MaxPool2::MaxPool2(ImageShape in) : in_(in) {
    out_ = {in.channels, in.height / 2, in.width / 2};
}

Matrix MaxPool2::forward(const Matrix& x, bool training) {
    const int b = static_cast<int>(x.cols());
    Matrix y(out_.size(), b);
    Eigen::MatrixXi argmax(out_.size(), b);
    for (int s = 0; s < b; ++s)
        for (int c = 0; c < in_.channels; ++c)
            for (int oy = 0; oy < out_.height; ++oy)
                for (int ox = 0; ox < out_.width; ++ox) {
                    float best = -1e30f;
                    int best_idx = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int idx = c * in_.height * in_.width +
                                            (oy * 2 + dy) * in_.width + ox * 2 + dx;
                            if (x(idx, s) > best) {
                                best = x(idx, s);
                                best_idx = idx;
                            }
                        }
                    const int oidx = c * out_.height * out_.width + oy * out_.width + ox;
                    y(oidx, s) = best;
                    argmax(oidx, s) = best_idx;
                }
    if (training) argmax_ = std::move(argmax);
    return y;
}

Matrix MaxPool2::backward(const Matrix& dy) {
    Matrix dx = Matrix::Zero(in_.size(), dy.cols());
    for (int s = 0; s < dy.cols(); ++s)
        for (int i = 0; i < dy.rows(); ++i) dx(argmax_(i, s), s) += dy(i, s);
    return dx;
}

// ---------------------------------------------------------------------------
// Upsample2

Upsample2::Upsample2(ImageShape in) : in_(in) {
    out_ = {in.channels, in.height * 2, in.width * 2};
}

Matrix Upsample2::forward(const Matrix& x, bool) {
    const int b = static_cast<int>(x.cols());
    Matrix y(out_.size(), b);
    for (int s = 0; s < b; ++s)
        for (int c = 0; c < in_.channels; ++c)
            for (int oy = 0; oy < out_.height; ++oy)
                for (int ox = 0; ox < out_.width; ++ox)
                    y(c * out_.height * out_.width + oy * out_.width + ox, s) =
                        x(c * in_.height * in_.width + (oy / 2) * in_.width + ox / 2, s);
    return y;
}

Matrix Upsample2::backward(const Matrix& dy) {
    const int b = static_cast<int>(dy.cols());
    Matrix dx = Matrix::Zero(in_.size(), b);
    for (int s = 0; s < b; ++s)
        for (int c = 0; c < in_.channels; ++c)
            for (int oy = 0; oy < out_.height; ++oy)
                for (int ox = 0; ox < out_.width; ++ox)
                    dx(c * in_.height * in_.width + (oy / 2) * in_.width + ox / 2, s) +=
                        dy(c * out_.height * out_.width + oy * out_.width + ox, s);
    return dx;
}

// ---------------------------------------------------------------------------
// Sequential

Matrix Sequential::forward(const Matrix& x, bool training) {
    Matrix cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur, training);
    return cur;
}

Matrix Sequential::backward(const Matrix& dy) {
    Matrix cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

std::vector<Param*> Sequential::params() {
    std::vector<Param*> all;
    for (auto& layer : layers_)
        for (Param* p : layer->params()) all.push_back(p);
    return all;
}

std::vector<Matrix*> Sequential::aux_state() {
    std::vector<Matrix*> all;
    for (auto& layer : layers_)
        for (Matrix* m : layer->aux_state()) all.push_back(m);
    return all;
}

// ---------------------------------------------------------------------------
// Lstm

Lstm::Lstm(int input, int hidden, Rng& rng, bool reverse)
    : input_(input), hidden_(hidden), reverse_(reverse) {
    const float sx = 1.0f / std::sqrt(static_cast<float>(input));
    const float sh = 1.0f / std::sqrt(static_cast<float>(hidden));
    uniform_init(wx, 4 * hidden, input, sx, rng);
    uniform_init(wh, 4 * hidden, hidden, sh, rng);
    bias_p.init(4 * hidden, 1);
    bias_p.value.middleRows(hidden, hidden).setOnes();  // forget-gate bias
}

std::vector<Matrix> Lstm::forward(const std::vector<Matrix>& xs, bool training) {
    const int t_len = static_cast<int>(xs.size());
    const int b = static_cast<int>(xs[0].cols());
    const int h = hidden_;
    std::vector<Matrix> c_xs(t_len), c_gates(t_len), c_cs(t_len), c_hs(t_len);

    Matrix h_prev = Matrix::Zero(h, b);
    Matrix c_prev = Matrix::Zero(h, b);
    std::vector<Matrix> out(t_len);
    for (int step = 0; step < t_len; ++step) {
        const int t = reverse_ ? t_len - 1 - step : step;
        c_xs[step] = xs[t];
        Matrix pre = wx.value * xs[t] + wh.value * h_prev;
        pre.colwise() += Eigen::VectorXf(bias_p.value.col(0));

        Matrix g(4 * h, b);
        g.middleRows(0, h) =
            (1.0f / (1.0f + (-pre.middleRows(0, h).array()).exp())).matrix();  // i
        g.middleRows(h, h) =
            (1.0f / (1.0f + (-pre.middleRows(h, h).array()).exp())).matrix();  // f
        g.middleRows(2 * h, h) = pre.middleRows(2 * h, h).array().tanh().matrix();  // g
        g.middleRows(3 * h, h) =
            (1.0f / (1.0f + (-pre.middleRows(3 * h, h).array()).exp())).matrix();  // o

        Matrix c = g.middleRows(h, h).cwiseProduct(c_prev) +
                   g.middleRows(0, h).cwiseProduct(g.middleRows(2 * h, h));
        Matrix hh = g.middleRows(3 * h, h).cwiseProduct(c.array().tanh().matrix());

        c_gates[step] = std::move(g);
        c_cs[step] = c;
        c_hs[step] = hh;
        out[t] = hh;
        h_prev = std::move(hh);
        c_prev = std::move(c);
    }
    if (training) {
        xs_ = std::move(c_xs);
        gates_ = std::move(c_gates);
        cs_ = std::move(c_cs);
        hs_ = std::move(c_hs);
    }
    return out;
}

std::vector<Matrix> Lstm::backward(const std::vector<Matrix>& dys) {
    const int t_len = static_cast<int>(dys.size());
    const int b = static_cast<int>(dys[0].cols());
    const int h = hidden_;

    std::vector<Matrix> dxs(t_len);
    Matrix dh_next = Matrix::Zero(h, b);
    Matrix dc_next = Matrix::Zero(h, b);

    for (int step = t_len - 1; step >= 0; --step) {
        const int t = reverse_ ? t_len - 1 - step : step;
        const Matrix& g = gates_[step];
        const Matrix& c = cs_[step];
        const Matrix c_prev = step > 0 ? cs_[step - 1] : Matrix::Zero(h, b);
        const Matrix tanh_c = c.array().tanh().matrix();

        const Matrix dh = dys[t] + dh_next;
        const auto gi = g.middleRows(0, h).array();
        const auto gf = g.middleRows(h, h).array();
        const auto gg = g.middleRows(2 * h, h).array();
        const auto go = g.middleRows(3 * h, h).array();

        const Matrix dc =
            ((dh.array() * go * (1.0f - tanh_c.array().square())).matrix() + dc_next).eval();

        Matrix dpre(4 * h, b);
        dpre.middleRows(0, h) = (dc.array() * gg * gi * (1.0f - gi)).matrix();
        dpre.middleRows(h, h) = (dc.array() * c_prev.array() * gf * (1.0f - gf)).matrix();
        dpre.middleRows(2 * h, h) = (dc.array() * gi * (1.0f - gg.square())).matrix();
        dpre.middleRows(3 * h, h) = (dh.array() * tanh_c.array() * go * (1.0f - go)).matrix();

        const Matrix h_prev = step > 0 ? hs_[step - 1] : Matrix::Zero(h, b);
        wx.grad += dpre * xs_[step].transpose();
        wh.grad += dpre * h_prev.transpose();
        bias_p.grad.col(0) += dpre.rowwise().sum();

        dxs[t] = wx.value.transpose() * dpre;
        dh_next = wh.value.transpose() * dpre;
        dc_next = (dc.array() * gf).matrix();
    }
    return dxs;
}

std::vector<Param*> Lstm::params() { return {&wx, &wh, &bias_p}; }

// ---------------------------------------------------------------------------
// BiLstm

BiLstm::BiLstm(int input, int hidden, Rng& rng)
    : hidden_(hidden), fwd_(input, hidden, rng, false), bwd_(input, hidden, rng, true) {}

std::vector<Matrix> BiLstm::forward(const std::vector<Matrix>& xs, bool training) {
    const auto f = fwd_.forward(xs, training);
    const auto b = bwd_.forward(xs, training);
    std::vector<Matrix> out(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
        out[t].resize(2 * hidden_, xs[t].cols());
        out[t].topRows(hidden_) = f[t];
        out[t].bottomRows(hidden_) = b[t];
    }
    return out;
}

std::vector<Matrix> BiLstm::backward(const std::vector<Matrix>& dys) {
    std::vector<Matrix> df(dys.size()), db(dys.size());
    for (std::size_t t = 0; t < dys.size(); ++t) {
        df[t] = dys[t].topRows(hidden_);
        db[t] = dys[t].bottomRows(hidden_);
    }
    const auto dxf = fwd_.backward(df);
    const auto dxb = bwd_.backward(db);
    std::vector<Matrix> dx(dys.size());
    for (std::size_t t = 0; t < dys.size(); ++t) dx[t] = dxf[t] + dxb[t];
    return dx;
}

std::vector<Param*> BiLstm::params() {
    auto p = fwd_.params();
    for (Param* q : bwd_.params()) p.push_back(q);
    return p;
}

// ---------------------------------------------------------------------------
// TimeDistributedDense

TimeDistributedDense::TimeDistributedDense(int in, int out, Rng& rng) : dense(in, out, rng) {}

std::vector<Matrix> TimeDistributedDense::forward(const std::vector<Matrix>& xs, bool training) {
    if (training) xs_ = xs;
    std::vector<Matrix> out(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
        Matrix y = dense.weight.value * xs[t];
        y.colwise() += Eigen::VectorXf(dense.bias_p.value.col(0));
        out[t] = y;
    }
    return out;
}

std::vector<Matrix> TimeDistributedDense::backward(const std::vector<Matrix>& dys) {
    std::vector<Matrix> dx(dys.size());
    for (std::size_t t = 0; t < dys.size(); ++t) {
        dense.weight.grad += dys[t] * xs_[t].transpose();
        dense.bias_p.grad.col(0) += dys[t].rowwise().sum();
        dx[t] = dense.weight.value.transpose() * dys[t];
    }
    return dx;
}

std::vector<Param*> TimeDistributedDense::params() { return dense.params(); }

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (Param* p : params_) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Matrix& g = params_[i]->grad;
        m_[i] = static_cast<float>(beta1_) * m_[i] + static_cast<float>(1.0 - beta1_) * g;
        v_[i] = (static_cast<float>(beta2_) * v_[i].array() +
                 static_cast<float>(1.0 - beta2_) * g.array().square())
                    .matrix();
        const auto m_hat = m_[i].array() / static_cast<float>(bc1);
        const auto v_hat = v_[i].array() / static_cast<float>(bc2);
        params_[i]->value.array() -=
            static_cast<float>(lr_) * m_hat / (v_hat.sqrt() + static_cast<float>(eps_));
    }
}

void Adam::zero_grad() {
    for (Param* p : params_) p->grad.setZero();
}

// ---------------------------------------------------------------------------
// Loss helpers

Matrix softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (int c = 0; c < logits.cols(); ++c) {
        Eigen::ArrayXf col = logits.col(c).array();
        col -= col.maxCoeff();
        Eigen::ArrayXf e = col.exp();
        out.col(c) = (e / e.sum()).matrix();
    }
    return out;
}

float cross_entropy_loss(const Matrix& logits, const std::vector<int>& targets, Matrix* dlogits) {
    const int b = static_cast<int>(logits.cols());
    const Matrix probs = softmax(logits);
    float loss = 0.0f;
    for (int c = 0; c < b; ++c)
        loss -= std::log(std::max(probs(targets[c], c), 1e-12f));
    loss /= static_cast<float>(b);
    if (dlogits) {
        *dlogits = probs;
        for (int c = 0; c < b; ++c) (*dlogits)(targets[c], c) -= 1.0f;
        *dlogits /= static_cast<float>(b);
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void write_all(CheckpointWriter& w, const std::vector<Param*>& params,
               const std::vector<Matrix*>& aux) {
    w.write_u32(static_cast<std::uint32_t>(params.size()));
    for (const Param* p : params) w.write_matrix(p->value);
    w.write_u32(static_cast<std::uint32_t>(aux.size()));
    for (const Matrix* m : aux) w.write_matrix(*m);
}

void read_all(CheckpointReader& r, const std::vector<Param*>& params,
              const std::vector<Matrix*>& aux) {
    if (r.read_u32() != params.size()) throw CheckpointError("parameter count mismatch");
    for (Param* p : params) {
        Matrix m = r.read_matrix();
        if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
            throw CheckpointError("parameter shape mismatch");
        p->value = m;
    }
    if (r.read_u32() != aux.size()) throw CheckpointError("aux state count mismatch");
    for (Matrix* dst : aux) {
        Matrix m = r.read_matrix();
        if (m.rows() != dst->rows() || m.cols() != dst->cols())
            throw CheckpointError("aux state shape mismatch");
        *dst = m;
    }
}

}  // namespace

void serialize_params(CheckpointWriter& w, Layer& layer) {
    write_all(w, layer.params(), layer.aux_state());
}
void deserialize_params(CheckpointReader& r, Layer& layer) {
    read_all(r, layer.params(), layer.aux_state());
}
void serialize_params(CheckpointWriter& w, SeqLayer& layer) { write_all(w, layer.params(), {}); }
void deserialize_params(CheckpointReader& r, SeqLayer& layer) { read_all(r, layer.params(), {}); }

}  // namespace bgait::nn
