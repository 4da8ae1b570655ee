#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "bgait/nn.hpp"

using namespace bgait::nn;

namespace {

Matrix randn(int r, int c, Rng& rng, float scale = 1.0f) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal(scale);
    return m;
}

// Scalar loss L = sum(c .* f(x)); checks every parameter and the input
// gradient against central differences.
void check_layer_gradients(Layer& layer, Matrix x, Rng& rng, float eps = 1e-2f,
                           float tol = 3e-2f) {
    Matrix y = layer.forward(x, true);
    Matrix c = randn(static_cast<int>(y.rows()), static_cast<int>(y.cols()), rng, 0.5f);

    for (Param* p : layer.params()) p->grad.setZero();
    Matrix dx = layer.backward(c);

    auto loss_at = [&]() { return (c.array() * layer.forward(x, true).array()).sum(); };

    auto check_value = [&](float analytic, float* slot) {
        const float keep = *slot;
        *slot = keep + eps;
        const float lp = loss_at();
        *slot = keep - eps;
        const float lm = loss_at();
        *slot = keep;
        const float numeric = (lp - lm) / (2 * eps);
        const float denom = std::max(1.0f, std::abs(analytic) + std::abs(numeric));
        CHECK(std::abs(analytic - numeric) / denom < tol);
    };

    for (Param* p : layer.params()) {
        // probe a handful of entries, not every weight
        const int n = static_cast<int>(p->value.size());
        for (int probe = 0; probe < std::min(6, n); ++probe) {
            const int i = (probe * 2654435761u) % n;
            check_value(p->grad.data()[i], p->value.data() + i);
        }
    }
    const int nx = static_cast<int>(x.size());
    for (int probe = 0; probe < std::min(6, nx); ++probe) {
        const int i = (probe * 2654435761u) % nx;
        check_value(dx.data()[i], x.data() + i);
    }
    // restore caches for any caller
    layer.forward(x, true);
}

void check_seq_gradients(SeqLayer& layer, std::vector<Matrix> xs, Rng& rng, float eps = 1e-2f,
                         float tol = 3e-2f) {
    auto ys = layer.forward(xs, true);
    std::vector<Matrix> cs;
    for (auto& y : ys)
        cs.push_back(randn(static_cast<int>(y.rows()), static_cast<int>(y.cols()), rng, 0.5f));

    for (Param* p : layer.params()) p->grad.setZero();
    auto dxs = layer.backward(cs);

    auto loss_at = [&]() {
        auto out = layer.forward(xs, true);
        float l = 0;
        for (std::size_t t = 0; t < out.size(); ++t) l += (cs[t].array() * out[t].array()).sum();
        return l;
    };

    auto check_value = [&](float analytic, float* slot) {
        const float keep = *slot;
        *slot = keep + eps;
        const float lp = loss_at();
        *slot = keep - eps;
        const float lm = loss_at();
        *slot = keep;
        const float numeric = (lp - lm) / (2 * eps);
        const float denom = std::max(1.0f, std::abs(analytic) + std::abs(numeric));
        CHECK(std::abs(analytic - numeric) / denom < tol);
    };

    for (Param* p : layer.params()) {
        const int n = static_cast<int>(p->value.size());
        for (int probe = 0; probe < std::min(6, n); ++probe) {
            const int i = (probe * 2654435761u) % n;
            check_value(p->grad.data()[i], p->value.data() + i);
        }
    }
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const int nx = static_cast<int>(xs[t].size());
        for (int probe = 0; probe < std::min(3, nx); ++probe) {
            const int i = (probe * 2654435761u) % nx;
            check_value(dxs[t].data()[i], xs[t].data() + i);
        }
    }
}

}  // namespace

TEST_CASE("dense gradients") {
    Rng rng(1);
    Dense d(5, 3, rng);
    check_layer_gradients(d, randn(5, 4, rng), rng);
}

TEST_CASE("relu and sigmoid gradients") {
    Rng rng(2);
    Relu r;
    check_layer_gradients(r, randn(6, 3, rng), rng);
    Sigmoid s;
    check_layer_gradients(s, randn(6, 3, rng), rng);
}

TEST_CASE("conv2d gradients") {
    Rng rng(3);
    ImageShape in{1, 6, 6};
    Conv2d conv(in, 2, 3, 2, 1, rng);
    CHECK(conv.out_shape().height == 3);
    CHECK(conv.out_shape().width == 3);
    check_layer_gradients(conv, randn(in.size(), 3, rng), rng);
}

TEST_CASE("batchnorm gradients and running stats") {
    Rng rng(4);
    ImageShape shape{2, 3, 3};
    BatchNorm bn(shape);
    check_layer_gradients(bn, randn(shape.size(), 5, rng), rng);

    // eval mode uses running stats: output of a repeated input is stable
    Matrix x = randn(shape.size(), 5, rng);
    for (int i = 0; i < 20; ++i) bn.forward(x, true);
    Matrix a = bn.forward(x, false);
    Matrix b = bn.forward(x, false);
    CHECK(a == b);
}

TEST_CASE("maxpool and upsample gradients") {
    Rng rng(5);
    ImageShape in{2, 4, 4};
    MaxPool2 mp(in);
    check_layer_gradients(mp, randn(in.size(), 3, rng), rng, 1e-3f);
    Upsample2 up(in);
    check_layer_gradients(up, randn(in.size(), 3, rng), rng);
}

TEST_CASE("lstm gradients, both directions") {
    Rng rng(6);
    Lstm fwd(4, 3, rng, false);
    std::vector<Matrix> xs;
    for (int t = 0; t < 4; ++t) xs.push_back(randn(4, 2, rng, 0.5f));
    check_seq_gradients(fwd, xs, rng);

    Lstm bwd(4, 3, rng, true);
    check_seq_gradients(bwd, xs, rng);
}

TEST_CASE("bilstm and time-distributed dense gradients") {
    Rng rng(7);
    BiLstm bi(3, 2, rng);
    std::vector<Matrix> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(randn(3, 2, rng, 0.5f));
    check_seq_gradients(bi, xs, rng);

    TimeDistributedDense td(3, 4, rng);
    check_seq_gradients(td, xs, rng);
}

TEST_CASE("softmax columns sum to one") {
    Rng rng(8);
    Matrix probs = softmax(randn(5, 7, rng, 3.0f));
    for (int j = 0; j < 7; ++j) CHECK(std::abs(probs.col(j).sum() - 1.0f) < 1e-5f);
    CHECK(probs.minCoeff() >= 0.0f);
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng(9);
    Matrix logits = randn(4, 3, rng);
    std::vector<int> targets{1, 3, 0};
    Matrix dlogits;
    cross_entropy_loss(logits, targets, &dlogits);
    const float eps = 1e-2f;
    for (int i = 0; i < logits.rows(); ++i)
        for (int j = 0; j < logits.cols(); ++j) {
            Matrix lp = logits, lm = logits;
            lp(i, j) += eps;
            lm(i, j) -= eps;
            Matrix scratch;
            const float numeric =
                (cross_entropy_loss(lp, targets, &scratch) -
                 cross_entropy_loss(lm, targets, &scratch)) /
                (2 * eps);
            CHECK(std::abs(numeric - dlogits(i, j)) < 3e-3f);
        }
}

TEST_CASE("adam minimizes a quadratic") {
    Param p;
    p.init(1, 1);
    p.value(0, 0) = 5.0f;
    Adam opt({&p}, 0.1);
    for (int i = 0; i < 300; ++i) {
        opt.zero_grad();
        p.grad(0, 0) = 2.0f * p.value(0, 0);  // d/dx x^2
        opt.step();
    }
    CHECK(std::abs(p.value(0, 0)) < 0.05f);
}

TEST_CASE("sequential parameter serialization round trip") {
    Rng rng(10);
    ImageShape in{1, 4, 4};
    auto build = [&](Rng& r) {
        Sequential s;
        auto conv = std::make_unique<Conv2d>(in, 2, 3, 1, 1, r);
        auto bn = std::make_unique<BatchNorm>(conv->out_shape());
        s.add(std::move(conv));
        s.add(std::move(bn));
        s.add(std::make_unique<Relu>());
        s.add(std::make_unique<Dense>(2 * 16, 3, r));
        return s;
    };
    Sequential a = build(rng);
    // accumulate some running stats so aux state is nontrivial
    Matrix x = randn(in.size(), 4, rng);
    a.forward(x, true);
    a.forward(x, true);

    const auto file = std::filesystem::temp_directory_path() / "bgait_test_seq.bin";
    {
        bgait::CheckpointWriter w(file, "test");
        serialize_params(w, a);
        w.close();
    }
    Rng rng2(99);
    Sequential b = build(rng2);
    {
        bgait::CheckpointReader r(file, "test");
        deserialize_params(r, b);
    }
    CHECK(a.forward(x, false) == b.forward(x, false));
}
