#include <doctest.h>

#include <cmath>
#include <vector>

#include "jga/common.hpp"
#include "jga/nn/networks.hpp"

using namespace jga;

namespace {

Tensor random_tensor(const std::vector<int>& shape, Rng& rng) {
    Tensor t(shape);
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

double half_sq(const Tensor& t) {
    double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i) s += 0.5 * t[i] * t[i];
    return s;
}

} // namespace

TEST_CASE("conv3d with a unit point kernel is the identity") {
    ParamStore ps;
    Rng rng(3);
    DenseConv3d conv(ps, "c", 2, 2, 1, 1, rng);
    Param& w = ps.get("c.w");
    w.value.fill(0.0);
    // [out, kx, ky, kz, in]: out channel o reads in channel o.
    w.value[0 * 2 + 0] = 1.0;
    w.value[1 * 2 + 1] = 1.0;
    ps.get("c.b").value.fill(0.0);
    Tensor x = random_tensor({3, 4, 5, 2}, rng);
    Tensor y = conv.forward(x);
    REQUIRE(y.same_shape(x));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("all-ones 3x3x3 kernel counts the in-bounds neighborhood") {
    ParamStore ps;
    Rng rng(5);
    DenseConv3d conv(ps, "c", 1, 1, 3, 1, rng);
    ps.get("c.w").value.fill(1.0);
    ps.get("c.b").value.fill(0.0);
    Tensor x({4, 4, 4, 1});
    x.fill(1.0);
    Tensor y = conv.forward(x);
    auto at = [&](int i, int j, int k) { return y[(std::size_t(i) * 4 + j) * 4 + k]; };
    CHECK(at(1, 1, 1) == 27.0);
    CHECK(at(2, 2, 0) == 18.0); // one face clipped
    CHECK(at(0, 0, 0) == 8.0);
    CHECK(at(0, 0, 1) == 12.0);
    CHECK(at(3, 0, 2) == 12.0);
}

TEST_CASE("stride-2 conv halves every spatial dim") {
    ParamStore ps;
    Rng rng(7);
    DenseConv3d conv(ps, "c", 3, 5, 2, 2, rng);
    Tensor x = random_tensor({6, 6, 6, 3}, rng);
    Tensor y = conv.forward(x);
    CHECK(y.dim(0) == 3);
    CHECK(y.dim(1) == 3);
    CHECK(y.dim(2) == 3);
    CHECK(y.dim(3) == 5);
}

TEST_CASE("conv3d gradients match finite differences") {
    ParamStore ps;
    Rng rng(11);
    DenseConv3d conv(ps, "c", 2, 3, 3, 1, rng);
    Tensor x = random_tensor({3, 3, 3, 2}, rng);

    ps.zero_grad();
    Tensor y = conv.forward(x);
    Tensor dx = conv.backward(y); // dLoss/dy = y for loss 0.5 ||y||^2

    auto loss = [&](const Tensor& in) { return half_sq(conv.forward(in)); };
    double eps = 1e-6;
    for (std::size_t i = 0; i < x.size(); i += 7) {
        Tensor xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        double fd = (loss(xp) - loss(xm)) / (2 * eps);
        CHECK(dx[i] == doctest::Approx(fd).epsilon(1e-5));
    }
    for (const char* name : {"c.w", "c.b"}) {
        Param& p = ps.get(name);
        for (std::size_t i = 0; i < p.value.size(); i += 11) {
            double keep = p.value[i];
            p.value[i] = keep + eps;
            double lp = loss(x);
            p.value[i] = keep - eps;
            double lm = loss(x);
            p.value[i] = keep;
            double fd = (lp - lm) / (2 * eps);
            CHECK(p.grad[i] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("group norm normalizes per group and matches finite differences") {
    ParamStore ps;
    Rng rng(13);
    GroupNorm gn(ps, "g", 4, 2);
    Tensor x = random_tensor({2, 2, 2, 4}, rng);
    Tensor y = gn.forward(x);
    // gamma starts at 1, beta at 0: each group of 2 channels over 8 cells
    // must come out standardized.
    for (int g = 0; g < 2; ++g) {
        double mean = 0, var = 0;
        int n = 0;
        for (int cell = 0; cell < 8; ++cell)
            for (int c = 2 * g; c < 2 * g + 2; ++c) {
                mean += y[cell * 4 + c];
                ++n;
            }
        mean /= n;
        for (int cell = 0; cell < 8; ++cell)
            for (int c = 2 * g; c < 2 * g + 2; ++c) {
                double d = y[cell * 4 + c] - mean;
                var += d * d;
            }
        var /= n;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }

    ps.get("g.gamma").value.values() = {1.3, 0.7, -0.4, 1.1};
    ps.get("g.beta").value.values() = {0.2, -0.1, 0.05, 0.6};
    ps.zero_grad();
    Tensor out = gn.forward(x);
    Tensor dx = gn.backward(out);
    auto loss = [&](const Tensor& in) { return half_sq(gn.forward(in)); };
    double eps = 1e-6;
    for (std::size_t i = 0; i < x.size(); i += 5) {
        Tensor xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        double fd = (loss(xp) - loss(xm)) / (2 * eps);
        CHECK(dx[i] == doctest::Approx(fd).epsilon(1e-4));
    }
    for (const char* name : {"g.gamma", "g.beta"}) {
        Param& p = ps.get(name);
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            double keep = p.value[i];
            p.value[i] = keep + eps;
            double lp = loss(x);
            p.value[i] = keep - eps;
            double lm = loss(x);
            p.value[i] = keep;
            CHECK(p.grad[i] == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-4));
        }
    }
}

TEST_CASE("silu matches its closed form and gradient") {
    SiLU act;
    Tensor x({1, 1, 1, 5});
    x.values() = {-3.0, -1.0, 0.0, 1.0, 3.0};
    Tensor y = act.forward(x);
    for (int i = 0; i < 5; ++i)
        CHECK(y[i] == doctest::Approx(x[i] * sigmoid(x[i])).epsilon(1e-12));
    Tensor dy({1, 1, 1, 5});
    dy.fill(1.0);
    Tensor dx = act.backward(dy);
    double eps = 1e-6;
    for (int i = 0; i < 5; ++i) {
        double fd = ((x[i] + eps) * sigmoid(x[i] + eps) - (x[i] - eps) * sigmoid(x[i] - eps)) /
                    (2 * eps);
        CHECK(dx[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("linear layer gradients match finite differences") {
    ParamStore ps;
    Rng rng(17);
    Linear lin(ps, "l", 4, 3, rng);
    std::vector<double> x = {0.3, -0.5, 1.2, 0.8};

    ps.zero_grad();
    std::vector<double> y = lin.forward(x);
    std::vector<double> dx = lin.backward(y);
    auto loss = [&](const std::vector<double>& in) {
        auto out = lin.forward(in);
        double s = 0;
        for (double v : out) s += 0.5 * v * v;
        return s;
    };
    double eps = 1e-6;
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        CHECK(dx[i] == doctest::Approx((loss(xp) - loss(xm)) / (2 * eps)).epsilon(1e-6));
    }
    Param& w = ps.get("l.w");
    for (std::size_t i = 0; i < w.value.size(); i += 3) {
        double keep = w.value[i];
        w.value[i] = keep + eps;
        double lp = loss(x);
        w.value[i] = keep - eps;
        double lm = loss(x);
        w.value[i] = keep;
        CHECK(w.grad[i] == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-6));
    }
}

TEST_CASE("nearest upsampling doubles dims and backward pools the block") {
    UpsampleNearest2x up;
    Tensor x({2, 2, 2, 1});
    for (std::size_t i = 0; i < 8; ++i) x[i] = double(i);
    Tensor y = up.forward(x);
    REQUIRE(y.dim(0) == 4);
    REQUIRE(y.dim(3) == 1);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0); // (0,0,1) copies source (0,0,0)
    CHECK(y[(std::size_t(3) * 4 + 3) * 4 + 3] == 7.0);
    Tensor dy = Tensor::zeros_like(y);
    dy.fill(1.0);
    Tensor dx = up.backward(dy);
    for (std::size_t i = 0; i < 8; ++i) CHECK(dx[i] == 8.0);
}

TEST_CASE("sinusoidal embedding pairs sines and cosines") {
    auto e = sinusoidal_embedding(0.37, 16);
    REQUIRE(e.size() == 16);
    for (int i = 0; i < 8; ++i) {
        CHECK(e[i] * e[i] + e[8 + i] * e[8 + i] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(e[i]) <= 1.0);
    }
    CHECK(e[0] == doctest::Approx(std::sin(0.37)).epsilon(1e-9));
    CHECK(e[8] == doctest::Approx(std::cos(0.37)).epsilon(1e-9));
}

TEST_CASE("auto_groups picks the largest divisor up to 8") {
    CHECK(auto_groups(16) == 8);
    CHECK(auto_groups(24) == 8);
    CHECK(auto_groups(12) == 6);
    CHECK(auto_groups(7) == 7);
    CHECK(auto_groups(5) == 5);
    CHECK(auto_groups(9) == 3);
    CHECK(auto_groups(1) == 1);
}

TEST_CASE("time embedding gradients reach both linear layers") {
    ParamStore ps;
    Rng rng(19);
    TimeEmbedding temb(ps, "t", 8, 12, rng);
    ps.zero_grad();
    auto h = temb.forward(0.55);
    REQUIRE(h.size() == 12);
    temb.backward(h);
    auto loss = [&]() {
        auto out = temb.forward(0.55);
        double s = 0;
        for (double v : out) s += 0.5 * v * v;
        return s;
    };
    double eps = 1e-6;
    for (const char* name : {"t.l1.w", "t.l2.w", "t.l1.b", "t.l2.b"}) {
        Param& p = ps.get(name);
        std::size_t i = p.value.size() / 3;
        double keep = p.value[i];
        p.value[i] = keep + eps;
        double lp = loss();
        p.value[i] = keep - eps;
        double lm = loss();
        p.value[i] = keep;
        CHECK(p.grad[i] == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-5));
    }
}

TEST_CASE("residual block is born an identity") {
    ParamStore ps;
    Rng rng(23);
    DenseResBlock block(ps, "b", 4, 8, rng);
    TimeEmbedding temb(ps, "t", 8, 8, rng);
    Tensor x = random_tensor({2, 2, 2, 4}, rng);
    Tensor y = block.forward(x, temb.forward(0.3));
    REQUIRE(y.same_shape(x));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("dense unet preserves shape, starts at zero, and backprops") {
    ParamStore ps;
    Rng rng(29);
    DenseUNetConfig cfg;
    cfg.in_ch = 3;
    cfg.out_ch = 2;
    cfg.width = 8;
    cfg.temb_dim = 8;
    DenseUNet net(ps, "u", cfg, rng);
    Tensor x = random_tensor({4, 4, 4, 3}, rng);
    Tensor y = net.forward(x, 0.6);
    REQUIRE(y.dim(0) == 4);
    REQUIRE(y.dim(3) == 2);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);

    // Perturb every parameter so gradients flow end to end, then spot-check
    // a handful against finite differences.
    for (auto& [name, p] : ps.all())
        for (auto& v : p.value.values()) v += 0.03 * rng.normal();
    ps.zero_grad();
    Tensor out = net.forward(x, 0.6);
    net.backward(out);
    auto loss = [&]() { return half_sq(net.forward(x, 0.6)); };
    double eps = 1e-5;
    int checked = 0;
    for (auto& [name, p] : ps.all()) {
        std::size_t idx = 0;
        for (std::size_t i = 1; i < p.grad.size(); ++i)
            if (std::abs(p.grad[i]) > std::abs(p.grad[idx])) idx = i;
        if (std::abs(p.grad[idx]) < 1e-8) continue;
        double keep = p.value[idx];
        p.value[idx] = keep + eps;
        double lp = loss();
        p.value[idx] = keep - eps;
        double lm = loss();
        p.value[idx] = keep;
        double fd = (lp - lm) / (2 * eps);
        CHECK(p.grad[idx] == doctest::Approx(fd).epsilon(2e-4));
        if (++checked >= 8) break;
    }
    CHECK(checked >= 8);
}

TEST_CASE("adam takes a near-lr first step and ignores zero gradients") {
    ParamStore ps;
    Param& p = ps.create("w", {3});
    p.value.values() = {1.0, -2.0, 0.5};
    p.grad.values() = {0.4, -0.7, 0.0};
    Adam opt(1e-2);
    opt.step(ps);
    // First-step bias correction gives exactly lr * sign(g) up to eps.
    CHECK(p.value[0] == doctest::Approx(1.0 - 1e-2).epsilon(1e-4));
    CHECK(p.value[1] == doctest::Approx(-2.0 + 1e-2).epsilon(1e-4));
    CHECK(p.value[2] == 0.5);
    CHECK(opt.steps_taken() == 1);
}

TEST_CASE("adam drives a quadratic toward zero") {
    ParamStore ps;
    Param& p = ps.create("w", {1});
    p.value[0] = 3.0;
    Adam opt(5e-2);
    for (int i = 0; i < 400; ++i) {
        ps.zero_grad();
        p.grad[0] = 2.0 * p.value[0];
        opt.step(ps);
    }
    CHECK(std::abs(p.value[0]) < 1e-2);
}

TEST_CASE("adam rejects non-finite gradients and names the parameter") {
    ParamStore ps;
    Param& p = ps.create("bad.layer", {1});
    p.grad[0] = std::nan("");
    Adam opt(1e-3);
    try {
        opt.step(ps);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("bad.layer") != std::string::npos);
    }
}

TEST_CASE("set_learning_rate changes subsequent steps") {
    ParamStore ps;
    Param& p = ps.create("w", {1});
    p.value[0] = 0.0;
    p.grad[0] = 1.0;
    Adam opt(1e-2);
    opt.step(ps);
    double first = p.value[0];
    opt.set_learning_rate(1e-3);
    p.grad[0] = 1.0;
    opt.step(ps);
    CHECK(std::abs(p.value[0] - first) < std::abs(first) / 2);
}

TEST_CASE("parameter store bookkeeping") {
    ParamStore ps;
    ps.create("a", {2, 3});
    ps.create("b", {4});
    CHECK(ps.parameter_count() == 10);
    CHECK(ps.has("a"));
    CHECK(!ps.has("missing"));
    CHECK_THROWS_AS(ps.create("a", {1}), Error);
    CHECK_THROWS_AS(ps.get("missing"), Error);
    ps.get("a").grad.fill(7.0);
    ps.zero_grad();
    for (double g : ps.get("a").grad.values()) CHECK(g == 0.0);
}
