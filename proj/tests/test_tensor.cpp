#include <cstring>

#include "doctest.h"
#include "fgwarp/io_util.hpp"
#include "fgwarp/ops.hpp"
#include "fgwarp/tensor.hpp"
#include "fgwarp/tensor_io.hpp"
#include "testutil.hpp"

using namespace fgwarp;
using namespace testutil;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("tensor layout is row-major with w fastest") {
    Tensor4 t(2, 3, 4, 5);
    t.at(1, 2, 3, 4) = 7.0;
    CHECK(t.data()[((1 * 3 + 2) * 4 + 3) * 5 + 4] == 7.0);
    CHECK(t.size() == 2u * 3 * 4 * 5);
}

TEST_CASE("tensor shape validation") {
    CHECK_THROWS_AS(Tensor4(0, 1, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(Tensor4(1, -2, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(Tensor4::from_data(Shape4{1, 1, 1, 3}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("conv params validation") {
    CHECK_THROWS_AS(ConvParams(1, 1, 2, 2), std::invalid_argument);  // even kernel
    CHECK_THROWS_AS(ConvParams(1, 1, 3, 3, 0), std::invalid_argument);
    CHECK_THROWS_AS(ConvParams(1, 1, 3, 3, 1, -1), std::invalid_argument);
    ConvParams p(2, 3, 3, 3, 1, 1);
    Tensor4 in(1, 4, 5, 5);  // wrong channel count
    CHECK_THROWS_AS(ops::conv2d_forward(in, p), std::invalid_argument);
}

TEST_CASE("conv 1x1 kernel scales the input") {
    Tensor4 in = random_tensor(Shape4{1, 1, 3, 3}, 11);
    ConvParams p(1, 1, 1, 1);
    p.weight.at(0, 0, 0, 0) = 2.0;
    Tensor4 out = ops::conv2d_forward(in, p);
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(out.data()[i] == 2.0 * in.data()[i]);
}

TEST_CASE("conv all-ones 3x3 on constant input counts window overlap") {
    Tensor4 in(1, 1, 5, 5, 1.0);
    ConvParams p(1, 1, 3, 3, 1, 1);
    for (std::size_t i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = 1.0;
    Tensor4 out = ops::conv2d_forward(in, p);
    CHECK(out.at(0, 0, 2, 2) == 9.0);
    CHECK(out.at(0, 0, 0, 0) == 4.0);
    CHECK(out.at(0, 0, 0, 2) == 6.0);
    CHECK(out.at(0, 0, 4, 4) == 4.0);
}

TEST_CASE("conv matches the padded-sum oracle on random cases") {
    struct Case {
        Shape4 in;
        int oc, k, stride, pad;
    };
    const Case cases[] = {
        {{1, 1, 5, 5}, 1, 3, 1, 1}, {{2, 3, 7, 6}, 4, 3, 1, 1}, {{1, 2, 7, 7}, 3, 3, 2, 1},
        {{2, 4, 6, 5}, 2, 1, 1, 0}, {{1, 3, 7, 7}, 2, 5, 1, 2}, {{1, 2, 6, 6}, 3, 3, 2, 0},
        {{3, 2, 5, 7}, 5, 3, 3, 2},
    };
    int idx = 0;
    for (const auto& cs : cases) {
        Tensor4 in = random_tensor(cs.in, 100 + idx);
        ConvParams p(cs.oc, cs.in.c, cs.k, cs.k, cs.stride, cs.pad);
        p.weight = random_tensor(p.weight.shape(), 200 + idx);
        p.bias = random_vector(std::size_t(cs.oc), 300 + idx);
        Tensor4 got = ops::conv2d_forward(in, p);
        Tensor4 want = conv2d_oracle(in, p);
        REQUIRE(got.shape() == want.shape());
        auto cmp = compare_grads(want.data(), got.data(), got.size(), 1e-6);
        CHECK_MESSAGE(cmp.max_rel <= 1e-10, "case ", idx, " rel err ", cmp.max_rel);
        CHECK(all_finite(got));
        ++idx;
    }
}

TEST_CASE("conv serial reference and parallel kernel agree bit for bit") {
    struct Case {
        Shape4 in;
        int oc, k, stride, pad;
    } cases[] = {
        {{2, 3, 8, 9}, 4, 3, 1, 1},
        {{1, 2, 9, 9}, 3, 3, 2, 1},
        {{2, 2, 7, 5}, 2, 5, 1, 2},
        {{1, 4, 6, 6}, 5, 1, 1, 0},
    };
    int idx = 0;
    for (const auto& cs : cases) {
        Tensor4 in = random_tensor(cs.in, 400 + idx);
        ConvParams p(cs.oc, cs.in.c, cs.k, cs.k, cs.stride, cs.pad);
        p.weight = random_tensor(p.weight.shape(), 500 + idx);
        p.bias = random_vector(std::size_t(cs.oc), 600 + idx);
        CHECK(bits_equal(ops::conv2d_forward(in, p), ops::serial::conv2d_forward(in, p)));

        Tensor4 g = random_tensor(ops::conv2d_out_shape(cs.in, p), 700 + idx);
        auto gp = ops::conv2d_backward(in, p, g);
        auto gs = ops::serial::conv2d_backward(in, p, g);
        CHECK(bits_equal(gp.input, gs.input));
        CHECK(bits_equal(gp.weight, gs.weight));
        CHECK(gp.bias == gs.bias);
        ++idx;
    }
}

TEST_CASE("conv forward is deterministic across repeated calls") {
    Tensor4 in = random_tensor(Shape4{2, 3, 9, 9}, 42);
    ConvParams p(4, 3, 3, 3, 1, 1);
    p.weight = random_tensor(p.weight.shape(), 43);
    p.bias = random_vector(4, 44);
    CHECK(bits_equal(ops::conv2d_forward(in, p), ops::conv2d_forward(in, p)));
}

TEST_CASE("conv backward: zero upstream gradient gives zero gradients") {
    Tensor4 in = random_tensor(Shape4{1, 2, 5, 5}, 1);
    ConvParams p(3, 2, 3, 3, 1, 1);
    p.weight = random_tensor(p.weight.shape(), 2);
    Tensor4 zeros(ops::conv2d_out_shape(in.shape(), p));
    auto g = ops::conv2d_backward(in, p, zeros);
    for (std::size_t i = 0; i < g.input.size(); ++i) CHECK(g.input.data()[i] == 0.0);
    for (std::size_t i = 0; i < g.weight.size(); ++i) CHECK(g.weight.data()[i] == 0.0);
    for (double b : g.bias) CHECK(b == 0.0);
}

TEST_CASE("conv backward matches central finite differences") {
    Tensor4 in = random_tensor(Shape4{1, 2, 5, 4}, 10);
    ConvParams p(3, 2, 3, 3, 2, 1);
    p.weight = random_tensor(p.weight.shape(), 20);
    p.bias = random_vector(3, 30);
    const Shape4 os = ops::conv2d_out_shape(in.shape(), p);
    Projection proj(os.count(), 40);

    auto loss = [&]() { return proj(ops::conv2d_forward(in, p)); };
    auto analytic = ops::conv2d_backward(in, p, proj.grad(os));

    auto nw = fd_gradient(p.weight.data(), p.weight.size(), loss);
    CHECK(compare_grads(analytic.weight.data(), nw.data(), nw.size()).max_rel <= 1e-5);
    auto nb = fd_gradient(p.bias.data(), p.bias.size(), loss);
    CHECK(compare_grads(analytic.bias.data(), nb.data(), nb.size()).max_rel <= 1e-5);
    auto ni = fd_gradient(in.data(), in.size(), loss);
    CHECK(compare_grads(analytic.input.data(), ni.data(), ni.size()).max_rel <= 1e-5);
}

TEST_CASE("relu forward and backward") {
    Tensor4 x = Tensor4::from_data(Shape4{1, 1, 1, 4}, {-1.5, -0.0, 0.5, 2.0});
    Tensor4 y = ops::relu_forward(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(y.data()[1] == 0.0);
    CHECK(y.data()[2] == 0.5);
    CHECK(y.data()[3] == 2.0);

    Tensor4 xr = random_tensor_away_from_zero(Shape4{2, 3, 4, 4}, 50);
    Projection proj(xr.size(), 51);
    auto loss = [&]() { return proj(ops::relu_forward(xr)); };
    Tensor4 analytic = ops::relu_backward(xr, proj.grad(xr.shape()));
    auto numeric = fd_gradient(xr.data(), xr.size(), loss);
    CHECK(compare_grads(analytic.data(), numeric.data(), numeric.size()).max_rel <= 1e-5);

    CHECK(bits_equal(ops::relu_forward(xr), ops::serial::relu_forward(xr)));
}

TEST_CASE("sigmoid forward and backward") {
    Tensor4 x = Tensor4::from_data(Shape4{1, 1, 1, 3}, {0.0, 40.0, -40.0});
    Tensor4 y = ops::sigmoid_forward(x);
    CHECK(y.data()[0] == 0.5);
    CHECK(y.data()[1] > 0.0);
    CHECK(y.data()[1] <= 1.0);
    CHECK(y.data()[2] > 0.0);
    CHECK(y.data()[2] < 1e-10);

    Tensor4 xr = random_tensor(Shape4{1, 2, 3, 3}, 60);
    Projection proj(xr.size(), 61);
    auto loss = [&]() { return proj(ops::sigmoid_forward(xr)); };
    Tensor4 yr = ops::sigmoid_forward(xr);
    Tensor4 analytic = ops::sigmoid_backward(yr, proj.grad(xr.shape()));
    auto numeric = fd_gradient(xr.data(), xr.size(), loss);
    CHECK(compare_grads(analytic.data(), numeric.data(), numeric.size()).max_rel <= 1e-5);

    CHECK(bits_equal(ops::sigmoid_forward(xr), ops::serial::sigmoid_forward(xr)));
}

TEST_CASE("batchnorm: constant channel normalizes to beta") {
    Tensor4 x(1, 2, 3, 3, 4.0);
    std::vector<double> gamma{1.0, 1.0}, beta{0.0, -0.5};
    ops::BatchNormStats st;
    Tensor4 y = ops::batchnorm_forward(x, gamma, beta, ops::kBnEps, &st);
    for (int i = 0; i < 9; ++i) {
        CHECK(y.data()[i] == 0.0);
        CHECK(y.data()[9 + i] == -0.5);
    }
    CHECK(st.mean[0] == doctest::Approx(4.0));
    CHECK(st.var[0] == doctest::Approx(0.0));
}

TEST_CASE("batchnorm: zero-mean unit-variance input passes through gamma/beta") {
    // channel values come in (+1, -1) pairs: batch mean exactly 0, biased var exactly 1
    Tensor4 x(1, 1, 2, 4);
    for (int i = 0; i < 4; ++i) {
        x.data()[2 * i] = 1.0;
        x.data()[2 * i + 1] = -1.0;
    }
    std::vector<double> gamma{2.0}, beta{3.0};
    Tensor4 y = ops::batchnorm_forward(x, gamma, beta, ops::kBnEps, nullptr);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(2.0 * x.data()[i] + 3.0).epsilon(1e-4));
}

TEST_CASE("batchnorm backward matches finite differences") {
    Tensor4 x = random_tensor(Shape4{2, 3, 4, 3}, 70);
    auto gamma = random_vector(3, 71, 0.5, 1.5);
    auto beta = random_vector(3, 72);
    Projection proj(x.size(), 73);
    auto loss = [&]() {
        return proj(ops::batchnorm_forward(x, gamma, beta, ops::kBnEps, nullptr));
    };
    ops::BatchNormStats st;
    ops::batchnorm_forward(x, gamma, beta, ops::kBnEps, &st);
    auto analytic = ops::batchnorm_backward(proj.grad(x.shape()), st, gamma);

    auto ni = fd_gradient(x.data(), x.size(), loss);
    CHECK(compare_grads(analytic.input.data(), ni.data(), ni.size()).max_rel <= 1e-4);
    auto ng = fd_gradient(gamma.data(), gamma.size(), loss);
    CHECK(compare_grads(analytic.gamma.data(), ng.data(), ng.size()).max_rel <= 1e-4);
    auto nb = fd_gradient(beta.data(), beta.size(), loss);
    CHECK(compare_grads(analytic.beta.data(), nb.data(), nb.size()).max_rel <= 1e-4);
}

TEST_CASE("batchnorm serial/parallel bit equality and input validation") {
    Tensor4 x = random_tensor(Shape4{2, 4, 5, 5}, 80);
    auto gamma = random_vector(4, 81, 0.5, 1.5);
    auto beta = random_vector(4, 82);
    ops::BatchNormStats sp, ss;
    Tensor4 yp = ops::batchnorm_forward(x, gamma, beta, ops::kBnEps, &sp);
    Tensor4 ys = ops::serial::batchnorm_forward(x, gamma, beta, ops::kBnEps, &ss);
    CHECK(bits_equal(yp, ys));
    CHECK(sp.mean == ss.mean);
    CHECK(sp.var == ss.var);

    Tensor4 g = random_tensor(x.shape(), 83);
    auto gp = ops::batchnorm_backward(g, sp, gamma);
    auto gs = ops::serial::batchnorm_backward(g, ss, gamma);
    CHECK(bits_equal(gp.input, gs.input));
    CHECK(gp.gamma == gs.gamma);
    CHECK(gp.beta == gs.beta);

    // single sample per channel: variance 0, output collapses to beta and the
    // input gradient vanishes (the output is constant in the input)
    Tensor4 single = Tensor4::from_data(Shape4{1, 2, 1, 1}, {3.0, -7.0});
    ops::BatchNormStats s1;
    Tensor4 y1 = ops::batchnorm_forward(single, {2.0, 2.0}, {0.25, -0.5}, ops::kBnEps, &s1);
    CHECK(y1.data()[0] == 0.25);
    CHECK(y1.data()[1] == -0.5);
    auto g1 = ops::batchnorm_backward(Tensor4(1, 2, 1, 1, 1.0), s1, {2.0, 2.0});
    CHECK(g1.input.data()[0] == 0.0);
    CHECK(g1.input.data()[1] == 0.0);
    CHECK(g1.beta == std::vector<double>{1.0, 1.0});

    // stale stats: mismatched shape rejected
    Tensor4 wrong(1, 4, 3, 3);
    CHECK_THROWS_AS(ops::batchnorm_backward(wrong, sp, gamma), std::invalid_argument);
}

TEST_CASE("batchnorm running statistics and inference mode") {
    ops::BatchNormParams p(2);
    Tensor4 x = random_tensor(Shape4{1, 2, 4, 4}, 90);
    ops::BatchNormStats st;
    ops::batchnorm_forward(x, p.gamma, p.beta, ops::kBnEps, &st);
    ops::update_running_stats(p, st, ops::kBnMomentum);
    for (int c = 0; c < 2; ++c) {
        CHECK(p.running_mean[c] == doctest::Approx(0.9 * 0.0 + 0.1 * st.mean[c]));
        CHECK(p.running_var[c] == doctest::Approx(0.9 * 1.0 + 0.1 * st.var[c]));
    }
    Tensor4 y = ops::batchnorm_infer(x, p, ops::kBnEps);
    CHECK(bits_equal(y, ops::serial::batchnorm_infer(x, p, ops::kBnEps)));
    // inference with fresh running stats (mean 0, var 1) is an affine map of x
    ops::BatchNormParams fresh(2);
    Tensor4 y2 = ops::batchnorm_infer(x, fresh, ops::kBnEps);
    const double istd = 1.0 / std::sqrt(1.0 + ops::kBnEps);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y2.data()[i] == doctest::Approx(x.data()[i] * istd));
}

TEST_CASE("resize_bilinear: identity is bit-exact") {
    Tensor4 x = random_tensor(Shape4{2, 3, 5, 7}, 100);
    CHECK(bits_equal(ops::resize_bilinear(x, 5, 7), x));
}

TEST_CASE("resize_bilinear: 1x2 to 1x4 hand case") {
    Tensor4 x = Tensor4::from_data(Shape4{1, 1, 1, 2}, {0.0, 2.0});
    Tensor4 y = ops::resize_bilinear(x, 1, 4);
    CHECK(y.data()[0] == doctest::Approx(0.0));
    CHECK(y.data()[1] == doctest::Approx(0.5));
    CHECK(y.data()[2] == doctest::Approx(1.5));
    CHECK(y.data()[3] == doctest::Approx(2.0));
}

TEST_CASE("resize_bilinear: constants stay exactly constant") {
    for (auto [oh, ow] : {std::pair{3, 9}, {8, 2}, {5, 5}, {13, 4}}) {
        Tensor4 x(1, 2, 4, 6, 0.37);
        Tensor4 y = ops::resize_bilinear(x, oh, ow);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == 0.37);
    }
}

TEST_CASE("resize_bilinear serial/parallel bit equality and backward FD") {
    Tensor4 x = random_tensor(Shape4{1, 2, 4, 5}, 110);
    Tensor4 yp = ops::resize_bilinear(x, 7, 3);
    CHECK(bits_equal(yp, ops::serial::resize_bilinear(x, 7, 3)));

    Projection proj(yp.size(), 111);
    auto loss = [&]() { return proj(ops::resize_bilinear(x, 7, 3)); };
    Tensor4 analytic = ops::resize_bilinear_backward(proj.grad(yp.shape()), 4, 5);
    auto numeric = fd_gradient(x.data(), x.size(), loss);
    CHECK(compare_grads(analytic.data(), numeric.data(), numeric.size()).max_rel <= 1e-5);

    Tensor4 g = random_tensor(yp.shape(), 112);
    CHECK(bits_equal(ops::resize_bilinear_backward(g, 4, 5),
                     ops::serial::resize_bilinear_backward(g, 4, 5)));
}

TEST_CASE("mse loss values and gradient") {
    Tensor4 a = random_tensor(Shape4{1, 2, 3, 3}, 120);
    auto [l0, g0] = ops::mse_loss(a, a);
    CHECK(l0 == 0.0);
    for (std::size_t i = 0; i < g0.size(); ++i) CHECK(g0.data()[i] == 0.0);

    Tensor4 p = Tensor4::from_data(Shape4{1, 1, 1, 2}, {1.0, 1.0});
    Tensor4 t(1, 1, 1, 2, 0.0);
    auto [l1, g1] = ops::mse_loss(p, t);
    CHECK(l1 == doctest::Approx(1.0));
    CHECK(g1.data()[0] == doctest::Approx(1.0));
    CHECK(g1.data()[1] == doctest::Approx(1.0));

    Tensor4 pr = random_tensor(Shape4{2, 1, 4, 4}, 121);
    Tensor4 tr = random_tensor(pr.shape(), 122);
    auto loss = [&]() { return ops::mse_loss(pr, tr).first; };
    Tensor4 analytic = ops::mse_loss(pr, tr).second;
    auto numeric = fd_gradient(pr.data(), pr.size(), loss);
    CHECK(compare_grads(analytic.data(), numeric.data(), numeric.size()).max_rel <= 1e-6);

    auto sp = ops::mse_loss(pr, tr);
    auto ss = ops::serial::mse_loss(pr, tr);
    CHECK(sp.first == ss.first);
    CHECK(bits_equal(sp.second, ss.second));
    CHECK_THROWS_AS(ops::mse_loss(pr, Tensor4(1, 1, 2, 2)), std::invalid_argument);
}

TEST_CASE("channel concat and slice round trip") {
    Tensor4 a = random_tensor(Shape4{2, 3, 4, 4}, 130);
    Tensor4 b = random_tensor(Shape4{2, 2, 4, 4}, 131);
    Tensor4 cat = ops::concat_channels(a, b);
    REQUIRE(cat.c() == 5);
    CHECK(bits_equal(ops::slice_channels(cat, 0, 3), a));
    CHECK(bits_equal(ops::slice_channels(cat, 3, 5), b));
    CHECK_THROWS_AS(ops::slice_channels(cat, 3, 3), std::invalid_argument);
    CHECK_THROWS_AS(ops::concat_channels(a, Tensor4(1, 2, 4, 4)), std::invalid_argument);
}

TEST_CASE("T4v1 serialization: golden bytes") {
    Tensor4 t = Tensor4::from_data(Shape4{1, 1, 1, 2}, {1.0, -2.0});
    auto bytes = serialize_t4(t);
    const std::uint8_t want[] = {
        'T', '4', 'v', '1',                              // magic
        1,   0,   0,   0,   1, 0, 0, 0, 1, 0, 0,    0,   // n, c, h
        2,   0,   0,   0,                                // w
        0,   0,   0,   0,   0, 0, 0xF0, 0x3F,            // 1.0 little-endian
        0,   0,   0,   0,   0, 0, 0,    0xC0,            // -2.0 little-endian
    };
    REQUIRE(bytes.size() == sizeof(want));
    CHECK(std::memcmp(bytes.data(), want, sizeof(want)) == 0);
}

TEST_CASE("T4v1 serialization: bit-exact round trip") {
    Tensor4 t = random_tensor(Shape4{2, 3, 4, 5}, 140);
    t.data()[0] = -0.0;
    t.data()[1] = 1e-320;  // denormal survives
    auto bytes = serialize_t4(t);
    Tensor4 back = deserialize_t4(bytes.data(), bytes.size());
    CHECK(bits_equal(t, back));

    auto bytes2 = serialize_t4(back);
    CHECK(bytes == bytes2);
}

TEST_CASE("T4v1 serialization: malformed input rejected") {
    Tensor4 t(1, 1, 1, 1, 3.0);
    auto bytes = serialize_t4(t);
    CHECK_THROWS_AS(deserialize_t4(bytes.data(), bytes.size() - 1), IoError);
    bytes[0] = 'X';
    CHECK_THROWS_AS(deserialize_t4(bytes.data(), bytes.size()), IoError);
    std::vector<std::uint8_t> tiny{'T', '4'};
    CHECK_THROWS_AS(deserialize_t4(tiny.data(), tiny.size()), IoError);
}

TEST_CASE("T4v1 file round trip") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "fgwarp_t4_test";
    fs::create_directories(dir);
    Tensor4 t = random_tensor(Shape4{1, 2, 3, 4}, 150);
    write_t4(dir / "x.t4", t);
    CHECK(bits_equal(read_t4(dir / "x.t4"), t));
    CHECK_THROWS_AS(read_t4(dir / "missing.t4"), IoError);
    fs::remove_all(dir);
}

TEST_SUITE_END();
