#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "dub/image.hpp"
#include "dub/optim.hpp"
#include "dub/rng.hpp"
#include "dub/tensor.hpp"
#include "testutil.hpp"

using namespace dub;
using namespace dub::ad;

TEST_CASE("rng is deterministic and fork streams are independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());
    Rng c(42);
    Rng f1 = c.fork(1);
    Rng f2 = c.fork(2);
    CHECK(f1.next_u64() != f2.next_u64());

    // normal() has roughly unit scale
    Rng n(7);
    double s = 0, s2 = 0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
        double v = n.normal();
        s += v;
        s2 += v * v;
    }
    CHECK(std::abs(s / N) < 0.05);
    CHECK(std::abs(s2 / N - 1.0) < 0.05);
}

TEST_CASE("image pnm round trip is exact at 8 bits") {
    Rng rng(3);
    Image img(13, 17, 3);
    for (auto& v : img.data) v = std::round(rng.uniform() * 255.0) / 255.0;
    auto path = std::filesystem::temp_directory_path() / "dub_test_img.ppm";
    save_pnm(img, path.string());
    Image back = load_pnm(path.string());
    REQUIRE(back.same_shape(img));
    CHECK(image_max_abs_diff(img, back) < 1e-12);
    std::filesystem::remove(path);

    Image mask(5, 4, 1);
    mask.at(0, 2, 2) = 1.0;
    auto mpath = std::filesystem::temp_directory_path() / "dub_test_mask.pgm";
    save_pnm(mask, mpath.string());
    Image mback = load_pnm(mpath.string());
    CHECK(image_max_abs_diff(mask, mback) < 1e-12);
    std::filesystem::remove(mpath);
}

TEST_CASE("crop_bilinear conventions") {
    Rng rng(5);
    Image img(8, 8, 3);
    for (auto& v : img.data) v = rng.uniform();

    SUBCASE("full-frame box at source resolution is the identity") {
        Image out = crop_bilinear(img, 0, 0, 8, 8, 8, 8);
        CHECK(image_max_abs_diff(out, img) < 1e-12);
    }
    SUBCASE("2x2 to 1x1 averages the four pixels") {
        Image small(2, 2, 1);
        small.at(0, 0, 0) = 0.1;
        small.at(0, 0, 1) = 0.2;
        small.at(0, 1, 0) = 0.3;
        small.at(0, 1, 1) = 0.8;
        Image out = crop_bilinear(small, 0, 0, 2, 2, 1, 1);
        CHECK(out.at(0, 0, 0) == doctest::Approx(0.35).epsilon(1e-12));
    }
}

TEST_CASE("tensor elementwise ops and reductions match direct evaluation") {
    Rng rng(11);
    auto a = Tensor::randn({2, 3, 4, 4}, rng, 1.0, true);
    auto b = Tensor::randn({2, 3, 4, 4}, rng, 1.0, false);

    Tensor y = mean_all(mul(add(a, b), sub(a, b))); // mean(a^2 - b^2)
    double expect = 0;
    for (size_t i = 0; i < a.numel(); ++i)
        expect += a.data()[i] * a.data()[i] - b.data()[i] * b.data()[i];
    expect /= static_cast<double>(a.numel());
    CHECK(y.item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("gradients match finite differences") {
    Rng rng(13);

    SUBCASE("mul/add/abs/square/tanh chain") {
        auto x = Tensor::randn({3, 5}, rng, 1.0, true);
        auto c = Tensor::randn({3, 5}, rng, 1.0, false);
        auto build = [&]() { return mean_all(abs_t(tanh_t(mul(x, c)))); };
        CHECK(testutil::tensor_grad_rel_err(x, build) < 1e-6);
    }
    SUBCASE("matmul and linear") {
        auto A = Tensor::randn({4, 6}, rng, 1.0, true);
        auto B = Tensor::randn({6, 3}, rng, 1.0, true);
        auto build = [&]() { return mean_all(square_t(matmul(A, B))); };
        CHECK(testutil::tensor_grad_rel_err(A, build) < 1e-6);
        CHECK(testutil::tensor_grad_rel_err(B, build) < 1e-6);

        auto x = Tensor::randn({5, 6}, rng, 1.0, false);
        auto w = Tensor::randn({4, 6}, rng, 0.5, true);
        auto bias = Tensor::randn({4}, rng, 0.5, true);
        auto build2 = [&]() { return mean_all(square_t(linear(x, w, bias))); };
        CHECK(testutil::tensor_grad_rel_err(w, build2) < 1e-6);
        CHECK(testutil::tensor_grad_rel_err(bias, build2) < 1e-6);
    }
    SUBCASE("conv2d stride 1 and 2, input/weight/bias") {
        auto x = Tensor::randn({2, 3, 8, 8}, rng, 1.0, true);
        auto w = Tensor::randn({4, 3, 3, 3}, rng, 0.5, true);
        auto b = Tensor::randn({4}, rng, 0.5, true);
        for (int stride : {1, 2}) {
            auto build = [&, stride]() { return mean_all(square_t(conv2d(x, w, b, stride, 1))); };
            CHECK(testutil::tensor_grad_rel_err(x, build) < 1e-6);
            CHECK(testutil::tensor_grad_rel_err(w, build) < 1e-6);
            CHECK(testutil::tensor_grad_rel_err(b, build) < 1e-6);
        }
    }
    SUBCASE("upsample, leaky_relu, concat, slice, reshape, film") {
        auto x = Tensor::randn({1, 4, 4, 4}, rng, 1.0, true);
        auto y = Tensor::randn({1, 2, 8, 8}, rng, 1.0, true);
        auto s = Tensor::randn({1, 6}, rng, 0.3, true);
        auto t = Tensor::randn({1, 6}, rng, 0.3, true);
        auto build = [&]() {
            auto up = upsample2x(x); // [1,4,8,8]
            auto cat = concat_c({up, y}); // [1,6,8,8]
            auto m = film(leaky_relu(cat, 0.2), s, t);
            auto sl = slice_c(m, 1, 5);
            return mean_all(abs_t(reshape(sl, {4, 64})));
        };
        CHECK(testutil::tensor_grad_rel_err(x, build) < 1e-6);
        CHECK(testutil::tensor_grad_rel_err(y, build) < 1e-6);
        CHECK(testutil::tensor_grad_rel_err(s, build) < 1e-6);
        CHECK(testutil::tensor_grad_rel_err(t, build) < 1e-6);
    }
}

TEST_CASE("bilinear_sample semantics and gradient") {
    Rng rng(17);
    auto tex = Tensor::randn({5, 6, 6}, rng, 1.0, true);
    int H = 4, W = 4;
    Image uv(H, W, 2);
    Image cov(H, W, 1, 1.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            uv.at(0, y, x) = rng.uniform();
            uv.at(1, y, x) = rng.uniform();
        }
    cov.at(0, 0, 0) = 0.0;

    SUBCASE("texel center and four-texel midpoint") {
        Image uv1(1, 2, 2);
        Image cov1(1, 2, 1, 1.0);
        uv1.at(0, 0, 0) = 2.0 / 5.0; // texel (2,3) center under align-corners on a 6x6 grid
        uv1.at(1, 0, 0) = 3.0 / 5.0;
        uv1.at(0, 0, 1) = 2.5 / 5.0; // midpoint of texels (2..3)x(3..4)
        uv1.at(1, 0, 1) = 3.5 / 5.0;
        auto out = bilinear_sample(tex, uv1, cov1);
        for (int c = 0; c < 5; ++c) {
            double texel = tex.data()[(c * 6 + 3) * 6 + 2];
            CHECK(out.data()[(c * 1 + 0) * 2 + 0] == doctest::Approx(texel).epsilon(1e-12));
            double avg = 0;
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) avg += tex.data()[(c * 6 + 3 + dy) * 6 + 2 + dx];
            avg /= 4.0;
            CHECK(out.data()[(c * 1 + 0) * 2 + 1] == doctest::Approx(avg).epsilon(1e-12));
        }
    }
    SUBCASE("zero coverage gives zero output") {
        Image nocov(H, W, 1, 0.0);
        auto out = bilinear_sample(tex, uv, nocov);
        for (size_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == 0.0);
    }
    SUBCASE("gradient w.r.t. texture matches finite differences") {
        auto build = [&]() { return mean_all(square_t(bilinear_sample(tex, uv, cov))); };
        CHECK(testutil::tensor_grad_rel_err(tex, build) < 1e-6);
    }
}

TEST_CASE("detach blocks gradient flow") {
    Rng rng(19);
    auto x = Tensor::randn({4}, rng, 1.0, true);
    auto loss = mean_all(square_t(detach(x)));
    backward(loss);
    CHECK_FALSE(x.has_grad());
}

TEST_CASE("adam reduces a quadratic") {
    Rng rng(23);
    auto x = Tensor::randn({10}, rng, 2.0, true);
    AdamTensor opt({.lr = 0.1});
    opt.add_param(x);
    double first = 0;
    for (int it = 0; it < 200; ++it) {
        opt.zero_grad();
        auto loss = mean_all(square_t(x));
        if (it == 0) first = loss.item();
        backward(loss);
        opt.step();
    }
    auto final_loss = mean_all(square_t(x)).item();
    CHECK(final_loss < 0.01 * first);
}
