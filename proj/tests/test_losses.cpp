#include "pancolor/losses.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"

using namespace pancolor;
using namespace pancolor::losses;

namespace {

std::vector<double> random_scores(size_t n, uint64_t seed, double scale = 3.0) {
    Rng rng(seed);
    std::vector<double> s(n);
    for (double& v : s) v = scale * (2.0 * rng.next_double() - 1.0);
    return s;
}

}  // namespace

TEST_CASE("ragan closed forms") {
    // Equal scores: both sigmoids sit at 1/2.
    std::vector<double> a(5, 0.7), b(3, 0.7);
    CHECK(ragan_pair_loss(a, b) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

    // Scalar case s1 = {0}, s2 = {c}: loss = -2 log sigmoid(-c).
    std::vector<double> zero{0.0}, one{1.0};
    const double expect = -2.0 * std::log(1.0 / (1.0 + std::exp(1.0)));
    CHECK(ragan_pair_loss(zero, one) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(ragan_pair_loss(zero, one) == doctest::Approx(2.6265233750364456).epsilon(1e-9));

    // Perfect separation drives the loss to zero.
    std::vector<double> hi{40.0}, lo{-40.0};
    CHECK(ragan_pair_loss(hi, lo) < 1e-15);
}

TEST_CASE("ragan is shift-invariant") {
    const auto s1 = random_scores(11, 3);
    const auto s2 = random_scores(7, 4);
    const double base = ragan_pair_loss(s1, s2);
    for (double shift : {-250.0, -1.0, 0.3, 1e3}) {
        auto t1 = s1, t2 = s2;
        for (double& v : t1) v += shift;
        for (double& v : t2) v += shift;
        CHECK(std::fabs(ragan_pair_loss(t1, t2) - base) < 1e-9);
    }
}

TEST_CASE("losses stay finite for extreme scores") {
    for (double magnitude : {1e2, 1e3, 1e4}) {
        std::vector<double> hi{magnitude, magnitude / 2}, lo{-magnitude, -magnitude / 3};
        CHECK(std::isfinite(ragan_pair_loss(hi, lo)));
        CHECK(std::isfinite(ragan_pair_loss(lo, hi)));
        CHECK(std::isfinite(vanilla_d_loss(hi, lo)));
        CHECK(std::isfinite(vanilla_d_loss(lo, hi)));
        CHECK(std::isfinite(vanilla_g_loss(lo)));
    }
}

TEST_CASE("vanilla closed forms and limits") {
    std::vector<double> zeros{0.0, 0.0};
    CHECK(vanilla_d_loss(zeros, zeros) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(vanilla_g_loss(zeros) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    std::vector<double> hi{50.0}, lo{-50.0};
    CHECK(vanilla_d_loss(hi, lo) < 1e-15);     // perfect discriminator
    CHECK(vanilla_g_loss(hi) < 1e-15);         // fooled discriminator
}

TEST_CASE("ragan gradients match central differences below 1e-4") {
    auto s1 = random_scores(6, 11);
    auto s2 = random_scores(4, 12);
    std::vector<double> g1(s1.size()), g2(s2.size());
    ragan_pair_grad(s1, s2, g1, g2);
    const double h = 1e-5;
    for (size_t i = 0; i < s1.size(); ++i) {
        const double saved = s1[i];
        s1[i] = saved + h;
        const double up = ragan_pair_loss(s1, s2);
        s1[i] = saved - h;
        const double down = ragan_pair_loss(s1, s2);
        s1[i] = saved;
        CHECK(oracle::rel_err(g1[i], (up - down) / (2 * h)) < 1e-4);
    }
    for (size_t j = 0; j < s2.size(); ++j) {
        const double saved = s2[j];
        s2[j] = saved + h;
        const double up = ragan_pair_loss(s1, s2);
        s2[j] = saved - h;
        const double down = ragan_pair_loss(s1, s2);
        s2[j] = saved;
        CHECK(oracle::rel_err(g2[j], (up - down) / (2 * h)) < 1e-4);
    }
}

TEST_CASE("vanilla gradients match central differences below 1e-4") {
    auto real = random_scores(5, 21);
    auto fake = random_scores(5, 22);
    std::vector<double> gr(real.size()), gf(fake.size());
    vanilla_d_grad(real, fake, gr, gf);
    const double h = 1e-5;
    for (size_t i = 0; i < real.size(); ++i) {
        const double saved = real[i];
        real[i] = saved + h;
        const double up = vanilla_d_loss(real, fake);
        real[i] = saved - h;
        const double down = vanilla_d_loss(real, fake);
        real[i] = saved;
        CHECK(oracle::rel_err(gr[i], (up - down) / (2 * h)) < 1e-4);
    }
    std::vector<double> gg(fake.size());
    vanilla_g_grad(fake, gg);
    for (size_t j = 0; j < fake.size(); ++j) {
        const double saved = fake[j];
        fake[j] = saved + h;
        const double up = vanilla_g_loss(fake);
        fake[j] = saved - h;
        const double down = vanilla_g_loss(fake);
        fake[j] = saved;
        CHECK(oracle::rel_err(gg[j], (up - down) / (2 * h)) < 1e-4);
    }
}

TEST_CASE("l1 reconstruction values and gradient") {
    nn::Tensor pred = oracle::random_tensor(2, 3, 4, 4, 31);
    CHECK(l1_reconstruction(pred, pred) == 0.0);

    nn::Tensor shifted = pred;
    for (double& v : shifted.v) v += 0.25;
    CHECK(l1_reconstruction(shifted, pred) == doctest::Approx(0.25).epsilon(1e-12));

    const nn::Tensor target = oracle::random_tensor(2, 3, 4, 4, 32);
    double brute = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) brute += std::fabs(pred.v[i] - target.v[i]);
    brute /= static_cast<double>(pred.size());
    CHECK(l1_reconstruction(pred, target) == doctest::Approx(brute).epsilon(1e-12));

    const nn::Tensor grad = l1_reconstruction_grad(pred, target);
    const double h = 1e-7;
    for (size_t idx : {size_t{0}, size_t{13}, size_t{47}}) {
        const double saved = pred.v[idx];
        pred.v[idx] = saved + h;
        const double up = l1_reconstruction(pred, target);
        pred.v[idx] = saved - h;
        const double down = l1_reconstruction(pred, target);
        pred.v[idx] = saved;
        CHECK(oracle::rel_err(grad.v[idx], (up - down) / (2 * h)) < 1e-4);
    }
}

TEST_CASE("l1 is symmetric and satisfies the triangle inequality") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        const auto a = oracle::random_tensor(1, 2, 5, 5, seed * 10 + 1);
        const auto b = oracle::random_tensor(1, 2, 5, 5, seed * 10 + 2);
        const auto c = oracle::random_tensor(1, 2, 5, 5, seed * 10 + 3);
        CHECK(std::fabs(l1_reconstruction(a, b) - l1_reconstruction(b, a)) < 1e-12);
        CHECK(l1_reconstruction(a, c) <=
              l1_reconstruction(a, b) + l1_reconstruction(b, c) + 1e-12);
    }
}

TEST_CASE("composite objectives") {
    LossConfig cfg;  // alpha = 0.005
    CHECK(generator_objective(0.5, 2.0, cfg) == doctest::Approx(0.51).epsilon(1e-12));
    cfg.alpha = 0.0;
    CHECK(generator_objective(0.73, 99.0, cfg) == 0.73);
    cfg.alpha = 0.3;
    CHECK(generator_objective(0.0, 2.0, cfg) == doctest::Approx(0.6).epsilon(1e-12));

    LossConfig ragan_cfg;
    std::vector<double> eq(4, 1.5);
    CHECK(discriminator_objective(eq, eq, ragan_cfg) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));
    LossConfig vanilla_cfg;
    vanilla_cfg.adversarial = Adversarial::vanilla;
    std::vector<double> zeros(4, 0.0);
    CHECK(discriminator_objective(zeros, zeros, vanilla_cfg) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));
    std::vector<double> hi{30.0}, lo{-30.0};
    CHECK(discriminator_objective(hi, lo, ragan_cfg) < 1e-12);
    CHECK(discriminator_objective(hi, lo, vanilla_cfg) < 1e-12);
}

TEST_CASE("empty score batches are rejected") {
    std::vector<double> empty, some{1.0};
    CHECK_THROWS_AS(ragan_pair_loss(empty, some), ValidationError);
    CHECK_THROWS_AS(vanilla_d_loss(some, empty), ValidationError);
    CHECK_THROWS_AS(vanilla_g_loss(empty), ValidationError);
}
