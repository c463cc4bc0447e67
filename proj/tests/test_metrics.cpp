#include <doctest.h>

#include <Eigen/QR>
#include <cmath>

#include "sixdma/metrics.hpp"

using namespace sixdma;
using namespace sixdma::metrics;
using channel::cdouble;
using geometry::RotationAngles;
using geometry::Vec3;

namespace {
MatrixXcd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    MatrixXcd h(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) h(r, c) = rng.cgaussian();
    return h;
}
} // namespace

TEST_CASE("instantaneous capacity fixtures") {
    LinkBudget b(0.1, 1.0, 1.0);
    MatrixXcd h(1, 1);
    h(0, 0) = 1.0;
    CHECK(instantaneous_capacity(h, b) == doctest::Approx(1.0));

    h(0, 0) = 0.0;
    CHECK(instantaneous_capacity(h, b) == doctest::Approx(0.0));

    // Orthonormal columns, K=2, snr=3: eigenvalues of HH^H are {1,1}.
    LinkBudget b3(0.1, 3.0, 1.0);
    MatrixXcd ortho(4, 2);
    ortho.setZero();
    ortho(0, 0) = 1.0;
    ortho(2, 1) = 1.0;
    CHECK(instantaneous_capacity(ortho, b3) == doctest::Approx(4.0));

    MatrixXcd bad(1, 1);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)instantaneous_capacity(bad, b), std::invalid_argument);
}

TEST_CASE("capacity equals explicit eigenvalue evaluation on both gram sides") {
    Rng rng(41);
    LinkBudget b(0.1, 2.5, 0.7);
    for (int i = 0; i < 50; ++i) {
        const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng.uniform_index(6));
        const Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng.uniform_index(6));
        const MatrixXcd h = random_matrix(rng, rows, cols);
        const Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h * h.adjoint());
        double want = 0.0;
        for (Eigen::Index j = 0; j < rows; ++j)
            want += std::log2(1.0 + b.snr() * std::max(0.0, es.eigenvalues()[j]));
        CHECK(instantaneous_capacity(h, b) == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("capacity monotone in power and unitary/permutation invariant") {
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        const MatrixXcd h = random_matrix(rng, 3, 2);
        const double p = rng.uniform(0.1, 5.0);
        CHECK(instantaneous_capacity(h, LinkBudget(0.1, 2.0 * p, 1.0)) >=
              instantaneous_capacity(h, LinkBudget(0.1, p, 1.0)) - 1e-12);
    }
    LinkBudget b(0.1, 1.7, 1.0);
    for (int i = 0; i < 50; ++i) {
        const MatrixXcd h = random_matrix(rng, 4, 3);
        // Column permutation.
        MatrixXcd perm = h;
        perm.col(0).swap(perm.col(2));
        CHECK(instantaneous_capacity(perm, b) == doctest::Approx(instantaneous_capacity(h, b)));
        // Left-multiplication by a random unitary.
        const Eigen::HouseholderQR<MatrixXcd> qr(random_matrix(rng, 4, 4));
        const MatrixXcd q = qr.householderQ();
        CHECK(instantaneous_capacity(q * h, b) ==
              doctest::Approx(instantaneous_capacity(h, b)).epsilon(1e-10));
    }
}

TEST_CASE("monte carlo: deterministic sampler collapses to instantaneous value") {
    LinkBudget b(0.1, 1.0, 1.0);
    MatrixXcd h(2, 2);
    h << cdouble(1, 0), cdouble(0, 0.5), cdouble(-0.3, 0), cdouble(0, 1);
    const auto est = monte_carlo_avg_capacity([&](std::uint64_t) { return h; }, 16, b);
    CHECK(est.mean == doctest::Approx(instantaneous_capacity(h, b)));
    CHECK(est.std_error == doctest::Approx(0.0));
}

TEST_CASE("monte carlo: serial and parallel execution bit-identical") {
    ScenarioDistribution dist;
    dist.num_users = 4;
    dist.hotspots = {{30.0, 0.0, 8.0, 1.0}};
    dist.non_hotspot_ratio = 0.4;
    dist.seed = 7;
    const LinkBudget b(0.1, 1.0, 0.5);
    const auto arr = channel::LocalArray::uniform_planar(2, 2, 0.05);
    std::vector<channel::SurfacePose> poses(2);
    poses[1].position = Vec3(0.5, 0, 0);
    const std::vector<channel::LocalArray> arrays(2, arr);
    const auto serial = monte_carlo_avg_capacity(poses, arrays, channel::AntennaPattern::directive(),
                                                 dist, 64, b, Exec::Serial);
    const auto parallel = monte_carlo_avg_capacity(poses, arrays, channel::AntennaPattern::directive(),
                                                   dist, 64, b, Exec::OpenMP);
    CHECK(serial.mean == parallel.mean);       // bitwise: fixed reduction tree
    CHECK(serial.std_error == parallel.std_error);
}

TEST_CASE("monte carlo standard error shrinks like 1/sqrt(trials)") {
    ScenarioDistribution dist;
    dist.num_users = 3;
    dist.seed = 9;
    const LinkBudget b(0.1, 1.0, 1.0);
    const auto arr = channel::LocalArray::uniform_planar(2, 1, 0.05);
    const std::vector<channel::SurfacePose> poses(1);
    const std::vector<channel::LocalArray> arrays(1, arr);
    const auto lo = monte_carlo_avg_capacity(poses, arrays, channel::AntennaPattern::isotropic(), dist,
                                             100, b);
    const auto hi = monte_carlo_avg_capacity(poses, arrays, channel::AntennaPattern::isotropic(), dist,
                                             400, b);
    // Quadrupling trials should roughly halve the standard error.
    CHECK(hi.std_error < 0.75 * lo.std_error);
    CHECK(hi.std_error > 0.25 * lo.std_error);

    // Power continuity: estimate vanishes with vanishing power.
    const auto tiny = monte_carlo_avg_capacity(poses, arrays, channel::AntennaPattern::isotropic(), dist,
                                               50, LinkBudget(0.1, 1e-12, 1.0));
    CHECK(tiny.mean < 1e-9);
}

TEST_CASE("sum rate beamforming fixtures") {
    const LinkBudget b(0.1, 1.0, 0.5);
    Rng rng(43);
    // K=1 MRT achieves the matched-filter bound.
    const MatrixXcd h = random_matrix(rng, 4, 1);
    const double power = 2.0;
    channel::VectorXcd w = std::sqrt(power) * h.col(0).normalized();
    const double rate = sum_rate_beamforming(h, BeamformingSet({w}, power + 1e-9), b);
    CHECK(rate == doctest::Approx(std::log2(1.0 + h.col(0).squaredNorm() * power / b.noise_power)));

    // Orthogonal beam gives zero rate.
    MatrixXcd h2(2, 1);
    h2 << cdouble(1, 0), cdouble(0, 0);
    channel::VectorXcd w2(2);
    w2 << cdouble(0, 0), cdouble(1, 0);
    CHECK(sum_rate_beamforming(h2, BeamformingSet({w2}, 1.0), b) == doctest::Approx(0.0));

    // Two orthogonal channels with matched beams: no interference terms.
    MatrixXcd h3(4, 2);
    h3.setZero();
    h3(0, 0) = cdouble(1.2, 0.3);
    h3(2, 1) = cdouble(0.5, -0.9);
    std::vector<channel::VectorXcd> beams;
    for (int k = 0; k < 2; ++k) beams.push_back(h3.col(k).normalized());
    const double sum = sum_rate_beamforming(h3, BeamformingSet(beams, 2.0 + 1e-9), b);
    double single = 0.0;
    for (int k = 0; k < 2; ++k)
        single += std::log2(1.0 + h3.col(k).squaredNorm() / b.noise_power);
    CHECK(sum == doctest::Approx(single).epsilon(1e-12));
}

TEST_CASE("random linear precoding never beats multiple-access capacity at matched power") {
    Rng rng(44);
    for (int i = 0; i < 200; ++i) {
        const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.uniform_index(3));
        const MatrixXcd h = random_matrix(rng, 6, k);
        const double p = rng.uniform(0.2, 3.0);
        const LinkBudget b(0.1, p, 1.0);
        std::vector<channel::VectorXcd> beams;
        for (Eigen::Index j = 0; j < k; ++j)
            beams.push_back(std::sqrt(p) * random_matrix(rng, 6, 1).col(0).normalized());
        const double lin = sum_rate_beamforming(h, BeamformingSet(beams, p * k + 1e-9), b);
        CHECK(lin <= instantaneous_capacity(h, b) + 1e-9);
    }
}

TEST_CASE("capacity upper bound fixtures and Jensen dominance") {
    const LinkBudget unit(0.1, 1.0, 1.0);
    MatrixXd p0 = MatrixXd::Zero(3, 2);
    CHECK(capacity_upper_bound(p0, unit) == 0.0);

    MatrixXd p1 = MatrixXd::Zero(2, 1);
    p1(0, 0) = 0.25;
    p1(1, 0) = 0.75; // sums to sigma^2/p = 1
    CHECK(capacity_upper_bound(p1, unit) == doctest::Approx(1.0));

    // Frozen user geometry, random gains: the analytic power matrix bounds
    // the Monte Carlo mean within 3 standard errors.
    ScenarioDistribution dist;
    dist.num_users = 5;
    dist.hotspots = {{-40.0, 5.0, 12.0, 1.0}};
    dist.non_hotspot_ratio = 0.5;
    dist.paths_min = 2;
    dist.paths_max = 3;
    const auto arr = channel::LocalArray::uniform_planar(2, 2, 0.05);
    std::vector<channel::SurfacePose> poses(3);
    poses[0].position = Vec3(0.4, 0, 0);
    poses[1].position = Vec3(-0.2, 0.3, 0);
    poses[2].position = Vec3(0, -0.4, 0.2);
    poses[1].rotation = RotationAngles(0.3, 0.8, 5.1);
    const std::vector<channel::LocalArray> arrays(3, arr);
    const auto pattern = channel::AntennaPattern::directive();
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        dist.seed = seed;
        const LinkBudget b(0.1, 1.3, 0.8);
        const auto frozen = dist.draw_users(0);
        const MatrixXd pmat = channel::average_power_matrix(poses, arrays, pattern, frozen, b);
        const auto est = monte_carlo_avg_capacity(
            [&](std::uint64_t t) {
                return channel::assemble_channel_matrix(poses, arrays, pattern,
                                                        dist.draw_users_frozen_geometry(t), b);
            },
            400, b);
        CHECK(capacity_upper_bound(pmat, b) >= est.mean - 3.0 * est.std_error);
    }
}

TEST_CASE("scenario distribution validation") {
    ScenarioDistribution bad;
    bad.non_hotspot_ratio = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.non_hotspot_ratio = 0.5;
    bad.hotspots = {{0.0, 0.0, 5.0, 0.4}, {10.0, 0.0, 5.0, 0.4}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument); // weights sum to 0.8
    bad.hotspots[1].weight = 0.6;
    CHECK_NOTHROW(bad.validate());
}
