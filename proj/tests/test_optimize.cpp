#include <doctest.h>

#include <cmath>

#include "sixdma/optimize.hpp"
#include "sixdma/scenario.hpp"

using namespace sixdma;
using namespace sixdma::optimize;
using channel::cdouble;
using geometry::RotationAngles;
using geometry::Vec3;

namespace {

const LinkBudget kBudget(0.1, 1.0, 0.1);

// One surface on a shell facing outward; always feasible.
std::vector<SurfacePose> radial_poses(int b, double radius) {
    std::vector<SurfacePose> poses(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
        const double az = 2.0 * M_PI * i / b - M_PI;
        const Vec3 dir(std::cos(az), std::sin(az), 0.0);
        poses[static_cast<std::size_t>(i)].position = radius * dir;
        poses[static_cast<std::size_t>(i)].rotation = scenario::rotation_facing(dir);
    }
    return poses;
}

ScenarioDistribution one_hotspot(double az_deg, double el_deg, int users, std::uint64_t seed) {
    ScenarioDistribution d;
    d.num_users = users;
    d.hotspots = {{az_deg, el_deg, 3.0, 1.0}};
    d.non_hotspot_ratio = 0.0;
    d.paths_min = 1;
    d.paths_max = 2;
    d.path_spread_deg = 2.0;
    d.seed = seed;
    return d;
}

} // namespace

TEST_CASE("pso minimizes a convex quadratic") {
    PsoConfig cfg;
    cfg.lower = Eigen::VectorXd::Constant(3, -4.0);
    cfg.upper = Eigen::VectorXd::Constant(3, 4.0);
    cfg.swarm = 30;
    cfg.iters = 120;
    cfg.seed = 1;
    const Eigen::Vector3d target(0.7, -1.3, 2.1);
    auto objective = [&](const Eigen::VectorXd& x) { return (x - target).squaredNorm(); };
    auto feasible = [](const Eigen::VectorXd&) { return true; };
    const auto res = pso_minimize(objective, cfg, feasible);
    CHECK((res.best - target).norm() < 1e-3);
    for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] <= res.trace[i - 1]);

    // Same seed, bit-identical rerun.
    const auto res2 = pso_minimize(objective, cfg, feasible);
    CHECK(res2.value == res.value);
    CHECK((res2.best - res.best).norm() == 0.0);

    // Constant objective: any feasible point, value = constant.
    const auto flat = pso_minimize([](const Eigen::VectorXd&) { return 5.0; }, cfg, feasible);
    CHECK(flat.value == 5.0);

    // Feasibility filter keeps reported bests inside the sphere.
    auto ball = [](const Eigen::VectorXd& x) { return x.norm() <= 1.0; };
    const auto constrained = pso_minimize(objective, cfg, ball);
    CHECK(constrained.best.norm() <= 1.0 + 1e-12);
}

TEST_CASE("ao rejects infeasible initialization with the constraint named") {
    const auto arr = channel::LocalArray::uniform_planar(2, 2, 0.05);
    std::vector<channel::LocalArray> arrays(2, arr);
    auto poses = radial_poses(2, 1.0);
    poses[1].position = poses[0].position + Vec3(0.01, 0, 0); // too close
    const auto region = geometry::SiteRegion::sphere(Vec3::Zero(), 2.0);
    AoConfig cfg;
    cfg.trials = 2;
    try {
        (void)ao_optimize(poses, arrays, channel::AntennaPattern::directive(), one_hotspot(0, 0, 2, 1),
                          region, geometry::ConstraintConfig(0.3), cfg, kBudget);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("minimum-distance") != std::string::npos);
    }
}

TEST_CASE("ao turns a single directive surface toward the hotspot") {
    const auto arr = channel::LocalArray::uniform_planar(2, 2, 0.05);
    std::vector<channel::LocalArray> arrays(1, arr);
    // Start facing +x; users sit near azimuth 100 degrees.
    std::vector<SurfacePose> poses(1);
    poses[0].position = Vec3(0.3, 0, 0);
    const auto region = geometry::SiteRegion::sphere(Vec3::Zero(), 1.0);
    const auto scenario_dist = one_hotspot(100.0, 10.0, 3, 4);
    AoConfig cfg;
    cfg.trials = 12;
    cfg.max_outer_iters = 40;
    cfg.objective_tol = 1e-7;
    const auto res = ao_optimize(poses, arrays, channel::AntennaPattern::directive(), scenario_dist,
                                 region, geometry::ConstraintConfig(0.05), cfg, kBudget);

    for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] >= res.trace[i - 1] - 1e-12);

    // Dense grid-search oracle over the boresight direction (rotation only,
    // position fixed at the returned optimum).
    const Vec3 got = geometry::surface_normal(res.poses[0].rotation, arr);
    double best_val = -1e300;
    Vec3 best_dir(1, 0, 0);
    for (int ia = 0; ia < 72; ++ia)
        for (int ie = -17; ie <= 17; ++ie) {
            const double az = ia * M_PI / 36.0 - M_PI;
            const double el = ie * M_PI / 36.0;
            SurfacePose cand = res.poses[0];
            const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
            cand.rotation = scenario::rotation_facing(dir);
            if (!geometry::poses_feasible({cand}, {arr}, region, geometry::ConstraintConfig(0.05)))
                continue;
            metrics::MonteCarloEstimate est = metrics::monte_carlo_avg_capacity(
                {cand}, {arr}, channel::AntennaPattern::directive(), scenario_dist, cfg.trials, kBudget);
            if (est.mean > best_val) {
                best_val = est.mean;
                best_dir = dir;
            }
        }
    const double angle_off = std::acos(std::clamp(got.dot(best_dir), -1.0, 1.0));
    CHECK(angle_off < 5.0 * M_PI / 180.0);

    // Restart from the converged point: first-iteration improvement below tol.
    AoConfig cfg2 = cfg;
    cfg2.max_outer_iters = 1;
    const auto res2 = ao_optimize(res.poses, arrays, channel::AntennaPattern::directive(),
                                  scenario_dist, region, geometry::ConstraintConfig(0.05), cfg2, kBudget);
    CHECK(res2.trace.back() - res2.trace.front() <
          1e-4 * std::max(1.0, std::abs(res2.trace.front())));
}

TEST_CASE("ao with two surfaces and two opposite hotspots splits the normals") {
    const auto arr = channel::LocalArray::uniform_planar(2, 2, 0.05);
    std::vector<channel::LocalArray> arrays(2, arr);
    auto poses = radial_poses(2, 0.6);
    const auto region = geometry::SiteRegion::sphere(Vec3::Zero(), 1.5);
    ScenarioDistribution dist;
    dist.num_users = 6;
    dist.hotspots = {{45.0, 0.0, 3.0, 0.5}, {-135.0, 0.0, 3.0, 0.5}};
    dist.non_hotspot_ratio = 0.0;
    dist.paths_min = 1;
    dist.paths_max = 1;
    dist.path_spread_deg = 1.0;
    dist.seed = 5;
    AoConfig cfg;
    cfg.trials = 10;
    cfg.max_outer_iters = 25;
    const auto res = ao_optimize(poses, arrays, channel::AntennaPattern::directive(), dist, region,
                                 geometry::ConstraintConfig(0.1), cfg, kBudget);
    const Vec3 h1(std::cos(M_PI / 4), std::sin(M_PI / 4), 0.0);
    const Vec3 h2(-std::cos(M_PI / 4), -std::sin(M_PI / 4), 0.0);
    const Vec3 n0 = geometry::surface_normal(res.poses[0].rotation, arr);
    const Vec3 n1 = geometry::surface_normal(res.poses[1].rotation, arr);
    // One normal per hotspot hemisphere.
    const bool split = (n0.dot(h1) > 0 && n1.dot(h2) > 0) || (n0.dot(h2) > 0 && n1.dot(h1) > 0);
    CHECK(split);
    CHECK(geometry::poses_feasible(res.poses, arrays, region, geometry::ConstraintConfig(0.1)));
    CHECK(res.trace.back() >= res.trace.front() - 1e-12);
}

TEST_CASE("discrete offline: forced assignment and enumeration oracle") {
    const auto arr = channel::LocalArray::uniform_planar(2, 1, 0.05);
    // Tiny grid around the origin, all feasible, B = M: forced permutation.
    DiscreteGrid grid;
    for (int m = 0; m < 2; ++m) {
        const double az = m == 0 ? 0.0 : M_PI;
        const Vec3 dir(std::cos(az), std::sin(az), 0.0);
        grid.positions.push_back(0.5 * dir);
        grid.rotations_per_position.push_back({scenario::rotation_facing(dir)});
    }
    DiscreteConfig cfg;
    cfg.trials = 6;
    cfg.pg_iters = 10;
    const auto forced = discrete_offline(grid, arr, channel::AntennaPattern::directive(),
                                         one_hotspot(0, 0, 2, 2), geometry::ConstraintConfig(0.2), 2,
                                         cfg, kBudget);
    CHECK(forced.assignment.position.size() == 2);
    std::vector<int> sorted = forced.assignment.position;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1});
    CHECK(assignment_feasible(grid, forced.assignment, arr, geometry::ConstraintConfig(0.2)));

    // B=1 on a small grid matches exhaustive enumeration.
    DiscreteGrid small;
    for (int m = 0; m < 4; ++m) {
        const double az = m * M_PI_2 - M_PI;
        const Vec3 dir(std::cos(az), std::sin(az), 0.0);
        small.positions.push_back(0.5 * dir);
        small.rotations_per_position.push_back(
            {scenario::rotation_facing(dir),
             scenario::rotation_facing(Vec3(dir.y(), dir.x(), 0.4).normalized())});
    }
    const auto got = discrete_offline(small, arr, channel::AntennaPattern::directive(),
                                      one_hotspot(60, 0, 2, 3), geometry::ConstraintConfig(0.2), 1, cfg,
                                      kBudget);

    // Enumeration oracle on the same frozen trial set (trial index = draw id).
    ScenarioDistribution dist = one_hotspot(60, 0, 2, 3);
    double best = -1e300;
    DiscreteAssignment best_a;
    for (int m = 0; m < 4; ++m)
        for (int l = 0; l < 2; ++l) {
            DiscreteAssignment a;
            a.position = {m};
            a.rotation = {l};
            if (!assignment_feasible(small, a, arr, geometry::ConstraintConfig(0.2))) continue;
            const auto poses = assignment_poses(small, a);
            const auto est = metrics::monte_carlo_avg_capacity(
                poses, {arr}, channel::AntennaPattern::directive(), dist, cfg.trials, kBudget);
            if (est.mean > best) {
                best = est.mean;
                best_a = a;
            }
        }
    CHECK(got.assignment.position[0] == best_a.position[0]);
    CHECK(got.assignment.rotation[0] == best_a.rotation[0]);
    CHECK(got.rate == doctest::Approx(best).epsilon(1e-9));

    // Infeasible instance: fewer positions than surfaces.
    CHECK_THROWS_AS((void)discrete_offline(grid, arr, channel::AntennaPattern::directive(),
                                           one_hotspot(0, 0, 2, 2), geometry::ConstraintConfig(0.2), 3,
                                           cfg, kBudget),
                    std::invalid_argument);
}

TEST_CASE("discrete assignment feasibility checks duplicates and geometry") {
    const auto arr = channel::LocalArray::uniform_planar(2, 1, 0.05);
    DiscreteGrid grid;
    for (int m = 0; m < 3; ++m) {
        const double az = 2.0 * M_PI * m / 3.0 - M_PI;
        const Vec3 dir(std::cos(az), std::sin(az), 0.0);
        grid.positions.push_back(0.5 * dir);
        grid.rotations_per_position.push_back({scenario::rotation_facing(dir)});
    }
    DiscreteAssignment dup;
    dup.position = {1, 1};
    dup.rotation = {0, 0};
    CHECK(!assignment_feasible(grid, dup, arr, geometry::ConstraintConfig(0.1)));
    DiscreteAssignment ok;
    ok.position = {0, 2};
    ok.rotation = {0, 0};
    CHECK(assignment_feasible(grid, ok, arr, geometry::ConstraintConfig(0.1)));
}

TEST_CASE("csm online selection") {
    const auto arr = channel::LocalArray::uniform_planar(2, 1, 0.05);
    DiscreteGrid grid;
    for (int m = 0; m < 4; ++m) {
        const double az = m * M_PI_2 - M_PI;
        const Vec3 dir(std::cos(az), std::sin(az), 0.0);
        grid.positions.push_back(0.5 * dir);
        grid.rotations_per_position.push_back(
            {scenario::rotation_facing(dir),
             scenario::rotation_facing(Vec3(dir.y(), dir.x(), 0.3).normalized())});
    }
    const geometry::ConstraintConfig cc(0.2);

    // Rates independent of the assignment: output only needs feasibility.
    const auto any =
        csm_online(grid, arr, cc, 2, [](const DiscreteAssignment&) { return 1.0; }, 64, 3);
    CHECK(assignment_feasible(grid, any, arr, cc));

    // Planted optimum: option (position 2, rotation 1) adds +10.
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng noise(seed + 1000);
        auto sampler = [&](const DiscreteAssignment& a) {
            double r = noise.gaussian();
            for (std::size_t b = 0; b < a.position.size(); ++b)
                if (a.position[b] == 2 && a.rotation[b] == 1) r += 10.0;
            return r;
        };
        const auto pick = csm_online(grid, arr, cc, 2, sampler, 500, seed);
        for (std::size_t b = 0; b < pick.position.size(); ++b)
            if (pick.position[b] == 2 && pick.rotation[b] == 1) {
                ++hits;
                break;
            }
    }
    CHECK(hits >= 48); // >= 95% of seeds find the planted option

    // Exhaustive coverage of a tiny grid with deterministic rates matches the
    // enumeration argmax.
    DiscreteGrid tiny;
    tiny.positions = {Vec3(0.5, 0, 0), Vec3(-0.5, 0, 0)};
    tiny.rotations_per_position = {{scenario::rotation_facing(Vec3(1, 0, 0))},
                                   {scenario::rotation_facing(Vec3(-1, 0, 0))}};
    auto det = [](const DiscreteAssignment& a) {
        return a.position[0] == 0 ? 3.0 : 1.0; // surface 0 at position 0 is best
    };
    const auto best = csm_online(tiny, arr, cc, 1, det, 400, 9);
    CHECK(best.position[0] == 0);
}

TEST_CASE("select poses from stats prefers high-power feasible options") {
    const auto arr = channel::LocalArray::uniform_planar(2, 1, 0.05);
    DiscreteGrid grid;
    for (int m = 0; m < 4; ++m) {
        const double az = m * M_PI_2 - M_PI;
        const Vec3 dir(std::cos(az), std::sin(az), 0.0);
        grid.positions.push_back(0.5 * dir);
        grid.rotations_per_position.push_back({scenario::rotation_facing(dir)});
    }
    MatrixXd power = MatrixXd::Constant(4, 2, 0.1);
    power(2, 0) = 5.0;
    power(3, 1) = 4.0;
    const auto a = select_poses_from_stats(grid, arr, geometry::ConstraintConfig(0.2), 2, power,
                                           kBudget);
    std::vector<int> got = a.position;
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<int>{2, 3});
}
