// Compares the OpenMP kernels against the serial reference implementation:
// identical results (bitwise) and wall-clock speedup for the hot loops.
#include <chrono>
#include <cstdio>

#include "sixdma/estimate.hpp"
#include "sixdma/metrics.hpp"
#include "sixdma/optimize.hpp"
#include "sixdma/scenario.hpp"

using namespace sixdma;
using geometry::Vec3;

namespace {

double seconds(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-28s serial %8.3fs  openmp %8.3fs  speedup %5.2fx  results %s\n", name, serial_s,
                parallel_s, serial_s / parallel_s, identical ? "identical" : "DIFFER");
}

} // namespace

int main() {
    const channel::LinkBudget budget(0.1, 1.0, 0.1);
    const auto arr = channel::LocalArray::uniform_planar(2, 2, 0.05);

    // Monte Carlo capacity over a 16-surface, 20-user scenario.
    {
        metrics::ScenarioDistribution dist;
        dist.num_users = 20;
        dist.hotspots = {{60.0, -15.0, 5.0, 1.0}};
        dist.non_hotspot_ratio = 0.6;
        dist.paths_min = 2;
        dist.paths_max = 4;
        dist.seed = 5;
        std::vector<channel::SurfacePose> poses(16);
        const std::vector<channel::LocalArray> arrays(16, arr);
        for (int i = 0; i < 16; ++i) {
            const double az = 2.0 * M_PI * i / 16.0 - M_PI;
            const Vec3 dir(std::cos(az), std::sin(az), 0.0);
            poses[static_cast<std::size_t>(i)].position = dir;
            poses[static_cast<std::size_t>(i)].rotation = scenario::rotation_facing(dir);
        }
        metrics::MonteCarloEstimate serial_est, parallel_est;
        const int trials = 800;
        const double ts = seconds([&] {
            serial_est = metrics::monte_carlo_avg_capacity(poses, arrays,
                                                           channel::AntennaPattern::directive(), dist,
                                                           trials, budget, Exec::Serial);
        });
        const double tp = seconds([&] {
            parallel_est = metrics::monte_carlo_avg_capacity(poses, arrays,
                                                             channel::AntennaPattern::directive(), dist,
                                                             trials, budget, Exec::OpenMP);
        });
        report("monte_carlo_capacity", ts, tp,
               serial_est.mean == parallel_est.mean && serial_est.std_error == parallel_est.std_error);
    }

    // Batch of per-pose covariance MLE solves.
    {
        const int poses = 64, l = 24, k = 12, n = 36;
        const auto pilots = estimate::PilotConfig{l, k, 7}.pilot_matrix();
        std::vector<estimate::MatrixXcd> obs(poses);
        for (int m = 0; m < poses; ++m) {
            Rng rng = Rng(11).fork(static_cast<std::uint64_t>(m));
            estimate::MatrixXcd h(n, k);
            for (Eigen::Index c = 0; c < k; ++c)
                for (Eigen::Index r = 0; r < n; ++r) h(r, c) = rng.cgaussian();
            obs[static_cast<std::size_t>(m)] =
                estimate::simulate_pilot_rx(h, Eigen::VectorXi::Ones(k), pilots, 0.1, rng);
        }
        Eigen::MatrixXd out_serial(poses, k), out_parallel(poses, k);
        auto solve_all = [&](Eigen::MatrixXd& out, Exec exec) {
            parallel_for(static_cast<std::size_t>(poses), [&](std::size_t m) {
                out.row(static_cast<Eigen::Index>(m)) =
                    estimate::mle_power_estimate(obs[m], pilots, 0.1).transpose();
            }, exec);
        };
        const double ts = seconds([&] { solve_all(out_serial, Exec::Serial); });
        const double tp = seconds([&] { solve_all(out_parallel, Exec::OpenMP); });
        report("per_pose_covariance_mle", ts, tp, out_serial == out_parallel);
    }

    // Surface-block frozen-objective evaluation inside alternating optimization.
    {
        metrics::ScenarioDistribution dist;
        dist.num_users = 16;
        dist.hotspots = {{20.0, 0.0, 8.0, 1.0}};
        dist.non_hotspot_ratio = 0.4;
        dist.seed = 9;
        const auto region = geometry::SiteRegion::sphere(Vec3::Zero(), 2.0);
        const std::vector<channel::LocalArray> arrays(8, arr);
        std::vector<channel::SurfacePose> poses(8);
        for (int i = 0; i < 8; ++i) {
            const double az = 2.0 * M_PI * i / 8.0 - M_PI;
            const Vec3 dir(std::cos(az), std::sin(az), 0.0);
            poses[static_cast<std::size_t>(i)].position = dir;
            poses[static_cast<std::size_t>(i)].rotation = scenario::rotation_facing(dir);
        }
        optimize::AoConfig cfg;
        cfg.trials = 60;
        cfg.max_outer_iters = 2;
        optimize::AoResult serial_res, parallel_res;
        const double ts = seconds([&] {
            serial_res = optimize::ao_optimize(poses, arrays, channel::AntennaPattern::directive(), dist,
                                               region, geometry::ConstraintConfig(0.2), cfg, budget,
                                               Exec::Serial);
        });
        const double tp = seconds([&] {
            parallel_res = optimize::ao_optimize(poses, arrays, channel::AntennaPattern::directive(),
                                                 dist, region, geometry::ConstraintConfig(0.2), cfg,
                                                 budget, Exec::OpenMP);
        });
        bool identical = serial_res.trace == parallel_res.trace;
        for (std::size_t b = 0; b < poses.size() && identical; ++b)
            identical = (serial_res.poses[b].position == parallel_res.poses[b].position) &&
                        serial_res.poses[b].rotation.alpha == parallel_res.poses[b].rotation.alpha &&
                        serial_res.poses[b].rotation.beta == parallel_res.poses[b].rotation.beta &&
                        serial_res.poses[b].rotation.gamma == parallel_res.poses[b].rotation.gamma;
        report("alternating_optimization", ts, tp, identical);
    }
    return 0;
}
