#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sixdma/csv.hpp"
#include "sixdma/estimate.hpp"
#include "sixdma/metrics.hpp"
#include "sixdma/optimize.hpp"
#include "sixdma/parallel.hpp"
#include "sixdma/pathplan.hpp"
#include "sixdma/scenario.hpp"
#include "sixdma/sensing.hpp"

namespace fs = std::filesystem;
using namespace sixdma;
using scenario::ScenarioFile;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunContext {
    ScenarioFile sc;
    std::uint64_t seed = 0;
    int trials = 0; // 0 = subcommand default
    fs::path out_dir;
    std::map<std::string, std::string> overrides;
    std::vector<std::string> override_list;
    std::vector<std::string> outputs; // created files, removed on failure
    std::vector<std::string> output_names;

    std::string out_path(const std::string& name) {
        const std::string p = (out_dir / name).string();
        outputs.push_back(p);
        output_names.push_back(name);
        return p;
    }

    bool has(const std::string& key) const { return overrides.count(key) > 0; }

    double num(const std::string& key, double fallback) const {
        auto it = overrides.find(key);
        return it == overrides.end() ? fallback : std::stod(it->second);
    }

    int integer(const std::string& key, int fallback) const {
        auto it = overrides.find(key);
        return it == overrides.end() ? fallback : std::stoi(it->second);
    }

    std::vector<double> list(const std::string& key, std::vector<double> fallback) const {
        auto it = overrides.find(key);
        if (it == overrides.end()) return fallback;
        std::vector<double> vals;
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        return vals;
    }

    void finish(const std::string& subcommand) {
        scenario::RunManifest man;
        man.subcommand = subcommand;
        man.config_hash = scenario::config_hash(sc.raw_text);
        man.seed = seed;
        man.tool_version = kVersion;
        man.overrides = override_list;
        man.outputs = output_names;
        man.write((out_dir / "manifest.txt").string());
    }
};

double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

std::vector<channel::SurfacePose> radial_init(const ScenarioFile& sc) {
    // Feasible spread initialization on the site shell, facing outward.
    std::vector<channel::SurfacePose> poses(static_cast<std::size_t>(sc.num_surfaces));
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    const double radius = sc.region.shape == geometry::SiteRegion::Shape::Sphere
                              ? 0.8 * sc.region.radius
                              : 0.4 * (sc.region.box_max - sc.region.box_min).minCoeff();
    for (int i = 0; i < sc.num_surfaces; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / sc.num_surfaces;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const geometry::Vec3 dir(r * std::cos(golden * i), r * std::sin(golden * i), z);
        poses[static_cast<std::size_t>(i)].position =
            geometry::project_into_region(radius * dir + sc.region.center, sc.region);
        poses[static_cast<std::size_t>(i)].rotation = scenario::rotation_facing(dir);
    }
    return poses;
}

void write_poses_csv(const std::string& path, const std::vector<channel::SurfacePose>& poses) {
    CsvWriter w(path, {"surface", "x_m", "y_m", "z_m", "alpha_deg", "beta_deg", "gamma_deg"});
    for (std::size_t b = 0; b < poses.size(); ++b) {
        const auto& p = poses[b];
        w.row({static_cast<double>(b), p.position.x(), p.position.y(), p.position.z(),
               p.rotation.alpha * 180.0 / M_PI, p.rotation.beta * 180.0 / M_PI,
               p.rotation.gamma * 180.0 / M_PI});
    }
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m, const std::string& prefix,
                      const std::string& meta) {
    std::vector<std::string> cols;
    for (Eigen::Index c = 0; c < m.cols(); ++c) cols.push_back(prefix + std::to_string(c));
    CsvWriter w(path, cols);
    w.comment(meta);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        w.row(row);
    }
}

// ---------------------------------------------------------------- simulate

void run_simulate(RunContext& ctx) {
    const ScenarioFile& sc = ctx.sc;
    const auto budget = sc.budget();
    const auto arrays = sc.arrays();
    const auto poses = scenario::fpa_poses(sc);
    const int trials = ctx.trials > 0 ? ctx.trials : 1;

    metrics::ScenarioDistribution dist = sc.users;
    dist.seed = ctx.seed;

    CsvWriter cap(ctx.out_path("capacity.csv"), {"trial", "capacity_bits_per_hz"});
    std::vector<double> values(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        const auto h = channel::assemble_channel_matrix(poses, arrays, sc.pattern,
                                                        dist.draw_users(static_cast<std::uint64_t>(t)),
                                                        budget);
        values[static_cast<std::size_t>(t)] = metrics::instantaneous_capacity(h, budget);
        cap.row({static_cast<double>(t), values[static_cast<std::size_t>(t)]});
        if (t == 0) channel::write_channel_csv(ctx.out_path("channel_trial0.csv"), h);
    }
    const auto est = metrics::monte_carlo_avg_capacity(
        [&](std::uint64_t t) {
            return channel::assemble_channel_matrix(poses, arrays, sc.pattern, dist.draw_users(t), budget);
        },
        trials, budget);
    CsvWriter sum(ctx.out_path("summary.csv"),
                  {"scenario_id", "seed", "trials", "estimate_bits_per_hz", "std_error"});
    char scenario_id[32];
    std::snprintf(scenario_id, sizeof(scenario_id), "%016llx",
                  static_cast<unsigned long long>(scenario::config_hash(sc.raw_text)));
    sum.row(std::vector<std::string>{scenario_id, std::to_string(ctx.seed), std::to_string(trials),
                                     CsvWriter::fmt(est.mean), CsvWriter::fmt(est.std_error)});
    write_poses_csv(ctx.out_path("poses.csv"), poses);
}

// ---------------------------------------------------- optimize-continuous

void run_optimize_continuous(RunContext& ctx) {
    const ScenarioFile& sc = ctx.sc;
    const auto budget = sc.budget();
    const auto arrays = sc.arrays();
    const auto xis = ctx.list("xi_sweep", {0.2, 0.6, 1.0});
    const int seeds = ctx.integer("seeds", 3);
    const int eval_trials = ctx.trials > 0 ? ctx.trials : 100;

    optimize::AoConfig ao;
    ao.trials = ctx.integer("ao_trials", 20);
    ao.max_outer_iters = ctx.integer("ao_iters", 6);

    struct Scheme {
        const char* name;
        bool positions;
        bool rotations;
    };
    const std::vector<Scheme> schemes{{"6dma", true, true},
                                      {"rotation_only", false, true},
                                      {"position_only", true, false},
                                      {"fpa", false, false}};

    CsvWriter rates(ctx.out_path("rates.csv"),
                    {"xi", "scheme", "seed", "rate_bits_per_hz", "std_error"});
    CsvWriter trace(ctx.out_path("trace.csv"), {"xi", "scheme", "seed", "iteration", "objective",
                                                "feasible"});
    std::vector<channel::SurfacePose> last_poses;
    for (double xi : xis) {
        for (const auto& scheme : schemes) {
            for (int s = 0; s < seeds; ++s) {
                metrics::ScenarioDistribution dist = sc.users;
                dist.non_hotspot_ratio = xi;
                dist.seed = Rng(ctx.seed).fork(static_cast<std::uint64_t>(s)).bits();

                std::vector<channel::SurfacePose> poses = scenario::fpa_poses(sc);
                std::vector<double> objective_trace;
                std::vector<int> feasible_trace;
                if (scheme.positions || scheme.rotations) {
                    optimize::AoConfig cfg = ao;
                    cfg.optimize_positions = scheme.positions;
                    cfg.optimize_rotations = scheme.rotations;
                    const auto res = optimize::ao_optimize(poses, arrays, sc.pattern, dist, sc.region,
                                                           sc.constraints, cfg, budget);
                    poses = res.poses;
                    objective_trace = res.trace;
                    feasible_trace = res.feasible;
                }
                for (std::size_t i = 0; i < objective_trace.size(); ++i) {
                    trace.row(std::vector<std::string>{
                        CsvWriter::fmt(xi), scheme.name, std::to_string(s), std::to_string(i),
                        CsvWriter::fmt(objective_trace[i]), feasible_trace[i] ? "1" : "0"});
                }

                metrics::ScenarioDistribution eval = dist;
                eval.seed = Rng(dist.seed).fork(0xe7a1).bits();
                const auto est = metrics::monte_carlo_avg_capacity(poses, arrays, sc.pattern, eval,
                                                                   eval_trials, budget);
                rates.row(std::vector<std::string>{CsvWriter::fmt(xi), scheme.name, std::to_string(s),
                                                   CsvWriter::fmt(est.mean),
                                                   CsvWriter::fmt(est.std_error)});
                last_poses = poses;
            }
        }
    }
    write_poses_csv(ctx.out_path("poses.csv"), last_poses);
}

// ------------------------------------------------------ optimize-discrete

void run_optimize_discrete(RunContext& ctx) {
    const ScenarioFile& sc = ctx.sc;
    const auto arrays = sc.arrays();
    const auto array = sc.array();
    const auto powers = ctx.list("power_sweep_dbm", {watts_to_dbm(sc.tx_power)});
    const int seeds = ctx.integer("seeds", 3);
    const int eval_trials = ctx.trials > 0 ? ctx.trials : 100;
    const int m = ctx.integer("grid_m", sc.grid_positions);
    const int ld = ctx.integer("grid_ld", sc.grid_rotations);
    const int csm_budget = ctx.integer("csm_budget", 300);

    const auto grid = scenario::build_discrete_grid(sc, m, ld);

    CsvWriter rates(ctx.out_path("rates.csv"),
                    {"p_dbm", "method", "seed", "rate_bits_per_hz", "std_error"});
    for (double p_dbm : powers) {
        const channel::LinkBudget budget(sc.wavelength, std::pow(10.0, (p_dbm - 30.0) / 10.0),
                                         sc.noise_power);
        for (int s = 0; s < seeds; ++s) {
            metrics::ScenarioDistribution dist = sc.users;
            dist.seed = Rng(ctx.seed).fork(static_cast<std::uint64_t>(s)).bits();

            optimize::DiscreteConfig cfg;
            cfg.trials = ctx.integer("offline_trials", 30);
            cfg.pg_iters = ctx.integer("pg_iters", 30);
            const auto offline = optimize::discrete_offline(grid, array, sc.pattern, dist,
                                                            sc.constraints, sc.num_surfaces, cfg, budget);

            metrics::ScenarioDistribution eval = dist;
            eval.seed = Rng(dist.seed).fork(0xe7a1).bits();
            const auto poses_off = optimize::assignment_poses(grid, offline.assignment);
            const auto est_off =
                metrics::monte_carlo_avg_capacity(poses_off, arrays, sc.pattern, eval, eval_trials, budget);
            rates.row(std::vector<std::string>{CsvWriter::fmt(p_dbm), "offline", std::to_string(s),
                                               CsvWriter::fmt(est_off.mean),
                                               CsvWriter::fmt(est_off.std_error)});

            // Online CSM consumes realized rates only: every sample draws a
            // fresh realization and measures the achieved rate.
            metrics::ScenarioDistribution online = dist;
            online.seed = Rng(dist.seed).fork(0x0a11).bits();
            int sample_counter = 0;
            auto sampler = [&](const optimize::DiscreteAssignment& a) {
                const auto poses = optimize::assignment_poses(grid, a);
                const auto users = online.draw_users(static_cast<std::uint64_t>(sample_counter++));
                return metrics::instantaneous_capacity(
                    channel::assemble_channel_matrix(poses, arrays, sc.pattern, users, budget), budget);
            };
            const auto picked = optimize::csm_online(grid, array, sc.constraints, sc.num_surfaces,
                                                     sampler, csm_budget, dist.seed);
            const auto poses_csm = optimize::assignment_poses(grid, picked);
            const auto est_csm =
                metrics::monte_carlo_avg_capacity(poses_csm, arrays, sc.pattern, eval, eval_trials, budget);
            rates.row(std::vector<std::string>{CsvWriter::fmt(p_dbm), "csm", std::to_string(s),
                                               CsvWriter::fmt(est_csm.mean),
                                               CsvWriter::fmt(est_csm.std_error)});
        }
    }
}

// -------------------------------------------------------------- estimate

struct EstimationTruth {
    std::vector<geometry::Vec3> doa;    // per user, on the reconstruction grid
    Eigen::VectorXd s;                  // per-user multipath average power
    Eigen::MatrixXd p_true;             // M x K
};

EstimationTruth make_truth(const ScenarioFile& sc, const std::vector<channel::SurfacePose>& all_poses,
                           Rng& rng) {
    EstimationTruth t;
    const int k = sc.users.num_users;
    // On-grid user DOAs restricted to the scenario's elevation band so the
    // sampled boresights can actually see them.
    const auto grid = estimate::doa_grid(sc.doa_grid, false);
    const double zlo = std::sin(sc.users.uniform_elevation_min_deg * M_PI / 180.0);
    const double zhi = std::sin(sc.users.uniform_elevation_max_deg * M_PI / 180.0);
    std::vector<geometry::Vec3> band;
    for (const auto& g : grid)
        if (g.z() >= zlo && g.z() <= zhi) band.push_back(g);
    if (band.empty()) band = grid;
    t.s.resize(k);
    for (int u = 0; u < k; ++u) {
        t.doa.push_back(band[rng.uniform_index(band.size())]);
        t.s[u] = rng.uniform(0.5, 2.0);
    }
    const int n = sc.antennas_h * sc.antennas_v;
    t.p_true.resize(static_cast<Eigen::Index>(all_poses.size()), k);
    for (std::size_t m = 0; m < all_poses.size(); ++m)
        for (int u = 0; u < k; ++u) {
            const auto [tl, pl] =
                geometry::local_frame_direction(all_poses[m].rotation, t.doa[static_cast<std::size_t>(u)]);
            t.p_true(static_cast<Eigen::Index>(m), u) =
                n * channel::effective_gain_linear(sc.pattern, tl, pl) * t.s[u];
        }
    return t;
}

// Multipath realization of the statistical power model: the common steering
// phase rides on per-antenna independent path-phase sums (the residual path
// phases are i.i.d. uniform per antenna), so the N-antenna covariance
// average concentrates on g * s.
channel::MatrixXcd realize_pose_channel(const ScenarioFile& sc, const channel::SurfacePose& pose,
                                        const EstimationTruth& truth, Rng& rng,
                                        const channel::LinkBudget& budget) {
    const int n = sc.antennas_h * sc.antennas_v;
    const int k = sc.users.num_users;
    const auto array = sc.array();
    channel::MatrixXcd h(n, k);
    const int paths = std::max(2, sc.users.paths_min);
    for (int u = 0; u < k; ++u) {
        const geometry::Vec3& f = truth.doa[static_cast<std::size_t>(u)];
        const double theta = std::asin(std::clamp(f.z(), -1.0, 1.0));
        const double phi = std::atan2(f.y(), f.x());
        const auto [tl, pl] = geometry::local_frame_direction(pose.rotation, f);
        const double amp = std::sqrt(channel::effective_gain_linear(sc.pattern, tl, pl));
        const auto steer = channel::steering_vector(pose, array, geometry::pointing_vector(theta, phi),
                                                    budget);
        for (int a = 0; a < n; ++a) {
            channel::cdouble path_sum(0.0, 0.0);
            for (int l = 0; l < paths; ++l) {
                const double ph = rng.uniform(0.0, 2.0 * M_PI);
                path_sum += std::sqrt(truth.s[u] / paths) * channel::cdouble(std::cos(ph), std::sin(ph));
            }
            h(a, u) = amp * steer[a] * path_sum;
        }
    }
    return h;
}

void run_estimate(RunContext& ctx) {
    const ScenarioFile& sc = ctx.sc;
    const auto budget = sc.budget();
    const int k = sc.users.num_users;
    const int n = sc.antennas_h * sc.antennas_v;
    const int m_all = sc.grid_positions;
    const int m_bar = sc.sampled_poses;
    const auto snrs = ctx.list("snr_sweep_db", {0.0, 10.0, 20.0});
    const int seeds = ctx.integer("seeds", 3);
    // Coherence blocks observed per sampled pose within the long frame; the
    // covariance sample count is antennas x blocks.
    const int blocks = ctx.integer("pilot_blocks", 8);

    // Candidate pose set: boresights cover the user elevation band.
    const auto grid = scenario::estimation_grid(sc, m_all);
    const auto all_poses = optimize::flatten_grid(grid);
    std::vector<geometry::RotationAngles> all_rot, sampled_rot;
    for (const auto& p : all_poses) all_rot.push_back(p.rotation);
    std::vector<std::size_t> sampled_ids;
    for (int i = 0; i < m_bar; ++i)
        sampled_ids.push_back(static_cast<std::size_t>(i) * all_poses.size() / m_bar);
    for (std::size_t id : sampled_ids) sampled_rot.push_back(all_poses[id].rotation);

    const auto pilots = estimate::PilotConfig{sc.pilot_len, k, ctx.seed}.pilot_matrix();

    CsvWriter stat(ctx.out_path("nmse_stat.csv"), {"snr_db", "seed", "nmse_power"});
    Eigen::MatrixXd last_pbar, last_phat;
    Eigen::MatrixXi last_zbar, last_zhat;
    estimate::ReconstructedStats last_rec;
    EstimationTruth last_truth;

    for (double snr_db : snrs) {
        const double sigma2 = std::pow(10.0, -snr_db / 10.0);
        for (int s = 0; s < seeds; ++s) {
            // Common random numbers across the SNR sweep: the same users and
            // fading realizations, only the noise scale changes.
            Rng rng = Rng(ctx.seed).fork(static_cast<std::uint64_t>(s));
            EstimationTruth truth = make_truth(sc, all_poses, rng);

            // Stage I step 1: per-pose covariance MLE, concurrent over poses.
            Eigen::MatrixXd p_bar(m_bar, k);
            std::vector<Rng> pose_rngs;
            for (int m = 0; m < m_bar; ++m) pose_rngs.push_back(rng.fork(static_cast<std::uint64_t>(m)));
            parallel_for(static_cast<std::size_t>(m_bar), [&](std::size_t m) {
                Rng local = pose_rngs[m];
                Eigen::MatrixXcd y(sc.pilot_len, n * blocks);
                for (int blk = 0; blk < blocks; ++blk) {
                    const auto h =
                        realize_pose_channel(sc, all_poses[sampled_ids[m]], truth, local, budget);
                    y.middleCols(static_cast<Eigen::Index>(blk) * n, n) =
                        estimate::simulate_pilot_rx(h, Eigen::VectorXi::Ones(k), pilots, sigma2, local);
                }
                // The covariance MLE returns per-antenna powers; the power
                // matrix tracks whole-surface power N g s.
                p_bar.row(static_cast<Eigen::Index>(m)) =
                    static_cast<double>(n) * estimate::mle_power_estimate(y, pilots, sigma2).transpose();
            });

            // Stage I step 2: threshold, then reconstruct over all poses.
            const double eps = 1e-2 * p_bar.maxCoeff();
            const auto stats = estimate::threshold_sparsity(p_bar, eps);
            const auto rec = estimate::reconstruct_statistics(stats, sampled_rot, all_rot, sc.pattern,
                                                              n, sc.doa_grid);
            stat.row(std::vector<std::string>{CsvWriter::fmt(snr_db), std::to_string(s),
                                              CsvWriter::fmt(estimate::nmse(rec.p_hat, truth.p_true))});
            last_pbar = p_bar;
            last_zbar = stats.z;
            last_phat = rec.p_hat;
            last_zhat = rec.z_hat;
            last_rec = rec;
            last_truth = truth;
        }
    }

    const std::string meta = "seed=" + std::to_string(ctx.seed) + " grid=" + std::to_string(m_all) +
                             " sampled=" + std::to_string(m_bar) + " doa_grid=" +
                             std::to_string(sc.doa_grid);
    write_matrix_csv(ctx.out_path("stage1_pbar.csv"), last_pbar, "user", meta);
    write_matrix_csv(ctx.out_path("stage1_zbar.csv"), last_zbar.cast<double>(), "user", meta);
    write_matrix_csv(ctx.out_path("stage1_phat.csv"), last_phat, "user", meta);
    write_matrix_csv(ctx.out_path("stage1_zhat.csv"), last_zhat.cast<double>(), "user", meta);
    {
        CsvWriter users(ctx.out_path("stage1_users.csv"), {"user", "s", "fx", "fy", "fz", "valid"});
        users.comment(meta);
        for (int u = 0; u < k; ++u)
            users.row({static_cast<double>(u), last_rec.s[u], last_rec.doa[static_cast<std::size_t>(u)].x(),
                       last_rec.doa[static_cast<std::size_t>(u)].y(),
                       last_rec.doa[static_cast<std::size_t>(u)].z(),
                       last_rec.valid[static_cast<std::size_t>(u)] ? 1.0 : 0.0});
    }

    // Stage II: optimize surface poses from the reconstructed statistics,
    // then Stage III: instantaneous estimation at the optimized poses.
    const double sigma2 = std::pow(10.0, -snrs.back() / 10.0);
    const auto assignment = optimize::select_poses_from_stats(grid, sc.array(), sc.constraints,
                                                              sc.num_surfaces, last_phat, budget);
    const auto chosen = optimize::assignment_poses(grid, assignment);
    write_poses_csv(ctx.out_path("stage2_poses.csv"), chosen);

    const auto pilot_lens = ctx.list("pilot_sweep", {std::max(1.0, k / 2.0), static_cast<double>(k)});
    const int inst_seeds = ctx.integer("inst_seeds", 20);
    CsvWriter inst(ctx.out_path("nmse_inst.csv"), {"pilot_len", "method", "seed", "nmse"});
    for (double lp : pilot_lens) {
        const int l = static_cast<int>(lp);
        const auto x = estimate::PilotConfig{l, k, ctx.seed + 1}.pilot_matrix();
        for (int s = 0; s < inst_seeds; ++s) {
            // Same users as the statistical stage; only the fast-fading
            // channel realizations are fresh.
            Rng rng = Rng(ctx.seed).fork(0x57a6e3).fork(static_cast<std::uint64_t>(s * 1000 + l));
            const EstimationTruth& truth = last_truth;
            double acc_aided = 0.0, acc_plain = 0.0;
            for (std::size_t b = 0; b < chosen.size(); ++b) {
                const int flat = optimize::flat_pose_index(grid, assignment.position[b],
                                                           assignment.rotation[b]);
                const auto h = realize_pose_channel(sc, chosen[b], truth, rng, budget);
                const auto y = estimate::simulate_pilot_rx(h, Eigen::VectorXi::Ones(k), x, sigma2, rng);
                Eigen::VectorXi z_row(k);
                for (int u = 0; u < k; ++u) z_row[u] = last_zhat(flat, u);
                acc_aided += estimate::nmse(estimate::sparsity_aided_ls(y, x, z_row, n), h);
                acc_plain += estimate::nmse(estimate::sparsity_aided_ls(y, x, Eigen::VectorXi::Ones(k), n), h);
            }
            inst.row(std::vector<std::string>{CsvWriter::fmt(lp), "sparsity_aided", std::to_string(s),
                                              CsvWriter::fmt(acc_aided / chosen.size())});
            inst.row(std::vector<std::string>{CsvWriter::fmt(lp), "plain_ls", std::to_string(s),
                                              CsvWriter::fmt(acc_plain / chosen.size())});
        }
    }
}

// ------------------------------------------------------------------ sense

void run_sense(RunContext& ctx) {
    const ScenarioFile& sc = ctx.sc;
    const auto arrays = sc.arrays();
    const int nb = sc.num_surfaces * sc.antennas_h * sc.antennas_v;
    const auto powers = ctx.list("power_sweep_dbm", {watts_to_dbm(sc.tx_power)});
    const int seeds = ctx.integer("seeds", 2);
    const auto target_az = ctx.list("target_az_deg", {20.0, 45.0, 70.0});

    CsvWriter crb_csv(ctx.out_path("crb.csv"), {"p_dbm", "method", "seed", "crb"});
    std::vector<channel::SurfacePose> best_poses;
    channel::LinkBudget last_budget = sc.budget();
    for (double p_dbm : powers) {
        const double p = std::pow(10.0, (p_dbm - 30.0) / 10.0);
        const channel::LinkBudget budget(sc.wavelength, p, sc.noise_power);
        last_budget = budget;
        for (int s = 0; s < seeds; ++s) {
            sensing::SensingScenario scen;
            for (double az : target_az) {
                scen.target_azimuths.push_back(az * M_PI / 180.0);
                scen.target_elevations.push_back(0.0);
                scen.rho.push_back(channel::cdouble(1.0, 0.0));
            }
            scen.frame_len = ctx.integer("frame_len", 32);
            scen.waveform = std::sqrt(p) * sensing::SensingScenario::random_waveform(
                                               nb, 8, ctx.seed + static_cast<std::uint64_t>(s));

            optimize::PsoConfig pso;
            pso.swarm = ctx.integer("pso_swarm", 24);
            pso.iters = ctx.integer("pso_iters", 30);
            pso.seed = Rng(ctx.seed).fork(static_cast<std::uint64_t>(s)).bits();
            std::vector<std::vector<channel::SurfacePose>> inits{radial_init(sc)};
            const auto res = sensing::optimize_crb_poses(scen, arrays, sc.pattern, sc.region,
                                                         sc.constraints, pso, budget, inits);
            crb_csv.row(std::vector<std::string>{CsvWriter::fmt(p_dbm), "optimized", std::to_string(s),
                                                 CsvWriter::fmt(res.crb)});
            const double base = sensing::crb_doa(inits[0], arrays, sc.pattern, scen, budget);
            crb_csv.row(std::vector<std::string>{CsvWriter::fmt(p_dbm), "radial_baseline",
                                                 std::to_string(s), CsvWriter::fmt(base)});
            best_poses = res.poses;
        }
    }

    // Beampattern of the final pose set: array response power vs azimuth.
    CsvWriter beam(ctx.out_path("beampattern.csv"), {"azimuth_deg", "gain"});
    for (int i = 0; i <= 360; ++i) {
        const double az = -M_PI + i * 2.0 * M_PI / 360.0;
        const auto h = sensing::target_channel(best_poses, arrays, sc.pattern, 0.0, az, last_budget);
        beam.row({az * 180.0 / M_PI, h.squaredNorm()});
    }
    write_poses_csv(ctx.out_path("poses.csv"), best_poses);
}

// ------------------------------------------------------------------- isac

void run_isac(RunContext& ctx) {
    const ScenarioFile& sc = ctx.sc;
    const auto omegas = ctx.list("omega_sweep", {0.0, 0.25, 0.5, 0.75, 1.0});

    sensing::RotatableIsacConfig cfg;
    cfg.m_t = ctx.integer("m_t", 16);
    cfg.m_r = ctx.integer("m_r", 16);
    cfg.snapshots = ctx.integer("snapshots", 64);
    cfg.snr = std::pow(10.0, ctx.num("snr_db", 0.0) / 10.0);
    cfg.target_ref_angle = ctx.num("target_angle_deg", 25.0) * M_PI / 180.0;
    cfg.p_max = sc.p_max;
    cfg.gamma_min = ctx.num("gamma_min_deg", -60.0) * M_PI / 180.0;
    cfg.gamma_max = ctx.num("gamma_max_deg", 60.0) * M_PI / 180.0;
    cfg.grid_points = ctx.integer("rotation_grid", 2001);
    cfg.budget = sc.budget();

    // Users drawn once from the scenario distribution; their azimuths become
    // the 1D reference angles.
    metrics::ScenarioDistribution dist = sc.users;
    dist.seed = ctx.seed;
    const auto users = dist.draw_users(0);
    const int k = std::min<int>(4, static_cast<int>(users.size()));
    for (int u = 0; u < k; ++u) {
        std::vector<channel::RotatablePath> paths;
        for (const auto& pc : users[static_cast<std::size_t>(u)].paths)
            paths.push_back({pc.gain, std::clamp(pc.phi / 2.0, -M_PI / 2 + 0.05, M_PI / 2 - 0.05)});
        cfg.user_paths.push_back(paths);
    }

    CsvWriter out(ctx.out_path("tradeoff.csv"),
                  {"omega1", "gamma_deg", "f_c", "f_s", "objective", "sensing_angle_discrepancy"});
    for (double w1 : omegas) {
        cfg.omega1 = w1;
        cfg.omega2 = 1.0 - w1;
        const auto res = sensing::ora_solve(cfg);
        out.row({w1, res.gamma * 180.0 / M_PI, res.f_c, res.f_s, res.objective,
                 res.sensing_angle_discrepancy ? 1.0 : 0.0});
    }
}

// --------------------------------------------------------------- pathplan

void run_pathplan(RunContext& ctx) {
    const ScenarioFile& sc = ctx.sc;
    const auto initial_poses = scenario::fpa_poses(sc);
    const auto grid = scenario::build_discrete_grid(sc, sc.num_surfaces, 1);
    std::vector<geometry::Vec3> initial, destinations;
    for (const auto& p : initial_poses) initial.push_back(p.position);
    for (const auto& q : grid.positions) destinations.push_back(q);

    const auto plan = pathplan::greedy_match(initial, destinations);
    CsvWriter out(ctx.out_path("plan.csv"),
                  {"antenna", "from_x_m", "from_y_m", "from_z_m", "to_index", "to_x_m", "to_y_m",
                   "to_z_m", "distance_m"});
    for (std::size_t n = 0; n < initial.size(); ++n) {
        const auto& to = destinations[static_cast<std::size_t>(plan.assignment[n])];
        out.row({static_cast<double>(n), initial[n].x(), initial[n].y(), initial[n].z(),
                 static_cast<double>(plan.assignment[n]), to.x(), to.y(), to.z(),
                 plan.per_move_distance[n]});
    }
    CsvWriter sum(ctx.out_path("plan_summary.csv"), {"method", "total_distance_m"});
    sum.row(std::vector<std::string>{"greedy", CsvWriter::fmt(plan.total_distance)});
    if (initial.size() <= 9) {
        const auto brute = pathplan::brute_force_match(initial, destinations);
        sum.row(std::vector<std::string>{"brute_force", CsvWriter::fmt(brute.total_distance)});
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"6DMA surface-pose simulation, optimization and estimation toolkit"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = "out";
    std::uint64_t seed_flag = 0;
    bool seed_given = false;
    int trials = 0;
    std::vector<std::string> set_values;

    app.add_option("--scenario", scenario_path, "scenario file (json)")->required();
    app.add_option("--seed", seed_flag, "master seed override")->each([&](const std::string&) {
        seed_given = true;
    });
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--trials", trials, "trial-count override");
    app.add_option("--set", set_values, "key=value override (repeatable)");

    const std::vector<std::pair<std::string, void (*)(RunContext&)>> commands{
        {"validate", nullptr},
        {"simulate", run_simulate},
        {"optimize-continuous", run_optimize_continuous},
        {"optimize-discrete", run_optimize_discrete},
        {"estimate", run_estimate},
        {"sense", run_sense},
        {"isac", run_isac},
        {"pathplan", run_pathplan},
    };
    for (const auto& [name, fn] : commands) app.add_subcommand(name)->fallthrough();

    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    if (sub == "validate") {
        const auto report = scenario::validate_scenario(scenario_path);
        for (const auto& line : report.lines) std::printf("%s\n", line.c_str());
        return report.ok ? 0 : 2;
    }

    RunContext ctx;
    try {
        ctx.sc = scenario::load_scenario(scenario_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    }

    ctx.seed = seed_given ? seed_flag : ctx.sc.master_seed;
    ctx.trials = trials;
    ctx.out_dir = out_dir;
    for (const auto& kv : set_values) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "validation error: --set expects key=value, got '%s'\n", kv.c_str());
            return 2;
        }
        ctx.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
        // The worker-thread count cannot change any output byte, so it is an
        // execution knob rather than a recorded configuration override.
        if (kv.substr(0, eq) != "threads") ctx.override_list.push_back(kv);
    }
    if (seed_given) ctx.override_list.push_back("seed=" + std::to_string(seed_flag));
    if (trials > 0) ctx.override_list.push_back("trials=" + std::to_string(trials));
    if (ctx.has("threads")) set_num_threads(ctx.integer("threads", 0));
    if (ctx.has("xi")) ctx.sc.users.non_hotspot_ratio = ctx.num("xi", ctx.sc.users.non_hotspot_ratio);
    if (ctx.has("users")) ctx.sc.users.num_users = ctx.integer("users", ctx.sc.users.num_users);

    try {
        ctx.sc.users.validate();
        fs::create_directories(ctx.out_dir);
        for (const auto& [name, fn] : commands)
            if (name == sub && fn) fn(ctx);
        ctx.finish(sub);
    } catch (const std::invalid_argument& e) {
        for (const auto& f : ctx.outputs) fs::remove(f);
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        for (const auto& f : ctx.outputs) fs::remove(f);
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 3;
    }
    return 0;
}
