#ifndef SIXDMA_METRICS_HPP
#define SIXDMA_METRICS_HPP

#include <functional>
#include <vector>

#include "sixdma/channel.hpp"
#include "sixdma/parallel.hpp"
#include "sixdma/rng.hpp"

namespace sixdma::metrics {

using channel::AntennaPattern;
using channel::LinkBudget;
using channel::LocalArray;
using channel::MatrixXcd;
using channel::MatrixXd;
using channel::SurfacePose;
using channel::UserChannelSpec;
using channel::VectorXcd;
using geometry::Vec3;

// Angular user hotspot: mean direction plus an angular std deviation.
struct Hotspot {
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
    double radius_deg = 10.0;
    double weight = 1.0;
};

// Random scenario generator: each user is either a hotspot member or a
// non-hotspot user drawn uniformly over the configured angular band.
// Channels are multipath clusters centered on the user direction.
struct ScenarioDistribution {
    int num_users = 8;
    std::vector<Hotspot> hotspots;
    double non_hotspot_ratio = 0.6; // xi in [0,1]
    double uniform_elevation_min_deg = -30.0;
    double uniform_elevation_max_deg = 30.0;
    int paths_min = 1;
    int paths_max = 4;
    double path_spread_deg = 5.0;
    double user_power = 1.0; // total average path power per user
    std::uint64_t seed = 0;

    void validate() const;

    // Users for one Monte Carlo trial; substream (seed, trial) makes results
    // independent of evaluation order.
    std::vector<UserChannelSpec> draw_users(std::uint64_t trial) const;

    // Same user geometry for every trial, fresh complex gains only.
    std::vector<UserChannelSpec> draw_users_frozen_geometry(std::uint64_t trial) const;
};

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int trials = 0;
};

// log2 det(I + (p/sigma^2) H H^H), evaluated on the smaller Gram side via a
// Cholesky factorization in the log domain.
double instantaneous_capacity(const MatrixXcd& h, const LinkBudget& budget);

// Mean and standard error of instantaneous capacity over seeded realizations
// drawn from `sampler(trial)`. Deterministic for a fixed seed and any thread
// count: per-trial slots plus a fixed pairwise reduction tree.
MonteCarloEstimate monte_carlo_avg_capacity(const std::function<MatrixXcd(std::uint64_t)>& sampler,
                                            int trials, const LinkBudget& budget,
                                            Exec exec = default_exec());

MonteCarloEstimate monte_carlo_avg_capacity(const std::vector<SurfacePose>& poses,
                                            const std::vector<LocalArray>& arrays,
                                            const AntennaPattern& pattern,
                                            const ScenarioDistribution& scenario, int trials,
                                            const LinkBudget& budget, Exec exec = default_exec());

// Linear-precoding beams with a total power cap.
struct BeamformingSet {
    std::vector<VectorXcd> beams;
    double p_max = 1.0;

    BeamformingSet() = default;
    BeamformingSet(std::vector<VectorXcd> w, double cap);
};

double sum_rate_beamforming(const MatrixXcd& h, const BeamformingSet& w, const LinkBudget& budget);

// Statistical upper bound from the B x K average power matrix.
double capacity_upper_bound(const MatrixXd& power_matrix, const LinkBudget& budget);

} // namespace sixdma::metrics

#endif
