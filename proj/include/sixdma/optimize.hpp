#ifndef SIXDMA_OPTIMIZE_HPP
#define SIXDMA_OPTIMIZE_HPP

#include <functional>
#include <vector>

#include "sixdma/metrics.hpp"

namespace sixdma::optimize {

using channel::AntennaPattern;
using channel::LinkBudget;
using channel::LocalArray;
using channel::MatrixXcd;
using channel::MatrixXd;
using channel::SurfacePose;
using channel::UserChannelSpec;
using Eigen::VectorXd;
using geometry::ConstraintConfig;
using geometry::DiscreteGrid;
using geometry::RotationAngles;
using geometry::SiteRegion;
using geometry::Vec3;
using metrics::ScenarioDistribution;

// Alternating optimization over per-surface position and rotation blocks.
struct AoConfig {
    int max_outer_iters = 20;
    double objective_tol = 1e-4;        // relative improvement stop
    double rotation_trust_radius = 0.1; // radians
    double shrink = 0.5;                // backtracking shrink factor
    int max_backtracks = 20;
    int trials = 100;                   // frozen Monte Carlo realizations
    double position_step = 0.0;         // initial step in meters; 0 = auto
    bool optimize_positions = true;
    bool optimize_rotations = true;
};

struct AoResult {
    std::vector<SurfacePose> poses;
    std::vector<double> trace;     // accepted objective: initial + per outer iteration
    std::vector<int> feasible;     // geometry-checked flag per trace entry
};

// Maximizes the frozen-realization mean capacity subject to the site region,
// minimum-distance, reflection and blockage constraints. Every accepted
// iterate is feasible and the trace never decreases. Infeasible starts are
// rejected with the violated constraint named.
AoResult ao_optimize(std::vector<SurfacePose> initial, const std::vector<LocalArray>& arrays,
                     const AntennaPattern& pattern, const ScenarioDistribution& scenario,
                     const SiteRegion& region, const ConstraintConfig& constraints,
                     const AoConfig& cfg, const LinkBudget& budget, Exec exec = default_exec());

// One-hot position/rotation selection per surface.
struct DiscreteAssignment {
    std::vector<int> position; // m_b per surface
    std::vector<int> rotation; // l_b per surface
};

std::vector<SurfacePose> assignment_poses(const DiscreteGrid& grid, const DiscreteAssignment& a);

// Distinct positions plus the three geometry constraints on realized poses.
bool assignment_feasible(const DiscreteGrid& grid, const DiscreteAssignment& a,
                         const LocalArray& array, const ConstraintConfig& constraints);

struct DiscreteConfig {
    int trials = 40;
    int pg_iters = 40;
    double pg_step = 0.4;
    std::uint64_t seed = 0;
};

struct DiscreteResult {
    DiscreteAssignment assignment;
    double rate; // frozen Monte Carlo mean at the returned assignment
};

// Offline relax-and-quantize: simplex-relaxed indicators driven by projected
// gradient on the frozen Monte Carlo objective, quantized to the nearest
// one-hot choice, greedily repaired to feasibility (largest quantization
// error reassigned first) and finished with one conditional-improvement
// sweep. Throws when no feasible assignment exists.
DiscreteResult discrete_offline(const DiscreteGrid& grid, const LocalArray& array,
                                const AntennaPattern& pattern, const ScenarioDistribution& scenario,
                                const ConstraintConfig& constraints, int num_surfaces,
                                const DiscreteConfig& cfg, const LinkBudget& budget,
                                Exec exec = default_exec());

// Online conditional-sample-mean selection from realized rates only: draws
// random feasible assignments, scores each per-surface option by the mean
// rate of the samples containing it, then picks per-surface argmax options
// (ties to the lowest option index) and repairs to feasibility.
DiscreteAssignment csm_online(const DiscreteGrid& grid, const LocalArray& array,
                              const ConstraintConfig& constraints, int num_surfaces,
                              const std::function<double(const DiscreteAssignment&)>& rate_sampler,
                              int sample_budget, std::uint64_t seed);

// Greedy statistical-CSI pose selection maximizing the per-user power bound;
// used as the protocol's optimization stage when only reconstructed powers
// are available. `pose_power` rows follow the grid flattening order.
DiscreteAssignment select_poses_from_stats(const DiscreteGrid& grid, const LocalArray& array,
                                           const ConstraintConfig& constraints, int num_surfaces,
                                           const MatrixXd& pose_power, const LinkBudget& budget);

// Row index of (position m, rotation l) in the flattened grid ordering.
int flat_pose_index(const DiscreteGrid& grid, int m, int l);
std::vector<SurfacePose> flatten_grid(const DiscreteGrid& grid);

struct PsoConfig {
    int swarm = 24;
    double inertia = 0.72;
    double cognitive = 1.49;
    double social = 1.49;
    int iters = 50;
    std::uint64_t seed = 0;
    VectorXd lower; // box bounds per dimension
    VectorXd upper;
};

struct PsoResult {
    VectorXd best;
    double value;
    std::vector<double> trace; // best-so-far per iteration, non-increasing
};

// Inertia-weight particle swarm; infeasible particles score +infinity, the
// swarm state advances single-threaded between parallel evaluation batches,
// and a fixed seed reproduces the run bit for bit.
PsoResult pso_minimize(const std::function<double(const VectorXd&)>& objective, const PsoConfig& cfg,
                       const std::function<bool(const VectorXd&)>& feasible,
                       const std::vector<VectorXd>& initial_points = {}, Exec exec = default_exec());

} // namespace sixdma::optimize

#endif
