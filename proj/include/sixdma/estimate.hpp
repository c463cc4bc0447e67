#ifndef SIXDMA_ESTIMATE_HPP
#define SIXDMA_ESTIMATE_HPP

#include <optional>
#include <vector>

#include "sixdma/channel.hpp"
#include "sixdma/parallel.hpp"
#include "sixdma/rng.hpp"

namespace sixdma::estimate {

using channel::AntennaPattern;
using channel::LinkBudget;
using channel::MatrixXcd;
using channel::MatrixXd;
using channel::MatrixXi;
using channel::RotationAngles;
using channel::VectorXcd;
using Eigen::VectorXd;
using geometry::Vec3;

// Pilot block: L x K i.i.d. unit-variance complex Gaussian entries, drawn
// once from the seed and frozen for the whole experiment.
struct PilotConfig {
    int pilot_len = 16;
    int num_users = 4;
    std::uint64_t seed = 0;

    MatrixXcd pilot_matrix() const;
};

// Per-pose per-user average powers with the sparsity indicator derived from
// a strict threshold.
struct SparsityStats {
    MatrixXi z;   // M x K binary
    MatrixXd p;   // M x K nonnegative
    double threshold = 0.0;
};

// Per-user multipath power and DOA recovered on a direction grid, plus the
// powers extrapolated to every candidate pose.
struct ReconstructedStats {
    VectorXd s;                    // K
    std::vector<Vec3> doa;         // K unit vectors
    std::vector<bool> valid;       // false when the user's support was empty
    MatrixXd p_hat;                // M x K
    MatrixXi z_hat;                // M x K
    int grid_size = 0;
};

// Received pilot block at one candidate pose: Y = X diag(z) H^T + noise.
MatrixXcd simulate_pilot_rx(const MatrixXcd& pose_channel, const Eigen::VectorXi& z_row,
                            const MatrixXcd& pilots, double sigma2, Rng& rng);

// Covariance-fitting MLE of the per-user receive powers by cyclic coordinate
// descent with the closed-form single-coordinate minimizer, clamped at zero.
// The objective ln det(Sigma) + tr(Sigma^{-1} Shat) never increases across an
// update; `objective_trace` (when given) records it after every update.
VectorXd mle_power_estimate(const MatrixXcd& y, const MatrixXcd& pilots, double sigma2,
                            double tol = 1e-8, int max_passes = 200,
                            std::vector<double>* objective_trace = nullptr);

// Current value of the covariance-fit objective for a given power vector.
double mle_objective(const VectorXd& eta, const MatrixXcd& y, const MatrixXcd& pilots, double sigma2);

SparsityStats threshold_sparsity(const MatrixXd& p_bar, double eps);

// Quasi-uniform direction grid (Fibonacci sphere); optionally restricted to
// the upper hemisphere.
std::vector<Vec3> doa_grid(int g, bool upper_hemisphere_only);

// Candidate DOAs for reconstruction: Fibonacci grid restricted to the z-band
// the sampled boresights cover, with a half-ring margin. Directions outside
// every sampled main lobe are unidentifiable and only feed impostor fits.
std::vector<Vec3> candidate_doa_grid(int g, const std::vector<RotationAngles>& sampled_rotations,
                                     const Vec3& local_boresight = Vec3(1.0, 0.0, 0.0));

// Fits the 1-sparse power model per user on the direction grid and
// extrapolates powers and sparsity over all candidate rotations.
ReconstructedStats reconstruct_statistics(const SparsityStats& stats,
                                          const std::vector<RotationAngles>& sampled_rotations,
                                          const std::vector<RotationAngles>& all_rotations,
                                          const AntennaPattern& pattern, int antennas_per_surface,
                                          int grid_size, Exec exec = default_exec());

// Support-restricted least squares per antenna; complement entries are
// exactly zero. Returns the N x K channel estimate (minimum-norm solution
// when the restricted system is rank deficient).
MatrixXcd sparsity_aided_ls(const MatrixXcd& y, const MatrixXcd& pilots,
                            const Eigen::VectorXi& z_row, int antennas);

// Indices of the user-major vectorization selected by a sparsity row.
std::vector<int> support_indices(const Eigen::VectorXi& z_row, int antennas);

double nmse(const MatrixXcd& estimate, const MatrixXcd& truth);
double nmse(const MatrixXd& estimate, const MatrixXd& truth);

} // namespace sixdma::estimate

#endif
