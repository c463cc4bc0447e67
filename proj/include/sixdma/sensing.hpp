#ifndef SIXDMA_SENSING_HPP
#define SIXDMA_SENSING_HPP

#include <complex>
#include <vector>

#include "sixdma/optimize.hpp"

namespace sixdma::sensing {

using channel::AntennaPattern;
using channel::cdouble;
using channel::LinkBudget;
using channel::LocalArray;
using channel::MatrixXcd;
using channel::RotatablePath;
using channel::SurfacePose;
using channel::VectorXcd;
using Eigen::VectorXd;
using geometry::ConstraintConfig;
using geometry::SiteRegion;

// Typical targets: one per subregion center, with a per-target reflection
// coefficient, a sensing frame length and the transmitted sensing signal.
struct SensingScenario {
    std::vector<double> target_azimuths;   // radians
    std::vector<double> target_elevations; // radians, aligned with azimuths
    std::vector<cdouble> rho;              // |rho_k| > 0
    int frame_len = 64;
    MatrixXcd waveform; // NB x L_x sensing signal

    void validate(Eigen::Index expected_rows) const;
    static MatrixXcd random_waveform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);
};

// Unit-gain single-path channel stacked over all surfaces, and its analytic
// derivative with respect to the target azimuth (chain rule through the
// pointing vector, the steering phases and the directive gain).
VectorXcd target_channel(const std::vector<SurfacePose>& poses, const std::vector<LocalArray>& arrays,
                         const AntennaPattern& pattern, double theta, double phi,
                         const LinkBudget& budget);
VectorXcd target_channel_derivative(const std::vector<SurfacePose>& poses,
                                    const std::vector<LocalArray>& arrays,
                                    const AntennaPattern& pattern, double theta, double phi,
                                    const LinkBudget& budget);

// DOA estimation bound summed over targets; throws when some target's
// channel derivative vanishes (unobservable geometry).
double crb_doa(const std::vector<SurfacePose>& poses, const std::vector<LocalArray>& arrays,
               const AntennaPattern& pattern, const SensingScenario& scenario,
               const LinkBudget& budget);

struct CrbPoseResult {
    std::vector<SurfacePose> poses;
    double crb;
};

// Pose optimization for sensing: particle swarm over the stacked pose vector
// with the geometry feasibility filter.
CrbPoseResult optimize_crb_poses(const SensingScenario& scenario, const std::vector<LocalArray>& arrays,
                                 const AntennaPattern& pattern, const SiteRegion& region,
                                 const ConstraintConfig& constraints, const optimize::PsoConfig& pso,
                                 const LinkBudget& budget,
                                 const std::vector<std::vector<SurfacePose>>& initial_guesses = {},
                                 Exec exec = default_exec());

std::vector<SurfacePose> unpack_pose_vector(const VectorXd& x, std::size_t num_surfaces);
VectorXd pack_pose_vector(const std::vector<SurfacePose>& poses);

// 1D-rotation ISAC configuration: transmit/receive array sizes, snapshots,
// SNR, the target reference angle, per-user path sets and the trade-off
// weights with the rotation bounds.
struct RotatableIsacConfig {
    int m_t = 16;
    int m_r = 16;
    int snapshots = 64;
    double snr = 1.0;    // linear
    double spacing = 0.5; // element spacing in wavelengths
    double target_ref_angle = 0.0;
    std::vector<std::vector<RotatablePath>> user_paths;
    double omega1 = 0.5;
    double omega2 = 0.5;
    double p_max = 1.0;
    double gamma_min = -M_PI / 3.0;
    double gamma_max = M_PI / 3.0;
    int grid_points = 10001;
    LinkBudget budget{0.1, 1.0, 1.0};

    void validate() const;
};

// Constant chi of the rotatable-array CRB.
double rotatable_chi(const RotatableIsacConfig& cfg);

// Sensing metric cos^2(g~) a^H W a for a transmit covariance W.
double rotatable_fs(double gamma, const MatrixXcd& w_cov, const RotatableIsacConfig& cfg);

// CRB = chi / f_s; +infinity at effective angle +-pi/2.
double rotatable_crb(double gamma, const MatrixXcd& w_cov, const RotatableIsacConfig& cfg);

// Ratio of rotated to fixed two-path steering correlation. Requires a single
// user with exactly two paths.
double rotation_gain(double gamma, const RotatableIsacConfig& cfg);

struct RotationGainResult {
    double gamma_star = 0.0;
    double value = 1.0;
    bool degenerate = false; // coincident path angles: gain identically 1
};

// Closed-form maximum rotation gain with the candidate angles n*pi/2 - zeta2.
RotationGainResult max_rotation_gain(const RotatableIsacConfig& cfg);

struct OraResult {
    std::vector<VectorXcd> user_beams;
    VectorXcd sensing_beam;
    double gamma = 0.0;
    double f_c = 0.0;
    double f_s = 0.0;
    double objective = 0.0;
    bool sensing_angle_discrepancy = false;
    std::vector<double> trace; // objective per alternation round, non-decreasing
};

// Weighted communication/sensing maximization over the rotation grid and the
// structured beamforming candidate set (MRT, ZF, sensing beam, power splits).
OraResult ora_solve(const RotatableIsacConfig& cfg);

} // namespace sixdma::sensing

#endif
