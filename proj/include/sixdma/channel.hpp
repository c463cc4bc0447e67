#ifndef SIXDMA_CHANNEL_HPP
#define SIXDMA_CHANNEL_HPP

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "sixdma/geometry.hpp"

namespace sixdma::channel {

using geometry::LocalArray;
using geometry::RotationAngles;
using geometry::SurfacePose;
using geometry::Vec3;
using cdouble = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXcd;

// One propagation path: complex gain (|gain|^2 is the average path power,
// arg is the path phase) and global arrival direction.
struct PathComponent {
    cdouble gain{1.0, 0.0};
    double theta = 0.0; // elevation, [-pi/2, pi/2]
    double phi = 0.0;   // azimuth, [-pi, pi]
};

struct UserChannelSpec {
    std::vector<PathComponent> paths;

    UserChannelSpec() = default;
    explicit UserChannelSpec(std::vector<PathComponent> p);
};

// Element gain model: isotropic or the sector parameterization with maximum
// gain, 3 dB beamwidths and side/vertical limits in dB.
struct AntennaPattern {
    enum class Kind { Isotropic, Directive } kind = Kind::Isotropic;
    double g_max_dbi = 8.0;
    double theta_3db_deg = 25.0;
    double phi_3db_deg = 25.0;
    double g_s_db = 25.0;
    double g_v_db = 25.0;

    static AntennaPattern isotropic() { return {}; }
    static AntennaPattern directive(double g_max = 8.0, double th3 = 25.0, double ph3 = 25.0,
                                    double gs = 25.0, double gv = 25.0);
};

// Carrier and power bookkeeping shared by every synthesis routine.
struct LinkBudget {
    double wavelength = 0.1; // meters
    double tx_power = 1.0;   // watts per user
    double noise_power = 1.0;

    LinkBudget() = default;
    LinkBudget(double lambda, double p, double sigma2);
    double snr() const { return tx_power / noise_power; }
};

// Dual-polarized element axes (fixed) plus the user's local-frame rotation.
struct PolarizationFrame {
    RotationAngles user_rotation;
    static Vec3 e_v() { return {0.0, 1.0, 0.0}; }
    static Vec3 e_h() { return {1.0, 0.0, 0.0}; }
};

double effective_gain_dbi(const AntennaPattern& pattern, double theta_local, double phi_local);
double effective_gain_linear(const AntennaPattern& pattern, double theta_local, double phi_local);

// Derivative of the linear gain with respect to (theta_local, phi_local);
// piecewise smooth, zero inside the clamped regions.
std::pair<double, double> effective_gain_linear_gradient(const AntennaPattern& pattern,
                                                         double theta_local, double phi_local);

// Per-antenna phase profile exp(-j 2pi/lambda f.r_n); all entries unit modulus.
VectorXcd steering_vector(const SurfacePose& pose, const LocalArray& array, const Vec3& f,
                          const LinkBudget& budget);

// Multipath surface channel: sum_l gain_l sqrt(g_l) a_l.
VectorXcd surface_channel(const SurfacePose& pose, const LocalArray& array,
                          const AntennaPattern& pattern, const UserChannelSpec& user,
                          const LinkBudget& budget);

// Stacked multiple-access channel, surface-major rows (rows N(b-1)+1..Nb are
// surface b), one column per user. All surfaces must have equal N.
MatrixXcd assemble_channel_matrix(const std::vector<SurfacePose>& poses,
                                  const std::vector<LocalArray>& arrays,
                                  const AntennaPattern& pattern,
                                  const std::vector<UserChannelSpec>& users,
                                  const LinkBudget& budget);

// Single-antenna-per-surface channel over B candidate positions.
VectorXcd positionable_channel(const std::vector<Vec3>& antenna_positions,
                               const UserChannelSpec& user, const LinkBudget& budget);

// Path description for the 1D-rotation model: complex gain and reference
// spatial angle.
struct RotatablePath {
    cdouble gain{1.0, 0.0};
    double ref_angle = 0.0;
};

// Centered half-wavelength ULA steering at the effective angle ref + gamma.
VectorXcd rotatable_steering_1d(double effective_angle, int num_antennas, const LinkBudget& budget);

VectorXcd rotatable_channel_1d(double gamma, const std::vector<RotatablePath>& paths,
                               int num_antennas, const LinkBudget& budget);

// 2x2 dual-polarized response: receive projection times transmit projection.
Eigen::Matrix2cd polarization_response(const RotationAngles& u_b, const RotationAngles& u_k_r,
                                       double theta_k, double phi_k);

// LoS polarized channel, the Kronecker product of the single-path channel
// with the 2x2 response matrix. Multi-path specs are rejected.
MatrixXcd polarized_channel(const SurfacePose& pose, const LocalArray& array,
                            const AntennaPattern& pattern, const UserChannelSpec& los_user,
                            const PolarizationFrame& frame, const LinkBudget& budget);

// Binary M x K indicator: pose m serves user k iff the best per-path element
// gain at pose m exceeds the linear threshold.
MatrixXi directional_sparsity(const AntennaPattern& pattern, const std::vector<SurfacePose>& poses,
                              const std::vector<LocalArray>& arrays,
                              const std::vector<UserChannelSpec>& users,
                              double gain_threshold_linear);

// Expected per-surface received power, B x K: N * sum_l |gain_l|^2 g_l(u_b).
MatrixXd average_power_matrix(const std::vector<SurfacePose>& poses,
                              const std::vector<LocalArray>& arrays, const AntennaPattern& pattern,
                              const std::vector<UserChannelSpec>& users, const LinkBudget& budget);

// ChannelMatrix serialization: interleaved re/im columns, surface-major rows.
void write_channel_csv(const std::string& path, const MatrixXcd& h);
MatrixXcd read_channel_csv(const std::string& path);

} // namespace sixdma::channel

#endif
