#include "sixdma/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "sixdma/csv.hpp"

namespace sixdma::channel {

namespace {
constexpr double kDegPerRad = 180.0 / M_PI;
}

UserChannelSpec::UserChannelSpec(std::vector<PathComponent> p) : paths(std::move(p)) {
    if (paths.empty()) throw std::invalid_argument("UserChannelSpec: needs >= 1 path");
    for (const auto& pc : paths) {
        if (!std::isfinite(std::abs(pc.gain)))
            throw std::invalid_argument("UserChannelSpec: path gain must be finite");
        if (pc.theta < -M_PI_2 - 1e-12 || pc.theta > M_PI_2 + 1e-12 || pc.phi < -M_PI - 1e-12 ||
            pc.phi > M_PI + 1e-12)
            throw std::invalid_argument("UserChannelSpec: path angles out of range");
    }
}

AntennaPattern AntennaPattern::directive(double g_max, double th3, double ph3, double gs, double gv) {
    if (!(th3 > 0.0 && ph3 > 0.0 && gs > 0.0 && gv > 0.0))
        throw std::invalid_argument("AntennaPattern: directive constants must be positive");
    AntennaPattern p;
    p.kind = Kind::Directive;
    p.g_max_dbi = g_max;
    p.theta_3db_deg = th3;
    p.phi_3db_deg = ph3;
    p.g_s_db = gs;
    p.g_v_db = gv;
    return p;
}

LinkBudget::LinkBudget(double lambda, double p, double sigma2)
    : wavelength(lambda), tx_power(p), noise_power(sigma2) {
    if (!(wavelength > 0.0 && tx_power > 0.0 && noise_power > 0.0))
        throw std::invalid_argument("LinkBudget: all fields must be > 0");
}

double effective_gain_dbi(const AntennaPattern& pattern, double theta_local, double phi_local) {
    if (pattern.kind == AntennaPattern::Kind::Isotropic) return 0.0;
    // The sector formula works in degrees; radians everywhere else.
    const double th = theta_local * kDegPerRad;
    const double ph = phi_local * kDegPerRad;
    const double a_h = -std::min(12.0 * (ph / pattern.phi_3db_deg) * (ph / pattern.phi_3db_deg), pattern.g_s_db);
    const double a_v = -std::min(12.0 * (th / pattern.theta_3db_deg) * (th / pattern.theta_3db_deg), pattern.g_v_db);
    return pattern.g_max_dbi - std::min(-(a_h + a_v), pattern.g_s_db);
}

double effective_gain_linear(const AntennaPattern& pattern, double theta_local, double phi_local) {
    if (pattern.kind == AntennaPattern::Kind::Isotropic) return 1.0;
    return std::pow(10.0, effective_gain_dbi(pattern, theta_local, phi_local) / 10.0);
}

std::pair<double, double> effective_gain_linear_gradient(const AntennaPattern& pattern,
                                                         double theta_local, double phi_local) {
    if (pattern.kind == AntennaPattern::Kind::Isotropic) return {0.0, 0.0};
    const double th = theta_local * kDegPerRad;
    const double ph = phi_local * kDegPerRad;
    const double qh = 12.0 * (ph / pattern.phi_3db_deg) * (ph / pattern.phi_3db_deg);
    const double qv = 12.0 * (th / pattern.theta_3db_deg) * (th / pattern.theta_3db_deg);
    const double ah = std::min(qh, pattern.g_s_db);
    const double av = std::min(qv, pattern.g_v_db);
    // dA/d(angle_deg): zero wherever a min{} clamp is active.
    double dah = (qh < pattern.g_s_db) ? 24.0 * ph / (pattern.phi_3db_deg * pattern.phi_3db_deg) : 0.0;
    double dav = (qv < pattern.g_v_db) ? 24.0 * th / (pattern.theta_3db_deg * pattern.theta_3db_deg) : 0.0;
    if (ah + av >= pattern.g_s_db) { dah = 0.0; dav = 0.0; }
    const double g = effective_gain_linear(pattern, theta_local, phi_local);
    const double scale = g * std::log(10.0) / 10.0 * kDegPerRad;
    return {-scale * dav, -scale * dah};
}

VectorXcd steering_vector(const SurfacePose& pose, const LocalArray& array, const Vec3& f,
                          const LinkBudget& budget) {
    const auto positions = geometry::global_antenna_positions(pose, array);
    const double k = 2.0 * M_PI / budget.wavelength;
    VectorXcd a(static_cast<Eigen::Index>(positions.size()));
    for (Eigen::Index n = 0; n < a.size(); ++n) {
        const double phase = -k * f.dot(positions[static_cast<std::size_t>(n)]);
        a[n] = cdouble(std::cos(phase), std::sin(phase));
    }
    return a;
}

VectorXcd surface_channel(const SurfacePose& pose, const LocalArray& array,
                          const AntennaPattern& pattern, const UserChannelSpec& user,
                          const LinkBudget& budget) {
    VectorXcd h = VectorXcd::Zero(static_cast<Eigen::Index>(array.offsets.size()));
    for (const PathComponent& path : user.paths) {
        const Vec3 f = geometry::pointing_vector(path.theta, path.phi);
        const auto [tl, pl] = geometry::local_frame_direction(pose.rotation, f);
        const double g = effective_gain_linear(pattern, tl, pl);
        h += path.gain * std::sqrt(g) * steering_vector(pose, array, f, budget);
    }
    return h;
}

MatrixXcd assemble_channel_matrix(const std::vector<SurfacePose>& poses,
                                  const std::vector<LocalArray>& arrays,
                                  const AntennaPattern& pattern,
                                  const std::vector<UserChannelSpec>& users,
                                  const LinkBudget& budget) {
    if (poses.size() != arrays.size())
        throw std::invalid_argument("assemble_channel_matrix: poses and arrays must align");
    if (poses.empty() || users.empty())
        throw std::invalid_argument("assemble_channel_matrix: needs >= 1 surface and user");
    const std::size_t n = arrays.front().offsets.size();
    for (const auto& a : arrays)
        if (a.offsets.size() != n)
            throw std::invalid_argument("assemble_channel_matrix: all surfaces must have equal N");
    MatrixXcd h(static_cast<Eigen::Index>(n * poses.size()), static_cast<Eigen::Index>(users.size()));
    for (std::size_t k = 0; k < users.size(); ++k)
        for (std::size_t b = 0; b < poses.size(); ++b)
            h.block(static_cast<Eigen::Index>(b * n), static_cast<Eigen::Index>(k),
                    static_cast<Eigen::Index>(n), 1) =
                surface_channel(poses[b], arrays[b], pattern, users[k], budget);
    return h;
}

VectorXcd positionable_channel(const std::vector<Vec3>& antenna_positions,
                               const UserChannelSpec& user, const LinkBudget& budget) {
    const double k = 2.0 * M_PI / budget.wavelength;
    VectorXcd h = VectorXcd::Zero(static_cast<Eigen::Index>(antenna_positions.size()));
    for (const PathComponent& path : user.paths) {
        const Vec3 f = geometry::pointing_vector(path.theta, path.phi);
        for (Eigen::Index b = 0; b < h.size(); ++b) {
            const double phase = -k * f.dot(antenna_positions[static_cast<std::size_t>(b)]);
            h[b] += path.gain * cdouble(std::cos(phase), std::sin(phase));
        }
    }
    return h;
}

VectorXcd rotatable_steering_1d(double effective_angle, int num_antennas, const LinkBudget& budget) {
    if (num_antennas < 1) throw std::invalid_argument("rotatable_steering_1d: needs >= 1 antenna");
    VectorXcd a(num_antennas);
    const double s = std::sin(effective_angle);
    for (int n = 0; n < num_antennas; ++n) {
        // d_n = (n - (M-1)/2) * lambda/2, so 2pi/lambda * d_n = pi * centered index.
        const double phase = M_PI * (n - 0.5 * (num_antennas - 1)) * s;
        a[n] = cdouble(std::cos(phase), std::sin(phase));
    }
    (void)budget;
    return a;
}

VectorXcd rotatable_channel_1d(double gamma, const std::vector<RotatablePath>& paths,
                               int num_antennas, const LinkBudget& budget) {
    if (paths.empty()) throw std::invalid_argument("rotatable_channel_1d: needs >= 1 path");
    VectorXcd h = VectorXcd::Zero(num_antennas);
    for (const RotatablePath& p : paths)
        h += p.gain * rotatable_steering_1d(p.ref_angle + gamma, num_antennas, budget);
    return h;
}

Eigen::Matrix2cd polarization_response(const RotationAngles& u_b, const RotationAngles& u_k_r,
                                       double theta_k, double phi_k) {
    const double st = std::sin(theta_k), ct = std::cos(theta_k);
    const double sp = std::sin(phi_k), cp = std::cos(phi_k);
    const Vec3 z(st * sp, -ct, st * cp);
    const Vec3 zbar(cp, 0.0, -sp);
    const geometry::Mat3 rb = geometry::rotation_matrix(u_b);
    const geometry::Mat3 rr = geometry::rotation_matrix(u_k_r);
    const Vec3 bv = rb * PolarizationFrame::e_v();
    const Vec3 bh = rb * PolarizationFrame::e_h();
    const Vec3 uv = rr * PolarizationFrame::e_v();
    const Vec3 uh = rr * PolarizationFrame::e_h();
    Eigen::Matrix2d p, q;
    p << bv.dot(z), bh.dot(z), bv.dot(zbar), bh.dot(zbar);
    q << z.dot(uv), zbar.dot(uv), z.dot(uh), zbar.dot(uh);
    return (q * p).cast<cdouble>();
}

MatrixXcd polarized_channel(const SurfacePose& pose, const LocalArray& array,
                            const AntennaPattern& pattern, const UserChannelSpec& los_user,
                            const PolarizationFrame& frame, const LinkBudget& budget) {
    if (los_user.paths.size() != 1)
        throw std::invalid_argument("polarized_channel: model is LoS-only, expected a single path");
    const VectorXcd h_los = surface_channel(pose, array, pattern, los_user, budget);
    const Eigen::Matrix2cd a = polarization_response(pose.rotation, frame.user_rotation,
                                                     los_user.paths[0].theta, los_user.paths[0].phi);
    MatrixXcd out(2 * h_los.size(), 2);
    for (Eigen::Index n = 0; n < h_los.size(); ++n) out.block(2 * n, 0, 2, 2) = h_los[n] * a;
    return out;
}

MatrixXi directional_sparsity(const AntennaPattern& pattern, const std::vector<SurfacePose>& poses,
                              const std::vector<LocalArray>& arrays,
                              const std::vector<UserChannelSpec>& users,
                              double gain_threshold_linear) {
    if (poses.size() != arrays.size())
        throw std::invalid_argument("directional_sparsity: poses and arrays must align");
    if (gain_threshold_linear < 0.0)
        throw std::invalid_argument("directional_sparsity: threshold must be >= 0");
    MatrixXi z(static_cast<Eigen::Index>(poses.size()), static_cast<Eigen::Index>(users.size()));
    for (std::size_t m = 0; m < poses.size(); ++m)
        for (std::size_t k = 0; k < users.size(); ++k) {
            double best = 0.0;
            for (const PathComponent& path : users[k].paths) {
                const Vec3 f = geometry::pointing_vector(path.theta, path.phi);
                const auto [tl, pl] = geometry::local_frame_direction(poses[m].rotation, f);
                best = std::max(best, effective_gain_linear(pattern, tl, pl));
            }
            z(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) =
                best > gain_threshold_linear ? 1 : 0;
        }
    return z;
}

MatrixXd average_power_matrix(const std::vector<SurfacePose>& poses,
                              const std::vector<LocalArray>& arrays, const AntennaPattern& pattern,
                              const std::vector<UserChannelSpec>& users, const LinkBudget& budget) {
    (void)budget;
    if (poses.size() != arrays.size())
        throw std::invalid_argument("average_power_matrix: poses and arrays must align");
    MatrixXd p(static_cast<Eigen::Index>(poses.size()), static_cast<Eigen::Index>(users.size()));
    for (std::size_t b = 0; b < poses.size(); ++b) {
        const double n = static_cast<double>(arrays[b].offsets.size());
        for (std::size_t k = 0; k < users.size(); ++k) {
            double acc = 0.0;
            for (const PathComponent& path : users[k].paths) {
                const Vec3 f = geometry::pointing_vector(path.theta, path.phi);
                const auto [tl, pl] = geometry::local_frame_direction(poses[b].rotation, f);
                acc += std::norm(path.gain) * effective_gain_linear(pattern, tl, pl);
            }
            p(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = n * acc;
        }
    }
    return p;
}

void write_channel_csv(const std::string& path, const MatrixXcd& h) {
    std::vector<std::string> cols;
    for (Eigen::Index k = 0; k < h.cols(); ++k) {
        cols.push_back("user" + std::to_string(k) + "_re");
        cols.push_back("user" + std::to_string(k) + "_im");
    }
    CsvWriter w(path, cols);
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
        std::vector<double> cells;
        cells.reserve(static_cast<std::size_t>(2 * h.cols()));
        for (Eigen::Index k = 0; k < h.cols(); ++k) {
            cells.push_back(h(r, k).real());
            cells.push_back(h(r, k).imag());
        }
        w.row(cells);
    }
}

MatrixXcd read_channel_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    if (t.columns.size() % 2 != 0) throw std::runtime_error("channel csv needs re/im column pairs");
    const Eigen::Index k = static_cast<Eigen::Index>(t.columns.size() / 2);
    MatrixXcd h(static_cast<Eigen::Index>(t.rows.size()), k);
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (Eigen::Index c = 0; c < k; ++c)
            h(static_cast<Eigen::Index>(r), c) = cdouble(std::stod(t.rows[r][2 * c]), std::stod(t.rows[r][2 * c + 1]));
    return h;
}

} // namespace sixdma::channel
