#include "sixdma/sensing.hpp"

#include <cmath>
#include <stdexcept>

#include "sixdma/rng.hpp"

namespace sixdma::sensing {

using geometry::Vec3;

void SensingScenario::validate(Eigen::Index expected_rows) const {
    if (target_azimuths.empty() || target_azimuths.size() != rho.size() ||
        target_elevations.size() != target_azimuths.size())
        throw std::invalid_argument("SensingScenario: targets, elevations and coefficients must align");
    for (const auto& r : rho)
        if (!(std::abs(r) > 0.0)) throw std::invalid_argument("SensingScenario: |rho| must be > 0");
    if (frame_len < 1) throw std::invalid_argument("SensingScenario: frame length must be >= 1");
    if (waveform.rows() != expected_rows)
        throw std::invalid_argument("SensingScenario: waveform rows must equal total antennas");
}

MatrixXcd SensingScenario::random_waveform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng = Rng(seed).fork(0x5e45);
    MatrixXcd x(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) x(r, c) = rng.cgaussian();
    return x;
}

VectorXcd target_channel(const std::vector<SurfacePose>& poses, const std::vector<LocalArray>& arrays,
                         const AntennaPattern& pattern, double theta, double phi,
                         const LinkBudget& budget) {
    channel::UserChannelSpec spec({channel::PathComponent{cdouble(1.0, 0.0), theta, phi}});
    Eigen::Index total = 0;
    for (const auto& a : arrays) total += static_cast<Eigen::Index>(a.offsets.size());
    VectorXcd h(total);
    Eigen::Index at = 0;
    for (std::size_t b = 0; b < poses.size(); ++b) {
        const VectorXcd hb = channel::surface_channel(poses[b], arrays[b], pattern, spec, budget);
        h.segment(at, hb.size()) = hb;
        at += hb.size();
    }
    return h;
}

VectorXcd target_channel_derivative(const std::vector<SurfacePose>& poses,
                                    const std::vector<LocalArray>& arrays,
                                    const AntennaPattern& pattern, double theta, double phi,
                                    const LinkBudget& budget) {
    if (poses.size() != arrays.size())
        throw std::invalid_argument("target_channel_derivative: poses and arrays must align");
    const Vec3 f = geometry::pointing_vector(theta, phi);
    const Vec3 df(-std::cos(theta) * std::sin(phi), std::cos(theta) * std::cos(phi), 0.0);
    const double wavenumber = 2.0 * M_PI / budget.wavelength;

    Eigen::Index total = 0;
    for (const auto& a : arrays) total += static_cast<Eigen::Index>(a.offsets.size());
    VectorXcd dh(total);
    Eigen::Index at = 0;
    for (std::size_t b = 0; b < poses.size(); ++b) {
        const auto [tl, pl] = geometry::local_frame_direction(poses[b].rotation, f);
        const double g = channel::effective_gain_linear(pattern, tl, pl);
        const double sq = std::sqrt(g);

        // d sqrt(g)/d phi through the local spherical angles.
        double dsq = 0.0;
        if (pattern.kind == AntennaPattern::Kind::Directive && sq > 0.0) {
            const geometry::Mat3 rt = geometry::rotation_matrix(poses[b].rotation).transpose();
            const Vec3 fl = rt * f;
            const Vec3 dfl = rt * df;
            const double ct2 = fl.x() * fl.x() + fl.y() * fl.y();
            double dtheta_l = 0.0, dphi_l = 0.0;
            if (ct2 > 1e-18) {
                dtheta_l = dfl.z() / std::sqrt(ct2);
                dphi_l = (fl.x() * dfl.y() - fl.y() * dfl.x()) / ct2;
            }
            const auto [gt, gp] = channel::effective_gain_linear_gradient(pattern, tl, pl);
            dsq = (gt * dtheta_l + gp * dphi_l) / (2.0 * sq);
        }

        const auto positions = geometry::global_antenna_positions(poses[b], arrays[b]);
        for (std::size_t n = 0; n < positions.size(); ++n) {
            const double phase = -wavenumber * f.dot(positions[n]);
            const cdouble e(std::cos(phase), std::sin(phase));
            const cdouble dphase(0.0, -wavenumber * df.dot(positions[n]));
            dh[at + static_cast<Eigen::Index>(n)] = (dsq + sq * dphase) * e;
        }
        at += static_cast<Eigen::Index>(positions.size());
    }
    return dh;
}

double crb_doa(const std::vector<SurfacePose>& poses, const std::vector<LocalArray>& arrays,
               const AntennaPattern& pattern, const SensingScenario& scenario,
               const LinkBudget& budget) {
    Eigen::Index total = 0;
    for (const auto& a : arrays) total += static_cast<Eigen::Index>(a.offsets.size());
    scenario.validate(total);
    double crb = 0.0;
    for (std::size_t k = 0; k < scenario.target_azimuths.size(); ++k) {
        const double theta = scenario.target_elevations[k];
        const double phi = scenario.target_azimuths[k];
        const VectorXcd h = target_channel(poses, arrays, pattern, theta, phi, budget);
        const VectorXcd dh = target_channel_derivative(poses, arrays, pattern, theta, phi, budget);
        const double power_gain = (h.adjoint() * scenario.waveform).squaredNorm();
        const double geo_gain = dh.norm();
        if (!(geo_gain > 0.0) || !(power_gain > 0.0))
            throw std::runtime_error("crb_doa: unidentifiable target geometry (vanishing derivative)");
        crb += budget.noise_power /
               (2.0 * std::norm(scenario.rho[k]) * scenario.frame_len * power_gain * geo_gain);
    }
    return crb;
}

VectorXd pack_pose_vector(const std::vector<SurfacePose>& poses) {
    VectorXd x(static_cast<Eigen::Index>(poses.size() * 6));
    for (std::size_t b = 0; b < poses.size(); ++b) {
        const Eigen::Index at = static_cast<Eigen::Index>(6 * b);
        x.segment<3>(at) = poses[b].position;
        x[at + 3] = poses[b].rotation.alpha;
        x[at + 4] = poses[b].rotation.beta;
        x[at + 5] = poses[b].rotation.gamma;
    }
    return x;
}

std::vector<SurfacePose> unpack_pose_vector(const VectorXd& x, std::size_t num_surfaces) {
    if (x.size() != static_cast<Eigen::Index>(6 * num_surfaces))
        throw std::invalid_argument("unpack_pose_vector: dimension mismatch");
    std::vector<SurfacePose> poses(num_surfaces);
    for (std::size_t b = 0; b < num_surfaces; ++b) {
        const Eigen::Index at = static_cast<Eigen::Index>(6 * b);
        poses[b].position = x.segment<3>(at);
        poses[b].rotation = geometry::RotationAngles(x[at + 3], x[at + 4], x[at + 5]);
    }
    return poses;
}

CrbPoseResult optimize_crb_poses(const SensingScenario& scenario, const std::vector<LocalArray>& arrays,
                                 const AntennaPattern& pattern, const SiteRegion& region,
                                 const ConstraintConfig& constraints, const optimize::PsoConfig& pso,
                                 const LinkBudget& budget,
                                 const std::vector<std::vector<SurfacePose>>& initial_guesses,
                                 Exec exec) {
    const std::size_t num_surfaces = arrays.size();
    optimize::PsoConfig cfg = pso;
    if (cfg.lower.size() == 0) {
        Vec3 lo, hi;
        if (region.shape == SiteRegion::Shape::Sphere) {
            lo = region.center - Vec3::Constant(region.radius);
            hi = region.center + Vec3::Constant(region.radius);
        } else {
            lo = region.box_min;
            hi = region.box_max;
        }
        cfg.lower.resize(static_cast<Eigen::Index>(6 * num_surfaces));
        cfg.upper.resize(static_cast<Eigen::Index>(6 * num_surfaces));
        for (std::size_t b = 0; b < num_surfaces; ++b) {
            const Eigen::Index at = static_cast<Eigen::Index>(6 * b);
            cfg.lower.segment<3>(at) = lo;
            cfg.upper.segment<3>(at) = hi;
            for (int d = 3; d < 6; ++d) {
                cfg.lower[at + d] = 0.0;
                cfg.upper[at + d] = 2.0 * M_PI;
            }
        }
    }

    auto objective = [&](const VectorXd& x) {
        const auto poses = unpack_pose_vector(x, num_surfaces);
        try {
            return crb_doa(poses, arrays, pattern, scenario, budget);
        } catch (const std::runtime_error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    auto feasible = [&](const VectorXd& x) {
        return geometry::poses_feasible(unpack_pose_vector(x, num_surfaces), arrays, region, constraints);
    };

    std::vector<VectorXd> seeds;
    seeds.reserve(initial_guesses.size());
    for (const auto& g : initial_guesses) seeds.push_back(pack_pose_vector(g));

    const auto res = optimize::pso_minimize(objective, cfg, feasible, seeds, exec);
    if (!std::isfinite(res.value))
        throw std::runtime_error("optimize_crb_poses: swarm found no feasible pose set");
    return {unpack_pose_vector(res.best, num_surfaces), res.value};
}

void RotatableIsacConfig::validate() const {
    if (m_t < 1 || m_r < 2) throw std::invalid_argument("RotatableIsacConfig: needs m_t >= 1, m_r >= 2");
    if (snapshots < 1 || !(snr > 0.0) || !(p_max > 0.0) || !(spacing > 0.0))
        throw std::invalid_argument("RotatableIsacConfig: invalid scalar parameter");
    if (!(omega1 >= 0.0 && omega2 >= 0.0 && std::abs(omega1 + omega2 - 1.0) < 1e-9))
        throw std::invalid_argument("RotatableIsacConfig: weights must be nonnegative and sum to 1");
    if (!(gamma_min <= gamma_max))
        throw std::invalid_argument("RotatableIsacConfig: rotation bounds must be ordered");
}

double rotatable_chi(const RotatableIsacConfig& cfg) {
    const double lambda = cfg.budget.wavelength;
    const double d = cfg.spacing * lambda;
    const double mr = static_cast<double>(cfg.m_r);
    const double aperture = (mr - 1.0) * d;
    return 3.0 * lambda * lambda * (mr - 1.0) /
           (2.0 * M_PI * M_PI * cfg.snapshots * cfg.snr * mr * (mr + 1.0) * aperture * aperture);
}

double rotatable_fs(double gamma, const MatrixXcd& w_cov, const RotatableIsacConfig& cfg) {
    const double eff = cfg.target_ref_angle + gamma;
    const VectorXcd a = channel::rotatable_steering_1d(eff, cfg.m_t, cfg.budget);
    const double quad = (a.adjoint() * w_cov * a).value().real();
    const double c = std::cos(eff);
    return c * c * quad;
}

double rotatable_crb(double gamma, const MatrixXcd& w_cov, const RotatableIsacConfig& cfg) {
    // Effective angle at +-pi/2: the bound blows up, signaled as infinity.
    if (std::abs(std::cos(cfg.target_ref_angle + gamma)) < 1e-12)
        return std::numeric_limits<double>::infinity();
    const double fs = rotatable_fs(gamma, w_cov, cfg);
    if (!(fs > 0.0)) return std::numeric_limits<double>::infinity();
    return rotatable_chi(cfg) / fs;
}

namespace {
double steering_correlation_mag(double angle0, double angle1, int m, const LinkBudget& budget) {
    const VectorXcd a0 = channel::rotatable_steering_1d(angle0, m, budget);
    const VectorXcd a1 = channel::rotatable_steering_1d(angle1, m, budget);
    return std::abs(a0.dot(a1));
}
} // namespace

double rotation_gain(double gamma, const RotatableIsacConfig& cfg) {
    if (cfg.user_paths.size() != 1 || cfg.user_paths[0].size() != 2)
        throw std::invalid_argument("rotation_gain: requires a single user with exactly two paths");
    const double g0 = cfg.user_paths[0][0].ref_angle;
    const double g1 = cfg.user_paths[0][1].ref_angle;
    const double denom = steering_correlation_mag(g0, g1, cfg.m_t, cfg.budget);
    if (denom < 1e-15) return std::numeric_limits<double>::infinity();
    return steering_correlation_mag(g0 + gamma, g1 + gamma, cfg.m_t, cfg.budget) / denom;
}

RotationGainResult max_rotation_gain(const RotatableIsacConfig& cfg) {
    if (cfg.user_paths.size() != 1 || cfg.user_paths[0].size() != 2)
        throw std::invalid_argument("max_rotation_gain: requires a single user with exactly two paths");
    const double g0 = cfg.user_paths[0][0].ref_angle;
    const double g1 = cfg.user_paths[0][1].ref_angle;
    const double zeta1 = 0.5 * (g0 - g1);
    const double zeta2 = 0.5 * (g0 + g1);

    RotationGainResult out;
    if (std::abs(std::sin(zeta1)) < 1e-15 || cfg.m_t == 1) {
        out.degenerate = std::abs(std::sin(zeta1)) < 1e-15;
        out.gamma_star = 0.0;
        out.value = 1.0;
        return out;
    }

    // Candidate optimal rotations n*pi/2 - zeta2; keep the best realized gain.
    double best_gain = -1.0, best_gamma = 0.0;
    for (int n = -4; n <= 4; ++n) {
        const double cand = 0.5 * n * M_PI - zeta2;
        const double g = rotation_gain(cand, cfg);
        if (g > best_gain) {
            best_gain = g;
            best_gamma = cand;
        }
    }
    out.gamma_star = best_gamma;

    // Closed form M |sin(pi sin z1 cos z2)| / |sin(M pi sin z1 cos z2)|.
    const double s = std::sin(zeta1) * std::cos(zeta2);
    const double denom = std::abs(std::sin(cfg.m_t * M_PI * s));
    const double numer = std::abs(std::sin(M_PI * s));
    out.value = denom < 1e-15 ? best_gain : cfg.m_t * numer / denom;
    return out;
}

namespace {

struct BeamSet {
    std::vector<VectorXcd> user_beams;
    VectorXcd sensing_beam;
};

double beamset_fc(const BeamSet& w, const std::vector<VectorXcd>& h, double sigma2) {
    double rate = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double sig = std::norm(h[k].dot(w.user_beams[k]));
        double interf = 0.0;
        for (std::size_t j = 0; j < h.size(); ++j)
            if (j != k) interf += std::norm(h[k].dot(w.user_beams[j]));
        if (w.sensing_beam.size() > 0) interf += std::norm(h[k].dot(w.sensing_beam));
        rate += std::log2(1.0 + sig / (interf + sigma2));
    }
    return rate;
}

MatrixXcd beamset_cov(const BeamSet& w, int m_t) {
    MatrixXcd cov = MatrixXcd::Zero(m_t, m_t);
    for (const auto& b : w.user_beams) cov += b * b.adjoint();
    if (w.sensing_beam.size() > 0) cov += w.sensing_beam * w.sensing_beam.adjoint();
    return cov;
}

std::vector<BeamSet> candidate_beams(double gamma, const RotatableIsacConfig& cfg) {
    const std::size_t k = cfg.user_paths.size();
    std::vector<VectorXcd> h(k);
    for (std::size_t u = 0; u < k; ++u)
        h[u] = channel::rotatable_channel_1d(gamma, cfg.user_paths[u], cfg.m_t, cfg.budget);
    const VectorXcd a = channel::rotatable_steering_1d(cfg.target_ref_angle + gamma, cfg.m_t, cfg.budget);

    auto mrt = [&](double power) {
        std::vector<VectorXcd> beams(k, VectorXcd::Zero(cfg.m_t));
        for (std::size_t u = 0; u < k; ++u) {
            const double n = h[u].norm();
            if (n > 1e-15) beams[u] = std::sqrt(power / static_cast<double>(k)) * (h[u] / n);
        }
        return beams;
    };
    auto zf = [&](double power) -> std::vector<VectorXcd> {
        if (k < 2 || static_cast<int>(k) > cfg.m_t) return {};
        MatrixXcd hm(cfg.m_t, static_cast<Eigen::Index>(k));
        for (std::size_t u = 0; u < k; ++u) hm.col(static_cast<Eigen::Index>(u)) = h[u];
        const MatrixXcd gram = hm.adjoint() * hm;
        const Eigen::FullPivLU<MatrixXcd> lu(gram);
        if (!lu.isInvertible()) return {};
        const MatrixXcd w0 = hm * lu.inverse();
        std::vector<VectorXcd> beams(k, VectorXcd::Zero(cfg.m_t));
        for (std::size_t u = 0; u < k; ++u) {
            const VectorXcd col = w0.col(static_cast<Eigen::Index>(u));
            const double n = col.norm();
            if (n > 1e-15) beams[u] = std::sqrt(power / static_cast<double>(k)) * (col / n);
        }
        return beams;
    };
    auto sensing = [&](double power) { return VectorXcd(std::sqrt(power / cfg.m_t) * a); };

    std::vector<BeamSet> out;
    out.push_back({mrt(cfg.p_max), VectorXcd()});
    if (auto z = zf(cfg.p_max); !z.empty()) out.push_back({std::move(z), VectorXcd()});
    out.push_back({std::vector<VectorXcd>(k, VectorXcd::Zero(cfg.m_t)), sensing(cfg.p_max)});
    if (cfg.omega1 > 0.0 && cfg.omega2 > 0.0) {
        out.push_back({mrt(cfg.omega1 * cfg.p_max), sensing(cfg.omega2 * cfg.p_max)});
        if (auto z = zf(cfg.omega1 * cfg.p_max); !z.empty())
            out.push_back({std::move(z), sensing(cfg.omega2 * cfg.p_max)});
    }
    return out;
}

} // namespace

OraResult ora_solve(const RotatableIsacConfig& cfg) {
    cfg.validate();
    if (cfg.user_paths.empty()) throw std::invalid_argument("ora_solve: needs >= 1 user");
    const double sigma2 = cfg.budget.noise_power;

    const int grid = std::max(2, cfg.grid_points);
    auto evaluate = [&](double gamma, const BeamSet& w) {
        std::vector<VectorXcd> h(cfg.user_paths.size());
        for (std::size_t u = 0; u < h.size(); ++u)
            h[u] = channel::rotatable_channel_1d(gamma, cfg.user_paths[u], cfg.m_t, cfg.budget);
        const double fc = beamset_fc(w, h, sigma2);
        const double fs = rotatable_fs(gamma, beamset_cov(w, cfg.m_t), cfg);
        return std::tuple<double, double, double>(cfg.omega1 * fc + cfg.omega2 * fs, fc, fs);
    };

    // Joint pass: per grid rotation, best structured candidate.
    OraResult best;
    best.objective = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        const double gamma = cfg.gamma_min + (cfg.gamma_max - cfg.gamma_min) * i / (grid - 1);
        for (auto& cand : candidate_beams(gamma, cfg)) {
            const auto [obj, fc, fs] = evaluate(gamma, cand);
            if (obj > best.objective) {
                best.objective = obj;
                best.f_c = fc;
                best.f_s = fs;
                best.gamma = gamma;
                best.user_beams = cand.user_beams;
                best.sensing_beam = cand.sensing_beam;
            }
        }
    }
    best.trace.push_back(best.objective);

    // Alternation refinement: rotation grid at fixed beams, then beam
    // candidates at the fixed rotation; accept only improvements.
    for (int round = 0; round < 6; ++round) {
        bool changed = false;
        BeamSet cur{best.user_beams, best.sensing_beam};
        for (int i = 0; i < grid; ++i) {
            const double gamma = cfg.gamma_min + (cfg.gamma_max - cfg.gamma_min) * i / (grid - 1);
            const auto [obj, fc, fs] = evaluate(gamma, cur);
            if (obj > best.objective + 1e-15) {
                best.objective = obj;
                best.f_c = fc;
                best.f_s = fs;
                best.gamma = gamma;
                changed = true;
            }
        }
        for (auto& cand : candidate_beams(best.gamma, cfg)) {
            const auto [obj, fc, fs] = evaluate(best.gamma, cand);
            if (obj > best.objective + 1e-15) {
                best.objective = obj;
                best.f_c = fc;
                best.f_s = fs;
                best.user_beams = cand.user_beams;
                best.sensing_beam = cand.sensing_beam;
                changed = true;
            }
        }
        best.trace.push_back(best.objective);
        if (!changed) break;
    }

    // The sensing-only closed-form angle claim checks against {0, pi}.
    double best_claim = -1.0;
    for (double cand : {0.0, M_PI}) {
        if (cand < cfg.gamma_min || cand > cfg.gamma_max) continue;
        const double c = std::cos(cfg.target_ref_angle + cand);
        best_claim = std::max(best_claim, c * c);
    }
    if (best_claim >= 0.0) {
        const double c = std::cos(cfg.target_ref_angle + best.gamma);
        best.sensing_angle_discrepancy = (c * c) > best_claim + 1e-6;
    }
    return best;
}

} // namespace sixdma::sensing
