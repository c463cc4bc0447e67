#include "sixdma/optimize.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sixdma/rng.hpp"

namespace sixdma::optimize {

namespace {

using geometry::Mat3;

double region_scale(const SiteRegion& region) {
    if (region.shape == SiteRegion::Shape::Sphere) return region.radius;
    return (region.box_max - region.box_min).maxCoeff() * 0.5;
}

void require_feasible(const std::vector<SurfacePose>& poses, const std::vector<LocalArray>& arrays,
                      const SiteRegion& region, const ConstraintConfig& cfg) {
    for (std::size_t b = 0; b < poses.size(); ++b)
        if (!region.contains(poses[b].position))
            throw std::invalid_argument("ao_optimize: surface " + std::to_string(b) +
                                        " violates the site-region constraint");
    if (const auto bad = geometry::check_min_distance(poses, cfg); !bad.empty())
        throw std::invalid_argument("ao_optimize: surfaces " + std::to_string(bad[0].first) + "," +
                                    std::to_string(bad[0].second) +
                                    " violate the minimum-distance constraint");
    if (const auto bad = geometry::check_no_reflection(poses, arrays); !bad.empty())
        throw std::invalid_argument("ao_optimize: surface " + std::to_string(bad[0].first) +
                                    " violates the reflection constraint toward surface " +
                                    std::to_string(bad[0].second));
    if (const auto bad = geometry::check_no_blockage(poses, arrays); !bad.empty())
        throw std::invalid_argument("ao_optimize: surface " + std::to_string(bad[0]) +
                                    " violates the blockage constraint");
}

double log2det_psd(const MatrixXcd& g) {
    const Eigen::LLT<MatrixXcd> llt(g);
    double v = 0.0;
    for (Eigen::Index i = 0; i < g.rows(); ++i) v += 2.0 * std::log2(llt.matrixLLT()(i, i).real());
    return v;
}

// Frozen common-random-numbers objective with per-surface Gram caching: the
// ascent property of AO is defined against one fixed set of realizations.
class FrozenObjective {
  public:
    FrozenObjective(const std::vector<LocalArray>& arrays, const AntennaPattern& pattern,
                    const ScenarioDistribution& scenario, int trials, const LinkBudget& budget,
                    Exec exec)
        : arrays_(arrays), pattern_(pattern), budget_(budget), exec_(exec) {
        users_.resize(static_cast<std::size_t>(trials));
        for (int t = 0; t < trials; ++t)
            users_[static_cast<std::size_t>(t)] = scenario.draw_users(static_cast<std::uint64_t>(t));
        k_ = static_cast<Eigen::Index>(users_.front().size());
    }

    int trials() const { return static_cast<int>(users_.size()); }

    void set_poses(const std::vector<SurfacePose>& poses) {
        poses_ = poses;
        h_.assign(users_.size(), std::vector<MatrixXcd>(poses.size()));
        parallel_for(users_.size(), [&](std::size_t t) {
            for (std::size_t b = 0; b < poses_.size(); ++b) h_[t][b] = surface_block(t, poses_[b], b);
        }, exec_);
    }

    void update_pose(std::size_t b, const SurfacePose& pose) {
        poses_[b] = pose;
        parallel_for(users_.size(), [&](std::size_t t) { h_[t][b] = surface_block(t, pose, b); }, exec_);
    }

    const std::vector<SurfacePose>& poses() const { return poses_; }

    double full_objective() const {
        const double c = budget_.snr();
        std::vector<double> vals(users_.size());
        parallel_for(users_.size(), [&](std::size_t t) {
            MatrixXcd g = MatrixXcd::Identity(k_, k_);
            for (const auto& hb : h_[t]) g += c * (hb.adjoint() * hb);
            vals[t] = log2det_psd(g);
        }, exec_);
        return pairwise_sum(vals) / static_cast<double>(vals.size());
    }

    // Gram of everything except surface b, reused across candidate poses.
    void build_base(std::size_t b) {
        const double c = budget_.snr();
        base_.resize(users_.size());
        parallel_for(users_.size(), [&](std::size_t t) {
            MatrixXcd g = MatrixXcd::Identity(k_, k_);
            for (std::size_t j = 0; j < h_[t].size(); ++j)
                if (j != b) g += c * (h_[t][j].adjoint() * h_[t][j]);
            base_[t] = g;
        }, exec_);
    }

    double eval_surface(std::size_t b, const SurfacePose& candidate) const {
        const double c = budget_.snr();
        std::vector<double> vals(users_.size());
        parallel_for(users_.size(), [&](std::size_t t) {
            const MatrixXcd hb = surface_block(t, candidate, b);
            vals[t] = log2det_psd(base_[t] + c * (hb.adjoint() * hb));
        }, exec_);
        return pairwise_sum(vals) / static_cast<double>(vals.size());
    }

  private:
    MatrixXcd surface_block(std::size_t t, const SurfacePose& pose, std::size_t b) const {
        const auto& arr = arrays_[b];
        MatrixXcd h(static_cast<Eigen::Index>(arr.offsets.size()), k_);
        for (Eigen::Index k = 0; k < k_; ++k)
            h.col(k) = channel::surface_channel(pose, arr, pattern_, users_[t][static_cast<std::size_t>(k)],
                                                budget_);
        return h;
    }

    const std::vector<LocalArray>& arrays_;
    const AntennaPattern& pattern_;
    const LinkBudget& budget_;
    Exec exec_;
    std::vector<std::vector<UserChannelSpec>> users_;
    std::vector<SurfacePose> poses_;
    std::vector<std::vector<MatrixXcd>> h_; // [trial][surface]
    std::vector<MatrixXcd> base_;           // [trial]
    Eigen::Index k_ = 0;
};

bool candidate_feasible(std::size_t b, const Vec3& q, const RotationAngles& u,
                        std::vector<SurfacePose> poses, const std::vector<LocalArray>& arrays,
                        const SiteRegion& region, const ConstraintConfig& cfg) {
    poses[b].position = q;
    poses[b].rotation = u;
    return geometry::poses_feasible(poses, arrays, region, cfg);
}

// Cyclic projection onto the halfspaces {a_i . x >= b_i} and the region.
Vec3 project_linearized_position(Vec3 cand, const std::vector<std::pair<Vec3, double>>& halfspaces,
                                 const SiteRegion& region) {
    for (int pass = 0; pass < 6; ++pass) {
        for (const auto& [a, rhs] : halfspaces) {
            const double v = a.dot(cand);
            if (v < rhs) cand += a * (rhs - v);
        }
        cand = geometry::project_into_region(cand, region);
    }
    return cand;
}

// Quasi-uniform boresight candidates for the rotation probe.
std::vector<Vec3> probe_directions() {
    std::vector<Vec3> dirs;
    const int n = 14;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        dirs.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
    }
    return dirs;
}

// Rotation whose boresight (local +x) is the given unit direction.
geometry::RotationAngles facing_rotation(const Vec3& d) {
    const double sy = std::clamp(-d.y(), -1.0, 1.0);
    if (std::abs(d.x()) < 1e-15 && std::abs(d.z()) < 1e-15)
        return geometry::RotationAngles(0.0, 0.0, std::asin(sy));
    return geometry::RotationAngles(0.0, std::atan2(d.z(), d.x()), std::asin(sy));
}

Eigen::Vector3d project_linearized_rotation(Eigen::Vector3d delta,
                                            const std::vector<std::pair<Eigen::Vector3d, double>>& halfspaces,
                                            double radius) {
    for (int pass = 0; pass < 6; ++pass) {
        for (const auto& [a, rhs] : halfspaces) {
            const double an = a.squaredNorm();
            if (an < 1e-18) continue;
            const double v = a.dot(delta);
            if (v < rhs) delta += a * ((rhs - v) / an);
        }
        const double n = delta.norm();
        if (n > radius) delta *= radius / n;
    }
    return delta;
}

} // namespace

AoResult ao_optimize(std::vector<SurfacePose> initial, const std::vector<LocalArray>& arrays,
                     const AntennaPattern& pattern, const ScenarioDistribution& scenario,
                     const SiteRegion& region, const ConstraintConfig& constraints,
                     const AoConfig& cfg, const LinkBudget& budget, Exec exec) {
    if (initial.size() != arrays.size())
        throw std::invalid_argument("ao_optimize: poses and arrays must align");
    require_feasible(initial, arrays, region, constraints);
    scenario.validate();

    FrozenObjective obj(arrays, pattern, scenario, cfg.trials, budget, exec);
    obj.set_poses(initial);

    const std::size_t num_surfaces = initial.size();
    const double fd_pos = budget.wavelength / 50.0;
    const double fd_rot = 1e-3;
    const double step0 = cfg.position_step > 0.0 ? cfg.position_step : 0.25 * region_scale(region);

    AoResult result;
    double current = obj.full_objective();
    result.trace.push_back(current);
    result.feasible.push_back(
        geometry::poses_feasible(obj.poses(), arrays, region, constraints) ? 1 : 0);

    for (int iter = 0; iter < cfg.max_outer_iters; ++iter) {
        for (std::size_t b = 0; b < num_surfaces; ++b) {
            obj.build_base(b);
            SurfacePose pose = obj.poses()[b];
            double f0 = obj.eval_surface(b, pose);

            // Joint coarse probe: radial shell pose candidates facing outward.
            // The sector pattern's side-lobe floor flattens the gain gradient
            // far off boresight, and blockage couples the feasible rotations
            // to the position side, so block gradient steps alone cannot
            // cross between lobes. Accepted only on strict improvement.
            {
                const double shell = 0.75 * region_scale(region);
                for (const Vec3& dir : probe_directions()) {
                    std::vector<SurfacePose> cands;
                    if (cfg.optimize_rotations) {
                        SurfacePose t = pose;
                        t.rotation = facing_rotation(dir);
                        cands.push_back(t);
                    }
                    if (cfg.optimize_positions && cfg.optimize_rotations) {
                        SurfacePose t = pose;
                        t.position = geometry::project_into_region(
                            region.shape == SiteRegion::Shape::Sphere ? Vec3(region.center + shell * dir)
                                                                      : Vec3(shell * dir),
                            region);
                        t.rotation = facing_rotation(dir);
                        cands.push_back(t);
                    }
                    for (const auto& t : cands) {
                        if (!candidate_feasible(b, t.position, t.rotation, obj.poses(), arrays, region,
                                                constraints))
                            continue;
                        const double f1 = obj.eval_surface(b, t);
                        if (f1 > f0) {
                            f0 = f1;
                            pose = t;
                        }
                    }
                }
            }

            if (cfg.optimize_positions) {
                Vec3 grad = Vec3::Zero();
                for (int d = 0; d < 3; ++d) {
                    SurfacePose lo = pose, hi = pose;
                    lo.position[d] -= fd_pos;
                    hi.position[d] += fd_pos;
                    grad[d] = (obj.eval_surface(b, hi) - obj.eval_surface(b, lo)) / (2.0 * fd_pos);
                }
                if (grad.norm() > 1e-12) {
                    const Vec3 dir = grad.normalized();
                    // Linearized minimum-distance halfspaces about the current
                    // iterate; reflection and blockage are already linear in q_b.
                    std::vector<std::pair<Vec3, double>> hs;
                    const Vec3 n_b = geometry::surface_normal(pose.rotation, arrays[b]);
                    for (std::size_t j = 0; j < num_surfaces; ++j) {
                        if (j == b) continue;
                        const Vec3 qj = obj.poses()[j].position;
                        const Vec3 d = pose.position - qj;
                        const double dist = d.norm();
                        if (dist > 1e-12) {
                            const Vec3 u = d / dist;
                            hs.emplace_back(u, constraints.d_min - dist + u.dot(pose.position));
                        }
                        // n_b . q >= n_b . q_j (no reflection toward surface j)
                        hs.emplace_back(n_b, n_b.dot(qj));
                        // -n_j . q >= -n_j . q_j (surface j must not face q_b)
                        const Vec3 n_j = geometry::surface_normal(obj.poses()[j].rotation, arrays[j]);
                        hs.emplace_back(-n_j, -n_j.dot(qj));
                    }
                    hs.emplace_back(n_b, 0.0); // blockage: n_b . q >= 0
                    double step = step0;
                    for (int bt = 0; bt < cfg.max_backtracks; ++bt, step *= cfg.shrink) {
                        Vec3 cand = project_linearized_position(pose.position + step * dir, hs, region);
                        if (!candidate_feasible(b, cand, pose.rotation, obj.poses(), arrays, region,
                                                constraints))
                            continue;
                        SurfacePose trial = pose;
                        trial.position = cand;
                        const double f1 = obj.eval_surface(b, trial);
                        if (f1 > f0) {
                            pose = trial;
                            f0 = f1;
                            break;
                        }
                    }
                }
            }

            if (cfg.optimize_rotations) {
                Eigen::Vector3d grad;
                for (int d = 0; d < 3; ++d) {
                    SurfacePose lo = pose, hi = pose;
                    double* la[3] = {&lo.rotation.alpha, &lo.rotation.beta, &lo.rotation.gamma};
                    double* ha[3] = {&hi.rotation.alpha, &hi.rotation.beta, &hi.rotation.gamma};
                    *la[d] = geometry::wrap_angle(*la[d] - fd_rot);
                    *ha[d] = geometry::wrap_angle(*ha[d] + fd_rot);
                    grad[d] = (obj.eval_surface(b, hi) - obj.eval_surface(b, lo)) / (2.0 * fd_rot);
                }
                if (grad.norm() > 1e-12) {
                    // First-order normal model n(u + delta) ~ n0 + J delta.
                    const Vec3 n0 = geometry::surface_normal(pose.rotation, arrays[b]);
                    const auto parts = geometry::rotation_matrix_partials(pose.rotation);
                    Eigen::Matrix3d jac;
                    for (int d = 0; d < 3; ++d) jac.col(d) = parts[static_cast<std::size_t>(d)] * arrays[b].normal;
                    std::vector<std::pair<Eigen::Vector3d, double>> hs;
                    for (std::size_t j = 0; j < num_surfaces; ++j) {
                        if (j == b) continue;
                        const Vec3 r = obj.poses()[j].position - pose.position;
                        hs.emplace_back(-(jac.transpose() * r), n0.dot(r)); // (n0+Jd).r <= 0
                    }
                    hs.emplace_back(jac.transpose() * pose.position, -n0.dot(pose.position));
                    double radius = cfg.rotation_trust_radius;
                    for (int bt = 0; bt < cfg.max_backtracks && radius > 1e-9; ++bt) {
                        Eigen::Vector3d delta =
                            project_linearized_rotation(radius * grad.normalized(), hs, radius);
                        RotationAngles cand(pose.rotation.alpha + delta[0], pose.rotation.beta + delta[1],
                                            pose.rotation.gamma + delta[2]);
                        if (!candidate_feasible(b, pose.position, cand, obj.poses(), arrays, region,
                                                constraints)) {
                            radius *= 0.5; // linearized-feasible point broke the true constraint
                            continue;
                        }
                        SurfacePose trial = pose;
                        trial.rotation = cand;
                        const double f1 = obj.eval_surface(b, trial);
                        if (f1 > f0) {
                            pose = trial;
                            f0 = f1;
                            break;
                        }
                        radius *= cfg.shrink;
                    }
                }
            }

            obj.update_pose(b, pose);
        }

        const double next = obj.full_objective();
        result.trace.push_back(std::max(next, current));
        result.feasible.push_back(
            geometry::poses_feasible(obj.poses(), arrays, region, constraints) ? 1 : 0);
        if (next - current < cfg.objective_tol * std::max(1.0, std::abs(current))) {
            current = std::max(next, current);
            break;
        }
        current = next;
    }

    result.poses = obj.poses();
    return result;
}

std::vector<SurfacePose> assignment_poses(const DiscreteGrid& grid, const DiscreteAssignment& a) {
    std::vector<SurfacePose> poses(a.position.size());
    for (std::size_t b = 0; b < a.position.size(); ++b) {
        const int m = a.position[b];
        const int l = a.rotation[b];
        poses[b].position = grid.positions.at(static_cast<std::size_t>(m));
        poses[b].rotation =
            grid.rotations_per_position.at(static_cast<std::size_t>(m)).at(static_cast<std::size_t>(l));
    }
    return poses;
}

bool assignment_feasible(const DiscreteGrid& grid, const DiscreteAssignment& a,
                         const LocalArray& array, const ConstraintConfig& constraints) {
    for (std::size_t b = 0; b < a.position.size(); ++b)
        for (std::size_t j = b + 1; j < a.position.size(); ++j)
            if (a.position[b] == a.position[j]) return false;
    const auto poses = assignment_poses(grid, a);
    const std::vector<LocalArray> arrays(poses.size(), array);
    if (!geometry::check_min_distance(poses, constraints).empty()) return false;
    if (!geometry::check_no_reflection(poses, arrays).empty()) return false;
    if (!geometry::check_no_blockage(poses, arrays).empty()) return false;
    return true;
}

int flat_pose_index(const DiscreteGrid& grid, int m, int l) {
    int idx = 0;
    for (int i = 0; i < m; ++i) idx += static_cast<int>(grid.rotations_per_position[static_cast<std::size_t>(i)].size());
    return idx + l;
}

std::vector<SurfacePose> flatten_grid(const DiscreteGrid& grid) {
    std::vector<SurfacePose> out;
    for (std::size_t m = 0; m < grid.positions.size(); ++m)
        for (const auto& rot : grid.rotations_per_position[m]) {
            SurfacePose p;
            p.position = grid.positions[m];
            p.rotation = rot;
            out.push_back(p);
        }
    return out;
}

namespace {

// Simplex projection (Euclidean), Duchi et al. style.
VectorXd project_simplex(VectorXd v) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    int rho = 0;
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        acc += u[i];
        const double t = (acc - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) {
            rho = static_cast<int>(i + 1);
            css = acc;
        }
    }
    theta = (css - 1.0) / rho;
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::max(0.0, v[i] - theta);
    return v;
}

struct RelaxedState {
    std::vector<VectorXd> s; // per surface, over M
    std::vector<VectorXd> g; // per surface, over L_d (max across positions)
};

// Frozen-trial discrete objective with per-option channel caching.
class DiscreteObjective {
  public:
    DiscreteObjective(const DiscreteGrid& grid, const LocalArray& array, const AntennaPattern& pattern,
                      const ScenarioDistribution& scenario, int trials, const LinkBudget& budget,
                      Exec exec)
        : grid_(grid), budget_(budget), exec_(exec) {
        users_.resize(static_cast<std::size_t>(trials));
        for (int t = 0; t < trials; ++t)
            users_[static_cast<std::size_t>(t)] = scenario.draw_users(static_cast<std::uint64_t>(t));
        k_ = static_cast<Eigen::Index>(users_.front().size());
        n_ = static_cast<Eigen::Index>(array.offsets.size());
        const std::size_t m = grid.positions.size();
        hopt_.assign(users_.size(), {});
        parallel_for(users_.size(), [&](std::size_t t) {
            auto& per_trial = hopt_[t];
            per_trial.resize(m);
            for (std::size_t mi = 0; mi < m; ++mi) {
                const auto& rots = grid.rotations_per_position[mi];
                per_trial[mi].resize(rots.size());
                for (std::size_t l = 0; l < rots.size(); ++l) {
                    SurfacePose pose;
                    pose.position = grid.positions[mi];
                    pose.rotation = rots[l];
                    MatrixXcd h(n_, k_);
                    for (Eigen::Index k = 0; k < k_; ++k)
                        h.col(k) = channel::surface_channel(pose, array, pattern,
                                                            users_[t][static_cast<std::size_t>(k)], budget);
                    per_trial[mi][l] = h;
                }
            }
        }, exec);
    }

    Eigen::Index num_users() const { return k_; }
    int trials() const { return static_cast<int>(users_.size()); }
    const DiscreteGrid& grid() const { return grid_; }

    MatrixXcd relaxed_block(std::size_t t, const VectorXd& s, const VectorXd& g) const {
        MatrixXcd h = MatrixXcd::Zero(n_, k_);
        for (std::size_t m = 0; m < grid_.positions.size(); ++m) {
            if (s[static_cast<Eigen::Index>(m)] <= 1e-12) continue;
            const auto& opts = hopt_[t][m];
            for (std::size_t l = 0; l < opts.size(); ++l) {
                const double w = s[static_cast<Eigen::Index>(m)] * g[static_cast<Eigen::Index>(l)];
                if (w > 1e-12) h += w * opts[l];
            }
        }
        return h;
    }

    double relaxed_objective(const RelaxedState& x) const {
        const double c = budget_.snr();
        std::vector<double> vals(users_.size());
        parallel_for(users_.size(), [&](std::size_t t) {
            MatrixXcd gm = MatrixXcd::Identity(k_, k_);
            for (std::size_t b = 0; b < x.s.size(); ++b) {
                const MatrixXcd h = relaxed_block(t, x.s[b], x.g[b]);
                gm += c * (h.adjoint() * h);
            }
            vals[t] = log2det_psd(gm);
        }, exec_);
        return pairwise_sum(vals) / static_cast<double>(vals.size());
    }

    // Analytic gradient of the relaxed objective wrt every indicator entry.
    void relaxed_gradient(const RelaxedState& x, std::vector<VectorXd>& gs,
                          std::vector<VectorXd>& gg) const {
        const double c = budget_.snr();
        const std::size_t nb = x.s.size();
        const std::size_t m = grid_.positions.size();
        const std::size_t ld = static_cast<std::size_t>(x.g[0].size());
        std::vector<std::vector<double>> slot_s(users_.size()), slot_g(users_.size());
        parallel_for(users_.size(), [&](std::size_t t) {
            std::vector<MatrixXcd> blocks(nb);
            MatrixXcd gm = MatrixXcd::Identity(k_, k_);
            for (std::size_t b = 0; b < nb; ++b) {
                blocks[b] = relaxed_block(t, x.s[b], x.g[b]);
                gm += c * (blocks[b].adjoint() * blocks[b]);
            }
            const Eigen::LLT<MatrixXcd> llt(gm);
            std::vector<double>& ds = slot_s[t];
            std::vector<double>& dg = slot_g[t];
            ds.assign(nb * m, 0.0);
            dg.assign(nb * ld, 0.0);
            const double scale = c / std::log(2.0);
            for (std::size_t b = 0; b < nb; ++b) {
                const MatrixXcd m1 = llt.solve(blocks[b].adjoint()); // K x N
                for (std::size_t mi = 0; mi < m; ++mi) {
                    MatrixXcd d = MatrixXcd::Zero(n_, k_);
                    const auto& opts = hopt_[t][mi];
                    for (std::size_t l = 0; l < opts.size(); ++l)
                        if (x.g[b][static_cast<Eigen::Index>(l)] > 0.0)
                            d += x.g[b][static_cast<Eigen::Index>(l)] * opts[l];
                    ds[b * m + mi] = 2.0 * scale * (m1.transpose().cwiseProduct(d)).sum().real();
                }
                for (std::size_t l = 0; l < ld; ++l) {
                    MatrixXcd e = MatrixXcd::Zero(n_, k_);
                    for (std::size_t mi = 0; mi < m; ++mi) {
                        const auto& opts = hopt_[t][mi];
                        if (l < opts.size() && x.s[b][static_cast<Eigen::Index>(mi)] > 0.0)
                            e += x.s[b][static_cast<Eigen::Index>(mi)] * opts[l];
                    }
                    dg[b * ld + l] = 2.0 * scale * (m1.transpose().cwiseProduct(e)).sum().real();
                }
            }
        }, exec_);
        gs.assign(nb, VectorXd::Zero(static_cast<Eigen::Index>(m)));
        gg.assign(nb, VectorXd::Zero(static_cast<Eigen::Index>(ld)));
        const double invt = 1.0 / static_cast<double>(users_.size());
        std::vector<double> tmp(users_.size());
        for (std::size_t b = 0; b < nb; ++b) {
            for (std::size_t mi = 0; mi < m; ++mi) {
                for (std::size_t t = 0; t < users_.size(); ++t) tmp[t] = slot_s[t][b * m + mi];
                gs[b][static_cast<Eigen::Index>(mi)] = pairwise_sum(tmp) * invt;
            }
            for (std::size_t l = 0; l < ld; ++l) {
                for (std::size_t t = 0; t < users_.size(); ++t) tmp[t] = slot_g[t][b * ld + l];
                gg[b][static_cast<Eigen::Index>(l)] = pairwise_sum(tmp) * invt;
            }
        }
    }

    double assignment_objective(const DiscreteAssignment& a) const {
        const double c = budget_.snr();
        std::vector<double> vals(users_.size());
        parallel_for(users_.size(), [&](std::size_t t) {
            MatrixXcd gm = MatrixXcd::Identity(k_, k_);
            for (std::size_t b = 0; b < a.position.size(); ++b) {
                const MatrixXcd& h =
                    hopt_[t][static_cast<std::size_t>(a.position[b])][static_cast<std::size_t>(a.rotation[b])];
                gm += c * (h.adjoint() * h);
            }
            vals[t] = log2det_psd(gm);
        }, exec_);
        return pairwise_sum(vals) / static_cast<double>(vals.size());
    }

  private:
    const DiscreteGrid& grid_;
    const LinkBudget& budget_;
    Exec exec_;
    std::vector<std::vector<UserChannelSpec>> users_;
    std::vector<std::vector<std::vector<MatrixXcd>>> hopt_; // [trial][position][rotation]
    Eigen::Index k_ = 0, n_ = 0;
};

} // namespace

DiscreteResult discrete_offline(const DiscreteGrid& grid, const LocalArray& array,
                                const AntennaPattern& pattern, const ScenarioDistribution& scenario,
                                const ConstraintConfig& constraints, int num_surfaces,
                                const DiscreteConfig& cfg, const LinkBudget& budget, Exec exec) {
    grid.validate();
    scenario.validate();
    const int m = static_cast<int>(grid.positions.size());
    if (m < num_surfaces)
        throw std::invalid_argument("discrete_offline: fewer grid positions than surfaces");
    std::size_t ld_max = 0;
    for (const auto& r : grid.rotations_per_position) ld_max = std::max(ld_max, r.size());

    DiscreteObjective obj(grid, array, pattern, scenario, cfg.trials, budget, exec);

    // Relaxation over the simplex, projected gradient ascent.
    RelaxedState x;
    x.s.assign(static_cast<std::size_t>(num_surfaces),
               VectorXd::Constant(m, 1.0 / static_cast<double>(m)));
    x.g.assign(static_cast<std::size_t>(num_surfaces),
               VectorXd::Constant(static_cast<Eigen::Index>(ld_max), 1.0 / static_cast<double>(ld_max)));
    // Symmetry breaking: tilt each surface toward a different grid position.
    for (int b = 0; b < num_surfaces; ++b) {
        x.s[static_cast<std::size_t>(b)][b % m] += 0.05;
        x.s[static_cast<std::size_t>(b)] = project_simplex(x.s[static_cast<std::size_t>(b)]);
    }

    double fx = obj.relaxed_objective(x);
    for (int it = 0; it < cfg.pg_iters; ++it) {
        std::vector<VectorXd> gs, gg;
        obj.relaxed_gradient(x, gs, gg);
        double step = cfg.pg_step;
        bool improved = false;
        for (int bt = 0; bt < 12; ++bt, step *= 0.5) {
            RelaxedState cand = x;
            for (std::size_t b = 0; b < cand.s.size(); ++b) {
                cand.s[b] = project_simplex(x.s[b] + step * gs[b]);
                cand.g[b] = project_simplex(x.g[b] + step * gg[b]);
            }
            const double fc = obj.relaxed_objective(cand);
            if (fc > fx) {
                x = cand;
                fx = fc;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }

    // Quantize to the nearest one-hot choice per surface.
    DiscreteAssignment a;
    a.position.resize(static_cast<std::size_t>(num_surfaces));
    a.rotation.resize(static_cast<std::size_t>(num_surfaces));
    std::vector<double> quant_err(static_cast<std::size_t>(num_surfaces));
    for (int b = 0; b < num_surfaces; ++b) {
        const std::size_t sb = static_cast<std::size_t>(b);
        Eigen::Index mi = 0, li = 0;
        x.s[sb].maxCoeff(&mi);
        const int rot_count = static_cast<int>(grid.rotations_per_position[static_cast<std::size_t>(mi)].size());
        x.g[sb].head(rot_count).maxCoeff(&li);
        a.position[sb] = static_cast<int>(mi);
        a.rotation[sb] = static_cast<int>(li);
        VectorXd es = VectorXd::Zero(m);
        es[mi] = 1.0;
        VectorXd eg = VectorXd::Zero(static_cast<Eigen::Index>(ld_max));
        eg[li] = 1.0;
        quant_err[sb] = (x.s[sb] - es).squaredNorm() + (x.g[sb] - eg).squaredNorm();
    }

    // Greedy repair: surfaces with the largest rounding distortion are
    // reassigned first; each conflicting surface moves to the nearest free
    // feasible grid point.
    std::vector<std::size_t> order(static_cast<std::size_t>(num_surfaces));
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return quant_err[i] > quant_err[j]; });

    DiscreteAssignment fixed;
    std::vector<std::size_t> fixed_ids;
    auto conflicts = [&](std::size_t b, int mi, int li) {
        DiscreteAssignment trial = fixed;
        trial.position.push_back(mi);
        trial.rotation.push_back(li);
        (void)b;
        return !assignment_feasible(grid, trial, array, constraints);
    };
    for (std::size_t b : order) {
        int mi = a.position[b], li = a.rotation[b];
        if (conflicts(b, mi, li)) {
            double best_d = std::numeric_limits<double>::infinity();
            int best_m = -1, best_l = -1;
            const Vec3 want = grid.positions[static_cast<std::size_t>(mi)];
            for (int cm = 0; cm < m; ++cm) {
                const double dist = (grid.positions[static_cast<std::size_t>(cm)] - want).norm();
                if (dist >= best_d) continue;
                const int rot_count = static_cast<int>(grid.rotations_per_position[static_cast<std::size_t>(cm)].size());
                for (int cl = 0; cl < rot_count; ++cl) {
                    if (!conflicts(b, cm, cl)) {
                        best_d = dist;
                        best_m = cm;
                        best_l = cl;
                        break;
                    }
                }
            }
            if (best_m < 0)
                throw std::runtime_error("discrete_offline: no feasible assignment exists for surface " +
                                         std::to_string(b));
            mi = best_m;
            li = best_l;
        }
        fixed.position.push_back(mi);
        fixed.rotation.push_back(li);
        fixed_ids.push_back(b);
    }
    for (std::size_t i = 0; i < fixed_ids.size(); ++i) {
        a.position[fixed_ids[i]] = fixed.position[i];
        a.rotation[fixed_ids[i]] = fixed.rotation[i];
    }

    // Conditional-improvement sweep on the frozen objective.
    double best = obj.assignment_objective(a);
    for (int b = 0; b < num_surfaces; ++b) {
        const std::size_t sb = static_cast<std::size_t>(b);
        DiscreteAssignment trial = a;
        for (int cm = 0; cm < m; ++cm) {
            const int rot_count = static_cast<int>(grid.rotations_per_position[static_cast<std::size_t>(cm)].size());
            for (int cl = 0; cl < rot_count; ++cl) {
                trial.position[sb] = cm;
                trial.rotation[sb] = cl;
                if (!assignment_feasible(grid, trial, array, constraints)) continue;
                const double v = obj.assignment_objective(trial);
                if (v > best + 1e-12) {
                    best = v;
                    a = trial;
                }
            }
        }
        trial = a;
    }

    return {a, best};
}

DiscreteAssignment csm_online(const DiscreteGrid& grid, const LocalArray& array,
                              const ConstraintConfig& constraints, int num_surfaces,
                              const std::function<double(const DiscreteAssignment&)>& rate_sampler,
                              int sample_budget, std::uint64_t seed) {
    grid.validate();
    if (sample_budget < 1) throw std::invalid_argument("csm_online: sample budget must be >= 1");
    const int m = static_cast<int>(grid.positions.size());
    Rng rng(seed);

    auto random_feasible = [&](Rng& r) -> DiscreteAssignment {
        for (int attempt = 0; attempt < 500; ++attempt) {
            DiscreteAssignment a;
            std::vector<int> perm(static_cast<std::size_t>(m));
            std::iota(perm.begin(), perm.end(), 0);
            for (int i = m - 1; i > 0; --i)
                std::swap(perm[static_cast<std::size_t>(i)],
                          perm[r.uniform_index(static_cast<std::uint64_t>(i + 1))]);
            for (int b = 0; b < num_surfaces; ++b) {
                const int mi = perm[static_cast<std::size_t>(b)];
                const int rot_count = static_cast<int>(grid.rotations_per_position[static_cast<std::size_t>(mi)].size());
                a.position.push_back(mi);
                a.rotation.push_back(static_cast<int>(r.uniform_index(static_cast<std::uint64_t>(rot_count))));
            }
            if (assignment_feasible(grid, a, array, constraints)) return a;
        }
        throw std::runtime_error("csm_online: could not draw a feasible assignment");
    };

    // Conditional sums per surface and option (position-major indexing).
    std::size_t opts = 0;
    std::vector<std::size_t> opt_offset(static_cast<std::size_t>(m));
    for (int mi = 0; mi < m; ++mi) {
        opt_offset[static_cast<std::size_t>(mi)] = opts;
        opts += grid.rotations_per_position[static_cast<std::size_t>(mi)].size();
    }
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(num_surfaces),
                                          std::vector<double>(opts, 0.0));
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(num_surfaces),
                                         std::vector<int>(opts, 0));

    for (int sample = 0; sample < sample_budget; ++sample) {
        Rng sub = rng.fork(static_cast<std::uint64_t>(sample));
        const DiscreteAssignment a = random_feasible(sub);
        const double rate = rate_sampler(a);
        for (int b = 0; b < num_surfaces; ++b) {
            const std::size_t sb = static_cast<std::size_t>(b);
            const std::size_t opt = opt_offset[static_cast<std::size_t>(a.position[sb])] +
                                    static_cast<std::size_t>(a.rotation[sb]);
            sums[sb][opt] += rate;
            counts[sb][opt] += 1;
        }
    }

    DiscreteAssignment pick;
    for (int b = 0; b < num_surfaces; ++b) {
        const std::size_t sb = static_cast<std::size_t>(b);
        double best = -std::numeric_limits<double>::infinity();
        int best_m = 0, best_l = 0;
        for (int mi = 0; mi < m; ++mi) {
            const int rot_count = static_cast<int>(grid.rotations_per_position[static_cast<std::size_t>(mi)].size());
            for (int li = 0; li < rot_count; ++li) {
                const std::size_t opt = opt_offset[static_cast<std::size_t>(mi)] + static_cast<std::size_t>(li);
                if (counts[sb][opt] == 0) continue;
                const double mean = sums[sb][opt] / counts[sb][opt];
                if (mean > best) { // strict: ties keep the lowest option index
                    best = mean;
                    best_m = mi;
                    best_l = li;
                }
            }
        }
        pick.position.push_back(best_m);
        pick.rotation.push_back(best_l);
    }

    // Repair: keep surfaces in index order, reassign conflicts to the nearest
    // free feasible option.
    DiscreteAssignment fixed;
    for (int b = 0; b < num_surfaces; ++b) {
        const std::size_t sb = static_cast<std::size_t>(b);
        int mi = pick.position[sb], li = pick.rotation[sb];
        DiscreteAssignment trial = fixed;
        trial.position.push_back(mi);
        trial.rotation.push_back(li);
        if (!assignment_feasible(grid, trial, array, constraints)) {
            double best_d = std::numeric_limits<double>::infinity();
            int best_m = -1, best_l = -1;
            const Vec3 want = grid.positions[static_cast<std::size_t>(mi)];
            for (int cm = 0; cm < m; ++cm) {
                const double dist = (grid.positions[static_cast<std::size_t>(cm)] - want).norm();
                if (dist >= best_d) continue;
                const int rot_count = static_cast<int>(grid.rotations_per_position[static_cast<std::size_t>(cm)].size());
                for (int cl = 0; cl < rot_count; ++cl) {
                    DiscreteAssignment probe = fixed;
                    probe.position.push_back(cm);
                    probe.rotation.push_back(cl);
                    if (assignment_feasible(grid, probe, array, constraints)) {
                        best_d = dist;
                        best_m = cm;
                        best_l = cl;
                        break;
                    }
                }
            }
            if (best_m < 0) throw std::runtime_error("csm_online: repair failed, no feasible option left");
            mi = best_m;
            li = best_l;
        }
        fixed.position.push_back(mi);
        fixed.rotation.push_back(li);
    }
    return fixed;
}

DiscreteAssignment select_poses_from_stats(const DiscreteGrid& grid, const LocalArray& array,
                                           const ConstraintConfig& constraints, int num_surfaces,
                                           const MatrixXd& pose_power, const LinkBudget& budget) {
    grid.validate();
    const int m = static_cast<int>(grid.positions.size());
    const Eigen::Index k = pose_power.cols();
    const double c = budget.snr();

    DiscreteAssignment chosen;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(k);
    for (int b = 0; b < num_surfaces; ++b) {
        double best = -std::numeric_limits<double>::infinity();
        int best_m = -1, best_l = -1;
        for (int mi = 0; mi < m; ++mi) {
            const int rot_count = static_cast<int>(grid.rotations_per_position[static_cast<std::size_t>(mi)].size());
            for (int li = 0; li < rot_count; ++li) {
                DiscreteAssignment trial = chosen;
                trial.position.push_back(mi);
                trial.rotation.push_back(li);
                if (!assignment_feasible(grid, trial, array, constraints)) continue;
                const Eigen::Index row = static_cast<Eigen::Index>(flat_pose_index(grid, mi, li));
                double val = 0.0;
                for (Eigen::Index u = 0; u < k; ++u)
                    val += std::log2(1.0 + c * (acc[u] + pose_power(row, u)));
                if (val > best) {
                    best = val;
                    best_m = mi;
                    best_l = li;
                }
            }
        }
        if (best_m < 0)
            throw std::runtime_error("select_poses_from_stats: no feasible option for surface " +
                                     std::to_string(b));
        chosen.position.push_back(best_m);
        chosen.rotation.push_back(best_l);
        const Eigen::Index row = static_cast<Eigen::Index>(flat_pose_index(grid, best_m, best_l));
        for (Eigen::Index u = 0; u < k; ++u) acc[u] += pose_power(row, u);
    }
    return chosen;
}

PsoResult pso_minimize(const std::function<double(const VectorXd&)>& objective, const PsoConfig& cfg,
                       const std::function<bool(const VectorXd&)>& feasible,
                       const std::vector<VectorXd>& initial_points, Exec exec) {
    const Eigen::Index dim = cfg.lower.size();
    if (dim == 0 || cfg.upper.size() != dim)
        throw std::invalid_argument("pso_minimize: bounds must be non-empty and aligned");
    if (!(cfg.inertia > 0.0 && cfg.cognitive > 0.0 && cfg.social > 0.0))
        throw std::invalid_argument("pso_minimize: coefficients must be > 0");
    for (Eigen::Index d = 0; d < dim; ++d)
        if (!std::isfinite(cfg.lower[d]) || !std::isfinite(cfg.upper[d]) || cfg.lower[d] > cfg.upper[d])
            throw std::invalid_argument("pso_minimize: bounds must be finite and ordered");

    Rng rng(cfg.seed);
    const int swarm = std::max(cfg.swarm, 1);
    std::vector<VectorXd> pos(static_cast<std::size_t>(swarm)), vel(static_cast<std::size_t>(swarm));
    for (int i = 0; i < swarm; ++i) {
        VectorXd p(dim), v(dim);
        if (i < static_cast<int>(initial_points.size())) {
            p = initial_points[static_cast<std::size_t>(i)];
            for (Eigen::Index d = 0; d < dim; ++d) p[d] = std::clamp(p[d], cfg.lower[d], cfg.upper[d]);
        } else {
            for (Eigen::Index d = 0; d < dim; ++d) p[d] = rng.uniform(cfg.lower[d], cfg.upper[d]);
        }
        for (Eigen::Index d = 0; d < dim; ++d) {
            const double range = cfg.upper[d] - cfg.lower[d];
            v[d] = 0.1 * rng.uniform(-range, range);
        }
        pos[static_cast<std::size_t>(i)] = p;
        vel[static_cast<std::size_t>(i)] = v;
    }

    auto score = [&](std::vector<double>& out) {
        out.resize(pos.size());
        parallel_for(pos.size(), [&](std::size_t i) {
            out[i] = feasible(pos[i]) ? objective(pos[i]) : std::numeric_limits<double>::infinity();
        }, exec);
    };

    std::vector<double> value;
    score(value);
    std::vector<VectorXd> pbest = pos;
    std::vector<double> pbest_val = value;
    std::size_t gidx = 0;
    for (std::size_t i = 1; i < pbest_val.size(); ++i)
        if (pbest_val[i] < pbest_val[gidx]) gidx = i;
    VectorXd gbest = pbest[gidx];
    double gbest_val = pbest_val[gidx];

    PsoResult result;
    result.trace.push_back(gbest_val);
    for (int it = 0; it < cfg.iters; ++it) {
        for (std::size_t i = 0; i < pos.size(); ++i) {
            for (Eigen::Index d = 0; d < dim; ++d) {
                const double r1 = rng.uniform();
                const double r2 = rng.uniform();
                vel[i][d] = cfg.inertia * vel[i][d] + cfg.cognitive * r1 * (pbest[i][d] - pos[i][d]) +
                            cfg.social * r2 * (gbest[d] - pos[i][d]);
                pos[i][d] = std::clamp(pos[i][d] + vel[i][d], cfg.lower[d], cfg.upper[d]);
            }
        }
        score(value);
        for (std::size_t i = 0; i < pos.size(); ++i) {
            if (value[i] < pbest_val[i]) {
                pbest_val[i] = value[i];
                pbest[i] = pos[i];
            }
            if (value[i] < gbest_val) {
                gbest_val = value[i];
                gbest = pos[i];
            }
        }
        result.trace.push_back(gbest_val);
    }
    result.best = gbest;
    result.value = gbest_val;
    return result;
}

} // namespace sixdma::optimize
