#include "sixdma/estimate.hpp"

#include <Eigen/QR>
#include <cmath>
#include <stdexcept>

namespace sixdma::estimate {

MatrixXcd PilotConfig::pilot_matrix() const {
    if (pilot_len < 1 || num_users < 1)
        throw std::invalid_argument("PilotConfig: pilot_len and num_users must be >= 1");
    Rng rng = Rng(seed).fork(0x9110);
    MatrixXcd x(pilot_len, num_users);
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = rng.cgaussian();
    return x;
}

MatrixXcd simulate_pilot_rx(const MatrixXcd& pose_channel, const Eigen::VectorXi& z_row,
                            const MatrixXcd& pilots, double sigma2, Rng& rng) {
    const Eigen::Index n = pose_channel.rows();
    const Eigen::Index k = pose_channel.cols();
    if (pilots.cols() != k || z_row.size() != k)
        throw std::invalid_argument("simulate_pilot_rx: user-dimension mismatch");
    MatrixXcd masked = pose_channel;
    for (Eigen::Index c = 0; c < k; ++c)
        if (z_row[c] == 0) masked.col(c).setZero();
    MatrixXcd y = pilots * masked.transpose();
    if (sigma2 > 0.0) {
        const double sd = std::sqrt(sigma2);
        for (Eigen::Index c = 0; c < n; ++c)
            for (Eigen::Index r = 0; r < y.rows(); ++r) y(r, c) += sd * rng.cgaussian();
    }
    return y;
}

double mle_objective(const VectorXd& eta, const MatrixXcd& y, const MatrixXcd& pilots, double sigma2) {
    const Eigen::Index l = pilots.rows();
    MatrixXcd sigma = sigma2 * MatrixXcd::Identity(l, l);
    for (Eigen::Index k = 0; k < pilots.cols(); ++k)
        sigma += eta[k] * (pilots.col(k) * pilots.col(k).adjoint());
    const MatrixXcd shat = y * y.adjoint() / static_cast<double>(y.cols());
    const Eigen::LLT<MatrixXcd> llt(sigma);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < l; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i).real());
    return logdet + (llt.solve(shat)).trace().real();
}

VectorXd mle_power_estimate(const MatrixXcd& y, const MatrixXcd& pilots, double sigma2, double tol,
                            int max_passes, std::vector<double>* objective_trace) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("mle_power_estimate: sigma2 must be > 0");
    const Eigen::Index l = pilots.rows();
    const Eigen::Index k = pilots.cols();
    if (y.rows() != l) throw std::invalid_argument("mle_power_estimate: observation length mismatch");
    const double n = static_cast<double>(y.cols());
    const MatrixXcd shat = y * y.adjoint() / n;

    VectorXd eta = VectorXd::Zero(k);
    MatrixXcd sigma_inv = MatrixXcd::Identity(l, l) / sigma2;
    // Objective bookkeeping kept incrementally; O(L^2) per coordinate.
    double logdet = static_cast<double>(l) * std::log(sigma2);
    double trace = (shat.trace().real()) / sigma2;
    if (objective_trace) objective_trace->push_back(logdet + trace);

    for (int pass = 0; pass < max_passes; ++pass) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            const VectorXcd u = sigma_inv * pilots.col(j);
            const double a = (pilots.col(j).adjoint() * u).value().real();
            const double c = (u.adjoint() * (shat * u)).value().real();
            if (a <= 0.0) continue;
            const double target = eta[j] + (c - a) / (a * a);
            const double next = std::max(0.0, target);
            const double delta = next - eta[j];
            if (delta != 0.0) {
                const double denom = 1.0 + delta * a;
                sigma_inv -= (delta / denom) * (u * u.adjoint());
                logdet += std::log(denom);
                trace -= delta * c / denom;
                eta[j] = next;
            }
            if (objective_trace) objective_trace->push_back(logdet + trace);
            max_change = std::max(max_change, std::abs(delta));
        }
        if (max_change < tol) break;
    }
    return eta;
}

SparsityStats threshold_sparsity(const MatrixXd& p_bar, double eps) {
    if (eps < 0.0) throw std::invalid_argument("threshold_sparsity: eps must be >= 0");
    SparsityStats s;
    s.p = p_bar;
    s.threshold = eps;
    s.z = (p_bar.array() > eps).cast<int>();
    return s;
}

std::vector<Vec3> doa_grid(int g, bool upper_hemisphere_only) {
    if (g < 1) throw std::invalid_argument("doa_grid: grid size must be >= 1");
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(g));
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < g; ++i) {
        const double frac = (static_cast<double>(i) + 0.5) / g;
        const double z = upper_hemisphere_only ? (1.0 - frac) : (1.0 - 2.0 * frac);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double az = golden * i;
        pts.emplace_back(r * std::cos(az), r * std::sin(az), z);
    }
    return pts;
}

namespace {
double pattern_gain(const AntennaPattern& pattern, const RotationAngles& u, const Vec3& f) {
    const auto [tl, pl] = geometry::local_frame_direction(u, f);
    return channel::effective_gain_linear(pattern, tl, pl);
}
} // namespace

std::vector<Vec3> candidate_doa_grid(int g, const std::vector<RotationAngles>& sampled_rotations,
                                     const Vec3& local_boresight) {
    const geometry::LocalArray probe({Vec3::Zero()}, local_boresight);
    double zmin = 1.0, zmax = -1.0;
    for (const auto& u : sampled_rotations) {
        const double z = geometry::surface_normal(u, probe).z();
        zmin = std::min(zmin, z);
        zmax = std::max(zmax, z);
    }
    const double margin =
        std::max(0.02, (zmax - zmin) / std::max<std::size_t>(1, sampled_rotations.size() - 1));
    std::vector<Vec3> all = doa_grid(g, false);
    std::vector<Vec3> kept;
    for (const auto& v : all)
        if (v.z() >= zmin - margin && v.z() <= zmax + margin) kept.push_back(v);
    return kept.empty() ? all : kept;
}

ReconstructedStats reconstruct_statistics(const SparsityStats& stats,
                                          const std::vector<RotationAngles>& sampled_rotations,
                                          const std::vector<RotationAngles>& all_rotations,
                                          const AntennaPattern& pattern, int antennas_per_surface,
                                          int grid_size, Exec exec) {
    const Eigen::Index m_bar = stats.p.rows();
    const Eigen::Index k = stats.p.cols();
    if (static_cast<Eigen::Index>(sampled_rotations.size()) != m_bar)
        throw std::invalid_argument("reconstruct_statistics: sampled poses must align with stats rows");
    const double n = static_cast<double>(antennas_per_surface);

    const std::vector<Vec3> grid = candidate_doa_grid(grid_size, sampled_rotations);

    // Gain tables: sampled poses and the full pose set against every grid DOA.
    MatrixXd g_sampled(m_bar, static_cast<Eigen::Index>(grid.size()));
    parallel_for(grid.size(), [&](std::size_t gi) {
        for (Eigen::Index m = 0; m < m_bar; ++m)
            g_sampled(m, static_cast<Eigen::Index>(gi)) =
                pattern_gain(pattern, sampled_rotations[static_cast<std::size_t>(m)], grid[gi]);
    }, exec);

    ReconstructedStats out;
    out.grid_size = grid_size;
    out.s = VectorXd::Zero(k);
    out.doa.assign(static_cast<std::size_t>(k), Vec3(1.0, 0.0, 0.0));
    out.valid.assign(static_cast<std::size_t>(k), false);

    std::vector<double> s_all(static_cast<std::size_t>(k), 0.0);
    std::vector<int> best_idx(static_cast<std::size_t>(k), -1);
    parallel_for(static_cast<std::size_t>(k), [&](std::size_t uk) {
        const Eigen::Index col = static_cast<Eigen::Index>(uk);
        std::vector<Eigen::Index> support;
        for (Eigen::Index m = 0; m < m_bar; ++m)
            if (stats.z(m, col) != 0) support.push_back(m);
        if (support.empty()) return;
        Eigen::VectorXd p_sup(static_cast<Eigen::Index>(support.size()));
        for (std::size_t i = 0; i < support.size(); ++i) p_sup[static_cast<Eigen::Index>(i)] = stats.p(support[i], col);
        // 1-sparse model: single matching-pursuit pass over the grid. The
        // residual adds a sparsity-consistency term: a candidate DOA whose
        // predicted power at an off-support sampled pose exceeds the
        // threshold contradicts the measured indicator row.
        double best_res = std::numeric_limits<double>::infinity();
        double best_s = 0.0;
        int best_g = -1;
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(support.size()));
            for (std::size_t i = 0; i < support.size(); ++i)
                v[static_cast<Eigen::Index>(i)] = n * g_sampled(support[i], static_cast<Eigen::Index>(gi));
            const double vv = v.squaredNorm();
            const double s_fit = vv > 0.0 ? std::max(0.0, v.dot(p_sup) / vv) : 0.0;
            double res = (p_sup - s_fit * v).squaredNorm();
            for (Eigen::Index m = 0; m < m_bar; ++m) {
                if (stats.z(m, col) != 0) continue;
                const double excess =
                    n * g_sampled(m, static_cast<Eigen::Index>(gi)) * s_fit - stats.threshold;
                if (excess > 0.0) res += excess * excess;
            }
            if (best_g < 0 || res < best_res - 1e-15 * (1.0 + best_res)) {
                best_res = res;
                best_s = s_fit;
                best_g = static_cast<int>(gi);
            }
        }
        s_all[uk] = best_s;
        best_idx[uk] = best_g;
    }, exec);

    for (Eigen::Index col = 0; col < k; ++col) {
        const std::size_t uk = static_cast<std::size_t>(col);
        if (best_idx[uk] < 0) continue;
        out.valid[uk] = true;
        out.s[col] = s_all[uk];
        out.doa[uk] = grid[static_cast<std::size_t>(best_idx[uk])];
    }

    const Eigen::Index m_all = static_cast<Eigen::Index>(all_rotations.size());
    out.p_hat = MatrixXd::Zero(m_all, k);
    parallel_for(static_cast<std::size_t>(m_all), [&](std::size_t mi) {
        const Eigen::Index m = static_cast<Eigen::Index>(mi);
        for (Eigen::Index col = 0; col < k; ++col) {
            if (!out.valid[static_cast<std::size_t>(col)]) continue;
            out.p_hat(m, col) = n * pattern_gain(pattern, all_rotations[mi], out.doa[static_cast<std::size_t>(col)]) *
                                out.s[col];
        }
    }, exec);
    out.z_hat = (out.p_hat.array() > stats.threshold).cast<int>();
    return out;
}

std::vector<int> support_indices(const Eigen::VectorXi& z_row, int antennas) {
    std::vector<int> idx;
    for (Eigen::Index k = 0; k < z_row.size(); ++k)
        if (z_row[k] != 0)
            for (int a = 0; a < antennas; ++a) idx.push_back(static_cast<int>(k) * antennas + a);
    return idx;
}

MatrixXcd sparsity_aided_ls(const MatrixXcd& y, const MatrixXcd& pilots,
                            const Eigen::VectorXi& z_row, int antennas) {
    const Eigen::Index l = pilots.rows();
    const Eigen::Index k = pilots.cols();
    if (y.rows() != l) throw std::invalid_argument("sparsity_aided_ls: observation length mismatch");
    if (y.cols() != antennas) throw std::invalid_argument("sparsity_aided_ls: antenna count mismatch");
    if (z_row.size() != k) throw std::invalid_argument("sparsity_aided_ls: sparsity row mismatch");
    std::vector<Eigen::Index> sup;
    for (Eigen::Index j = 0; j < k; ++j)
        if (z_row[j] != 0) sup.push_back(j);
    MatrixXcd h = MatrixXcd::Zero(antennas, k);
    if (sup.empty()) return h;
    MatrixXcd xs(l, static_cast<Eigen::Index>(sup.size()));
    for (std::size_t i = 0; i < sup.size(); ++i) xs.col(static_cast<Eigen::Index>(i)) = pilots.col(sup[i]);
    // One decomposition serves every antenna; minimum-norm when rank deficient.
    Eigen::CompleteOrthogonalDecomposition<MatrixXcd> cod(xs);
    const MatrixXcd sol = cod.solve(y); // |sup| x N
    for (std::size_t i = 0; i < sup.size(); ++i)
        for (Eigen::Index a = 0; a < antennas; ++a) h(a, sup[i]) = sol(static_cast<Eigen::Index>(i), a);
    return h;
}

double nmse(const MatrixXcd& estimate, const MatrixXcd& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw std::invalid_argument("nmse: shape mismatch");
    const double denom = truth.squaredNorm();
    if (!(denom > 0.0)) throw std::invalid_argument("nmse: zero-norm truth");
    return (estimate - truth).squaredNorm() / denom;
}

double nmse(const MatrixXd& estimate, const MatrixXd& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw std::invalid_argument("nmse: shape mismatch");
    const double denom = truth.squaredNorm();
    if (!(denom > 0.0)) throw std::invalid_argument("nmse: zero-norm truth");
    return (estimate - truth).squaredNorm() / denom;
}

} // namespace sixdma::estimate
