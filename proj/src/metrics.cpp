#include "sixdma/metrics.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace sixdma::metrics {

namespace {
constexpr double kRadPerDeg = M_PI / 180.0;

double wrap_pi(double a) {
    double w = std::fmod(a + M_PI, 2.0 * M_PI);
    if (w < 0.0) w += 2.0 * M_PI;
    return w - M_PI;
}

UserChannelSpec draw_one_user(const ScenarioDistribution& s, Rng& rng) {
    // Center direction: hotspot member or uniform background user.
    double az, el;
    if (rng.uniform() < s.non_hotspot_ratio || s.hotspots.empty()) {
        az = rng.uniform(-180.0, 180.0);
        el = rng.uniform(s.uniform_elevation_min_deg, s.uniform_elevation_max_deg);
    } else {
        double pick = rng.uniform();
        std::size_t idx = 0;
        double acc = 0.0;
        for (std::size_t i = 0; i < s.hotspots.size(); ++i) {
            acc += s.hotspots[i].weight;
            if (pick <= acc) { idx = i; break; }
            idx = i;
        }
        const Hotspot& h = s.hotspots[idx];
        az = h.azimuth_deg + h.radius_deg * rng.gaussian();
        el = h.elevation_deg + h.radius_deg * rng.gaussian();
    }
    const int npaths = s.paths_min + static_cast<int>(rng.uniform_index(
                           static_cast<std::uint64_t>(s.paths_max - s.paths_min + 1)));
    std::vector<channel::PathComponent> paths(static_cast<std::size_t>(npaths));
    const double mu = s.user_power / npaths;
    for (auto& p : paths) {
        const double paz = az + s.path_spread_deg * rng.gaussian();
        const double pel = el + s.path_spread_deg * rng.gaussian();
        p.phi = wrap_pi(paz * kRadPerDeg);
        p.theta = std::clamp(pel * kRadPerDeg, -M_PI_2, M_PI_2);
        p.gain = std::sqrt(mu) * rng.cgaussian();
    }
    return UserChannelSpec(std::move(paths));
}
} // namespace

void ScenarioDistribution::validate() const {
    if (num_users < 1) throw std::invalid_argument("ScenarioDistribution: num_users must be >= 1");
    if (non_hotspot_ratio < 0.0 || non_hotspot_ratio > 1.0)
        throw std::invalid_argument("ScenarioDistribution: non_hotspot_ratio must lie in [0,1]");
    if (paths_min < 1 || paths_max < paths_min)
        throw std::invalid_argument("ScenarioDistribution: invalid path-count law");
    if (!hotspots.empty()) {
        double w = 0.0;
        for (const auto& h : hotspots) {
            if (h.weight < 0.0) throw std::invalid_argument("ScenarioDistribution: negative hotspot weight");
            w += h.weight;
        }
        if (std::abs(w - 1.0) > 1e-9)
            throw std::invalid_argument("ScenarioDistribution: hotspot weights must sum to 1");
    }
    if (!(user_power > 0.0)) throw std::invalid_argument("ScenarioDistribution: user_power must be > 0");
}

std::vector<UserChannelSpec> ScenarioDistribution::draw_users(std::uint64_t trial) const {
    Rng rng = Rng(seed).fork(trial);
    std::vector<UserChannelSpec> users;
    users.reserve(static_cast<std::size_t>(num_users));
    for (int k = 0; k < num_users; ++k) {
        Rng sub = rng.fork(static_cast<std::uint64_t>(k));
        users.push_back(draw_one_user(*this, sub));
    }
    return users;
}

std::vector<UserChannelSpec> ScenarioDistribution::draw_users_frozen_geometry(std::uint64_t trial) const {
    std::vector<UserChannelSpec> users = draw_users(0);
    Rng rng = Rng(seed).fork(0xf05e).fork(trial);
    for (auto& u : users)
        for (auto& p : u.paths) {
            const double mag = std::abs(p.gain);
            p.gain = mag * rng.cgaussian();
        }
    return users;
}

double instantaneous_capacity(const MatrixXcd& h, const LinkBudget& budget) {
    if (!h.allFinite()) throw std::invalid_argument("instantaneous_capacity: non-finite entries");
    if (h.size() == 0) return 0.0;
    const double c = budget.snr();
    MatrixXcd gram;
    if (h.rows() >= h.cols())
        gram = MatrixXcd::Identity(h.cols(), h.cols()) + c * (h.adjoint() * h);
    else
        gram = MatrixXcd::Identity(h.rows(), h.rows()) + c * (h * h.adjoint());
    const Eigen::LLT<MatrixXcd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("instantaneous_capacity: factorization failed");
    double log2det = 0.0;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) log2det += 2.0 * std::log2(l(i, i).real());
    return log2det;
}

MonteCarloEstimate monte_carlo_avg_capacity(const std::function<MatrixXcd(std::uint64_t)>& sampler,
                                            int trials, const LinkBudget& budget, Exec exec) {
    if (trials < 1) throw std::invalid_argument("monte_carlo_avg_capacity: trials must be >= 1");
    std::vector<double> values(static_cast<std::size_t>(trials));
    parallel_for(static_cast<std::size_t>(trials),
                 [&](std::size_t t) { values[t] = instantaneous_capacity(sampler(t), budget); },
                 exec);
    MonteCarloEstimate est;
    est.trials = trials;
    est.mean = pairwise_sum(values) / trials;
    if (trials > 1) {
        std::vector<double> sq(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double d = values[i] - est.mean;
            sq[i] = d * d;
        }
        est.std_error = std::sqrt(pairwise_sum(sq) / (static_cast<double>(trials) * (trials - 1)));
    }
    return est;
}

MonteCarloEstimate monte_carlo_avg_capacity(const std::vector<SurfacePose>& poses,
                                            const std::vector<LocalArray>& arrays,
                                            const AntennaPattern& pattern,
                                            const ScenarioDistribution& scenario, int trials,
                                            const LinkBudget& budget, Exec exec) {
    scenario.validate();
    return monte_carlo_avg_capacity(
        [&](std::uint64_t t) {
            return channel::assemble_channel_matrix(poses, arrays, pattern, scenario.draw_users(t),
                                                    budget);
        },
        trials, budget, exec);
}

BeamformingSet::BeamformingSet(std::vector<VectorXcd> w, double cap) : beams(std::move(w)), p_max(cap) {
    double total = 0.0;
    for (const auto& b : beams) total += b.squaredNorm();
    if (total > p_max + 1e-9)
        throw std::invalid_argument("BeamformingSet: total beam power exceeds the cap");
}

double sum_rate_beamforming(const MatrixXcd& h, const BeamformingSet& w, const LinkBudget& budget) {
    if (static_cast<Eigen::Index>(w.beams.size()) != h.cols())
        throw std::invalid_argument("sum_rate_beamforming: one beam per user required");
    for (const auto& b : w.beams)
        if (b.size() != h.rows())
            throw std::invalid_argument("sum_rate_beamforming: beam dimension mismatch");
    double rate = 0.0;
    for (Eigen::Index k = 0; k < h.cols(); ++k) {
        const VectorXcd hk = h.col(k);
        const double sig = std::norm(hk.dot(w.beams[static_cast<std::size_t>(k)]));
        double interf = 0.0;
        for (Eigen::Index j = 0; j < h.cols(); ++j)
            if (j != k) interf += std::norm(hk.dot(w.beams[static_cast<std::size_t>(j)]));
        rate += std::log2(1.0 + sig / (interf + budget.noise_power));
    }
    return rate;
}

double capacity_upper_bound(const MatrixXd& power_matrix, const LinkBudget& budget) {
    if ((power_matrix.array() < 0.0).any())
        throw std::invalid_argument("capacity_upper_bound: power entries must be >= 0");
    const double c = budget.snr();
    double bound = 0.0;
    for (Eigen::Index k = 0; k < power_matrix.cols(); ++k)
        bound += std::log2(1.0 + c * power_matrix.col(k).sum());
    return bound;
}

} // namespace sixdma::metrics
