#include "sixdma/pathplan.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sixdma::pathplan {

namespace {
MovePlan finish(const std::vector<Vec3>& initial, const std::vector<Vec3>& destinations,
                std::vector<int> assignment) {
    MovePlan plan;
    plan.assignment = std::move(assignment);
    plan.per_move_distance.resize(initial.size());
    for (std::size_t n = 0; n < initial.size(); ++n) {
        plan.per_move_distance[n] =
            (initial[n] - destinations[static_cast<std::size_t>(plan.assignment[n])]).norm();
        plan.total_distance += plan.per_move_distance[n];
    }
    return plan;
}
} // namespace

MovePlan greedy_match(const std::vector<Vec3>& initial, const std::vector<Vec3>& destinations) {
    if (initial.empty() || initial.size() != destinations.size())
        throw std::invalid_argument("greedy_match: lists must be non-empty and of equal length");
    std::vector<bool> claimed(destinations.size(), false);
    std::vector<int> assignment(initial.size(), -1);
    for (std::size_t n = 0; n < initial.size(); ++n) {
        double best = std::numeric_limits<double>::infinity();
        int pick = -1;
        for (std::size_t d = 0; d < destinations.size(); ++d) {
            if (claimed[d]) continue;
            const double w = (initial[n] - destinations[d]).norm();
            if (w < best) { // strict: ties keep the lowest destination index
                best = w;
                pick = static_cast<int>(d);
            }
        }
        claimed[static_cast<std::size_t>(pick)] = true;
        assignment[n] = pick;
    }
    return finish(initial, destinations, std::move(assignment));
}

MovePlan brute_force_match(const std::vector<Vec3>& initial, const std::vector<Vec3>& destinations) {
    if (initial.empty() || initial.size() != destinations.size())
        throw std::invalid_argument("brute_force_match: lists must be non-empty and of equal length");
    if (initial.size() > 9) throw std::invalid_argument("brute_force_match: N must be <= 9");
    std::vector<int> perm(initial.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best_perm = perm;
    double best_total = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t n = 0; n < initial.size(); ++n)
            total += (initial[n] - destinations[static_cast<std::size_t>(perm[n])]).norm();
        if (total < best_total) { // next_permutation visits lexicographic order
            best_total = total;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return finish(initial, destinations, std::move(best_perm));
}

} // namespace sixdma::pathplan
