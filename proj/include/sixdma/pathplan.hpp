#ifndef SIXDMA_PATHPLAN_HPP
#define SIXDMA_PATHPLAN_HPP

#include <vector>

#include "sixdma/geometry.hpp"

namespace sixdma::pathplan {

using geometry::Vec3;

// Bijective antenna-to-destination assignment with straight-line distances.
struct MovePlan {
    std::vector<int> assignment; // initial index -> destination index
    std::vector<double> per_move_distance;
    double total_distance = 0.0;
};

// Antennas claim destinations in index order; each takes the nearest
// unclaimed destination, ties to the lowest destination index.
MovePlan greedy_match(const std::vector<Vec3>& initial, const std::vector<Vec3>& destinations);

// Exact minimum-total-distance permutation over N! candidates (N <= 9);
// ties resolve to the lexicographically smallest permutation.
MovePlan brute_force_match(const std::vector<Vec3>& initial, const std::vector<Vec3>& destinations);

} // namespace sixdma::pathplan

#endif
