#ifndef SIXDMA_SCENARIO_HPP
#define SIXDMA_SCENARIO_HPP

#include <string>
#include <vector>

#include "sixdma/metrics.hpp"
#include "sixdma/optimize.hpp"

namespace sixdma::scenario {

using channel::AntennaPattern;
using channel::LinkBudget;
using channel::LocalArray;
using channel::SurfacePose;
using geometry::ConstraintConfig;
using geometry::DiscreteGrid;
using geometry::RotationAngles;
using geometry::SiteRegion;
using geometry::Vec3;
using metrics::ScenarioDistribution;

// Parsed and validated scenario file. Angles live in degrees and powers in
// dBm inside the file; everything here is radians and watts.
struct ScenarioFile {
    // surfaces
    int num_surfaces = 4;
    int antennas_h = 2;
    int antennas_v = 2;
    double spacing_wavelengths = 0.5;

    double wavelength = 0.1;

    SiteRegion region = SiteRegion::sphere(Vec3::Zero(), 1.0);
    ConstraintConfig constraints{0.1};
    AntennaPattern pattern = AntennaPattern::isotropic();
    ScenarioDistribution users;

    double tx_power = 1.0;
    double noise_power = 1.0;
    double p_max = 1.0;

    int grid_positions = 16;       // M
    int grid_rotations = 2;        // L_d
    int doa_grid = 256;            // G
    int sampled_poses = 16;        // M-bar
    int pilot_len = 16;

    std::uint64_t master_seed = 1;

    std::string raw_text; // canonical serialized form used for hashing

    LinkBudget budget() const { return LinkBudget(wavelength, tx_power, noise_power); }
    LocalArray array() const {
        return LocalArray::uniform_planar(antennas_h, antennas_v, spacing_wavelengths * wavelength);
    }
    std::vector<LocalArray> arrays() const {
        return std::vector<LocalArray>(static_cast<std::size_t>(num_surfaces), array());
    }
};

// Rotation whose boresight (local +x) points along the given unit direction.
RotationAngles rotation_facing(const Vec3& direction);

// Three-sector baseline: surfaces stacked vertically per sector on a small
// cylinder, sector normals 120 degrees apart. Always constraint-feasible.
std::vector<SurfacePose> fpa_poses(const ScenarioFile& sc);

// Quasi-uniform candidate positions in the region (Halton sequence) paired
// with outward-facing rotation lists; prefixes nest as M or L_d grow.
DiscreteGrid build_discrete_grid(const ScenarioFile& sc, int num_positions, int rotations_per_position);

// Candidate pose set for the estimation protocol: boresights quasi-uniform
// over the scenario's user elevation band, positions on the site shell along
// the boresight. Prefix-stable in the count.
DiscreteGrid estimation_grid(const ScenarioFile& sc, int count);

// Unit boresight directions of the same grid (index-aligned).
std::vector<Vec3> estimation_directions(const ScenarioFile& sc, int count);

// Throws std::invalid_argument naming the offending field on any violation;
// unknown fields are rejected.
ScenarioFile load_scenario(const std::string& path);

// Re-validates every module-level invariant and returns human-readable
// report lines; `ok` is false when any violation was found.
struct ValidationReport {
    bool ok = true;
    std::vector<std::string> lines;
};
ValidationReport validate_scenario(const std::string& path);

std::uint64_t config_hash(const std::string& canonical_text);

// Run manifest: one per run, structured text.
struct RunManifest {
    std::string subcommand;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::string tool_version;
    std::vector<std::string> outputs;
    std::vector<std::string> overrides;

    void write(const std::string& path) const;
};

} // namespace sixdma::scenario

#endif
