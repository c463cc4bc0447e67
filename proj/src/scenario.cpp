#include "sixdma/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sixdma::scenario {

namespace {

using nlohmann::json;

constexpr double kRadPerDeg = M_PI / 180.0;

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& known) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key))
            throw std::invalid_argument("scenario: unknown field '" + where + key + "'");
}

double halton(int index, int base) {
    double f = 1.0, r = 0.0;
    int i = index;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

} // namespace

RotationAngles rotation_facing(const Vec3& direction) {
    const Vec3 d = direction.normalized();
    const double sy = std::clamp(-d.y(), -1.0, 1.0);
    if (std::abs(d.x()) < 1e-15 && std::abs(d.z()) < 1e-15)
        return RotationAngles(0.0, 0.0, std::asin(sy));
    return RotationAngles(0.0, std::atan2(d.z(), d.x()), std::asin(sy));
}

std::vector<SurfacePose> fpa_poses(const ScenarioFile& sc) {
    const int b = sc.num_surfaces;
    std::vector<SurfacePose> poses(static_cast<std::size_t>(b));
    const double r0 = std::max(4.0 * sc.wavelength, 1.2 * sc.constraints.d_min);
    const double dz = 1.2 * sc.constraints.d_min;
    int idx = 0;
    for (int sector = 0; sector < 3 && idx < b; ++sector) {
        const int in_sector = (b - idx + (2 - sector)) / (3 - sector);
        const double az = sector * 2.0 * M_PI / 3.0;
        const Vec3 dir(std::cos(az), std::sin(az), 0.0);
        for (int i = 0; i < in_sector && idx < b; ++i, ++idx) {
            SurfacePose p;
            p.position = r0 * dir + Vec3(0.0, 0.0, (i - 0.5 * (in_sector - 1)) * dz);
            p.rotation = rotation_facing(dir);
            poses[static_cast<std::size_t>(idx)] = p;
        }
    }
    return poses;
}

DiscreteGrid build_discrete_grid(const ScenarioFile& sc, int num_positions, int rotations_per_position) {
    DiscreteGrid grid;
    const double rmin = std::max(2.0 * sc.constraints.d_min,
                                 sc.region.shape == SiteRegion::Shape::Sphere ? 0.4 * sc.region.radius : 0.0);
    for (int m = 0; m < num_positions; ++m) {
        // Halton-sequence shell points: prefixes of a longer grid reproduce a
        // shorter one exactly.
        const double u = halton(m + 1, 2);
        const double v = halton(m + 1, 3);
        const double w = halton(m + 1, 5);
        const double az = 2.0 * M_PI * u - M_PI;
        const double el = std::asin(2.0 * v - 1.0);
        double radius;
        if (sc.region.shape == SiteRegion::Shape::Sphere)
            radius = rmin + (sc.region.radius - rmin) * (0.5 + 0.5 * w);
        else
            radius = rmin + 0.5 * w;
        Vec3 q(radius * std::cos(el) * std::cos(az), radius * std::cos(el) * std::sin(az),
               radius * std::sin(el));
        q = geometry::project_into_region(q, sc.region);
        grid.positions.push_back(q);

        std::vector<RotationAngles> rots;
        const Vec3 outward = q.norm() > 1e-12 ? Vec3(q.normalized()) : Vec3(1.0, 0.0, 0.0);
        rots.push_back(rotation_facing(outward));
        for (int l = 1; l < rotations_per_position; ++l) {
            // Deterministic tilts around the outward rotation.
            const double tilt = 0.35 * l;
            const double swing = 2.0 * M_PI * halton(l + 1, 7);
            const Vec3 axis = std::abs(outward.z()) < 0.9 ? Vec3(0.0, 0.0, 1.0) : Vec3(1.0, 0.0, 0.0);
            const Vec3 t1 = outward.cross(axis).normalized();
            const Vec3 t2 = outward.cross(t1);
            const Vec3 dir =
                (std::cos(tilt) * outward + std::sin(tilt) * (std::cos(swing) * t1 + std::sin(swing) * t2))
                    .normalized();
            rots.push_back(rotation_facing(dir));
        }
        grid.rotations_per_position.push_back(std::move(rots));
    }
    grid.validate();
    return grid;
}

std::vector<Vec3> estimation_directions(const ScenarioFile& sc, int count) {
    std::vector<Vec3> dirs;
    dirs.reserve(static_cast<std::size_t>(count));
    const double zlo = std::sin(sc.users.uniform_elevation_min_deg * kRadPerDeg);
    const double zhi = std::sin(sc.users.uniform_elevation_max_deg * kRadPerDeg);
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double z = zlo + (zhi - zlo) * (i + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double az = golden * i;
        dirs.emplace_back(r * std::cos(az), r * std::sin(az), z);
    }
    return dirs;
}

DiscreteGrid estimation_grid(const ScenarioFile& sc, int count) {
    DiscreteGrid grid;
    const double radius = sc.region.shape == SiteRegion::Shape::Sphere
                              ? 0.8 * sc.region.radius
                              : 0.4 * (sc.region.box_max - sc.region.box_min).minCoeff();
    for (const Vec3& dir : estimation_directions(sc, count)) {
        grid.positions.push_back(
            geometry::project_into_region(sc.region.center + radius * dir, sc.region));
        grid.rotations_per_position.push_back({rotation_facing(dir)});
    }
    grid.validate();
    return grid;
}

ScenarioFile load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("scenario: cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("scenario: parse error: ") + e.what());
    }

    reject_unknown(j, "", {"wavelength_m", "surfaces", "region", "constraints", "pattern", "users",
                           "powers", "grids", "seeds"});
    ScenarioFile sc;
    sc.raw_text = j.dump();

    sc.wavelength = j.at("wavelength_m").get<double>();
    if (!(sc.wavelength > 0.0)) throw std::invalid_argument("scenario: wavelength_m must be > 0");

    const json& s = j.at("surfaces");
    reject_unknown(s, "surfaces.", {"count", "antennas_h", "antennas_v", "spacing_wavelengths"});
    sc.num_surfaces = s.at("count").get<int>();
    sc.antennas_h = s.at("antennas_h").get<int>();
    sc.antennas_v = s.at("antennas_v").get<int>();
    sc.spacing_wavelengths = s.value("spacing_wavelengths", 0.5);
    if (sc.num_surfaces < 1) throw std::invalid_argument("scenario: surfaces.count must be >= 1");
    if (sc.antennas_h < 1 || sc.antennas_v < 1)
        throw std::invalid_argument("scenario: surfaces.antennas_h/antennas_v must be >= 1");
    if (!(sc.spacing_wavelengths > 0.0))
        throw std::invalid_argument("scenario: surfaces.spacing_wavelengths must be > 0");

    const json& r = j.at("region");
    const std::string kind = r.at("type").get<std::string>();
    if (kind == "sphere") {
        reject_unknown(r, "region.", {"type", "center_m", "radius_m"});
        const auto c = r.value("center_m", std::vector<double>{0.0, 0.0, 0.0});
        if (c.size() != 3) throw std::invalid_argument("scenario: region.center_m needs 3 entries");
        const double radius = r.at("radius_m").get<double>();
        if (!(radius > 0.0)) throw std::invalid_argument("scenario: region.radius_m must be > 0");
        sc.region = SiteRegion::sphere(Vec3(c[0], c[1], c[2]), radius);
    } else if (kind == "box") {
        reject_unknown(r, "region.", {"type", "min_m", "max_m"});
        const auto lo = r.at("min_m").get<std::vector<double>>();
        const auto hi = r.at("max_m").get<std::vector<double>>();
        if (lo.size() != 3 || hi.size() != 3)
            throw std::invalid_argument("scenario: region.min_m/max_m need 3 entries");
        for (int d = 0; d < 3; ++d)
            if (!(lo[static_cast<std::size_t>(d)] < hi[static_cast<std::size_t>(d)]))
                throw std::invalid_argument("scenario: region.min_m must be componentwise < max_m");
        sc.region = SiteRegion::box(Vec3(lo[0], lo[1], lo[2]), Vec3(hi[0], hi[1], hi[2]));
    } else {
        throw std::invalid_argument("scenario: region.type must be sphere or box");
    }

    const json& c = j.at("constraints");
    reject_unknown(c, "constraints.", {"d_min_m"});
    const double d_min = c.at("d_min_m").get<double>();
    if (!(d_min > 0.0)) throw std::invalid_argument("scenario: constraints.d_min_m must be > 0");
    sc.constraints = ConstraintConfig(d_min);

    const json& p = j.at("pattern");
    const std::string ptype = p.at("type").get<std::string>();
    if (ptype == "isotropic") {
        reject_unknown(p, "pattern.", {"type"});
        sc.pattern = AntennaPattern::isotropic();
    } else if (ptype == "directive") {
        reject_unknown(p, "pattern.",
                       {"type", "g_max_dbi", "theta_3db_deg", "phi_3db_deg", "g_s_db", "g_v_db"});
        try {
            sc.pattern = AntennaPattern::directive(p.value("g_max_dbi", 8.0), p.value("theta_3db_deg", 25.0),
                                                   p.value("phi_3db_deg", 25.0), p.value("g_s_db", 25.0),
                                                   p.value("g_v_db", 25.0));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string("scenario: pattern invalid: ") + e.what());
        }
    } else {
        throw std::invalid_argument("scenario: pattern.type must be isotropic or directive");
    }

    const json& u = j.at("users");
    reject_unknown(u, "users.",
                   {"count", "non_hotspot_ratio", "hotspots", "uniform_elevation_deg", "paths"});
    sc.users.num_users = u.at("count").get<int>();
    sc.users.non_hotspot_ratio = u.value("non_hotspot_ratio", 0.6);
    if (u.contains("uniform_elevation_deg")) {
        const auto band = u.at("uniform_elevation_deg").get<std::vector<double>>();
        if (band.size() != 2 || !(band[0] <= band[1]))
            throw std::invalid_argument("scenario: users.uniform_elevation_deg must be [lo, hi]");
        sc.users.uniform_elevation_min_deg = band[0];
        sc.users.uniform_elevation_max_deg = band[1];
    }
    if (u.contains("hotspots")) {
        for (const auto& h : u.at("hotspots")) {
            reject_unknown(h, "users.hotspots[].", {"azimuth_deg", "elevation_deg", "radius_deg", "weight"});
            metrics::Hotspot hs;
            hs.azimuth_deg = h.at("azimuth_deg").get<double>();
            hs.elevation_deg = h.value("elevation_deg", 0.0);
            hs.radius_deg = h.value("radius_deg", 10.0);
            hs.weight = h.value("weight", 1.0);
            sc.users.hotspots.push_back(hs);
        }
    }
    if (u.contains("paths")) {
        const json& pa = u.at("paths");
        reject_unknown(pa, "users.paths.", {"min", "max", "spread_deg"});
        sc.users.paths_min = pa.value("min", 1);
        sc.users.paths_max = pa.value("max", sc.users.paths_min);
        sc.users.path_spread_deg = pa.value("spread_deg", 5.0);
    }

    const json& pw = j.at("powers");
    reject_unknown(pw, "powers.", {"tx_dbm", "noise_dbm", "p_max_dbm"});
    sc.tx_power = dbm_to_watts(pw.at("tx_dbm").get<double>());
    sc.noise_power = dbm_to_watts(pw.at("noise_dbm").get<double>());
    sc.p_max = dbm_to_watts(pw.value("p_max_dbm", pw.at("tx_dbm").get<double>() + 10.0));

    if (j.contains("grids")) {
        const json& g = j.at("grids");
        reject_unknown(g, "grids.",
                       {"positions", "rotations_per_position", "doa_grid", "sampled_poses", "pilot_len"});
        sc.grid_positions = g.value("positions", 16);
        sc.grid_rotations = g.value("rotations_per_position", 2);
        sc.doa_grid = g.value("doa_grid", 256);
        sc.sampled_poses = g.value("sampled_poses", 16);
        sc.pilot_len = g.value("pilot_len", 16);
        if (sc.grid_positions < 1 || sc.grid_rotations < 1 || sc.doa_grid < 1 || sc.sampled_poses < 1 ||
            sc.pilot_len < 1)
            throw std::invalid_argument("scenario: grids entries must be >= 1");
    }

    const json& seeds = j.at("seeds");
    reject_unknown(seeds, "seeds.", {"master"});
    sc.master_seed = seeds.at("master").get<std::uint64_t>();
    sc.users.seed = sc.master_seed;

    try {
        sc.users.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("scenario: users invalid: ") + e.what());
    }
    return sc;
}

ValidationReport validate_scenario(const std::string& path) {
    ValidationReport report;
    ScenarioFile sc;
    try {
        sc = load_scenario(path);
    } catch (const std::exception& e) {
        report.ok = false;
        report.lines.push_back(std::string("FAIL ") + e.what());
        return report;
    }
    report.lines.push_back("OK   fields parse and satisfy load-time invariants");

    const auto arr = sc.array();
    if (std::abs(arr.normal.norm() - 1.0) > 1e-12) {
        report.ok = false;
        report.lines.push_back("FAIL surface normal is not unit norm");
    } else {
        report.lines.push_back("OK   surface normal unit norm");
    }

    const auto poses = fpa_poses(sc);
    if (geometry::poses_feasible(poses, sc.arrays(), sc.region, sc.constraints))
        report.lines.push_back("OK   baseline poses satisfy distance/reflection/blockage/region");
    else {
        report.ok = false;
        report.lines.push_back("FAIL baseline poses violate a pose constraint (check d_min_m vs region)");
    }

    try {
        build_discrete_grid(sc, sc.grid_positions, sc.grid_rotations).validate();
        report.lines.push_back("OK   discrete grid well-formed");
    } catch (const std::exception& e) {
        report.ok = false;
        report.lines.push_back(std::string("FAIL discrete grid: ") + e.what());
    }
    return report;
}

std::uint64_t config_hash(const std::string& canonical_text) {
    // FNV-1a 64-bit.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : canonical_text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

void RunManifest::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << "subcommand: " << subcommand << '\n';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash));
    out << "config_hash: " << buf << '\n';
    out << "seed: " << seed << '\n';
    out << "tool_version: " << tool_version << '\n';
    for (const auto& o : overrides) out << "override: " << o << '\n';
    for (const auto& f : outputs) out << "output: " << f << '\n';
}

} // namespace sixdma::scenario
