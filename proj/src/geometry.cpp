#include "sixdma/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace sixdma::geometry {

double wrap_angle(double a) {
    double w = std::fmod(a, 2.0 * M_PI);
    if (w < 0.0) w += 2.0 * M_PI;
    if (w >= 2.0 * M_PI) w = 0.0;
    return w;
}

LocalArray::LocalArray(std::vector<Vec3> offs, const Vec3& n) : offsets(std::move(offs)), normal(n) {
    if (offsets.empty()) throw std::invalid_argument("LocalArray: offsets list must be non-empty");
    if (std::abs(normal.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("LocalArray: normal must have unit norm");
}

LocalArray LocalArray::uniform_planar(int n_h, int n_v, double spacing) {
    if (n_h < 1 || n_v < 1) throw std::invalid_argument("LocalArray: grid dimensions must be >= 1");
    std::vector<Vec3> offs;
    offs.reserve(static_cast<std::size_t>(n_h) * n_v);
    const double y0 = -0.5 * (n_h - 1) * spacing;
    const double z0 = -0.5 * (n_v - 1) * spacing;
    for (int v = 0; v < n_v; ++v)
        for (int h = 0; h < n_h; ++h)
            offs.emplace_back(0.0, y0 + h * spacing, z0 + v * spacing);
    return LocalArray(std::move(offs), Vec3(1.0, 0.0, 0.0));
}

SiteRegion SiteRegion::sphere(const Vec3& c, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("SiteRegion: sphere radius must be > 0");
    SiteRegion s;
    s.shape = Shape::Sphere;
    s.center = c;
    s.radius = r;
    return s;
}

SiteRegion SiteRegion::box(const Vec3& lo, const Vec3& hi) {
    if (!(lo.x() < hi.x() && lo.y() < hi.y() && lo.z() < hi.z()))
        throw std::invalid_argument("SiteRegion: box min must be componentwise < max");
    SiteRegion s;
    s.shape = Shape::Box;
    s.box_min = lo;
    s.box_max = hi;
    return s;
}

bool SiteRegion::contains(const Vec3& q, double tol) const {
    if (shape == Shape::Sphere) return (q - center).norm() <= radius + tol;
    for (int i = 0; i < 3; ++i)
        if (q[i] < box_min[i] - tol || q[i] > box_max[i] + tol) return false;
    return true;
}

ConstraintConfig::ConstraintConfig(double d) : d_min(d) {
    if (!(d_min > 0.0)) throw std::invalid_argument("ConstraintConfig: d_min must be > 0");
}

void DiscreteGrid::validate() const {
    if (positions.empty()) throw std::invalid_argument("DiscreteGrid: needs at least one position");
    if (rotations_per_position.size() != positions.size())
        throw std::invalid_argument("DiscreteGrid: rotation lists must align with positions");
    for (const auto& rl : rotations_per_position)
        if (rl.empty()) throw std::invalid_argument("DiscreteGrid: every position needs >= 1 rotation");
}

Mat3 rotation_matrix(const RotationAngles& u) {
    const double ca = std::cos(u.alpha), sa = std::sin(u.alpha);
    const double cb = std::cos(u.beta), sb = std::sin(u.beta);
    const double cg = std::cos(u.gamma), sg = std::sin(u.gamma);
    Mat3 r;
    r << cb * cg, cb * sg, -sb,                                          //
        sb * sa * cg - ca * sg, sb * sa * sg + ca * cg, cb * sa,         //
        ca * sb * cg + sa * sg, ca * sb * sg - sa * cg, ca * cb;
    return r;
}

std::array<Mat3, 3> rotation_matrix_partials(const RotationAngles& u) {
    const double ca = std::cos(u.alpha), sa = std::sin(u.alpha);
    const double cb = std::cos(u.beta), sb = std::sin(u.beta);
    const double cg = std::cos(u.gamma), sg = std::sin(u.gamma);
    Mat3 da, db, dg;
    da << 0, 0, 0,                                                       //
        sb * ca * cg + sa * sg, sb * ca * sg - sa * cg, cb * ca,         //
        -sa * sb * cg + ca * sg, -sa * sb * sg - ca * cg, -sa * cb;
    db << -sb * cg, -sb * sg, -cb,                                       //
        cb * sa * cg, cb * sa * sg, -sb * sa,                            //
        ca * cb * cg, ca * cb * sg, -ca * sb;
    dg << -cb * sg, cb * cg, 0,                                          //
        -sb * sa * sg - ca * cg, sb * sa * cg - ca * sg, 0,              //
        -ca * sb * sg + sa * cg, ca * sb * cg + sa * sg, 0;
    return {da, db, dg};
}

std::vector<Vec3> global_antenna_positions(const SurfacePose& pose, const LocalArray& array) {
    const Mat3 r = rotation_matrix(pose.rotation);
    std::vector<Vec3> out;
    out.reserve(array.offsets.size());
    for (const Vec3& o : array.offsets) out.push_back(pose.position + r * o);
    return out;
}

Vec3 surface_normal(const RotationAngles& u, const LocalArray& array) {
    return rotation_matrix(u) * array.normal;
}

Vec3 pointing_vector(double theta, double phi) {
    constexpr double tol = 1e-12;
    if (theta < -M_PI_2 - tol || theta > M_PI_2 + tol)
        throw std::invalid_argument("pointing_vector: elevation outside [-pi/2, pi/2]");
    if (phi < -M_PI - tol || phi > M_PI + tol)
        throw std::invalid_argument("pointing_vector: azimuth outside [-pi, pi]");
    return {std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi), std::sin(theta)};
}

std::pair<double, double> local_frame_direction(const RotationAngles& u, const Vec3& f) {
    const Vec3 fl = rotation_matrix(u).transpose() * f;
    const double sz = std::clamp(fl.z(), -1.0, 1.0);
    const double theta = std::asin(sz);
    const double ct = std::sqrt(std::max(0.0, 1.0 - sz * sz));
    const double phi = (ct < 1e-12) ? 0.0 : std::atan2(fl.y(), fl.x());
    return {theta, phi};
}

std::vector<std::pair<int, int>> check_min_distance(const std::vector<SurfacePose>& poses,
                                                    const ConstraintConfig& cfg) {
    if (poses.empty()) throw std::invalid_argument("check_min_distance: needs >= 1 pose");
    std::vector<std::pair<int, int>> bad;
    const double d2 = cfg.d_min * cfg.d_min;
    for (int b = 0; b < static_cast<int>(poses.size()); ++b)
        for (int j = b + 1; j < static_cast<int>(poses.size()); ++j)
            if ((poses[b].position - poses[j].position).squaredNorm() < d2) bad.emplace_back(b, j);
    return bad;
}

std::vector<std::pair<int, int>> check_no_reflection(const std::vector<SurfacePose>& poses,
                                                     const std::vector<LocalArray>& arrays) {
    if (poses.size() != arrays.size())
        throw std::invalid_argument("check_no_reflection: poses and arrays must align");
    std::vector<std::pair<int, int>> bad;
    for (int b = 0; b < static_cast<int>(poses.size()); ++b) {
        const Vec3 n = surface_normal(poses[b].rotation, arrays[b]);
        for (int j = 0; j < static_cast<int>(poses.size()); ++j) {
            if (j == b) continue;
            const Vec3 d = poses[j].position - poses[b].position;
            // Boundary equality is feasible; the scaled tolerance keeps exact
            // right-angle configurations feasible under rounding.
            if (n.dot(d) > 1e-9 * d.norm()) bad.emplace_back(b, j);
        }
    }
    return bad;
}

std::vector<int> check_no_blockage(const std::vector<SurfacePose>& poses,
                                   const std::vector<LocalArray>& arrays) {
    if (poses.size() != arrays.size())
        throw std::invalid_argument("check_no_blockage: poses and arrays must align");
    std::vector<int> bad;
    for (int b = 0; b < static_cast<int>(poses.size()); ++b) {
        const Vec3 n = surface_normal(poses[b].rotation, arrays[b]);
        if (n.dot(poses[b].position) < -1e-9 * poses[b].position.norm()) bad.push_back(b);
    }
    return bad;
}

Vec3 project_into_region(const Vec3& q, const SiteRegion& region) {
    if (region.shape == SiteRegion::Shape::Sphere) {
        const Vec3 d = q - region.center;
        const double n = d.norm();
        if (n <= region.radius) return q;
        return region.center + d * (region.radius / n);
    }
    Vec3 p;
    for (int i = 0; i < 3; ++i) p[i] = std::clamp(q[i], region.box_min[i], region.box_max[i]);
    return p;
}

bool poses_feasible(const std::vector<SurfacePose>& poses, const std::vector<LocalArray>& arrays,
                    const SiteRegion& region, const ConstraintConfig& cfg) {
    for (const auto& p : poses)
        if (!region.contains(p.position)) return false;
    if (!check_min_distance(poses, cfg).empty()) return false;
    if (!check_no_reflection(poses, arrays).empty()) return false;
    if (!check_no_blockage(poses, arrays).empty()) return false;
    return true;
}

} // namespace sixdma::geometry
