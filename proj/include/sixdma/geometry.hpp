#ifndef SIXDMA_GEOMETRY_HPP
#define SIXDMA_GEOMETRY_HPP

#include <Eigen/Dense>
#include <array>
#include <utility>
#include <vector>

namespace sixdma::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Wraps an angle into [0, 2*pi).
double wrap_angle(double a);

// 3D rotation angles about the x, y and z axes, stored normalized to [0, 2*pi).
struct RotationAngles {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    RotationAngles() = default;
    RotationAngles(double a, double b, double g)
        : alpha(wrap_angle(a)), beta(wrap_angle(b)), gamma(wrap_angle(g)) {}
};

// One surface's six pose parameters: center position and rotation.
struct SurfacePose {
    Vec3 position = Vec3::Zero();
    RotationAngles rotation;
};

// Antenna layout of one surface in its local frame plus the outward unit
// normal (which is also the directive-gain boresight).
struct LocalArray {
    std::vector<Vec3> offsets;
    Vec3 normal = Vec3(1.0, 0.0, 0.0);

    LocalArray() = default;
    LocalArray(std::vector<Vec3> offs, const Vec3& n);

    // Uniform planar array in the local y-z plane, spacing in meters,
    // boresight +x. Offsets are centered on the surface origin.
    static LocalArray uniform_planar(int n_h, int n_v, double spacing);
};

// Convex site region with closed-form Euclidean projection.
struct SiteRegion {
    enum class Shape { Sphere, Box } shape = Shape::Sphere;
    Vec3 center = Vec3::Zero(); // sphere
    double radius = 1.0;        // sphere
    Vec3 box_min = Vec3::Zero();
    Vec3 box_max = Vec3::Ones();

    static SiteRegion sphere(const Vec3& c, double r);
    static SiteRegion box(const Vec3& lo, const Vec3& hi);

    bool contains(const Vec3& q, double tol = 1e-12) const;
};

struct ConstraintConfig {
    double d_min = 0.1; // meters, > 0
    explicit ConstraintConfig(double d);
    ConstraintConfig() = default;
};

// Candidate discrete positions, each with its own list of candidate rotations.
struct DiscreteGrid {
    std::vector<Vec3> positions;
    std::vector<std::vector<RotationAngles>> rotations_per_position;

    void validate() const;
    std::size_t num_positions() const { return positions.size(); }
};

Mat3 rotation_matrix(const RotationAngles& u);

// Partial derivatives of the rotation matrix with respect to alpha, beta, gamma.
std::array<Mat3, 3> rotation_matrix_partials(const RotationAngles& u);

std::vector<Vec3> global_antenna_positions(const SurfacePose& pose, const LocalArray& array);

Vec3 surface_normal(const RotationAngles& u, const LocalArray& array);

// Unit arrival direction for elevation theta in [-pi/2, pi/2] and azimuth
// phi in [-pi, pi]; out-of-range angles are rejected.
Vec3 pointing_vector(double theta, double phi);

// (theta_local, phi_local) of a unit global direction seen from a surface
// rotated by u; phi_local is 0 by convention at the poles.
std::pair<double, double> local_frame_direction(const RotationAngles& u, const Vec3& f);

// All unordered pairs (b, j) closer than d_min; boundary equality is feasible.
std::vector<std::pair<int, int>> check_min_distance(const std::vector<SurfacePose>& poses,
                                                    const ConstraintConfig& cfg);

// All ordered pairs (b, j) with surface b's normal forming an acute angle
// with the direction to surface j's center.
std::vector<std::pair<int, int>> check_no_reflection(const std::vector<SurfacePose>& poses,
                                                     const std::vector<LocalArray>& arrays);

// All surfaces whose normal points back toward the reference point (origin).
std::vector<int> check_no_blockage(const std::vector<SurfacePose>& poses,
                                   const std::vector<LocalArray>& arrays);

Vec3 project_into_region(const Vec3& q, const SiteRegion& region);

// True when all three pose constraints and region membership hold.
bool poses_feasible(const std::vector<SurfacePose>& poses, const std::vector<LocalArray>& arrays,
                    const SiteRegion& region, const ConstraintConfig& cfg);

} // namespace sixdma::geometry

#endif
