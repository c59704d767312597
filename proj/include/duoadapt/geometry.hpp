#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "duoadapt/error.hpp"

namespace duoadapt {

inline constexpr int kNumJoints = 21;
inline constexpr int kWristIndex = 0;

using JointMatrix = Eigen::Matrix<double, kNumJoints, 3>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// 21 ordered 3D joints of one hand, millimeters, in one camera's frame.
// Row 0 is the wrist (root).
struct JointSet {
    JointMatrix pts = JointMatrix::Zero();

    Vec3 joint(int i) const { return pts.row(i).transpose(); }
    Vec3 wrist() const { return pts.row(kWristIndex).transpose(); }
    bool is_finite() const { return pts.allFinite(); }
};

// Proper rotation in SO(3). The factory enforces the invariants, so a
// Rotation value is always orthogonal with det = +1 within 1e-9.
class Rotation {
public:
    static constexpr double kOrthoTol = 1e-9;

    Rotation() : m_(Mat3::Identity()) {}

    static Rotation identity() { return Rotation(); }

    static Rotation from_matrix(const Mat3& m) {
        if (!m.allFinite()) throw InvalidInputError("rotation matrix has non-finite entries");
        const double ortho = (m.transpose() * m - Mat3::Identity()).norm();
        if (ortho > kOrthoTol)
            throw InvalidInputError("matrix is not orthogonal: |R^T R - I|_F = " + std::to_string(ortho));
        if (std::abs(m.determinant() - 1.0) > kOrthoTol)
            throw InvalidInputError("matrix is a reflection or scaled: det = " + std::to_string(m.determinant()));
        return Rotation(m);
    }

    static Rotation from_axis_angle(const Vec3& axis, double angle_rad) {
        const double n = axis.norm();
        if (!(n > 0.0) || !std::isfinite(angle_rad))
            throw InvalidInputError("axis-angle requires a nonzero finite axis and angle");
        return Rotation(Eigen::AngleAxisd(angle_rad, axis / n).toRotationMatrix());
    }

    const Mat3& matrix() const { return m_; }
    Rotation transposed() const { return Rotation(m_.transpose()); }

    JointSet apply(const JointSet& j) const {
        JointSet out;
        out.pts = j.pts * m_.transpose();
        return out;
    }

private:
    explicit Rotation(const Mat3& m) : m_(m) {}
    Mat3 m_;
};

namespace detail {

struct Svd3 {
    Mat3 u, v;
    Vec3 sv;  // descending
};

inline Svd3 svd3(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return {svd.matrixU(), svd.matrixV(), svd.singularValues()};
}

// Nearest SO(3) element in Frobenius norm: U diag(1,1,det(UV^T)) V^T.
inline Mat3 nearest_rotation(const Svd3& s) {
    Mat3 d = Mat3::Identity();
    d(2, 2) = (s.u * s.v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return s.u * d * s.v.transpose();
}

}  // namespace detail

// Subtract the wrist from every joint; joint 0 lands exactly at the origin.
inline JointSet wrist_align(const JointSet& j) {
    if (!j.is_finite()) throw InvalidInputError("wrist_align: non-finite joint coordinates");
    JointSet out;
    out.pts = j.pts.rowwise() - j.pts.row(kWristIndex);
    return out;
}

// Second singular value of the aligned cross-covariance below this means the
// joints are too close to collinear for the rotation to be identifiable.
inline constexpr double kDegenerateSingularValue = 1e-9;

// Best rotation taking wrist-aligned `a` onto wrist-aligned `b` in the
// least-squares sense. Cross-covariance SVD with determinant correction;
// both inputs are aligned internally first. All 21 joints weigh equally
// (the wrist contributes a zero row, which is harmless).
inline Rotation kabsch_rotation(const JointSet& a, const JointSet& b) {
    const JointSet aa = wrist_align(a);
    const JointSet bb = wrist_align(b);
    // H = sum_i a_i b_i^T; maximizing trace(R H) gives R = V D U^T.
    const Mat3 h = aa.pts.transpose() * bb.pts;
    const detail::Svd3 s = detail::svd3(h);
    if (s.sv(1) <= kDegenerateSingularValue)
        throw DegenerateConfigError("kabsch_rotation: joint configuration is collinear or coincident");
    Mat3 d = Mat3::Identity();
    d(2, 2) = (s.v * s.u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return Rotation::from_matrix(s.v * d * s.u.transpose());
}

// Chordal L2 mean: (weighted) arithmetic mean of the matrices projected back
// to SO(3). Closed form, and exact for the symmetric two-sample case.
inline Rotation so3_mean(const std::vector<Rotation>& rs, const std::vector<double>* weights = nullptr) {
    if (rs.empty()) throw InvalidInputError("so3_mean: empty rotation list");
    if (weights) {
        if (weights->size() != rs.size())
            throw InvalidInputError("so3_mean: weight count does not match rotation count");
        double sum = 0.0;
        for (double w : *weights) {
            if (!(w >= 0.0)) throw InvalidParameterError("so3_mean: weights must be nonnegative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw InvalidParameterError("so3_mean: weights must sum to 1");
    }
    Mat3 acc = Mat3::Zero();
    for (std::size_t i = 0; i < rs.size(); ++i) {
        const double w = weights ? (*weights)[i] : 1.0 / static_cast<double>(rs.size());
        acc += w * rs[i].matrix();
    }
    const detail::Svd3 s = detail::svd3(acc);
    if (s.sv(2) <= 1e-12)
        throw DegenerateMeanError("so3_mean: mean matrix is rank-deficient, projection ambiguous");
    return Rotation::from_matrix(detail::nearest_rotation(s));
}

// Geodesic distance on SO(3), radians in [0, pi]: the angle with
// cos = (trace(r1^T r2) - 1) / 2. Evaluated through atan2 of the relative
// rotation's sine and cosine; plain acos cannot resolve angles below ~3e-8.
inline double geodesic_angle(const Rotation& r1, const Rotation& r2) {
    const Mat3 rel = r1.matrix().transpose() * r2.matrix();
    const double c = (rel.trace() - 1.0) / 2.0;
    const Vec3 skew(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
    const double s = 0.5 * skew.norm();
    return std::atan2(s, std::clamp(c, -1.0, 1.0));
}

inline double frobenius_distance(const Rotation& r1, const Rotation& r2) {
    return (r1.matrix() - r2.matrix()).norm();
}

inline double deg_to_rad(double deg) { return deg * M_PI / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / M_PI; }

// Uniform random rotation (normalized quaternion from four normal deviates).
template <typename URBG>
Rotation random_rotation(URBG& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    while (q.norm() < 1e-12) q = Eigen::Quaterniond(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    return Rotation::from_matrix(q.toRotationMatrix());
}

// Random rotation with angle uniform in [0, max_angle_rad] and uniform axis.
template <typename URBG>
Rotation random_small_rotation(URBG& rng, double max_angle_rad) {
    if (max_angle_rad <= 0.0) return Rotation::identity();
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
    while (axis.norm() < 1e-12) axis = Vec3(gauss(rng), gauss(rng), gauss(rng));
    std::uniform_real_distribution<double> u(0.0, max_angle_rad);
    return Rotation::from_axis_angle(axis, u(rng));
}

}  // namespace duoadapt
