#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

#include "ergolab/rng.hpp"

namespace ergolab {

enum class ManifoldFamily { Torus, Sphere };

// Flat torus T^d = R^d/Z^d or round sphere S^d in R^{d+1}, d >= 2.
// The volume measure is normalized to total mass 1 in both cases.
struct ManifoldKind {
    ManifoldFamily family;
    int d;

    static ManifoldKind torus(int d);
    static ManifoldKind sphere(int d);

    int ambient_dim() const { return family == ManifoldFamily::Torus ? d : d + 1; }
    double diameter() const;
    double injectivity_radius() const;

    bool operator==(const ManifoldKind& o) const {
        return family == o.family && d == o.d;
    }
};

// A point in canonical coordinates: torus coords reduced to [0,1)^d,
// sphere coords on the unit sphere of R^{d+1}.
struct ManifoldPoint {
    ManifoldKind kind;
    Eigen::VectorXd coords;

    static ManifoldPoint torus(const Eigen::VectorXd& x);
    static ManifoldPoint sphere(const Eigen::VectorXd& x);
};

// Tangent data at `base`. Torus: components in the constant standard frame.
// Sphere: ambient components orthogonal to the base point.
struct TangentVector {
    ManifoldPoint base;
    Eigen::VectorXd components;
};

// Orthonormal identification T_xM ~ R^d. `columns` is ambient_dim x d with
// orthonormal columns spanning the tangent space at `base`; on the torus it
// is the identity. The completion rule is deterministic so Cartan frames
// are reproducible.
struct FrameAtPoint {
    ManifoldPoint base;
    Eigen::MatrixXd columns;
};

FrameAtPoint canonical_frame(const ManifoldPoint& p);

// Geodesic distance (torus: per-axis wrap; sphere: great circle).
double distance(const ManifoldPoint& p, const ManifoldPoint& q);

// Riemannian exponential at v.base.
ManifoldPoint exp_map(const TangentVector& v);

// Inverse chart phi_p = exp_p^{-1}. Throws std::domain_error at or beyond
// the cut locus (torus: any coordinate gap of exactly 1/2; sphere: the
// antipode).
TangentVector log_map(const ManifoldPoint& p, const ManifoldPoint& q);

// Normalized volume of a metric ball of radius r; equals 1 for
// r >= diameter. Closed form on the sphere and for torus r <= 1/2; the
// torus overlap regime r in (1/2, diam) uses a fixed lattice count.
double ball_volume(const ManifoldKind& kind, double r);

// Uniform sample w.r.t. the normalized volume.
ManifoldPoint sample_point(const ManifoldKind& kind, Philox& rng);

// Canonical mod-1 reduction used everywhere for torus coordinates.
inline double wrap_unit(double x) {
    double y = x - std::floor(x);
    if (y >= 1.0) y = 0.0;  // floor rounding at integers
    return y;
}

}  // namespace ergolab
