#include "ergolab/manifold.hpp"

#include <cassert>
#include <cmath>
#include <numbers>

namespace ergolab {

namespace {

constexpr double kPi = std::numbers::pi;

void check_same_kind(const ManifoldPoint& p, const ManifoldPoint& q) {
    if (!(p.kind == q.kind))
        throw std::invalid_argument("manifold: points live on different manifolds");
}

// Area of the d-dimensional Euclidean unit ball.
double euclidean_ball_volume(int d, double r) {
    return std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0) * std::pow(r, d);
}

// integral of sin^{d-1} over [0, r] by Simpson; exact enough for the
// normalized quotient (sphere d > 2 only, d = 2 has a closed form).
double sin_power_integral(int d, double r) {
    const int n = 2048;
    double h = r / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * std::pow(std::sin(i * h), d - 1);
    }
    return acc * h / 3.0;
}

// Fraction of a fixed lattice on [0,1)^d within wrap-distance r of the
// origin. Only used for torus radii in (1/2, diameter).
double torus_overlap_volume(int d, double r) {
    int n = d == 2 ? 1024 : (d == 3 ? 192 : 48);
    double r2 = r * r;
    long total = 1;
    for (int i = 0; i < d; ++i) total *= n;
    long inside = 0;
    for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        double s = 0.0;
        for (int i = 0; i < d; ++i) {
            double x = (static_cast<double>(rem % n) + 0.5) / n;
            rem /= n;
            double dx = std::min(x, 1.0 - x);
            s += dx * dx;
        }
        if (s < r2) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(total);
}

}  // namespace

ManifoldKind ManifoldKind::torus(int d) {
    if (d < 2) throw std::invalid_argument("manifold: dimension must be >= 2");
    return {ManifoldFamily::Torus, d};
}

ManifoldKind ManifoldKind::sphere(int d) {
    if (d < 2) throw std::invalid_argument("manifold: dimension must be >= 2");
    return {ManifoldFamily::Sphere, d};
}

double ManifoldKind::diameter() const {
    return family == ManifoldFamily::Torus ? 0.5 * std::sqrt(static_cast<double>(d))
                                           : kPi;
}

double ManifoldKind::injectivity_radius() const {
    return family == ManifoldFamily::Torus ? 0.5 : kPi;
}

ManifoldPoint ManifoldPoint::torus(const Eigen::VectorXd& x) {
    ManifoldPoint p{ManifoldKind::torus(static_cast<int>(x.size())), x};
    for (int i = 0; i < p.coords.size(); ++i) p.coords[i] = wrap_unit(p.coords[i]);
    return p;
}

ManifoldPoint ManifoldPoint::sphere(const Eigen::VectorXd& x) {
    double n = x.norm();
    if (n < 0.5) throw std::invalid_argument("manifold: sphere point too far from the sphere");
    assert(std::abs(n - 1.0) < 1e-12);  // callers renormalize before constructing
    ManifoldPoint p{ManifoldKind::sphere(static_cast<int>(x.size()) - 1), x / n};
    return p;
}

FrameAtPoint canonical_frame(const ManifoldPoint& p) {
    if (p.kind.family == ManifoldFamily::Torus) {
        return {p, Eigen::MatrixXd::Identity(p.kind.d, p.kind.d)};
    }
    // Deterministic Gram-Schmidt completion of span(p)^perp, pivoting over
    // the standard basis in index order.
    int n = p.kind.ambient_dim();
    Eigen::MatrixXd cols(n, p.kind.d);
    int got = 0;
    for (int i = 0; i < n && got < p.kind.d; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(n, i);
        v -= p.coords.dot(v) * p.coords;
        for (int j = 0; j < got; ++j) v -= cols.col(j).dot(v) * cols.col(j);
        double nv = v.norm();
        if (nv > 1e-6) {
            cols.col(got++) = v / nv;
        }
    }
    if (got != p.kind.d) throw std::runtime_error("manifold: frame completion failed");
    return {p, cols};
}

double distance(const ManifoldPoint& p, const ManifoldPoint& q) {
    check_same_kind(p, q);
    if (p.kind.family == ManifoldFamily::Torus) {
        double s = 0.0;
        for (int i = 0; i < p.kind.d; ++i) {
            double delta = std::abs(p.coords[i] - q.coords[i]);
            double w = std::min(delta, 1.0 - delta);
            s += w * w;
        }
        return std::sqrt(s);
    }
    double c = p.coords.dot(q.coords);
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

ManifoldPoint exp_map(const TangentVector& v) {
    const ManifoldPoint& p = v.base;
    if (p.kind.family == ManifoldFamily::Torus) {
        return ManifoldPoint::torus(p.coords + v.components);
    }
    double theta = v.components.norm();
    if (theta < 1e-300) return p;
    Eigen::VectorXd u = v.components / theta;
    return ManifoldPoint::sphere(std::cos(theta) * p.coords + std::sin(theta) * u);
}

TangentVector log_map(const ManifoldPoint& p, const ManifoldPoint& q) {
    check_same_kind(p, q);
    if (p.kind.family == ManifoldFamily::Torus) {
        Eigen::VectorXd v(p.kind.d);
        for (int i = 0; i < p.kind.d; ++i) {
            double delta = q.coords[i] - p.coords[i];
            if (delta > 0.5) delta -= 1.0;
            if (delta <= -0.5) delta += 1.0;
            if (std::abs(delta) >= 0.5)
                throw std::domain_error("manifold: log at the torus cut locus");
            v[i] = delta;
        }
        return {p, v};
    }
    double theta = distance(p, q);
    if (theta >= kPi - 1e-12)
        throw std::domain_error("manifold: log at the sphere cut locus");
    if (theta < 1e-300) return {p, Eigen::VectorXd::Zero(p.kind.ambient_dim())};
    Eigen::VectorXd w = q.coords - std::cos(theta) * p.coords;
    return {p, theta * w / w.norm()};
}

double ball_volume(const ManifoldKind& kind, double r) {
    if (r < 0.0) throw std::invalid_argument("manifold: negative radius");
    if (r == 0.0) return 0.0;
    if (r >= kind.diameter()) return 1.0;
    if (kind.family == ManifoldFamily::Torus) {
        if (r <= 0.5) return std::min(1.0, euclidean_ball_volume(kind.d, r));
        return torus_overlap_volume(kind.d, r);
    }
    if (kind.d == 2) return 0.5 * (1.0 - std::cos(r));
    return sin_power_integral(kind.d, r) / sin_power_integral(kind.d, kPi);
}

ManifoldPoint sample_point(const ManifoldKind& kind, Philox& rng) {
    if (kind.family == ManifoldFamily::Torus) {
        Eigen::VectorXd x(kind.d);
        for (int i = 0; i < kind.d; ++i) x[i] = rng.next_double();
        return ManifoldPoint::torus(x);
    }
    Eigen::VectorXd x(kind.ambient_dim());
    for (int i = 0; i < x.size(); ++i) x[i] = rng.next_gaussian();
    double n = x.norm();
    if (n < 1e-12) x[0] = 1.0, n = 1.0;
    return ManifoldPoint::sphere(x / n);
}

double Philox::next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

}  // namespace ergolab
