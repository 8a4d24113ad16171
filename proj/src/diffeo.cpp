#include "ergolab/diffeo.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace ergolab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

long icast(double x) { return std::lround(x); }

// Integer inverse of a unimodular integer matrix (|det| = 1): the adjugate
// divided by det stays integral.
Eigen::MatrixXi unimodular_inverse(const Eigen::MatrixXi& a) {
    int n = static_cast<int>(a.rows());
    Eigen::MatrixXd ad = a.cast<double>();
    double det = ad.determinant();
    Eigen::MatrixXd invd = ad.inverse();
    Eigen::MatrixXi inv(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) inv(i, j) = static_cast<int>(icast(invd(i, j)));
    if (((inv.cast<double>() * ad) - Eigen::MatrixXd::Identity(n, n)).norm() > 1e-9)
        throw std::invalid_argument("diffeo: matrix is not unimodular");
    (void)det;
    return inv;
}

Eigen::VectorXd trig_term(const ToralTrigPerturb& g, const Eigen::VectorXd& x) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.size());
    for (const auto& m : g.modes) {
        double arg = kTwoPi * m.freq.cast<double>().dot(x) + m.phase;
        acc += std::sin(arg) * m.direction;
    }
    return g.amplitude * acc;
}

Eigen::MatrixXd trig_term_jacobian(const ToralTrigPerturb& g, const Eigen::VectorXd& x) {
    int d = static_cast<int>(x.size());
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
    for (const auto& m : g.modes) {
        Eigen::VectorXd k = m.freq.cast<double>();
        double arg = kTwoPi * k.dot(x) + m.phase;
        acc += (kTwoPi * std::cos(arg)) * (m.direction * k.transpose());
    }
    return g.amplitude * acc;
}

// Forward toral map on the universal cover (no reduction).
Eigen::VectorXd toral_lift(const ToralTrigPerturb& g, const Eigen::VectorXd& x) {
    return g.base.matrix.cast<double>() * x + trig_term(g, x);
}

// Newton solve of g(y) = x on the cover, seeded at A^{-1} x. Residual
// below 1e-12 in at most 50 iterations or we signal the amplitude
// invariant was violated.
Eigen::VectorXd toral_newton_inverse(const ToralTrigPerturb& g, const Eigen::VectorXd& x) {
    Eigen::MatrixXd ainv = unimodular_inverse(g.base.matrix).cast<double>();
    Eigen::VectorXd y = ainv * x;
    for (int it = 0; it < 50; ++it) {
        Eigen::VectorXd r = toral_lift(g, y) - x;
        if (r.lpNorm<Eigen::Infinity>() < 1e-13) return y;
        Eigen::MatrixXd j = g.base.matrix.cast<double>() + trig_term_jacobian(g, y);
        y -= j.partialPivLu().solve(r);
    }
    Eigen::VectorXd r = toral_lift(g, y) - x;
    if (r.lpNorm<Eigen::Infinity>() < 1e-12) return y;
    throw std::runtime_error("diffeo: Newton inverse did not converge (amplitude invariant violated?)");
}

// --- sphere perturbation machinery ---------------------------------------

Eigen::VectorXd sphere_field(int id, const Eigen::VectorXd& p) {
    int n = static_cast<int>(p.size());
    Eigen::VectorXd raw;
    if (id <= n - 1) {
        raw = Eigen::VectorXd::Unit(n, id);
    } else {
        int k = id - n;
        if (k + 1 >= n) throw std::invalid_argument("diffeo: unknown sphere vector field id");
        raw = Eigen::VectorXd::Zero(n);
        raw[k] = p[k + 1];
        raw[k + 1] = p[k];
    }
    return raw - p.dot(raw) * p;
}

Eigen::MatrixXd sphere_field_jacobian(int id, const Eigen::VectorXd& p) {
    int n = static_cast<int>(p.size());
    Eigen::MatrixXd draw;
    Eigen::VectorXd raw;
    if (id <= n - 1) {
        raw = Eigen::VectorXd::Unit(n, id);
        draw = Eigen::MatrixXd::Zero(n, n);
    } else {
        int k = id - n;
        raw = Eigen::VectorXd::Zero(n);
        raw[k] = p[k + 1];
        raw[k + 1] = p[k];
        draw = Eigen::MatrixXd::Zero(n, n);
        draw(k, k + 1) = 1.0;
        draw(k + 1, k) = 1.0;
    }
    // D[(I - p p^T) raw(p)] = (I - p p^T) Draw - p raw^T - <p, raw> I
    return draw - p * raw.transpose() - p.dot(raw) * Eigen::MatrixXd::Identity(n, n) -
           p * (p.transpose() * draw);
}

struct AmbientMap {
    Eigen::VectorXd value;
    Eigen::MatrixXd jac;
};

// One RK4 step of the field eps*X followed by radial projection, with the
// variational equation integrated alongside.
AmbientMap sphere_rk4_project(const SphereTrigPerturb& g, const Eigen::VectorXd& p0) {
    int n = static_cast<int>(p0.size());
    const double eps = g.amplitude;
    auto f = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        return eps * sphere_field(g.vectorfield_id, p);
    };
    auto df = [&](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
        return eps * sphere_field_jacobian(g.vectorfield_id, p);
    };
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);

    Eigen::VectorXd k1 = f(p0);
    Eigen::MatrixXd K1 = df(p0);
    Eigen::VectorXd p2 = p0 + 0.5 * k1;
    Eigen::VectorXd k2 = f(p2);
    Eigen::MatrixXd K2 = df(p2) * (eye + 0.5 * K1);
    Eigen::VectorXd p3 = p0 + 0.5 * k2;
    Eigen::VectorXd k3 = f(p3);
    Eigen::MatrixXd K3 = df(p3) * (eye + 0.5 * K2);
    Eigen::VectorXd p4 = p0 + k3;
    Eigen::VectorXd k4 = f(p4);
    Eigen::MatrixXd K4 = df(p4) * (eye + K3);

    Eigen::VectorXd z = p0 + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    Eigen::MatrixXd dz = eye + (K1 + 2.0 * K2 + 2.0 * K3 + K4) / 6.0;

    double r = z.norm();
    Eigen::VectorXd q = z / r;
    // D(z/|z|) = (I - q q^T)/|z|
    Eigen::MatrixXd dq = (eye - q * q.transpose()) / r;
    return {q, dq * dz};
}

// Newton inverse on the sphere through the exp chart at the current guess.
// The residual is chordal: the geodesic distance cannot resolve below
// sqrt(machine eps) near zero.
Eigen::VectorXd sphere_newton_inverse(const SphereTrigPerturb& g, const Eigen::VectorXd& x) {
    Eigen::VectorXd q = g.base.matrix.transpose() * x;
    for (int it = 0; it < 50; ++it) {
        Eigen::VectorXd rot = g.base.matrix * q;
        AmbientMap m = sphere_rk4_project(g, rot);
        ManifoldPoint gq = ManifoldPoint::sphere(m.value);
        if ((m.value - x).norm() < 1e-13) return q;
        // Solve J * delta = (x - g(q)) projected to T_{g(q)} in frames; the
        // projected chordal difference matches log to second order and has
        // no arccos noise floor.
        FrameAtPoint fin = canonical_frame(ManifoldPoint::sphere(q));
        FrameAtPoint fout = canonical_frame(gq);
        Eigen::MatrixXd jac =
            fout.columns.transpose() * (m.jac * g.base.matrix) * fin.columns;
        Eigen::VectorXd chord = x - gq.coords;
        Eigen::VectorXd rhs = fout.columns.transpose() * chord;
        Eigen::VectorXd delta = jac.partialPivLu().solve(rhs);
        ManifoldPoint next =
            exp_map({ManifoldPoint::sphere(q), fin.columns * delta});
        q = next.coords;
    }
    Eigen::VectorXd rot = g.base.matrix * q;
    AmbientMap m = sphere_rk4_project(g, rot);
    if ((m.value - x).norm() < 1e-12) return q;
    throw std::runtime_error("diffeo: sphere Newton inverse did not converge");
}

// Single-letter application: new point plus the frame Jacobian.
struct LetterResult {
    ManifoldPoint point;
    Eigen::MatrixXd jac;
};

LetterResult apply_letter(const Generator& gen, bool inverted, const ManifoldPoint& p) {
    if (const auto* lin = std::get_if<ToralLinear>(&gen)) {
        Eigen::MatrixXi m = inverted ? unimodular_inverse(lin->matrix) : lin->matrix;
        Eigen::MatrixXd md = m.cast<double>();
        return {ManifoldPoint::torus(md * p.coords), md};
    }
    if (const auto* tp = std::get_if<ToralTrigPerturb>(&gen)) {
        if (!inverted) {
            Eigen::VectorXd y = toral_lift(*tp, p.coords);
            Eigen::MatrixXd j = tp->base.matrix.cast<double>() + trig_term_jacobian(*tp, p.coords);
            return {ManifoldPoint::torus(y), j};
        }
        Eigen::VectorXd y = toral_newton_inverse(*tp, p.coords);
        Eigen::MatrixXd jfwd = tp->base.matrix.cast<double>() + trig_term_jacobian(*tp, y);
        return {ManifoldPoint::torus(y), jfwd.inverse()};
    }
    if (const auto* rot = std::get_if<SphereRotation>(&gen)) {
        Eigen::MatrixXd q = inverted ? rot->matrix.transpose() : rot->matrix;
        ManifoldPoint out = ManifoldPoint::sphere(q * p.coords);
        FrameAtPoint fin = canonical_frame(p);
        FrameAtPoint fout = canonical_frame(out);
        return {out, fout.columns.transpose() * q * fin.columns};
    }
    const auto& sp = std::get<SphereTrigPerturb>(gen);
    if (!inverted) {
        AmbientMap m = sphere_rk4_project(sp, sp.base.matrix * p.coords);
        ManifoldPoint out = ManifoldPoint::sphere(m.value);
        FrameAtPoint fin = canonical_frame(p);
        FrameAtPoint fout = canonical_frame(out);
        return {out, fout.columns.transpose() * (m.jac * sp.base.matrix) * fin.columns};
    }
    Eigen::VectorXd y = sphere_newton_inverse(sp, p.coords);
    ManifoldPoint out = ManifoldPoint::sphere(y);
    AmbientMap m = sphere_rk4_project(sp, sp.base.matrix * y);
    FrameAtPoint fin = canonical_frame(out);
    FrameAtPoint fout = canonical_frame(p);
    Eigen::MatrixXd jfwd = fout.columns.transpose() * (m.jac * sp.base.matrix) * fin.columns;
    return {out, jfwd.inverse()};
}

const Generator& letter_gen(const std::vector<Generator>& gens, const Letter& l) {
    if (l.index < 0 || l.index >= static_cast<int>(gens.size()))
        throw std::invalid_argument("diffeo: letter index out of range");
    return gens[static_cast<std::size_t>(l.index)];
}

double perturb_derivative_budget(const ToralTrigPerturb& g) {
    double s = 0.0;
    for (const auto& m : g.modes) s += m.freq.cast<double>().norm() * m.direction.norm();
    return g.amplitude * kTwoPi * s;
}

}  // namespace

DiffeoWord DiffeoWord::inverse() const {
    DiffeoWord w;
    w.letters.reserve(letters.size());
    for (auto it = letters.rbegin(); it != letters.rend(); ++it)
        w.letters.push_back({it->index, !it->inverted});
    return w;
}

DiffeoWord DiffeoWord::then(const DiffeoWord& next) const {
    DiffeoWord w = *this;
    w.letters.insert(w.letters.end(), next.letters.begin(), next.letters.end());
    return w;
}

ManifoldKind generator_manifold(const Generator& g, int d_hint) {
    if (const auto* lin = std::get_if<ToralLinear>(&g))
        return ManifoldKind::torus(static_cast<int>(lin->matrix.rows()));
    if (const auto* tp = std::get_if<ToralTrigPerturb>(&g))
        return ManifoldKind::torus(static_cast<int>(tp->base.matrix.rows()));
    if (const auto* rot = std::get_if<SphereRotation>(&g))
        return ManifoldKind::sphere(static_cast<int>(rot->matrix.rows()) - 1);
    const auto& sp = std::get<SphereTrigPerturb>(g);
    (void)d_hint;
    return ManifoldKind::sphere(static_cast<int>(sp.base.matrix.rows()) - 1);
}

void validate_generator(const Generator& g) {
    if (const auto* lin = std::get_if<ToralLinear>(&g)) {
        double det = lin->matrix.cast<double>().determinant();
        if (std::abs(std::abs(det) - 1.0) > 1e-9)
            throw std::invalid_argument("diffeo: toral matrix must have |det| = 1");
        return;
    }
    if (const auto* tp = std::get_if<ToralTrigPerturb>(&g)) {
        validate_generator(Generator{tp->base});
        int d = static_cast<int>(tp->base.matrix.rows());
        for (const auto& m : tp->modes) {
            if (m.freq.size() != d || m.direction.size() != d)
                throw std::invalid_argument("diffeo: trig mode dimension mismatch");
        }
        if (perturb_derivative_budget(*tp) >= 0.5)
            throw std::invalid_argument(
                "diffeo: perturbation amplitude invariant violated (eps*2pi*sum|k||u| >= 1/2)");
        return;
    }
    if (const auto* rot = std::get_if<SphereRotation>(&g)) {
        int n = static_cast<int>(rot->matrix.rows());
        double err = (rot->matrix.transpose() * rot->matrix - Eigen::MatrixXd::Identity(n, n))
                         .lpNorm<Eigen::Infinity>();
        if (err > 1e-12)
            throw std::invalid_argument("diffeo: rotation matrix is not orthogonal");
        return;
    }
    const auto& sp = std::get<SphereTrigPerturb>(g);
    validate_generator(Generator{sp.base});
    int n = static_cast<int>(sp.base.matrix.rows());
    if (sp.vectorfield_id < 0 || sp.vectorfield_id >= 2 * n - 1)
        throw std::invalid_argument("diffeo: sphere vector field id out of range");
    // Keeps e^{eps |DX|} < 2 so the map stays invertible and D1 finite.
    if (sp.amplitude < 0.0 || sp.amplitude >= 0.15)
        throw std::invalid_argument("diffeo: sphere perturbation amplitude too large");
}

ManifoldPoint apply(const DiffeoWord& w, const std::vector<Generator>& gens,
                    const ManifoldPoint& p) {
    ManifoldPoint cur = p;
    for (const auto& l : w.letters) cur = apply_letter(letter_gen(gens, l), l.inverted, cur).point;
    return cur;
}

Eigen::MatrixXd jacobian(const DiffeoWord& w, const std::vector<Generator>& gens,
                         const ManifoldPoint& p) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(p.kind.d, p.kind.d);
    ManifoldPoint cur = p;
    for (const auto& l : w.letters) {
        LetterResult r = apply_letter(letter_gen(gens, l), l.inverted, cur);
        acc = r.jac * acc;
        cur = r.point;
    }
    return acc;
}

double log_det_jacobian(const DiffeoWord& w, const std::vector<Generator>& gens,
                        const ManifoldPoint& p) {
    double acc = 0.0;
    ManifoldPoint cur = p;
    for (const auto& l : w.letters) {
        LetterResult r = apply_letter(letter_gen(gens, l), l.inverted, cur);
        acc += std::log(std::abs(r.jac.determinant()));
        cur = r.point;
    }
    return acc;
}

DerivativeBounds derivative_bounds(const std::vector<Generator>& gens,
                                   const std::vector<int>& support) {
    if (support.empty()) throw std::invalid_argument("diffeo: empty support");
    double d1 = 1.0;
    double d2 = 1.0;
    for (int idx : support) {
        const Generator& g = gens.at(static_cast<std::size_t>(idx));
        double g1 = 1.0, gsecond = 0.0;
        if (const auto* lin = std::get_if<ToralLinear>(&g)) {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(lin->matrix.cast<double>());
            g1 = std::max(svd.singularValues()(0),
                          1.0 / svd.singularValues()(svd.singularValues().size() - 1));
        } else if (const auto* tp = std::get_if<ToralTrigPerturb>(&g)) {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(tp->base.matrix.cast<double>());
            double smax = svd.singularValues()(0);
            double smin = svd.singularValues()(svd.singularValues().size() - 1);
            double budget = perturb_derivative_budget(*tp);
            double fwd = smax + budget;
            double inv = (smin > budget) ? 1.0 / (smin - budget)
                                         : std::numeric_limits<double>::infinity();
            g1 = std::max(fwd, inv);
            double second = 0.0;
            for (const auto& m : tp->modes) {
                double kn = m.freq.cast<double>().norm();
                second += tp->amplitude * kTwoPi * kTwoPi * kn * kn * m.direction.norm();
            }
            // |D^2 g^{-1}| <= |D^2 g| |Dg^{-1}|^3 via the inverse-map identity.
            gsecond = std::max(second, second * inv * inv * inv);
        } else if (std::holds_alternative<SphereRotation>(g)) {
            g1 = 1.0;
        } else {
            const auto& sp = std::get<SphereTrigPerturb>(g);
            int n = static_cast<int>(sp.base.matrix.rows());
            // |DX| <= 2 for height fields, <= 3 for shears, on the sphere,
            // so one RK4 step obeys |DPhi - I| <= e^L - 1 with L = eps*|DX|,
            // and the radial projection divides by |z| >= 2 - e^L.
            double lx = (sp.vectorfield_id <= n - 1) ? 2.0 : 3.0;
            double eL = std::exp(sp.amplitude * lx);
            g1 = std::max(1.0, eL / (2.0 - eL));
            // |D^2 X| <= 3 for the library fields; the same RK4/projection
            // budget inflates it by at most e^{2L} * 4.
            double second = sp.amplitude * 3.0 * eL * eL * 4.0;
            gsecond = std::max(second, second * g1 * g1 * g1);
        }
        d1 = std::max(d1, g1);
        d2 = std::max(d2, g1 + gsecond);
    }
    d2 = std::max(d2, d1);
    return {d1, d2};
}

std::string describe(const Generator& g) {
    std::ostringstream os;
    if (const auto* lin = std::get_if<ToralLinear>(&g)) {
        os << "toral_linear d=" << lin->matrix.rows();
    } else if (const auto* tp = std::get_if<ToralTrigPerturb>(&g)) {
        os << "toral_trig d=" << tp->base.matrix.rows() << " eps=" << tp->amplitude
           << " modes=" << tp->modes.size();
    } else if (const auto* rot = std::get_if<SphereRotation>(&g)) {
        os << "sphere_rotation d=" << rot->matrix.rows() - 1;
    } else {
        const auto& sp = std::get<SphereTrigPerturb>(g);
        os << "sphere_trig d=" << sp.base.matrix.rows() - 1 << " eps=" << sp.amplitude
           << " field=" << sp.vectorfield_id;
    }
    return os.str();
}

}  // namespace ergolab
