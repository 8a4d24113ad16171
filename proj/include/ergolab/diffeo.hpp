#pragma once

#include <Eigen/Dense>

#include <string>
#include <variant>
#include <vector>

#include "ergolab/manifold.hpp"

namespace ergolab {

// One trigonometric mode eps * sin(2*pi*<k,x> + phase) * direction of a
// perturbed toral map. Frequencies are integer so the perturbation descends
// to the torus.
struct TrigMode {
    Eigen::VectorXi freq;
    double phase = 0.0;
    Eigen::VectorXd direction;
};

struct ToralLinear {
    Eigen::MatrixXi matrix;  // |det| = 1
};

struct ToralTrigPerturb {
    ToralLinear base;
    double amplitude = 0.0;
    std::vector<TrigMode> modes;
};

struct SphereRotation {
    Eigen::MatrixXd matrix;  // orthogonal, (d+1)x(d+1)
};

// Rotation followed by one RK4 step of the tangent field eps * X_id and a
// final radial projection. The projection is part of the map, so the
// Jacobian (variational RK4 + projection differential) is exact and the
// image lies on the sphere by construction.
//
// Field library: X_k(p) = (I - p p^T) e_k for 0 <= k <= d (height-function
// gradients); X_{d+1+k}(p) = (I - p p^T) S_k p with S_k = e_k e_{k+1}^T +
// e_{k+1} e_k^T (quadratic shears).
struct SphereTrigPerturb {
    SphereRotation base;
    double amplitude = 0.0;
    int vectorfield_id = 0;
};

using Generator =
    std::variant<ToralLinear, ToralTrigPerturb, SphereRotation, SphereTrigPerturb>;

// Composition word over a generator list, applied left-to-right as written:
// letters {l1, ..., ln} act as g_{ln} o ... o g_{l1}.
struct Letter {
    int index = 0;
    bool inverted = false;
};

struct DiffeoWord {
    std::vector<Letter> letters;

    static DiffeoWord identity() { return {}; }
    static DiffeoWord single(int index, bool inverted = false) {
        return {{Letter{index, inverted}}};
    }
    DiffeoWord inverse() const;
    DiffeoWord then(const DiffeoWord& next) const;
    std::size_t length() const { return letters.size(); }
};

// D1: sup of first derivative norms over the support, both directions;
// D2 additionally bounds the C^2 data.
struct DerivativeBounds {
    double d1 = 1.0;
    double d2 = 1.0;
};

ManifoldKind generator_manifold(const Generator& g, int d_hint);

// Validates the structural invariants: integer unimodular matrices,
// orthogonality within 1e-12, and the perturbation amplitude bound
// eps * 2*pi * sum_m |k_m| |u_m| < 1/2 that keeps the maps diffeomorphisms.
void validate_generator(const Generator& g);

ManifoldPoint apply(const DiffeoWord& w, const std::vector<Generator>& gens,
                    const ManifoldPoint& p);

// Jacobian of the word at p expressed in the canonical frames at p and at
// apply(w, p): a d x d matrix built by the chain rule over letters.
Eigen::MatrixXd jacobian(const DiffeoWord& w, const std::vector<Generator>& gens,
                         const ManifoldPoint& p);

double log_det_jacobian(const DiffeoWord& w, const std::vector<Generator>& gens,
                        const ManifoldPoint& p);

// Exact/analytic D1, D2 over the sub-support `support` (generator indices).
DerivativeBounds derivative_bounds(const std::vector<Generator>& gens,
                                   const std::vector<int>& support);

std::string describe(const Generator& g);

}  // namespace ergolab
