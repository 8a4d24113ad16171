#pragma once

#include <complex>
#include <vector>

#include "ergolab/dimension.hpp"
#include "ergolab/walk.hpp"

namespace ergolab {

// Cell-averaged density on a regular grid (torus: K^d cells; sphere S^2:
// equal-area latitude bands), normalized to integrate to 1.
struct MollifiedDensity {
    ManifoldKind kind;
    int grid = 0;
    std::vector<ManifoldPoint> centers;
    std::vector<double> cell_measure;
    std::vector<double> values;
    double renormalization = 1.0;  // factor applied to reach mass 1

    double max_value() const;
};

MollifiedDensity mollify(const EmpiricalMeasure& nu, double rho, int grid);

// --- Wasserstein ------------------------------------------------------------

struct W1Report {
    double value = 0.0;
    double inner_l = 0.0;        // maximizing Lipschitz budget L (u = 1 - L)
    std::vector<double> witness_first;   // optimal f on nu1's support
    std::vector<double> witness_second;  // optimal f on nu2's support
    double duality_gap = 0.0;
    bool optimal = false;
    int solves = 0;
};

// The Lipschitz-plus-sup-norm W1: half the supremum of nu1(f) - nu2(f) over |f|_inf +
// Lip(f) <= 1, computed exactly as max over L of the optimal transport
// value with truncated cost min(L d, 2(1-L)) (strong duality), the outer
// max by golden section on the concave value function.
W1Report wasserstein1(const EmpiricalMeasure& nu1, const EmpiricalMeasure& nu2,
                      int golden_iterations = 0);

// --- Fourier transfer operator ----------------------------------------------

struct SpectrumReport {
    int truncation = 0;
    int quadrature = 0;
    Eigen::MatrixXcd matrix;          // (2K+1)^d square, row k, column l
    double block_radius = 0.0;        // power-iteration radius of the k != 0 block
    double block_sup_norm = 0.0;      // max row sum of the block
    std::vector<std::complex<double>> leading_eigs;
    std::vector<std::string> warnings;  // aliasing diagnostics
};

// Matrix of T_mu f(x) = int f(gx) dmu(g) on frequencies |k|_inf <= K:
// T[k,l] = sum_g w_g (l-th Fourier coefficient of e^{2 pi i <k, g x>}).
// Linear generators contribute exact 0/1 rows (l = A^T k); perturbed ones
// are integrated by a tensor midpoint rule of size `quad` per axis.
SpectrumReport fourier_transfer_spectrum(const GeneratorMeasure& mu, int truncation,
                                         int quadrature, int threads = 1);

struct StationaryReport {
    std::vector<std::complex<double>> coefficients;  // indexed like the matrix rows
    double min_density = 0.0;   // min of the reconstruction on a grid
    double residual = 0.0;      // |T* phi - phi| at the end
    bool unique = true;         // false when a second independent fixed vector exists
    int iterations = 0;
};

// Leading fixed vector of the adjoint operator, normalized to coefficient 1
// at frequency zero; throws after 1e4 non-convergent power iterations.
StationaryReport stationary_density(const GeneratorMeasure& mu, int truncation,
                                    int quadrature, int threads = 1);

// --- equidistribution --------------------------------------------------------

struct EquidistPoint {
    int n = 0;
    double w1 = 0.0;
    double mc_err = 0.0;
    double sub_err = 0.0;
};

struct EquidistCurve {
    std::vector<EquidistPoint> points;
    bool decreasing_trend = false;
    double final_value = 0.0;
};

struct EquidistOptions {
    int sample_count = 10000;   // walk samples per n
    double rho = 1.0 / 64.0;    // reference grid scale
    int lp_budget = 1024;       // stratified subsampling target for the LP
    std::uint64_t seed = 1;
    int threads = 1;
    int golden_iterations = 16;
};

// W1(mu^{*n} delta_x, reference) per n; the reference is the volume grid at
// scale rho (or any measure passed explicitly).
EquidistCurve equidistribution_curve(const GeneratorMeasure& mu, const ManifoldPoint& x,
                                     const std::vector<int>& n_list,
                                     const EmpiricalMeasure& reference,
                                     const EquidistOptions& opt);

// Uniform grid measure at scale rho on the torus (the vol reference).
EmpiricalMeasure volume_grid(const ManifoldKind& kind, double rho);

// Stratified aggregation to at most `target` atoms; returns the moved-mass
// radius (every atom moved at most this far).
std::pair<EmpiricalMeasure, double> stratified_subsample(const EmpiricalMeasure& nu,
                                                         int target);

}  // namespace ergolab
