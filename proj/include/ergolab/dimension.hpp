#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "ergolab/cocycle.hpp"

namespace ergolab {

// Full flag of R^d via an adapted orthonormal basis: W_i = span(e_1..e_i).
struct Flag {
    Eigen::MatrixXd basis;  // d x d orthogonal, column i is e_i

    static Flag standard(int d) { return {Eigen::MatrixXd::Identity(d, d)}; }
    void validate() const;
};

// Increasing exponents 0 <= t_1 <= ... <= t_d <= 1 carried by a box.
struct ExponentVector {
    Eigen::VectorXd t;
    void validate() const;
};

// Block structure and membership report for the exponent simplex
// T(d, k0, kappa, eta): second block floor, the k0 gap, per-block pinching.
struct SimplexSpec {
    std::vector<int> blocks;  // strictly increasing, ends at d
    int k0 = 1;               // 1-based block index with the kappa-gap
    double kappa = 0.0;
    double eta = 0.0;
};

struct SimplexMembership {
    bool floor_ok = false;  // t_{d_2} >= kappa
    bool gap_ok = false;    // t_{d_{k0+1}} - t_{d_{k0}} >= kappa
    bool pinch_ok = false;  // per-block spread <= eta
    bool ok() const { return floor_ok && gap_ok && pinch_ok; }
};

SimplexMembership simplex_membership(const ExponentVector& t, const SimplexSpec& spec);

// Asymmetric box adapted to a flag. The Minkowski sum of flag balls is
// replaced by the adapted-axis box with half-widths d * rho^{t_j}, which
// contains the true box and is contained in its d-fold dilation.
struct Box {
    Flag flag;
    ExponentVector t;
    double rho = 0.5;
    Eigen::VectorXd center;

    bool contains(const Eigen::VectorXd& v) const;
    double leb() const;  // Lebesgue measure of the adapted-axis proxy
    double half_width(int j) const;
};

// Finite weighted point set in R^d.
struct DiscreteSet {
    std::vector<Eigen::VectorXd> points;
    std::vector<double> weights;  // empty = unit weights

    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
    double total() const;
    int dim() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }
};

// Occupied-cell count of the axis lattice of mesh rho: a covering-number
// proxy within an O_d(1) factor of the true one.
long covering_number(const DiscreteSet& a, double rho);

// --- robustness ------------------------------------------------------------

struct RobustCertRow {
    double scale = 0.0;
    double max_ball_mass = 0.0;   // atom-centered, after extraction
    double bound = 0.0;           // rho^{d alpha}
    double max_ball_mass_2x = 0.0;
    double bound_2x = 0.0;        // (2 rho)^{d alpha}
    bool pass = false;
};

struct RobustReport {
    double trash_mass = 0.0;
    std::vector<double> kept_weights;   // per original atom
    std::vector<double> trash_weights;  // per original atom
    std::vector<RobustCertRow> certificate;
    bool certified = false;
};

// Greedy decomposition nu = nu' + nu'': while some atom-centered ball at a
// certified scale exceeds rho^{d alpha}, move the overflow into the trash
// (largest overflow first, ties by atom index). Returns the certificate
// that every remaining atom-centered ball obeys the cap.
RobustReport robust_decompose(const DiscreteSet& nu, double alpha,
                              const std::vector<double>& scales,
                              const std::function<double(const Eigen::VectorXd&,
                                                         const Eigen::VectorXd&)>& dist);

// Same on a manifold empirical measure (geodesic balls).
RobustReport robust_decompose(const EmpiricalMeasure& nu, double alpha,
                              const std::vector<double>& scales);

// Log-uniform refinement of an interval of scales, 8 per octave.
std::vector<double> scale_interval(double lo, double hi, int per_octave = 8);

double box_mass(const DiscreteSet& nu, const Box& box);

// --- Schubert non-concentration ---------------------------------------------

struct SchubertRow {
    int v_index = 0;
    double r = 0.0;
    double mass = 0.0;
    double bound = 0.0;
    bool pass = false;
};

enum class NcMode { Sub, Sup };

// sub: sigma-mass of {W : dist(W, Sigma_{d'}(V)) < r} vs r^c, where the
// constraining Schubert variety Sigma_{d'}(V) = {W' : dim(V cap W')/dim V >
// d'/d} and the distance is the j-th smallest principal angle with
// j = floor(d'/d * dim V) + 1.
// sup: sigma-mass of {W : angle(V, W) < r} vs rho^{-eps} r^c for
// complementary-dimension V.
std::vector<SchubertRow> schubert_nc_check(const std::vector<Eigen::MatrixXd>& sigma_samples,
                                           const std::vector<double>& sigma_weights,
                                           NcMode mode,
                                           const std::vector<Eigen::MatrixXd>& v_grid,
                                           const std::vector<double>& r_list, double c,
                                           double rho = 1.0, double eps = 0.0);

// --- multislicing verifier ---------------------------------------------------

struct MultisliceTheta {
    Flag flag;
    ExponentVector t;
};

struct MultisliceRow {
    int theta_index = 0;
    double trash_mass = 0.0;
    double trash_fraction = 0.0;  // relative to nu(R^d) + zeta^d
    double nu_mass = 0.0;
    double zeta_d = 0.0;
    double threshold = 0.0;  // rho^{gain} * leb^alpha
    bool pass = false;
};

struct MultisliceReport {
    std::vector<MultisliceRow> rows;
    double failing_fraction = 0.0;  // empirical sigma(E)
};

// For each theta: greedily trash mass until every atom-centered translate
// of the box has mass <= rho^{gain} * leb(box)^alpha; pass iff the trash
// fraction (normalized by nu(R^d) + zeta^d) stays within budget.
MultisliceReport multislicing_verify(const DiscreteSet& nu,
                                     const std::vector<MultisliceTheta>& thetas,
                                     double rho, double alpha, double gain,
                                     double budget, const SimplexSpec& spec,
                                     int threads = 1);

// --- linearization ------------------------------------------------------------

struct LinearizationReport {
    int translate_count = 0;    // greedy K
    int sample_points = 0;      // points of B_zeta(x) cap g(B_r(y)) found
    bool precondition_ok = true;  // zeta <= C0^{-R(d)} surrogate check
};

// Samples the intersection, maps it through phi_x = exp_x^{-1}, and covers
// it greedily by translates of D(phi_x g)(g^{-1}(x), B_r).
LinearizationReport linearization_check(const DiffeoWord& g, const std::vector<Generator>& gens,
                                        const ManifoldPoint& x, const ManifoldPoint& y,
                                        double zeta, double r, int sample_count,
                                        std::uint64_t seed);

// --- dimension increment -------------------------------------------------------

struct IncrementReport {
    double alpha_before = 0.0;
    double tau_before = 0.0;
    int steps = 0;  // n_rho
    std::vector<double> alpha_grid;
    std::vector<double> tau_after;  // trash at rho^{1/2} for each alpha'
    double alpha_achieved = 0.0;    // largest alpha' with tau within budget
    double tau_achieved = 0.0;
};

// Convolves nu0 by n_rho = ceil(a0 |log rho|) walk steps and re-measures
// robustness at rho^{1/2}; a0 defaults to min(1, 1/(20 log D1)).
IncrementReport dimension_increment_experiment(const GeneratorMeasure& mu,
                                               const EmpiricalMeasure& nu0, double alpha,
                                               double rho, double tau_budget,
                                               int splits_per_atom, std::uint64_t seed,
                                               int threads = 1, double a0_override = 0.0);

}  // namespace ergolab
