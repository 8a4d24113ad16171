#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "ergolab/walk.hpp"

namespace ergolab {

// Cartan decomposition of the word Jacobian at x in canonical frames:
// J = frame_out * diag(exp(lambdas)) * frame_in with lambdas ascending.
// frame_in is the right isometry R(x,g) : T_xM -> R^d (as a d x d matrix on
// frame components), frame_out the left isometry R'(x,g) : R^d -> T_{gx}M.
struct CartanData {
    Eigen::VectorXd lambdas;
    Eigen::MatrixXd frame_in;
    Eigen::MatrixXd frame_out;
};

// Contracting subspace W_b(x,g): span of the b most contracted right
// singular directions; flagged ill-defined when the spectral gap at b is
// below 1e-8 (the flag depends on the tie-break convention there).
struct FlagSample {
    Eigen::MatrixXd basis;  // d x b, orthonormal columns
    bool well_defined = true;
};

// Monte Carlo estimate of one of the defining integrals, worst case over
// the scanned (x, V) grid, with a three-valued verdict against the
// threshold at a 2*stderr margin.
struct HypothesisEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    double best_value = 0.0;      // most favorable grid cell (diagnostics)
    std::string grid;
    int samples = 0;
    int worst_x = -1;
    int worst_v = -1;
};

enum class Verdict { Holds, Fails, Inconclusive };

std::string to_string(Verdict v);

// value must be below `threshold` (direction -1) or above (direction +1);
// inconclusive within the 2*stderr band.
Verdict verdict_below(const HypothesisEstimate& e, double threshold);
Verdict verdict_above(const HypothesisEstimate& e, double threshold);

// --- Cartan and variational formulas --------------------------------------

CartanData cartan(const ManifoldPoint& x, const DiffeoWord& w,
                  const std::vector<Generator>& gens);

CartanData cartan_of_matrix(const Eigen::MatrixXd& j);

FlagSample filtration(const ManifoldPoint& x, const DiffeoWord& w,
                      const std::vector<Generator>& gens, int b);

FlagSample filtration_of_matrix(const Eigen::MatrixXd& j, int b);

// Gap integrand psi(J, V) = log sup_{u in S(V^perp)} |P_{(JV)^perp} J u|
//                         - log inf_{v in S(V)} |J v|,
// for V given by an orthonormal d x (d-b) basis. Inner sup/inf are exact
// (restricted singular values); only V is ever discretized.
double gap_integrand(const Eigen::MatrixXd& j, const Eigen::MatrixXd& v_basis);

// Pinch integrand: sup-projection over V1 against inf-growth over V0,
// nested bases V1 subset V0.
double pinch_integrand(const Eigen::MatrixXd& j, const Eigen::MatrixXd& v0_basis,
                       const Eigen::MatrixXd& v1_basis);

// Both variational expressions from the singular value characterization,
// evaluated over a Grassmannian grid: returns (inf-sup, sup-inf) which
// approach exp(lambda_b) from above resp. below as the grid refines.
std::pair<double, double> variational_singular_value(const Eigen::MatrixXd& j, int b,
                                                     const std::vector<Eigen::MatrixXd>& grid_dmb,
                                                     const std::vector<Eigen::MatrixXd>& grid_dmb1);

std::pair<double, double> variational_singular_value(
    const ManifoldPoint& x, const DiffeoWord& w, const std::vector<Generator>& gens, int b,
    const std::vector<Eigen::MatrixXd>& grid_dmb,
    const std::vector<Eigen::MatrixXd>& grid_dmb1);

// --- Grassmannian grids ----------------------------------------------------

// Orthonormal bases of k-dimensional subspaces of R^d. d = 2: uniform angle
// grid; d = 3: Fibonacci sphere directions (planes via normals).
std::vector<Eigen::MatrixXd> grassmann_grid(int d, int k, int count);

// Smallest principal angle: the min-over-unit-vectors angle used for
// complementary-dimension subspaces.
double smallest_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
double largest_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// --- Monte Carlo hypothesis estimators ------------------------------------

struct EstimatorOptions {
    int samples = 256;
    std::uint64_t seed = 1;
    int threads = 1;
};

// Worst case over (x, V) of the mu^{*n0}-average gap integrand. The
// (n0, kappa, b)-gap verdict is value < -n0*kappa at the 2*stderr margin.
HypothesisEstimate gap_estimate(const GeneratorMeasure& mu, int n0, int b,
                                const std::vector<ManifoldPoint>& x_grid,
                                const std::vector<Eigen::MatrixXd>& v_grid,
                                const EstimatorOptions& opt);

// Worst case over (x, V0, V1 nested); pinched iff value < n0*eta.
HypothesisEstimate pinch_estimate(const GeneratorMeasure& mu, int n0, int b0, int b1,
                                  const std::vector<ManifoldPoint>& x_grid,
                                  const std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& v_pairs,
                                  const EstimatorOptions& opt);

// inf over (x, v) of E log |Dg(x,v)|; expanding iff value > n0*kappa.
HypothesisEstimate expansion_estimate(const GeneratorMeasure& mu, int n0,
                                      const std::vector<ManifoldPoint>& x_grid,
                                      const std::vector<Eigen::VectorXd>& v_grid,
                                      const EstimatorOptions& opt);

// Mirror on unit covectors: E log |xi o (Dg)^{-1}|.
HypothesisEstimate coexpansion_estimate(const GeneratorMeasure& mu, int n0,
                                        const std::vector<ManifoldPoint>& x_grid,
                                        const std::vector<Eigen::VectorXd>& xi_grid,
                                        const EstimatorOptions& opt);

// Worst case |E log det Dg(x)| over x_grid (almost volume preservation).
HypothesisEstimate log_det_estimate(const GeneratorMeasure& mu, int n0,
                                    const std::vector<ManifoldPoint>& x_grid,
                                    const EstimatorOptions& opt);

// Empirical deviation rate: P(log det outside (-n eta', n eta')) per n,
// with a fitted exponential rate (least squares on log frequencies).
struct DeviationReport {
    std::vector<int> steps;
    std::vector<double> freq;
    double fitted_rate = 0.0;
    bool fit_available = false;
};

DeviationReport det_deviation_check(const GeneratorMeasure& mu, double eta_prime,
                                    const std::vector<int>& steps,
                                    const ManifoldPoint& x, const EstimatorOptions& opt);

// --- flag statistics and Phase-I machinery ---------------------------------

struct NonConcentrationRow {
    double rho = 0.0;
    double freq = 0.0;
    double stderr_ = 0.0;
    int hits = 0;
};

struct NonConcentrationReport {
    std::vector<NonConcentrationRow> table;
    double fitted_c = 0.0;
    double fit_stderr = 0.0;
    double fit_r2 = 0.0;
    bool fit_available = false;
};

// P(angle(W_b(x,g), V) < rho) for g ~ mu^{*n}, with the least-squares
// exponent fit over the sub-range with at least 20 hits.
NonConcentrationReport angle_nonconcentration(const GeneratorMeasure& mu, int n,
                                              const ManifoldPoint& x,
                                              const Eigen::MatrixXd& v_basis, int b,
                                              const std::vector<double>& rho_list,
                                              int count, std::uint64_t seed,
                                              int threads = 1);

struct MargulisReport {
    std::vector<int> steps;
    // max over sampled pairs of (S^n Delta_s - floor)/Delta_s, the decaying
    // contraction factor; floor is the stationary E Delta_s estimate.
    std::vector<double> contraction;
    double floor_estimate = 0.0;
    double fitted_log_c = 0.0;
    double fitted_rate = 0.0;
    double rate_stderr = 0.0;
    double affine_c = 0.0;  // smallest C making S^n D_s <= C e^{rate n} D_s + C
    bool fit_available = false;
};

MargulisReport margulis_contraction(const GeneratorMeasure& mu, double s, int pair_samples,
                                    const std::vector<int>& n_list, int trials,
                                    std::uint64_t seed, int threads = 1);

struct BackForthReport {
    double freq = 0.0;
    double stderr_ = 0.0;
};

// P(|D(g^{-1} h)(x, v)| <= 2) over independent (g, h) ~ mu^{*n} x mu^{*n}.
BackForthReport backforth_expansion(const GeneratorMeasure& mu, int n,
                                    const ManifoldPoint& x, const Eigen::VectorXd& v,
                                    int count, std::uint64_t seed, int threads = 1);

}  // namespace ergolab
