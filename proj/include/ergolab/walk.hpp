#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ergolab/diffeo.hpp"
#include "ergolab/manifold.hpp"

namespace ergolab {

// Finitely supported driving law mu on the generator list. Weights are a
// strictly positive probability vector over the declared support.
struct GeneratorMeasure {
    std::vector<Generator> gens;
    std::vector<double> weights;

    void validate() const;
    int dim() const;
    ManifoldKind manifold() const;
};

// Weighted point cloud standing in for mu^{*n} * delta_x or any Borel
// measure of mass at most 1 at desk scale.
struct EmpiricalMeasure {
    std::vector<ManifoldPoint> atoms;
    std::vector<double> weights;
    double total_mass() const;
};

struct BallMassResult {
    double mass = 0.0;           // best atom-centered ball at radius rho
    int witness = -1;            // atom index of the maximizer
    double mass_double = 0.0;    // same at radius 2*rho (the bracket)
    int witness_double = -1;
};

// i.i.d. word of length n; letter i is drawn from the counter stream
// (seed, stream, i), so the word is reproducible and order-independent.
DiffeoWord sample_word(const GeneratorMeasure& mu, int n, std::uint64_t seed,
                       std::uint64_t stream = 0);

// N trajectories of length n from x; equally weighted atoms, mass 1.
EmpiricalMeasure empirical_pushforward(const GeneratorMeasure& mu, const ManifoldPoint& x,
                                       int n, int count, std::uint64_t seed,
                                       int threads = 1);

// sup over atom-centered balls of nu(B_rho(center)), reported at rho and
// 2*rho: recentring the true maximizer on an atom costs at most a factor 2
// in radius, so [mass, mass_double] brackets the continuous sup.
BallMassResult max_ball_mass(const EmpiricalMeasure& nu, double rho);

// Largest empirical point mass per step count, clustering coincident atoms
// at tolerance 1e-9.
std::vector<double> atom_decay_curve(const GeneratorMeasure& mu, const ManifoldPoint& x,
                                     int n_max, int count, std::uint64_t seed,
                                     int threads = 1);

// --- large deviation checker (finite chains exact, sampled chains MC) ----

struct FiniteChain {
    std::vector<std::vector<double>> transition;  // row-stochastic
    std::vector<double> observable;               // f per state
    int start = 0;
};

struct LdpReport {
    double gamma = 0.0;
    double sup_f = 0.0;
    std::vector<int> steps;
    std::vector<double> lhs;       // E_x exp(gamma sum f(X_i)), exact for finite chains
    std::vector<double> rhs;       // exp(gamma * eps * n)
    std::vector<double> tail_prob; // Chernoff bound lhs * exp(-2 gamma eps n)
    std::vector<double> tail_bound;// exp(-gamma eps n)
    bool pass = false;
};

// Verifies E_x exp(gamma sum_{i<=n} f(X_i)) <= exp(gamma eps n) with
// gamma = eps / (1 + sup|f|)^2, by exact transfer-matrix products. The
// drift hypothesis E_x f(X_1) <= 0 is checked for every state first; a
// violation throws with the witness state in the message.
LdpReport ldp_moment_check(const FiniteChain& chain, double eps,
                           const std::vector<int>& steps, double slack = 1e-12);

struct SampledLdpReport {
    double gamma = 0.0;
    double sup_f = 0.0;
    std::vector<int> steps;
    std::vector<double> lhs;         // Monte Carlo estimate
    std::vector<double> lhs_stderr;
    std::vector<double> rhs;
    bool pass = false;
};

// Same bound for the walk-induced chain on M with a bounded observable,
// estimated by Monte Carlo over `trials` trajectories from x. The drift
// hypothesis is pre-checked empirically on sampled starting points and a
// 3-sigma violation throws with the witness index.
SampledLdpReport ldp_moment_check_sampled(const GeneratorMeasure& mu,
                                          const std::function<double(const ManifoldPoint&)>& f,
                                          double sup_f, const ManifoldPoint& x, double eps,
                                          const std::vector<int>& steps, int trials,
                                          std::uint64_t seed, int threads = 1);

}  // namespace ergolab
