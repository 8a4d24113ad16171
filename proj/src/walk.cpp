#include "ergolab/walk.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "ergolab/parallel.hpp"
#include "ergolab/rng.hpp"

namespace ergolab {

namespace {

int draw_index(const std::vector<double>& weights, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

}  // namespace

void GeneratorMeasure::validate() const {
    if (gens.empty() || weights.size() != gens.size())
        throw std::invalid_argument("walk: generator/weight size mismatch");
    double s = 0.0;
    for (double w : weights) {
        if (w <= 0.0) throw std::invalid_argument("walk: weights must be strictly positive");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-12)
        throw std::invalid_argument("walk: weights must sum to 1");
    ManifoldKind k = generator_manifold(gens[0], 0);
    for (const auto& g : gens) {
        validate_generator(g);
        if (!(generator_manifold(g, 0) == k))
            throw std::invalid_argument("walk: generators live on different manifolds");
    }
}

int GeneratorMeasure::dim() const { return manifold().d; }

ManifoldKind GeneratorMeasure::manifold() const {
    if (gens.empty()) throw std::invalid_argument("walk: empty generator list");
    return generator_manifold(gens[0], 0);
}

double EmpiricalMeasure::total_mass() const {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

DiffeoWord sample_word(const GeneratorMeasure& mu, int n, std::uint64_t seed,
                       std::uint64_t stream) {
    if (n < 0) throw std::invalid_argument("walk: negative word length");
    DiffeoWord w;
    w.letters.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Philox rng(seed, substream(stream, static_cast<std::uint64_t>(i)));
        w.letters.push_back({draw_index(mu.weights, rng.next_double()), false});
    }
    return w;
}

EmpiricalMeasure empirical_pushforward(const GeneratorMeasure& mu, const ManifoldPoint& x,
                                       int n, int count, std::uint64_t seed,
                                       int threads) {
    if (count < 1) throw std::invalid_argument("walk: sample count must be >= 1");
    EmpiricalMeasure out;
    out.atoms.resize(static_cast<std::size_t>(count), x);
    out.weights.assign(static_cast<std::size_t>(count), 1.0 / count);
    parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t j) {
        DiffeoWord w = sample_word(mu, n, seed, static_cast<std::uint64_t>(j) + 1);
        out.atoms[j] = apply(w, mu.gens, x);
    });
    return out;
}

BallMassResult max_ball_mass(const EmpiricalMeasure& nu, double rho) {
    if (rho <= 0.0) throw std::invalid_argument("walk: radius must be positive");
    if (nu.atoms.empty()) throw std::domain_error("walk: max_ball_mass of empty measure");
    std::size_t n = nu.atoms.size();
    BallMassResult r;
    for (std::size_t i = 0; i < n; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = distance(nu.atoms[i], nu.atoms[j]);
            if (d < rho) m1 += nu.weights[j];
            if (d < 2.0 * rho) m2 += nu.weights[j];
        }
        if (m1 > r.mass) {
            r.mass = m1;
            r.witness = static_cast<int>(i);
        }
        if (m2 > r.mass_double) {
            r.mass_double = m2;
            r.witness_double = static_cast<int>(i);
        }
    }
    return r;
}

std::vector<double> atom_decay_curve(const GeneratorMeasure& mu, const ManifoldPoint& x,
                                     int n_max, int count, std::uint64_t seed,
                                     int threads) {
    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) {
        EmpiricalMeasure nu = empirical_pushforward(mu, x, n, count, seed, threads);
        // Cluster coincident atoms: sort lexicographically, then sweep.
        std::vector<int> order(nu.atoms.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const auto& pa = nu.atoms[static_cast<std::size_t>(a)].coords;
            const auto& pb = nu.atoms[static_cast<std::size_t>(b)].coords;
            for (int i = 0; i < pa.size(); ++i) {
                if (pa[i] != pb[i]) return pa[i] < pb[i];
            }
            return false;
        });
        const double tol = 1e-9;
        double best = 0.0, cur = 0.0;
        for (std::size_t s = 0; s < order.size(); ++s) {
            bool fresh = s == 0;
            if (!fresh) {
                const auto& prev = nu.atoms[static_cast<std::size_t>(order[s - 1])];
                const auto& here = nu.atoms[static_cast<std::size_t>(order[s])];
                if (distance(prev, here) > tol) fresh = true;
            }
            cur = fresh ? nu.weights[static_cast<std::size_t>(order[s])]
                        : cur + nu.weights[static_cast<std::size_t>(order[s])];
            best = std::max(best, cur);
        }
        curve.push_back(best);
    }
    return curve;
}

SampledLdpReport ldp_moment_check_sampled(const GeneratorMeasure& mu,
                                          const std::function<double(const ManifoldPoint&)>& f,
                                          double sup_f, const ManifoldPoint& x, double eps,
                                          const std::vector<int>& steps, int trials,
                                          std::uint64_t seed, int threads) {
    if (eps <= 0.0 || eps > 0.5)
        throw std::invalid_argument("ldp: epsilon must lie in (0, 1/2]");
    if (sup_f <= 0.0) throw std::invalid_argument("ldp: sup|f| must be positive");

    // empirical drift check E_y f(X_1) <= 0 on sampled starting points
    ManifoldKind kind = mu.manifold();
    Philox prng(seed, 0x0D51);
    const int drift_points = 16, drift_trials = 512;
    for (int pi = 0; pi < drift_points; ++pi) {
        ManifoldPoint y = pi == 0 ? x : sample_point(kind, prng);
        double mean = 0.0, sq = 0.0;
        for (int t = 0; t < drift_trials; ++t) {
            DiffeoWord w = sample_word(mu, 1, seed, substream(0xD8 + pi, static_cast<std::uint64_t>(t)));
            double v = f(apply(w, mu.gens, y));
            mean += v;
            sq += v * v;
        }
        mean /= drift_trials;
        double se = std::sqrt(std::max(sq / drift_trials - mean * mean, 1e-12) / drift_trials);
        if (mean > 3.0 * se + 1e-9) {
            std::ostringstream os;
            os << "ldp: empirical drift E_x f(X1) <= 0 violated at sampled point " << pi
               << " (mean " << mean << ", se " << se << ")";
            throw std::invalid_argument(os.str());
        }
    }

    SampledLdpReport rep;
    rep.sup_f = sup_f;
    rep.gamma = eps / ((1.0 + sup_f) * (1.0 + sup_f));
    rep.steps = steps;
    int n_max = steps.empty() ? 0 : *std::max_element(steps.begin(), steps.end());

    // per-trajectory partial sums of f along the walk
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(trials));
    parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
        ManifoldPoint cur = x;
        std::vector<double>& row = sums[t];
        row.resize(static_cast<std::size_t>(n_max) + 1, 0.0);
        for (int i = 1; i <= n_max; ++i) {
            Philox rng(seed, substream(substream(0x717, t), static_cast<std::uint64_t>(i)));
            int gi = draw_index(mu.weights, rng.next_double());
            cur = apply(DiffeoWord::single(gi), mu.gens, cur);
            row[static_cast<std::size_t>(i)] =
                row[static_cast<std::size_t>(i - 1)] + f(cur);
        }
    });

    rep.pass = true;
    for (int n : steps) {
        double mean = 0.0, sq = 0.0;
        for (int t = 0; t < trials; ++t) {
            double v = std::exp(rep.gamma * sums[static_cast<std::size_t>(t)]
                                                [static_cast<std::size_t>(n)]);
            mean += v;
            sq += v * v;
        }
        mean /= trials;
        double se = std::sqrt(std::max(sq / trials - mean * mean, 0.0) / trials);
        double rhs = std::exp(rep.gamma * eps * n);
        rep.lhs.push_back(mean);
        rep.lhs_stderr.push_back(se);
        rep.rhs.push_back(rhs);
        if (mean - 2.0 * se > rhs) rep.pass = false;
    }
    return rep;
}

LdpReport ldp_moment_check(const FiniteChain& chain, double eps,
                           const std::vector<int>& steps, double slack) {
    if (eps <= 0.0 || eps > 0.5)
        throw std::invalid_argument("ldp: epsilon must lie in (0, 1/2]");
    std::size_t m = chain.transition.size();
    if (m == 0 || chain.observable.size() != m)
        throw std::invalid_argument("ldp: malformed chain");
    for (std::size_t x = 0; x < m; ++x) {
        if (chain.transition[x].size() != m)
            throw std::invalid_argument("ldp: transition matrix is not square");
        double rowsum = std::accumulate(chain.transition[x].begin(),
                                        chain.transition[x].end(), 0.0);
        if (std::abs(rowsum - 1.0) > 1e-12)
            throw std::invalid_argument("ldp: transition rows must sum to 1");
        double drift = 0.0;
        for (std::size_t y = 0; y < m; ++y)
            drift += chain.transition[x][y] * chain.observable[y];
        if (drift > 1e-12) {
            std::ostringstream os;
            os << "ldp: drift hypothesis E_x f(X1) <= 0 violated at state " << x
               << " (value " << drift << ")";
            throw std::invalid_argument(os.str());
        }
    }

    LdpReport rep;
    rep.sup_f = 0.0;
    for (double f : chain.observable) rep.sup_f = std::max(rep.sup_f, std::abs(f));
    rep.gamma = eps / ((1.0 + rep.sup_f) * (1.0 + rep.sup_f));
    rep.steps = steps;

    int n_max = steps.empty() ? 0 : *std::max_element(steps.begin(), steps.end());
    // v[x] = E_x exp(gamma sum_{i=1..n} f(X_i)); one transfer-matrix sweep.
    std::vector<double> v(m, 1.0), next(m, 0.0);
    std::vector<double> lhs_by_n(static_cast<std::size_t>(n_max) + 1, 1.0);
    for (int n = 1; n <= n_max; ++n) {
        for (std::size_t x = 0; x < m; ++x) {
            double acc = 0.0;
            for (std::size_t y = 0; y < m; ++y)
                acc += chain.transition[x][y] * std::exp(rep.gamma * chain.observable[y]) * v[y];
            next[x] = acc;
        }
        v.swap(next);
        lhs_by_n[static_cast<std::size_t>(n)] = v[static_cast<std::size_t>(chain.start)];
    }

    rep.pass = true;
    for (int n : steps) {
        double lhs = lhs_by_n.at(static_cast<std::size_t>(n));
        double rhs = std::exp(rep.gamma * eps * n);
        rep.lhs.push_back(lhs);
        rep.rhs.push_back(rhs);
        rep.tail_prob.push_back(lhs * std::exp(-2.0 * rep.gamma * eps * n));
        rep.tail_bound.push_back(std::exp(-rep.gamma * eps * n));
        if (lhs > rhs * (1.0 + slack)) rep.pass = false;
    }
    return rep;
}

}  // namespace ergolab
