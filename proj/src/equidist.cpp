#include "ergolab/equidist.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "ergolab/parallel.hpp"
#include "ergolab/transport.hpp"

namespace ergolab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<ManifoldPoint> torus_grid_centers(int d, int k) {
    std::vector<ManifoldPoint> out;
    long total = 1;
    for (int i = 0; i < d; ++i) total *= k;
    out.reserve(static_cast<std::size_t>(total));
    for (long idx = 0; idx < total; ++idx) {
        Eigen::VectorXd c(d);
        long rem = idx;
        for (int i = 0; i < d; ++i) {
            c(i) = (static_cast<double>(rem % k) + 0.5) / k;
            rem /= k;
        }
        out.push_back(ManifoldPoint::torus(c));
    }
    return out;
}

}  // namespace

double MollifiedDensity::max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
}

MollifiedDensity mollify(const EmpiricalMeasure& nu, double rho, int grid) {
    if (nu.atoms.empty()) throw std::invalid_argument("equidist: empty measure");
    MollifiedDensity out;
    out.kind = nu.atoms[0].kind;
    out.grid = grid;
    if (out.kind.family == ManifoldFamily::Torus) {
        if (rho < 2.0 / grid)
            throw std::invalid_argument("equidist: mollification below grid resolution");
        out.centers = torus_grid_centers(out.kind.d, grid);
        out.cell_measure.assign(out.centers.size(),
                                1.0 / static_cast<double>(out.centers.size()));
    } else {
        if (out.kind.d != 2)
            throw std::invalid_argument("equidist: sphere mollification implemented for S^2");
        if (rho < 2.0 * std::numbers::pi / grid)
            throw std::invalid_argument("equidist: mollification below grid resolution");
        // equal-area latitude bands (uniform in cos theta), `grid` bands and
        // 2*grid longitudes
        for (int bi = 0; bi < grid; ++bi) {
            double z = 1.0 - (2.0 * bi + 1.0) / grid;
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            for (int li = 0; li < 2 * grid; ++li) {
                double phi = kTwoPi * (li + 0.5) / (2 * grid);
                Eigen::Vector3d p(r * std::cos(phi), r * std::sin(phi), z);
                p.normalize();
                out.centers.push_back(ManifoldPoint::sphere(p));
                out.cell_measure.push_back(1.0 / (grid * 2.0 * grid));
            }
        }
    }
    double vol_ball = ball_volume(out.kind, rho);
    out.values.assign(out.centers.size(), 0.0);
    for (std::size_t c = 0; c < out.centers.size(); ++c) {
        double acc = 0.0;
        for (std::size_t a = 0; a < nu.atoms.size(); ++a)
            if (distance(out.centers[c], nu.atoms[a]) < rho) acc += nu.weights[a];
        out.values[c] = acc / vol_ball;
    }
    double mass = 0.0;
    for (std::size_t c = 0; c < out.values.size(); ++c)
        mass += out.values[c] * out.cell_measure[c];
    if (mass <= 0.0) throw std::runtime_error("equidist: mollification lost all mass");
    out.renormalization = 1.0 / mass;
    for (double& v : out.values) v *= out.renormalization;
    return out;
}

namespace {

struct TruncatedProblem {
    std::vector<double> supply, demand;
    Eigen::MatrixXd dist;
};

double truncated_cost_value(const TruncatedProblem& pb, double l, TransportResult* out) {
    double u = 1.0 - l;
    Eigen::MatrixXd cost =
        (l * pb.dist).cwiseMin(2.0 * u * Eigen::MatrixXd::Ones(pb.dist.rows(), pb.dist.cols()));
    TransportResult res = solve_transport(pb.supply, pb.demand, cost);
    if (out) *out = res;
    return res.cost;
}

}  // namespace

W1Report wasserstein1(const EmpiricalMeasure& nu1, const EmpiricalMeasure& nu2,
                      int golden_iterations) {
    std::size_t n1 = nu1.atoms.size(), n2 = nu2.atoms.size();
    if (n1 == 0 || n2 == 0) throw std::invalid_argument("equidist: empty measure");
    if (n1 > 10000 || n2 > 10000)
        throw std::invalid_argument(
            "equidist: support above the LP guard (10^4); use stratified_subsample first");
    if (std::abs(nu1.total_mass() - 1.0) > 1e-9 || std::abs(nu2.total_mass() - 1.0) > 1e-9)
        throw std::invalid_argument("equidist: wasserstein1 needs probability measures");

    TruncatedProblem pb;
    pb.supply = nu1.weights;
    pb.demand = nu2.weights;
    pb.dist.resize(static_cast<long>(n1), static_cast<long>(n2));
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
            pb.dist(static_cast<long>(i), static_cast<long>(j)) =
                distance(nu1.atoms[i], nu2.atoms[j]);

    int iters = golden_iterations > 0 ? golden_iterations
                                      : (n1 + n2 <= 600 ? 35 : 16);

    // Golden-section maximization of the concave value function V(L).
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.01, b = 0.999;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    W1Report rep;
    double f1 = truncated_cost_value(pb, x1, nullptr);
    double f2 = truncated_cost_value(pb, x2, nullptr);
    rep.solves = 2;
    double best_l = f1 >= f2 ? x1 : x2;
    double best_v = std::max(f1, f2);
    for (int it = 0; it < iters; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = truncated_cost_value(pb, x2, nullptr);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = truncated_cost_value(pb, x1, nullptr);
        }
        ++rep.solves;
        if (f1 > best_v) best_v = f1, best_l = x1;
        if (f2 > best_v) best_v = f2, best_l = x2;
    }

    TransportResult final_res;
    double v = truncated_cost_value(pb, best_l, &final_res);
    ++rep.solves;
    rep.value = 0.5 * v;
    rep.inner_l = best_l;
    rep.optimal = final_res.optimal;

    // Witness: sink-side c-transform of the simplex potentials,
    // f(z) = min_j (min(L d(z, y_j), 2u) + pi_j). The truncated cost is a
    // metric, so f is L-Lipschitz with oscillation at most 2u; recentring
    // puts it inside [-u, u], and by complementary slackness it attains the
    // optimum exactly.
    double u = 1.0 - best_l;
    auto ctransform = [&](const ManifoldPoint& z) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n2; ++j) {
            if (nu2.weights[j] <= 0.0) continue;  // unconstrained potential
            double c = std::min(best_l * distance(z, nu2.atoms[j]), 2.0 * u);
            m = std::min(m, c + final_res.potential_snk[j]);
        }
        return m;
    };
    std::vector<double> smoothed(n1 + n2);
    for (std::size_t i = 0; i < n1; ++i) smoothed[i] = ctransform(nu1.atoms[i]);
    for (std::size_t j = 0; j < n2; ++j) smoothed[n1 + j] = ctransform(nu2.atoms[j]);
    double lo = *std::min_element(smoothed.begin(), smoothed.end());
    double hi = *std::max_element(smoothed.begin(), smoothed.end());
    double shift = 0.5 * (lo + hi);
    rep.witness_first.resize(n1);
    rep.witness_second.resize(n2);
    double primal = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
        rep.witness_first[i] = smoothed[i] - shift;
        primal += nu1.weights[i] * rep.witness_first[i];
    }
    for (std::size_t j = 0; j < n2; ++j) {
        rep.witness_second[j] = smoothed[n1 + j] - shift;
        primal -= nu2.weights[j] * rep.witness_second[j];
    }
    rep.duality_gap = std::abs(primal - v);
    return rep;
}

EmpiricalMeasure volume_grid(const ManifoldKind& kind, double rho) {
    if (kind.family != ManifoldFamily::Torus)
        throw std::invalid_argument("equidist: volume grid implemented on the torus");
    int k = std::max(2, static_cast<int>(std::lround(1.0 / rho)));
    EmpiricalMeasure out;
    out.atoms = torus_grid_centers(kind.d, k);
    out.weights.assign(out.atoms.size(), 1.0 / static_cast<double>(out.atoms.size()));
    return out;
}

std::pair<EmpiricalMeasure, double> stratified_subsample(const EmpiricalMeasure& nu,
                                                         int target) {
    if (nu.atoms.empty()) throw std::invalid_argument("equidist: empty measure");
    if (static_cast<int>(nu.atoms.size()) <= target) return {nu, 0.0};
    const ManifoldKind kind = nu.atoms[0].kind;
    if (kind.family != ManifoldFamily::Torus)
        throw std::invalid_argument("equidist: subsampling implemented on the torus");
    int d = kind.d;
    int cells = std::max(1, static_cast<int>(std::floor(
                                std::pow(static_cast<double>(target), 1.0 / d))));
    // aggregate atoms per cell at the cell's weighted centroid
    std::map<std::vector<long>, std::pair<Eigen::VectorXd, double>> agg;
    for (std::size_t i = 0; i < nu.atoms.size(); ++i) {
        std::vector<long> key(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a)
            key[static_cast<std::size_t>(a)] =
                static_cast<long>(std::floor(nu.atoms[i].coords(a) * cells));
        auto it = agg.find(key);
        if (it == agg.end()) {
            agg[key] = {nu.weights[i] * nu.atoms[i].coords, nu.weights[i]};
        } else {
            it->second.first += nu.weights[i] * nu.atoms[i].coords;
            it->second.second += nu.weights[i];
        }
    }
    EmpiricalMeasure out;
    double radius = 0.0;
    for (const auto& [key, cw] : agg) {
        if (cw.second <= 0.0) continue;
        Eigen::VectorXd centroid = cw.first / cw.second;
        out.atoms.push_back(ManifoldPoint::torus(centroid));
        out.weights.push_back(cw.second);
    }
    // moved-mass radius: half the cell diagonal
    radius = 0.5 * std::sqrt(static_cast<double>(d)) / cells;
    return {out, radius};
}

SpectrumReport fourier_transfer_spectrum(const GeneratorMeasure& mu, int truncation,
                                         int quadrature, int threads) {
    ManifoldKind kind = mu.manifold();
    if (kind.family != ManifoldFamily::Torus)
        throw std::invalid_argument("equidist: Fourier spectra are torus-only");
    int d = kind.d;
    int side = 2 * truncation + 1;
    long nfreq = 1;
    for (int i = 0; i < d; ++i) nfreq *= side;

    auto freq_of = [&](long idx) {
        Eigen::VectorXi k(d);
        long rem = idx;
        for (int i = 0; i < d; ++i) {
            k(i) = static_cast<int>(rem % side) - truncation;
            rem /= side;
        }
        return k;
    };
    auto index_of = [&](const Eigen::VectorXi& k) -> long {
        long idx = 0, stride = 1;
        for (int i = 0; i < d; ++i) {
            int c = k(i) + truncation;
            if (c < 0 || c >= side) return -1;
            idx += stride * c;
            stride *= side;
        }
        return idx;
    };

    SpectrumReport rep;
    rep.truncation = truncation;
    rep.quadrature = quadrature;
    rep.matrix = Eigen::MatrixXcd::Zero(nfreq, nfreq);

    // quadrature nodes (midpoint rule), shared by all generators
    long qtotal = 1;
    for (int i = 0; i < d; ++i) qtotal *= quadrature;

    for (std::size_t gi = 0; gi < mu.gens.size(); ++gi) {
        double wgt = mu.weights[gi];
        if (const auto* lin = std::get_if<ToralLinear>(&mu.gens[gi])) {
            Eigen::MatrixXi at = lin->matrix.transpose();
            for (long ki = 0; ki < nfreq; ++ki) {
                Eigen::VectorXi k = freq_of(ki);
                long li = index_of((at * k).eval());
                if (li >= 0) rep.matrix(ki, li) += wgt;
            }
            continue;
        }
        // quadrature path: precompute g(x) on the grid once
        std::vector<Eigen::VectorXd> gx(static_cast<std::size_t>(qtotal));
        parallel_for(static_cast<std::size_t>(qtotal), threads, [&](std::size_t qi) {
            Eigen::VectorXd x(d);
            long rem = static_cast<long>(qi);
            for (int i = 0; i < d; ++i) {
                x(i) = (static_cast<double>(rem % quadrature) + 0.5) / quadrature;
                rem /= quadrature;
            }
            gx[qi] = apply(DiffeoWord::single(static_cast<int>(gi)), mu.gens,
                           ManifoldPoint::torus(x))
                         .coords;
        });
        // E1[k, q] = e^{2 pi i <k, g(x_q)>}, E2[q, l] = conj e^{2 pi i <l, x_q>}
        Eigen::MatrixXcd e1(nfreq, qtotal), e2(qtotal, nfreq);
        parallel_for(static_cast<std::size_t>(nfreq), threads, [&](std::size_t ki) {
            Eigen::VectorXi k = freq_of(static_cast<long>(ki));
            Eigen::VectorXd kd = k.cast<double>();
            for (long qi = 0; qi < qtotal; ++qi) {
                double phase = kTwoPi * kd.dot(gx[static_cast<std::size_t>(qi)]);
                e1(static_cast<long>(ki), qi) = std::polar(1.0, phase);
            }
        });
        parallel_for(static_cast<std::size_t>(nfreq), threads, [&](std::size_t li) {
            Eigen::VectorXi l = freq_of(static_cast<long>(li));
            Eigen::VectorXd ld = l.cast<double>();
            for (long qi = 0; qi < qtotal; ++qi) {
                Eigen::VectorXd x(d);
                long rem = qi;
                for (int i = 0; i < d; ++i) {
                    x(i) = (static_cast<double>(rem % quadrature) + 0.5) / quadrature;
                    rem /= quadrature;
                }
                e2(qi, static_cast<long>(li)) = std::polar(1.0, -kTwoPi * ld.dot(x));
            }
        });
        rep.matrix += (wgt / static_cast<double>(qtotal)) * (e1 * e2);

        // aliasing diagnostic: Fourier mass just above 2K on the largest row
        Eigen::VectorXi ktest = Eigen::VectorXi::Zero(d);
        ktest(0) = truncation;
        Eigen::VectorXd kd = ktest.cast<double>();
        Eigen::VectorXi ltest = Eigen::VectorXi::Zero(d);
        ltest(0) = 2 * truncation + 1;
        if (2 * truncation + 1 < quadrature / 2) {
            std::complex<double> acc = 0.0;
            for (long qi = 0; qi < qtotal; ++qi) {
                Eigen::VectorXd x(d);
                long rem = qi;
                for (int i = 0; i < d; ++i) {
                    x(i) = (static_cast<double>(rem % quadrature) + 0.5) / quadrature;
                    rem /= quadrature;
                }
                acc += std::polar(1.0, kTwoPi * kd.dot(gx[static_cast<std::size_t>(qi)])) *
                       std::polar(1.0, -kTwoPi * ltest.cast<double>().dot(x));
            }
            double tail = std::abs(acc) / static_cast<double>(qtotal);
            if (tail > 1e-8)
                rep.warnings.push_back("generator " + std::to_string(gi) +
                                       ": Fourier tail above 2K is " + std::to_string(tail));
        }
    }

    // T fixes constants: enforce the exact row at k = 0.
    long zero = index_of(Eigen::VectorXi::Zero(d));
    for (long li = 0; li < nfreq; ++li) rep.matrix(zero, li) = li == zero ? 1.0 : 0.0;

    // Non-constant block: drop row/column k = 0.
    Eigen::MatrixXcd block(nfreq - 1, nfreq - 1);
    {
        long bi = 0;
        for (long i = 0; i < nfreq; ++i) {
            if (i == zero) continue;
            long bj = 0;
            for (long j = 0; j < nfreq; ++j) {
                if (j == zero) continue;
                block(bi, bj) = rep.matrix(i, j);
                ++bj;
            }
            ++bi;
        }
    }
    for (long i = 0; i < nfreq - 1; ++i) {
        double row = 0.0;
        for (long j = 0; j < nfreq - 1; ++j) row += std::abs(block(i, j));
        rep.block_sup_norm = std::max(rep.block_sup_norm, row);
    }

    // Power iteration with a windowed Gelfand ratio; exact zero (nilpotent
    // escape) short-circuits.
    {
        Eigen::VectorXcd v = Eigen::VectorXcd::Ones(nfreq - 1);
        v /= v.norm();
        const int iters = 1000, window = 200;
        double log_start = 0.0;
        double radius = 0.0;
        bool annihilated = false;
        for (int it = 0; it < iters; ++it) {
            Eigen::VectorXcd w = block * v;
            double nw = w.norm();
            if (nw == 0.0) {
                radius = 0.0;
                annihilated = true;
                break;
            }
            if (it == iters - window) log_start = 0.0;
            if (it >= iters - window) log_start += std::log(nw);
            v = w / nw;
        }
        if (!annihilated) radius = std::exp(log_start / window);
        rep.block_radius = radius;
    }

    // Leading eigenvalues from a dense solve when affordable (diagnostic).
    if (nfreq - 1 <= 1500) {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(block, false);
        std::vector<std::complex<double>> eigs(es.eigenvalues().data(),
                                               es.eigenvalues().data() + nfreq - 1);
        std::sort(eigs.begin(), eigs.end(),
                  [](auto a, auto b) { return std::abs(a) > std::abs(b); });
        eigs.resize(std::min<std::size_t>(eigs.size(), 8));
        rep.leading_eigs = eigs;
    }
    return rep;
}

StationaryReport stationary_density(const GeneratorMeasure& mu, int truncation,
                                    int quadrature, int threads) {
    SpectrumReport spec = fourier_transfer_spectrum(mu, truncation, quadrature, threads);
    long nfreq = spec.matrix.rows();
    int d = mu.dim();
    int side = 2 * truncation + 1;
    long zero = 0;
    {
        long stride = 1;
        for (int i = 0; i < d; ++i) {
            zero += stride * truncation;
            stride *= side;
        }
    }
    // Row k of the matrix holds the coefficients of T e_k, so T acts on
    // coefficient vectors by its transpose and the adjoint acts by the
    // entrywise conjugate.
    Eigen::MatrixXcd adj = spec.matrix.conjugate();

    auto iterate = [&](Eigen::VectorXcd v, int max_it, double tol, int* used) {
        for (int it = 0; it < max_it; ++it) {
            Eigen::VectorXcd w = adj * v;
            if (std::abs(w(zero)) < 1e-14)
                w(zero) = 1e-14;  // keep the normalization well-defined
            w /= w(zero);
            double res = (w - v).norm();
            v = w;
            if (res < tol) {
                if (used) *used = it + 1;
                return std::make_pair(v, res);
            }
        }
        if (used) *used = max_it;
        return std::make_pair(v, (adj * v / (adj * v)(zero) - v).norm());
    };

    StationaryReport rep;
    Eigen::VectorXcd v0 = Eigen::VectorXcd::Zero(nfreq);
    v0(zero) = 1.0;
    // small deterministic seasoning on nonzero modes
    for (long i = 0; i < nfreq; ++i)
        if (i != zero) v0(i) = 0.01 * std::polar(1.0, 0.37 * static_cast<double>(i));
    auto [phi, res] = iterate(v0, 10000, 1e-13, &rep.iterations);
    rep.residual = res;
    if (res > 1e-8) throw std::runtime_error("equidist: stationary power iteration stalled");
    rep.coefficients.assign(phi.data(), phi.data() + nfreq);

    // uniqueness diagnostic: a different seasoning converging elsewhere
    Eigen::VectorXcd v1 = Eigen::VectorXcd::Zero(nfreq);
    v1(zero) = 1.0;
    for (long i = 0; i < nfreq; ++i)
        if (i != zero) v1(i) = 0.02 * std::polar(1.0, -1.1 * static_cast<double>(i));
    auto [phi2, res2] = iterate(v1, 10000, 1e-13, nullptr);
    rep.unique = (phi2 - phi).norm() < 1e-6 * std::max(1.0, phi.norm());
    (void)res2;

    // reconstruct on a grid for the positivity diagnostic
    int g = std::max(16, 4 * truncation);
    rep.min_density = std::numeric_limits<double>::infinity();
    long gtotal = 1;
    for (int i = 0; i < d; ++i) gtotal *= g;
    for (long idx = 0; idx < gtotal; ++idx) {
        Eigen::VectorXd x(d);
        long rem = idx;
        for (int i = 0; i < d; ++i) {
            x(i) = static_cast<double>(rem % g) / g;
            rem /= g;
        }
        std::complex<double> acc = 0.0;
        long stride = 1;
        for (long ki = 0; ki < nfreq; ++ki) {
            Eigen::VectorXi k(d);
            long krem = ki;
            for (int i = 0; i < d; ++i) {
                k(i) = static_cast<int>(krem % side) - truncation;
                krem /= side;
            }
            acc += rep.coefficients[static_cast<std::size_t>(ki)] *
                   std::polar(1.0, kTwoPi * k.cast<double>().dot(x));
        }
        (void)stride;
        rep.min_density = std::min(rep.min_density, acc.real());
    }
    return rep;
}

EquidistCurve equidistribution_curve(const GeneratorMeasure& mu, const ManifoldPoint& x,
                                     const std::vector<int>& n_list,
                                     const EmpiricalMeasure& reference,
                                     const EquidistOptions& opt) {
    EquidistCurve curve;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        int n = n_list[ni];
        EmpiricalMeasure nu =
            empirical_pushforward(mu, x, n, opt.sample_count, opt.seed, opt.threads);
        auto [sub, radius] = stratified_subsample(nu, opt.lp_budget);
        W1Report w1 = wasserstein1(sub, reference, opt.golden_iterations);
        EquidistPoint pt;
        pt.n = n;
        pt.w1 = w1.value;
        pt.sub_err = 0.5 * radius;
        // delta-method error bar: with the witness fixed, W1 is half the
        // mean of f over the walk sample
        if (!w1.witness_first.empty()) {
            double mean = 0.0, sq = 0.0;
            for (std::size_t i = 0; i < sub.atoms.size(); ++i) {
                mean += sub.weights[i] * w1.witness_first[i];
                sq += sub.weights[i] * w1.witness_first[i] * w1.witness_first[i];
            }
            double var = std::max(0.0, sq - mean * mean);
            pt.mc_err = 0.5 * std::sqrt(var / static_cast<double>(opt.sample_count));
        }
        curve.points.push_back(pt);
    }
    if (!curve.points.empty()) {
        curve.final_value = curve.points.back().w1;
        int down = 0, total = 0;
        for (std::size_t i = 1; i < curve.points.size(); ++i) {
            ++total;
            if (curve.points[i].w1 <= curve.points[i - 1].w1 + 1e-9) ++down;
        }
        curve.decreasing_trend = total == 0 || down * 3 >= total * 2;
    }
    return curve;
}

}  // namespace ergolab
