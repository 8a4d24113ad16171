#include "ergolab/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ergolab/parallel.hpp"
#include "ergolab/rng.hpp"

namespace ergolab {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXd orthocomplement(const Eigen::MatrixXd& basis) {
    int d = static_cast<int>(basis.rows());
    int k = static_cast<int>(basis.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
    Eigen::MatrixXd q = qr.householderQ();
    return q.rightCols(d - k);
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ();
    return q.leftCols(m.cols());
}

double sigma_max(const Eigen::MatrixXd& m) {
    if (m.cols() == 0 || m.rows() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

double sigma_min(const Eigen::MatrixXd& m) {
    if (m.cols() == 0 || m.rows() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

// Mean and standard error of a sample.
std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    if (xs.size() == 1) return {m, 0.0};
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= static_cast<double>(xs.size() - 1);
    return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

struct Ols {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r2 = 0.0;
    bool ok = false;
};

Ols ols_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    Ols o;
    std::size_t n = xs.size();
    if (n < 2) return o;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += xs[i], my += ys[i];
    mx /= n, my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0) return o;
    o.slope = sxy / sxx;
    o.intercept = my - o.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = ys[i] - (o.intercept + o.slope * xs[i]);
        sse += r * r;
    }
    o.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
    o.slope_stderr = n > 2 ? std::sqrt(sse / (static_cast<double>(n) - 2.0) / sxx) : 0.0;
    o.ok = true;
    return o;
}

// Shared grid-scan driver: evaluates a per-sample statistic on every
// (x, V) cell with independent substreams, then reports the worst cell.
struct CellStat {
    double mean = 0.0;
    double se = 0.0;
};

template <typename F>
HypothesisEstimate scan_worst(std::size_t nx, std::size_t nv, const EstimatorOptions& opt,
                              bool worst_is_max, const std::string& grid_desc, F&& cell_fn) {
    std::vector<CellStat> cells(nx * nv);
    parallel_for(nx * nv, opt.threads, [&](std::size_t idx) {
        cells[idx] = cell_fn(idx / nv, idx % nv, idx);
    });
    HypothesisEstimate e;
    e.grid = grid_desc;
    e.samples = opt.samples;
    bool first = true;
    for (std::size_t idx = 0; idx < cells.size(); ++idx) {
        double m = cells[idx].mean;
        bool worse = worst_is_max ? m > e.value : m < e.value;
        bool better = worst_is_max ? m < e.best_value : m > e.best_value;
        if (first || worse) {
            e.value = m;
            e.stderr_ = cells[idx].se;
            e.worst_x = static_cast<int>(idx / nv);
            e.worst_v = static_cast<int>(idx % nv);
        }
        if (first || better) e.best_value = m;
        first = false;
    }
    return e;
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Holds: return "holds";
        case Verdict::Fails: return "fails";
        default: return "inconclusive";
    }
}

Verdict verdict_below(const HypothesisEstimate& e, double threshold) {
    if (e.value + 2.0 * e.stderr_ < threshold) return Verdict::Holds;
    if (e.value - 2.0 * e.stderr_ >= threshold) return Verdict::Fails;
    return Verdict::Inconclusive;
}

Verdict verdict_above(const HypothesisEstimate& e, double threshold) {
    if (e.value - 2.0 * e.stderr_ > threshold) return Verdict::Holds;
    if (e.value + 2.0 * e.stderr_ <= threshold) return Verdict::Fails;
    return Verdict::Inconclusive;
}

CartanData cartan_of_matrix(const Eigen::MatrixXd& j) {
    int d = static_cast<int>(j.rows());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd sig = svd.singularValues();  // descending
    if (sig(d - 1) <= 0.0)
        throw std::runtime_error("cocycle: singular Jacobian in Cartan decomposition");
    Eigen::MatrixXd u = svd.matrixU();
    Eigen::MatrixXd v = svd.matrixV();

    // Canonical tie-breaking on (near-)equal singular values: replace each
    // degenerate right-singular block by its deterministic Gram-Schmidt
    // re-basing from the standard basis, and rebuild U on that block.
    int i = 0;
    while (i < d) {
        int jend = i + 1;
        while (jend < d && std::abs(sig(jend) - sig(i)) <= 1e-12 * std::max(1.0, sig(i))) ++jend;
        if (jend - i > 1) {
            Eigen::MatrixXd block = v.middleCols(i, jend - i);
            Eigen::MatrixXd proj = block * block.transpose();
            Eigen::MatrixXd nb(d, jend - i);
            int got = 0;
            for (int e = 0; e < d && got < jend - i; ++e) {
                Eigen::VectorXd cand = proj * Eigen::VectorXd::Unit(d, e);
                for (int c = 0; c < got; ++c) cand -= nb.col(c).dot(cand) * nb.col(c);
                double nn = cand.norm();
                if (nn > 1e-6) nb.col(got++) = cand / nn;
            }
            if (got == jend - i) {
                v.middleCols(i, jend - i) = nb;
                for (int c = i; c < jend; ++c) u.col(c) = j * v.col(c) / sig(c);
            }
        }
        i = jend;
    }
    // Deterministic sign convention per column pair.
    for (int c = 0; c < d; ++c) {
        int argmax = 0;
        v.col(c).cwiseAbs().maxCoeff(&argmax);
        if (v(argmax, c) < 0.0) {
            v.col(c) = -v.col(c);
            u.col(c) = -u.col(c);
        }
    }

    CartanData out;
    out.lambdas.resize(d);
    Eigen::MatrixXd rv(d, d), ru(d, d);
    for (int c = 0; c < d; ++c) {
        out.lambdas(c) = std::log(sig(d - 1 - c));
        rv.col(c) = v.col(d - 1 - c);
        ru.col(c) = u.col(d - 1 - c);
    }
    out.frame_in = rv.transpose();  // R : T_xM -> R^d
    out.frame_out = ru;             // R' : R^d -> T_{gx}M
    return out;
}

CartanData cartan(const ManifoldPoint& x, const DiffeoWord& w,
                  const std::vector<Generator>& gens) {
    return cartan_of_matrix(jacobian(w, gens, x));
}

FlagSample filtration_of_matrix(const Eigen::MatrixXd& j, int b) {
    int d = static_cast<int>(j.rows());
    if (b < 1 || b > d - 1) throw std::invalid_argument("cocycle: flag index out of range");
    CartanData c = cartan_of_matrix(j);
    FlagSample f;
    f.basis = c.frame_in.transpose().leftCols(b);
    f.well_defined = (c.lambdas(b) - c.lambdas(b - 1)) >= 1e-8;
    return f;
}

FlagSample filtration(const ManifoldPoint& x, const DiffeoWord& w,
                      const std::vector<Generator>& gens, int b) {
    return filtration_of_matrix(jacobian(w, gens, x), b);
}

double gap_integrand(const Eigen::MatrixXd& j, const Eigen::MatrixXd& v_basis) {
    int d = static_cast<int>(j.rows());
    int dmb = static_cast<int>(v_basis.cols());
    if (dmb < 1 || dmb > d - 1)
        throw std::invalid_argument("cocycle: gap subspace dimension out of range");
    Eigen::MatrixXd vperp = orthocomplement(v_basis);
    Eigen::MatrixXd jv = orthonormalize(j * v_basis);
    Eigen::MatrixXd proj =
        Eigen::MatrixXd::Identity(d, d) - jv * jv.transpose();
    double sup_term = sigma_max(proj * (j * vperp));
    double inf_term = sigma_min(j * v_basis);
    return std::log(sup_term) - std::log(inf_term);
}

double pinch_integrand(const Eigen::MatrixXd& j, const Eigen::MatrixXd& v0_basis,
                       const Eigen::MatrixXd& v1_basis) {
    int d = static_cast<int>(j.rows());
    Eigen::MatrixXd v1perp = orthocomplement(v1_basis);
    Eigen::MatrixXd jv1 = orthonormalize(j * v1_basis);
    Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(d, d) - jv1 * jv1.transpose();
    double sup_term = sigma_max(proj * (j * v1perp));
    double inf_term = sigma_min(j * v0_basis);
    return std::log(sup_term) - std::log(inf_term);
}

std::pair<double, double> variational_singular_value(
    const Eigen::MatrixXd& j, int b, const std::vector<Eigen::MatrixXd>& grid_dmb,
    const std::vector<Eigen::MatrixXd>& grid_dmb1) {
    int d = static_cast<int>(j.rows());
    double inf_sup = std::numeric_limits<double>::infinity();
    for (const auto& v : grid_dmb) {
        double sup_term;
        if (v.cols() == 0) {
            // b = d: V = {0}, the projection constraint is vacuous.
            sup_term = sigma_max(j);
        } else {
            Eigen::MatrixXd vperp = orthocomplement(v);
            Eigen::MatrixXd jv = orthonormalize(j * v);
            Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(d, d) - jv * jv.transpose();
            sup_term = sigma_max(proj * (j * vperp));
        }
        inf_sup = std::min(inf_sup, sup_term);
    }
    double sup_inf = 0.0;
    for (const auto& v : grid_dmb1) {
        sup_inf = std::max(sup_inf, sigma_min(j * v));
    }
    (void)b;
    return {inf_sup, sup_inf};
}

std::pair<double, double> variational_singular_value(
    const ManifoldPoint& x, const DiffeoWord& w, const std::vector<Generator>& gens, int b,
    const std::vector<Eigen::MatrixXd>& grid_dmb,
    const std::vector<Eigen::MatrixXd>& grid_dmb1) {
    return variational_singular_value(jacobian(w, gens, x), b, grid_dmb, grid_dmb1);
}

std::vector<Eigen::MatrixXd> grassmann_grid(int d, int k, int count) {
    if (count < 1) throw std::invalid_argument("cocycle: empty Grassmannian grid");
    std::vector<Eigen::MatrixXd> grid;
    grid.reserve(static_cast<std::size_t>(count));
    if (k == 0) {
        grid.push_back(Eigen::MatrixXd::Zero(d, 0));
        return grid;
    }
    if (k == d) {
        grid.push_back(Eigen::MatrixXd::Identity(d, d));
        return grid;
    }
    if (d == 2 && k == 1) {
        for (int i = 0; i < count; ++i) {
            double theta = kPi * i / count;
            Eigen::MatrixXd m(2, 1);
            m << std::cos(theta), std::sin(theta);
            grid.push_back(m);
        }
        return grid;
    }
    if (d == 3 && (k == 1 || k == 2)) {
        // Fibonacci hemisphere: lines via directions, planes via normals.
        const double golden = kPi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < count; ++i) {
            double z = (i + 0.5) / count;  // (0,1): open hemisphere
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            double phi = golden * i;
            Eigen::VectorXd dir(3);
            dir << r * std::cos(phi), r * std::sin(phi), z;
            if (k == 1) {
                grid.push_back(dir);
            } else {
                grid.push_back(orthocomplement(dir));
            }
        }
        return grid;
    }
    throw std::invalid_argument("cocycle: Grassmannian grids implemented for d = 2, 3 only");
}

namespace {

// Principal angle via atan2 of the orthogonal residual: acos alone cannot
// resolve angles below sqrt(machine eps).
double principal_angle_at(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                          bool smallest) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * b, Eigen::ComputeFullV);
    int last = static_cast<int>(svd.singularValues().size()) - 1;
    int idx = smallest ? 0 : last;
    double c = std::clamp(svd.singularValues()(idx), 0.0, 1.0);
    Eigen::VectorXd bv = b * svd.matrixV().col(idx);
    double s = (bv - a * (a.transpose() * bv)).norm();
    return std::atan2(s, c);
}

}  // namespace

double smallest_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return principal_angle_at(a, b, true);
}

double largest_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return principal_angle_at(a, b, false);
}

HypothesisEstimate gap_estimate(const GeneratorMeasure& mu, int n0, int b,
                                const std::vector<ManifoldPoint>& x_grid,
                                const std::vector<Eigen::MatrixXd>& v_grid,
                                const EstimatorOptions& opt) {
    if (x_grid.empty() || v_grid.empty())
        throw std::invalid_argument("cocycle: empty estimator grid");
    (void)b;
    auto e = scan_worst(
        x_grid.size(), v_grid.size(), opt, /*worst_is_max=*/true,
        "x:" + std::to_string(x_grid.size()) + " V:" + std::to_string(v_grid.size()),
        [&](std::size_t xi, std::size_t vi, std::size_t cell) {
            std::vector<double> vals(static_cast<std::size_t>(opt.samples));
            for (int s = 0; s < opt.samples; ++s) {
                DiffeoWord w = sample_word(mu, n0, opt.seed,
                                           substream(0xEA9 + cell, static_cast<std::uint64_t>(s)));
                Eigen::MatrixXd j = jacobian(w, mu.gens, x_grid[xi]);
                vals[static_cast<std::size_t>(s)] = gap_integrand(j, v_grid[vi]);
            }
            auto [m, se] = mean_stderr(vals);
            return CellStat{m, se};
        });
    return e;
}

HypothesisEstimate pinch_estimate(
    const GeneratorMeasure& mu, int n0, int b0, int b1,
    const std::vector<ManifoldPoint>& x_grid,
    const std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& v_pairs,
    const EstimatorOptions& opt) {
    if (b0 >= b1) throw std::invalid_argument("cocycle: pinch needs b0 < b1");
    if (x_grid.empty() || v_pairs.empty())
        throw std::invalid_argument("cocycle: empty estimator grid");
    return scan_worst(
        x_grid.size(), v_pairs.size(), opt, true,
        "x:" + std::to_string(x_grid.size()) + " pairs:" + std::to_string(v_pairs.size()),
        [&](std::size_t xi, std::size_t vi, std::size_t cell) {
            std::vector<double> vals(static_cast<std::size_t>(opt.samples));
            for (int s = 0; s < opt.samples; ++s) {
                DiffeoWord w = sample_word(mu, n0, opt.seed,
                                           substream(0xB1 + cell, static_cast<std::uint64_t>(s)));
                Eigen::MatrixXd j = jacobian(w, mu.gens, x_grid[xi]);
                vals[static_cast<std::size_t>(s)] =
                    pinch_integrand(j, v_pairs[vi].first, v_pairs[vi].second);
            }
            auto [m, se] = mean_stderr(vals);
            return CellStat{m, se};
        });
}

HypothesisEstimate expansion_estimate(const GeneratorMeasure& mu, int n0,
                                      const std::vector<ManifoldPoint>& x_grid,
                                      const std::vector<Eigen::VectorXd>& v_grid,
                                      const EstimatorOptions& opt) {
    if (x_grid.empty() || v_grid.empty())
        throw std::invalid_argument("cocycle: empty estimator grid");
    return scan_worst(
        x_grid.size(), v_grid.size(), opt, /*worst_is_max=*/false,
        "x:" + std::to_string(x_grid.size()) + " v:" + std::to_string(v_grid.size()),
        [&](std::size_t xi, std::size_t vi, std::size_t cell) {
            std::vector<double> vals(static_cast<std::size_t>(opt.samples));
            for (int s = 0; s < opt.samples; ++s) {
                DiffeoWord w = sample_word(mu, n0, opt.seed,
                                           substream(0xE4 + cell, static_cast<std::uint64_t>(s)));
                Eigen::MatrixXd j = jacobian(w, mu.gens, x_grid[xi]);
                vals[static_cast<std::size_t>(s)] = std::log((j * v_grid[vi]).norm());
            }
            auto [m, se] = mean_stderr(vals);
            return CellStat{m, se};
        });
}

HypothesisEstimate coexpansion_estimate(const GeneratorMeasure& mu, int n0,
                                        const std::vector<ManifoldPoint>& x_grid,
                                        const std::vector<Eigen::VectorXd>& xi_grid,
                                        const EstimatorOptions& opt) {
    if (x_grid.empty() || xi_grid.empty())
        throw std::invalid_argument("cocycle: empty estimator grid");
    return scan_worst(
        x_grid.size(), xi_grid.size(), opt, false,
        "x:" + std::to_string(x_grid.size()) + " xi:" + std::to_string(xi_grid.size()),
        [&](std::size_t xi, std::size_t vi, std::size_t cell) {
            std::vector<double> vals(static_cast<std::size_t>(opt.samples));
            for (int s = 0; s < opt.samples; ++s) {
                DiffeoWord w = sample_word(mu, n0, opt.seed,
                                           substream(0xC0E + cell, static_cast<std::uint64_t>(s)));
                Eigen::MatrixXd j = jacobian(w, mu.gens, x_grid[xi]);
                // |xi o J^{-1}| = |J^{-T} xi|
                Eigen::VectorXd y = j.transpose().partialPivLu().solve(xi_grid[vi]);
                vals[static_cast<std::size_t>(s)] = std::log(y.norm());
            }
            auto [m, se] = mean_stderr(vals);
            return CellStat{m, se};
        });
}

HypothesisEstimate log_det_estimate(const GeneratorMeasure& mu, int n0,
                                    const std::vector<ManifoldPoint>& x_grid,
                                    const EstimatorOptions& opt) {
    if (x_grid.empty()) throw std::invalid_argument("cocycle: empty x grid");
    // worst case of |E log det|; scan with nv = 1.
    auto e = scan_worst(
        x_grid.size(), 1, opt, true, "x:" + std::to_string(x_grid.size()),
        [&](std::size_t xi, std::size_t, std::size_t cell) {
            std::vector<double> vals(static_cast<std::size_t>(opt.samples));
            for (int s = 0; s < opt.samples; ++s) {
                DiffeoWord w = sample_word(mu, n0, opt.seed,
                                           substream(0xDE7 + cell, static_cast<std::uint64_t>(s)));
                vals[static_cast<std::size_t>(s)] = log_det_jacobian(w, mu.gens, x_grid[xi]);
            }
            auto [m, se] = mean_stderr(vals);
            return CellStat{std::abs(m), se};
        });
    return e;
}

DeviationReport det_deviation_check(const GeneratorMeasure& mu, double eta_prime,
                                    const std::vector<int>& steps,
                                    const ManifoldPoint& x, const EstimatorOptions& opt) {
    DeviationReport rep;
    rep.steps = steps;
    std::vector<double> log_ns, log_fs;
    for (std::size_t si = 0; si < steps.size(); ++si) {
        int n = steps[si];
        int outside = 0;
        for (int s = 0; s < opt.samples; ++s) {
            DiffeoWord w = sample_word(mu, n, opt.seed,
                                       substream(0xDD + si, static_cast<std::uint64_t>(s)));
            double ld = log_det_jacobian(w, mu.gens, x);
            if (std::abs(ld) >= n * eta_prime) ++outside;
        }
        double f = static_cast<double>(outside) / opt.samples;
        rep.freq.push_back(f);
        if (outside > 0) {
            log_ns.push_back(static_cast<double>(n));
            log_fs.push_back(std::log(f));
        }
    }
    Ols fit = ols_fit(log_ns, log_fs);
    rep.fit_available = fit.ok;
    rep.fitted_rate = fit.ok ? -fit.slope : 0.0;
    return rep;
}

NonConcentrationReport angle_nonconcentration(const GeneratorMeasure& mu, int n,
                                              const ManifoldPoint& x,
                                              const Eigen::MatrixXd& v_basis, int b,
                                              const std::vector<double>& rho_list,
                                              int count, std::uint64_t seed,
                                              int threads) {
    double floor_rho = std::exp(-static_cast<double>(n));
    for (double r : rho_list)
        if (r <= 0.0 || r < floor_rho)
            throw std::invalid_argument("cocycle: rho below e^{-n} (need n >= |log rho|)");
    std::vector<double> angles(static_cast<std::size_t>(count));
    parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t s) {
        DiffeoWord w = sample_word(mu, n, seed, substream(0xA4C, s));
        FlagSample f = filtration(x, w, mu.gens, b);
        angles[s] = smallest_principal_angle(f.basis, v_basis);
    });
    NonConcentrationReport rep;
    std::vector<double> lr, lf;
    for (double rho : rho_list) {
        NonConcentrationRow row;
        row.rho = rho;
        for (double a : angles)
            if (a < rho) ++row.hits;
        row.freq = static_cast<double>(row.hits) / count;
        row.stderr_ = std::sqrt(std::max(row.freq * (1.0 - row.freq), 1e-12) / count);
        rep.table.push_back(row);
        if (row.hits >= 20) {
            lr.push_back(std::log(rho));
            lf.push_back(std::log(row.freq));
        }
    }
    Ols fit = ols_fit(lr, lf);
    rep.fit_available = fit.ok;
    rep.fitted_c = fit.slope;
    rep.fit_stderr = fit.slope_stderr;
    rep.fit_r2 = fit.r2;
    return rep;
}

MargulisReport margulis_contraction(const GeneratorMeasure& mu, double s, int pair_samples,
                                    const std::vector<int>& n_list, int trials,
                                    std::uint64_t seed, int threads) {
    if (s < 0.0) throw std::invalid_argument("cocycle: margulis exponent must be >= 0");
    ManifoldKind kind = mu.manifold();
    // Pairs at log-spaced separations so the decaying term is visible.
    std::vector<std::pair<ManifoldPoint, ManifoldPoint>> pairs;
    std::vector<double> delta0;
    {
        Philox rng(seed, 0x9A17);
        for (int p = 0; p < pair_samples; ++p) {
            ManifoldPoint x = sample_point(kind, rng);
            double t = (pair_samples == 1) ? 0.5 : static_cast<double>(p) / (pair_samples - 1);
            double sep = std::pow(10.0, -8.0 + 5.0 * t);  // 1e-8 .. 1e-3
            FrameAtPoint f = canonical_frame(x);
            double ang = 2.0 * kPi * rng.next_double();
            Eigen::VectorXd dir = Eigen::VectorXd::Zero(kind.d);
            dir(0) = std::cos(ang);
            if (kind.d > 1) dir(1) = std::sin(ang);
            ManifoldPoint y = exp_map({x, sep * (f.columns * dir)});
            if (distance(x, y) == 0.0)
                throw std::domain_error("cocycle: coincident margulis pair");
            pairs.emplace_back(x, y);
            delta0.push_back(std::pow(distance(x, y), -s));
        }
    }
    MargulisReport rep;
    rep.steps = n_list;

    // Stationary floor: E Delta_s over independent uniform pairs.
    {
        Philox rng(seed, 0xF100);
        double acc = 0.0;
        int m = std::max(trials, 256);
        for (int t = 0; t < m; ++t) {
            ManifoldPoint a = sample_point(kind, rng);
            ManifoldPoint b = sample_point(kind, rng);
            double d = distance(a, b);
            if (d <= 0.0) {
                --t;
                continue;
            }
            acc += std::pow(d, -s);
        }
        rep.floor_estimate = acc / m;
    }

    // S^n Delta_s per (pair, n) by Monte Carlo over words.
    std::vector<std::vector<double>> sn(n_list.size(),
                                        std::vector<double>(pairs.size(), 0.0));
    std::vector<std::pair<std::size_t, std::size_t>> tasks;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni)
        for (std::size_t pi = 0; pi < pairs.size(); ++pi) tasks.emplace_back(ni, pi);
    parallel_for(tasks.size(), threads, [&](std::size_t ti) {
        auto [ni, pi] = tasks[ti];
        double acc = 0.0;
        for (int t = 0; t < trials; ++t) {
            DiffeoWord w = sample_word(mu, n_list[ni], seed,
                                       substream(0x3A6 + ti, static_cast<std::uint64_t>(t)));
            ManifoldPoint gx = apply(w, mu.gens, pairs[pi].first);
            ManifoldPoint gy = apply(w, mu.gens, pairs[pi].second);
            double d = distance(gx, gy);
            acc += std::pow(std::max(d, 1e-300), -s);
        }
        sn[ni][pi] = acc / trials;
    });

    std::vector<double> xs, ys;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t pi = 0; pi < pairs.size(); ++pi)
            worst = std::max(worst, (sn[ni][pi] - rep.floor_estimate) / delta0[pi]);
        rep.contraction.push_back(worst);
        if (worst > 1e-12) {
            xs.push_back(static_cast<double>(n_list[ni]));
            ys.push_back(std::log(worst));
        }
    }
    Ols fit = ols_fit(xs, ys);
    if (fit.ok && xs.size() >= 2) {
        rep.fit_available = true;
        rep.fitted_rate = fit.slope;
        rep.fitted_log_c = fit.intercept;
        rep.rate_stderr = fit.slope_stderr;
    } else {
        rep.fitted_rate = 0.0;  // degenerate data (e.g. s = 0): no decay signal
        rep.fitted_log_c = 0.0;
    }
    // Smallest affine C for the fitted rate across all samples.
    double c = 0.0;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni)
        for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
            double denom = std::exp(rep.fitted_rate * n_list[ni]) * delta0[pi] + 1.0;
            c = std::max(c, sn[ni][pi] / denom);
        }
    rep.affine_c = c;
    return rep;
}

BackForthReport backforth_expansion(const GeneratorMeasure& mu, int n,
                                    const ManifoldPoint& x, const Eigen::VectorXd& v,
                                    int count, std::uint64_t seed, int threads) {
    if (std::abs(v.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("cocycle: direction must be a unit vector");
    std::vector<int> hits(static_cast<std::size_t>(count), 0);
    parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t s) {
        DiffeoWord g = sample_word(mu, n, seed, substream(0xBF01, 2 * s));
        DiffeoWord h = sample_word(mu, n, seed, substream(0xBF01, 2 * s + 1));
        DiffeoWord w = h.then(g.inverse());
        Eigen::MatrixXd j = jacobian(w, mu.gens, x);
        if ((j * v).norm() <= 2.0) hits[s] = 1;
    });
    int total = 0;
    for (int hsum : hits) total += hsum;
    BackForthReport rep;
    rep.freq = static_cast<double>(total) / count;
    rep.stderr_ = std::sqrt(std::max(rep.freq * (1.0 - rep.freq), 1e-12) / count);
    return rep;
}

}  // namespace ergolab
