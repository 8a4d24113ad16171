#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ergolab/equidist.hpp"

using namespace ergolab;

namespace {

Eigen::MatrixXi mat2(int a, int b, int c, int d) {
    Eigen::MatrixXi m(2, 2);
    m << a, b, c, d;
    return m;
}

GeneratorMeasure cat_walk() {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(2, 1, 1, 1)}};
    mu.weights = {1.0};
    return mu;
}

GeneratorMeasure cat_pair_walk() {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(2, 1, 1, 1)}, ToralLinear{mat2(1, -1, -1, 2)}};
    mu.weights = {0.5, 0.5};
    return mu;
}

GeneratorMeasure identity_walk() {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(1, 0, 0, 1)}};
    mu.weights = {1.0};
    return mu;
}

ManifoldPoint tp(double a, double b) { return ManifoldPoint::torus(Eigen::Vector2d(a, b)); }

EmpiricalMeasure dirac(const ManifoldPoint& p) {
    EmpiricalMeasure nu;
    nu.atoms = {p};
    nu.weights = {1.0};
    return nu;
}

// Closed form for two Diracs at distance D: half of max_L min(L D, 2(1-L)),
// attained where the two arms balance: value = D/(2 + D).
double two_dirac_w1(double dist) { return dist / (2.0 + dist); }

}  // namespace

TEST_CASE("wasserstein trivia") {
    auto nu = dirac(tp(0.25, 0.5));
    auto rep = wasserstein1(nu, nu);
    CHECK(rep.value == doctest::Approx(0.0).epsilon(1e-10));

    auto other = dirac(tp(0.75, 0.5));  // distance 1/2
    auto rep2 = wasserstein1(nu, other);
    CHECK(rep2.value <= 1.0);
    CHECK(rep2.value == doctest::Approx(two_dirac_w1(0.5)).epsilon(1e-6));
    CHECK(rep2.optimal);
    CHECK(rep2.duality_gap < 1e-9);
}

TEST_CASE("two diracs on the sphere at distance one reach one third") {
    EmpiricalMeasure a, b;
    a.atoms = {ManifoldPoint::sphere(Eigen::Vector3d(0, 0, 1))};
    a.weights = {1.0};
    b.atoms = {ManifoldPoint::sphere(Eigen::Vector3d(std::sin(1.0), 0, std::cos(1.0)))};
    b.weights = {1.0};
    auto rep = wasserstein1(a, b);
    CHECK(rep.value == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("wasserstein is a pseudometric on random clouds") {
    Philox rng(101, 0);
    ManifoldKind kind = ManifoldKind::torus(2);
    auto cloud = [&](int n) {
        EmpiricalMeasure nu;
        for (int i = 0; i < n; ++i) {
            nu.atoms.push_back(sample_point(kind, rng));
            nu.weights.push_back(1.0 / n);
        }
        return nu;
    };
    for (int it = 0; it < 5; ++it) {
        auto a = cloud(12), b = cloud(15), c = cloud(9);
        double ab = wasserstein1(a, b).value;
        double ba = wasserstein1(b, a).value;
        double ac = wasserstein1(a, c).value;
        double cb = wasserstein1(c, b).value;
        CHECK(ab == doctest::Approx(ba).epsilon(1e-7));
        CHECK(ab <= ac + cb + 1e-7);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("wasserstein rejects oversized and non-probability input") {
    auto nu = dirac(tp(0.1, 0.1));
    EmpiricalMeasure heavy = nu;
    heavy.weights = {0.7};
    CHECK_THROWS_AS(wasserstein1(nu, heavy), std::invalid_argument);
}

TEST_CASE("mollify: uniform cloud gives density near one") {
    GeneratorMeasure mu = identity_walk();
    EmpiricalMeasure grid;
    int n = 80;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            grid.atoms.push_back(tp((i + 0.5) / n, (j + 0.5) / n));
            grid.weights.push_back(1.0 / (n * n));
        }
    auto dens = mollify(grid, 0.15, 16);
    for (double v : dens.values) CHECK(v == doctest::Approx(1.0).epsilon(0.02));
    CHECK(dens.renormalization == doctest::Approx(1.0).epsilon(0.02));

    // dirac: 1/vol(B) on the ball, zero outside (up to renormalization)
    auto d0 = mollify(dirac(tp(0.5, 0.5)), 0.2, 16);
    double peak = 1.0 / ball_volume(ManifoldKind::torus(2), 0.2);
    CHECK(d0.max_value() == doctest::Approx(peak * d0.renormalization).epsilon(1e-9));
    double total = 0.0;
    for (std::size_t c = 0; c < d0.values.size(); ++c)
        total += d0.values[c] * d0.cell_measure[c];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(mollify(grid, 0.05, 16), std::invalid_argument);
}

TEST_CASE("mollified sup tracks the robustness bound with constant 16") {
    // a (1-eps, B_rho, 0)-robust cloud: uniform grid; sup density <= 16 rho^{-d eps}
    EmpiricalMeasure grid;
    int n = 64;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            grid.atoms.push_back(tp((i + 0.5) / n, (j + 0.5) / n));
            grid.weights.push_back(1.0 / (n * n));
        }
    // Lebesgue is (1-eps)-robust at scale rho only once rho^{-d eps}
    // clears the ball-volume constant pi
    double rho = 0.15, eps = 0.35;
    auto rep = robust_decompose(grid, 1.0 - eps, {rho});
    REQUIRE(rep.trash_mass == 0.0);
    auto dens = mollify(grid, rho, 16);
    CHECK(dens.max_value() <= 16.0 * std::pow(rho, -2.0 * eps));
}

TEST_CASE("w1 between a measure and its mollification is below rho plus grid") {
    Philox rng(103, 1);
    EmpiricalMeasure nu;
    for (int i = 0; i < 60; ++i) {
        nu.atoms.push_back(sample_point(ManifoldKind::torus(2), rng));
        nu.weights.push_back(1.0 / 60);
    }
    double rho = 0.15;
    int grid = 16;
    auto dens = mollify(nu, rho, grid);
    EmpiricalMeasure pushed;
    pushed.atoms = dens.centers;
    pushed.weights.resize(dens.values.size());
    for (std::size_t c = 0; c < dens.values.size(); ++c)
        pushed.weights[c] = dens.values[c] * dens.cell_measure[c];
    double w = wasserstein1(nu, pushed).value;
    double cell_radius = 0.5 * std::sqrt(2.0) / grid;
    CHECK(w <= rho + cell_radius + 1e-6);
}

TEST_CASE("fourier: identity fixes everything, constants row is exact") {
    auto rep = fourier_transfer_spectrum(identity_walk(), 4, 16);
    CHECK(rep.block_radius == doctest::Approx(1.0).epsilon(1e-9));
    long n = rep.matrix.rows();
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            CHECK(std::abs(rep.matrix(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
}

TEST_CASE("fourier: cat map block is nilpotent by frequency escape") {
    auto rep = fourier_transfer_spectrum(cat_walk(), 8, 8);
    CHECK(rep.block_radius < 1e-8);
    // enumerated oracle: every nonzero frequency escapes the window
    Eigen::Matrix2i at;
    at << 2, 1, 1, 1;  // A^T = A
    int K = 8;
    for (int kx = -K; kx <= K; ++kx)
        for (int ky = -K; ky <= K; ++ky) {
            if (kx == 0 && ky == 0) continue;
            Eigen::Vector2i k(kx, ky);
            int steps = 0;
            while (std::abs(k(0)) <= K && std::abs(k(1)) <= K && steps < 64) {
                k = at * k;
                ++steps;
            }
            REQUIRE(steps < 64);  // escaped
        }
}

TEST_CASE("fourier: symmetric cat pair has norm one but radius below one") {
    auto rep = fourier_transfer_spectrum(cat_pair_walk(), 8, 8);
    CHECK(rep.block_sup_norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.block_radius < 1.0 - 1e-3);
    CHECK(rep.block_radius > 0.1);
}

TEST_CASE("fourier: truncated operator matches direct quadrature on trig polynomials") {
    TrigMode m;
    m.freq = Eigen::Vector2i(1, 0);
    m.phase = 0.4;
    m.direction = Eigen::Vector2d(0.4, 0.3);
    GeneratorMeasure mu;
    mu.gens = {ToralTrigPerturb{ToralLinear{mat2(2, 1, 1, 1)}, 0.02, {m}},
               ToralLinear{mat2(1, 1, 0, 1)}};
    mu.weights = {0.5, 0.5};
    int K = 6, quad = 96;
    auto rep = fourier_transfer_spectrum(mu, K, quad);

    // random trig polynomial with frequencies <= K/2
    Philox rng(107, 2);
    std::map<std::pair<int, int>, std::complex<double>> coeff;
    for (int t = 0; t < 6; ++t) {
        int kx = static_cast<int>(rng.next_double() * (K / 2 + 1)) - K / 4;
        int ky = static_cast<int>(rng.next_double() * (K / 2 + 1)) - K / 4;
        coeff[{kx, ky}] = std::complex<double>(rng.next_double() - 0.5, rng.next_double() - 0.5);
    }
    auto eval_f = [&](const Eigen::Vector2d& x) {
        std::complex<double> acc = 0.0;
        for (const auto& [k, c] : coeff)
            acc += c * std::polar(1.0, 2.0 * M_PI * (k.first * x(0) + k.second * x(1)));
        return acc;
    };
    // independent oracle: each coefficient of T_mu f up to K by direct 2-D
    // quadrature of the function, against the matrix product route
    int side = 2 * K + 1;
    auto index_of = [&](int kx, int ky) { return (ky + K) * side + (kx + K); };
    Eigen::VectorXcd fvec = Eigen::VectorXcd::Zero(side * side);
    for (const auto& [k, c] : coeff) fvec(index_of(k.first, k.second)) = c;
    // matrix acts on coefficient rows: (T f)_hat(l) = sum_k f_hat(k) T[k, l]
    Eigen::VectorXcd tf = rep.matrix.transpose() * fvec;
    int q = 128;
    std::vector<std::complex<double>> tf_vals(static_cast<std::size_t>(q) * q);
    for (int ix = 0; ix < q; ++ix)
        for (int iy = 0; iy < q; ++iy) {
            Eigen::Vector2d x((ix + 0.5) / q, (iy + 0.5) / q);
            std::complex<double> acc = 0.0;
            for (std::size_t gi = 0; gi < mu.gens.size(); ++gi) {
                auto gx = apply(DiffeoWord::single(static_cast<int>(gi)), mu.gens,
                                ManifoldPoint::torus(x));
                acc += mu.weights[gi] * eval_f(gx.coords);
            }
            tf_vals[static_cast<std::size_t>(ix) * q + iy] = acc;
        }
    for (int lx = -K; lx <= K; ++lx)
        for (int ly = -K; ly <= K; ++ly) {
            std::complex<double> direct = 0.0;
            for (int ix = 0; ix < q; ++ix)
                for (int iy = 0; iy < q; ++iy) {
                    Eigen::Vector2d x((ix + 0.5) / q, (iy + 0.5) / q);
                    direct += tf_vals[static_cast<std::size_t>(ix) * q + iy] *
                              std::polar(1.0, -2.0 * M_PI * (lx * x(0) + ly * x(1)));
                }
            direct /= static_cast<double>(q) * q;
            REQUIRE(std::abs(direct - tf(index_of(lx, ly))) < 1e-6);
        }
}

TEST_CASE("stationary density: volume preserving walks keep the flat density") {
    auto rep = stationary_density(cat_pair_walk(), 4, 16);
    for (std::size_t i = 0; i < rep.coefficients.size(); ++i) {
        double expect = (i == rep.coefficients.size() / 2) ? 1.0 : 0.0;  // k = 0 at center
        CHECK(std::abs(rep.coefficients[i] - expect) < 1e-9);
    }
    CHECK(rep.min_density == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.unique);
}

TEST_CASE("stationary density: identity walk is non-unique") {
    auto rep = stationary_density(identity_walk(), 3, 8);
    CHECK_FALSE(rep.unique);
}

TEST_CASE("stationary density of a dissipative walk matches a long-run histogram") {
    TrigMode m;
    m.freq = Eigen::Vector2i(0, 1);
    m.phase = 1.1;
    m.direction = Eigen::Vector2d(0.5, 0.7);
    GeneratorMeasure mu;
    mu.gens = {ToralTrigPerturb{ToralLinear{mat2(2, 1, 1, 1)}, 0.03, {m}},
               ToralTrigPerturb{ToralLinear{mat2(1, 1, 1, 2)}, 0.03, {m}}};
    mu.weights = {0.5, 0.5};
    int K = 6;
    auto rep = stationary_density(mu, K, 48);

    // long-trajectory histogram oracle on a coarse grid
    int g = 8;
    std::vector<double> hist(static_cast<std::size_t>(g) * g, 0.0);
    Philox rng(109, 3);
    ManifoldPoint x = tp(0.37, 0.59);
    int burn = 200, steps = 200000;
    for (int s = 0; s < burn + steps; ++s) {
        DiffeoWord w = sample_word(mu, 1, 113, static_cast<std::uint64_t>(s));
        x = apply(w, mu.gens, x);
        if (s >= burn) {
            int ix = std::min(g - 1, static_cast<int>(x.coords(0) * g));
            int iy = std::min(g - 1, static_cast<int>(x.coords(1) * g));
            hist[static_cast<std::size_t>(iy) * g + ix] += 1.0 / steps;
        }
    }
    // compare cell averages of the reconstructed density
    int side = 2 * K + 1;
    double l1 = 0.0;
    for (int iy = 0; iy < g; ++iy)
        for (int ix = 0; ix < g; ++ix) {
            // integrate e^{2pi i k x} over the cell exactly
            std::complex<double> cellint = 0.0;
            for (int ky = -K; ky <= K; ++ky)
                for (int kx = -K; kx <= K; ++kx) {
                    auto cellphase = [&](int k, int i0) -> std::complex<double> {
                        if (k == 0) return 1.0 / g;
                        double a = static_cast<double>(i0) / g, b = (i0 + 1.0) / g;
                        std::complex<double> im(0, 1);
                        return (std::polar(1.0, 2 * M_PI * k * b) -
                                std::polar(1.0, 2 * M_PI * k * a)) /
                               (2.0 * M_PI * k * im);
                    };
                    cellint += rep.coefficients[static_cast<std::size_t>((ky + K) * side +
                                                                         (kx + K))] *
                               cellphase(kx, ix) * cellphase(ky, iy);
                }
            l1 += std::abs(cellint.real() - hist[static_cast<std::size_t>(iy) * g + ix]);
        }
    CHECK(l1 < 0.05);
    // the density genuinely deviates from flat
    double dev = 0.0;
    for (std::size_t i = 0; i < rep.coefficients.size(); ++i)
        if (i != rep.coefficients.size() / 2) dev += std::abs(rep.coefficients[i]);
    CHECK(dev > 0.01);
}

TEST_CASE("volume grid and subsampling") {
    auto grid = volume_grid(ManifoldKind::torus(2), 1.0 / 16);
    CHECK(grid.atoms.size() == 256);
    CHECK(grid.total_mass() == doctest::Approx(1.0).epsilon(1e-12));

    Philox rng(127, 4);
    EmpiricalMeasure big;
    for (int i = 0; i < 5000; ++i) {
        big.atoms.push_back(sample_point(ManifoldKind::torus(2), rng));
        big.weights.push_back(1.0 / 5000);
    }
    auto [sub, radius] = stratified_subsample(big, 900);
    CHECK(static_cast<int>(sub.atoms.size()) <= 900);
    CHECK(sub.total_mass() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(radius > 0.0);
    CHECK(radius < 0.03);
}

TEST_CASE("equidistribution curve: isometry stays put, mixing walk decays") {
    auto ref = volume_grid(ManifoldKind::torus(2), 1.0 / 16);
    EquidistOptions opt;
    opt.sample_count = 400;
    opt.rho = 1.0 / 16;
    opt.lp_budget = 300;
    opt.seed = 11;
    opt.golden_iterations = 20;

    // identity walk: curve constant at W1(delta_x, vol grid)
    auto curve_id = equidistribution_curve(identity_walk(), tp(0.31, 0.41), {0, 5, 10},
                                           ref, opt);
    CHECK(curve_id.points[0].w1 == doctest::Approx(curve_id.points[2].w1).epsilon(1e-6));
    CHECK_FALSE(curve_id.final_value < 0.05);

    // mixing SL2Z walk decays
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(1, 1, 0, 1)}, ToralLinear{mat2(1, 0, 1, 1)},
               ToralLinear{mat2(1, -1, 0, 1)}, ToralLinear{mat2(1, 0, -1, 1)}};
    mu.weights = {0.25, 0.25, 0.25, 0.25};
    auto curve = equidistribution_curve(mu, tp(std::sqrt(2.0) - 1, std::sqrt(3.0) - 1),
                                        {0, 10, 25, 40}, ref, opt);
    CHECK(curve.decreasing_trend);
    CHECK(curve.final_value < curve.points[0].w1);
    CHECK(curve.final_value < 0.08);
}
