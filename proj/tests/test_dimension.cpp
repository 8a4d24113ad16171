#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ergolab/dimension.hpp"

using namespace ergolab;

namespace {

double euclid(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm(); }

DiscreteSet unit_grid(int n) {
    DiscreteSet s;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            s.points.push_back(Eigen::Vector2d((i + 0.5) / n, (j + 0.5) / n));
    s.weights.assign(static_cast<std::size_t>(n) * n, 1.0 / (static_cast<double>(n) * n));
    return s;
}

Eigen::MatrixXi mat2(int a, int b, int c, int d) {
    Eigen::MatrixXi m(2, 2);
    m << a, b, c, d;
    return m;
}

}  // namespace

TEST_CASE("covering number basics") {
    DiscreteSet one;
    one.points.push_back(Eigen::Vector2d(0.3, 0.3));
    CHECK(covering_number(one, 0.1) == 1);

    DiscreteSet sep;
    for (int i = 0; i < 10; ++i) sep.points.push_back(Eigen::Vector2d(i * 1.0, 0.0));
    CHECK(covering_number(sep, 0.25) == 10);

    DiscreteSet grid;
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100; ++j)
            grid.points.push_back(Eigen::Vector2d(i / 100.0, j / 100.0));
    CHECK(covering_number(grid, 0.1) == 121);

    DiscreteSet empty;
    CHECK(covering_number(empty, 0.1) == 0);
}

TEST_CASE("covering number monotonicity") {
    Philox rng(71, 0);
    DiscreteSet a, b;
    for (int i = 0; i < 300; ++i) {
        Eigen::Vector2d p(rng.next_double(), rng.next_double());
        a.points.push_back(p);
        if (i % 2 == 0) b.points.push_back(p);
    }
    for (double rho : {0.25, 0.1, 0.03}) {
        CHECK(covering_number(b, rho) <= covering_number(a, rho));
        CHECK(covering_number(a, rho / 2) >= covering_number(a, rho));
    }
}

TEST_CASE("robust decompose: dirac loses everything above the cap") {
    DiscreteSet dirac;
    dirac.points.push_back(Eigen::Vector2d(0.5, 0.5));
    dirac.weights = {1.0};
    double alpha = 0.4, rho = 0.1;
    auto rep = robust_decompose(dirac, alpha, {rho}, euclid);
    CHECK(rep.trash_mass == doctest::Approx(1.0 - std::pow(rho, 2 * alpha)).epsilon(1e-12));
    CHECK(rep.certified);
}

TEST_CASE("robust decompose: uniform grid is robust at small alpha") {
    auto grid = unit_grid(24);
    double alpha = 0.2;
    auto scales = scale_interval(0.05, 0.3);
    auto rep = robust_decompose(grid, alpha, scales, euclid);
    CHECK(rep.trash_mass == 0.0);
    CHECK(rep.certified);
    for (const auto& row : rep.certificate) {
        CHECK(row.max_ball_mass <= row.bound * (1 + 1e-12));
        // bracket-adjusted bound of the certificate
        CHECK(row.max_ball_mass <= row.bound_2x * (1 + 1e-12));
    }
}

TEST_CASE("robust decompose: empty measure") {
    DiscreteSet empty;
    auto rep = robust_decompose(empty, 0.5, {0.1}, euclid);
    CHECK(rep.trash_mass == 0.0);
}

TEST_CASE("robust certificate matches a brute force recount") {
    Philox rng(73, 1);
    for (int inst = 0; inst < 10; ++inst) {
        int d = inst % 2 == 0 ? 2 : 3;
        DiscreteSet s;
        int n = 60 + static_cast<int>(rng.next_double() * 200);
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd p(d);
            for (int k = 0; k < d; ++k) p(k) = rng.next_double();
            s.points.push_back(p);
            s.weights.push_back(rng.next_double() / n);
        }
        double alpha = 0.25 + 0.5 * rng.next_double();
        std::vector<double> scales = {0.05, 0.13};
        auto rep = robust_decompose(s, alpha, scales, euclid);
        // oracle: recount every atom-centered ball with index-order sums
        for (double rho : scales) {
            double cap = std::pow(rho, d * alpha);
            double worst = 0.0;
            for (std::size_t i = 0; i < s.points.size(); ++i) {
                double m = 0.0;
                for (std::size_t j = 0; j < s.points.size(); ++j)
                    if (euclid(s.points[i], s.points[j]) < rho) m += rep.kept_weights[j];
                worst = std::max(worst, m);
            }
            REQUIRE(worst <= cap * (1 + 1e-12));
        }
        // mass conservation, exactly
        double kept = 0.0, trash = 0.0;
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            kept += rep.kept_weights[i];
            trash += rep.trash_weights[i];
        }
        CHECK(kept + trash == doctest::Approx(s.total()).epsilon(1e-12));
    }
}

TEST_CASE("box membership and lebesgue proxy") {
    Box box{Flag::standard(2), ExponentVector{Eigen::Vector2d(0.0, 0.0)}, 0.5,
            Eigen::Vector2d(0.5, 0.5)};
    // t = 0: adapted cube of half-width d = 2
    CHECK(box.leb() == doctest::Approx(16.0));
    auto grid = unit_grid(30);
    CHECK(box_mass(grid, box) == doctest::Approx(1.0));

    DiscreteSet dirac;
    dirac.points.push_back(Eigen::Vector2d(0.2, 0.7));
    dirac.weights = {0.37};
    Box small{Flag::standard(2), ExponentVector{Eigen::Vector2d(0.5, 0.9)}, 0.1,
              Eigen::Vector2d(0.2, 0.7)};
    CHECK(box_mass(dirac, small) == doctest::Approx(0.37));
}

TEST_CASE("box mass against an exact point-in-box count") {
    auto grid = unit_grid(100);
    Flag flag = Flag::standard(2);
    ExponentVector t{Eigen::Vector2d(0.2, 0.8)};
    Box box{flag, t, 0.1, Eigen::Vector2d(0.43, 0.58)};
    double mass = box_mass(grid, box);
    // direct transform-then-test oracle
    double oracle = 0.0;
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
        Eigen::Vector2d y = flag.basis.transpose() * (grid.points[i] - box.center);
        if (std::abs(y(0)) <= box.half_width(0) && std::abs(y(1)) <= box.half_width(1))
            oracle += grid.weight(i);
    }
    CHECK(mass == oracle);
    // the mass tracks the domain-clipped box volume within counting error
    double clipped = 1.0;
    for (int j = 0; j < 2; ++j) clipped *= std::min(1.0, 2.0 * box.half_width(j));
    CHECK(mass == doctest::Approx(clipped).epsilon(0.15));
}

TEST_CASE("rotated box mass equals brute force") {
    Philox rng(79, 2);
    double c = std::cos(0.6), s = std::sin(0.6);
    Eigen::Matrix2d rot;
    rot << c, -s, s, c;
    Flag flag{rot};
    auto grid = unit_grid(70);
    Box box{flag, ExponentVector{Eigen::Vector2d(0.3, 0.7)}, 0.15,
            Eigen::Vector2d(0.5, 0.45)};
    double oracle = 0.0;
    for (std::size_t i = 0; i < grid.points.size(); ++i)
        if (box.contains(grid.points[i])) oracle += grid.weight(i);
    CHECK(box_mass(grid, box) == oracle);
}

TEST_CASE("exponent simplex membership reports all three conditions") {
    SimplexSpec spec;
    spec.blocks = {1, 2};
    spec.k0 = 1;
    spec.kappa = 0.2;
    spec.eta = 0.05;
    auto m1 = simplex_membership(ExponentVector{Eigen::Vector2d(0.3, 0.6)}, spec);
    CHECK(m1.floor_ok);   // t_{d_2} = 0.6 >= 0.2
    CHECK(m1.gap_ok);     // 0.6 - 0.3 >= 0.2
    CHECK(m1.pinch_ok);   // singleton blocks
    CHECK(m1.ok());
    auto m2 = simplex_membership(ExponentVector{Eigen::Vector2d(0.3, 0.4)}, spec);
    CHECK_FALSE(m2.gap_ok);
    SimplexSpec spec3;
    spec3.blocks = {2, 3};
    spec3.k0 = 1;
    spec3.kappa = 0.1;
    spec3.eta = 0.05;
    auto m3 =
        simplex_membership(ExponentVector{Eigen::Vector3d(0.2, 0.5, 0.9)}, spec3);
    CHECK_FALSE(m3.pinch_ok);  // first block spread 0.3 > eta
}

TEST_CASE("schubert distance on lines in the plane is the angle") {
    // d = 2, d' = 1: Sigma_1(V) = {V}
    std::vector<Eigen::MatrixXd> sigma;
    std::vector<double> w;
    int m = 360;
    for (int i = 0; i < m; ++i) {
        Eigen::MatrixXd l(2, 1);
        l << std::cos(M_PI * i / m), std::sin(M_PI * i / m);
        sigma.push_back(l);
        w.push_back(1.0 / m);
    }
    Eigen::MatrixXd v(2, 1);
    v << 1.0, 0.0;
    auto rows = schubert_nc_check(sigma, w, NcMode::Sub, {v}, {0.1, 0.3, 0.7}, 1.0);
    for (const auto& row : rows) {
        // uniform angle measure: mass of an r-neighborhood of a line is 2r/pi
        double exact = std::min(1.0, 2.0 * row.r / M_PI);
        CHECK(row.mass == doctest::Approx(exact).epsilon(0.05));
        CHECK(row.pass == (row.mass < std::pow(row.r, 1.0)));
    }
    // Dirac at W0 with V = W0 fails at every r
    std::vector<Eigen::MatrixXd> dirac = {v};
    auto drows = schubert_nc_check(dirac, {1.0}, NcMode::Sub, {v}, {0.1, 0.3, 0.7}, 1.0);
    for (const auto& row : drows) CHECK_FALSE(row.pass);
}

TEST_CASE("schubert sup mode uses the complementary-dimension angle") {
    std::vector<Eigen::MatrixXd> sigma;
    int m = 180;
    for (int i = 0; i < m; ++i) {
        Eigen::MatrixXd l(2, 1);
        l << std::cos(M_PI * i / m), std::sin(M_PI * i / m);
        sigma.push_back(l);
    }
    Eigen::MatrixXd v(2, 1);
    v << 0.0, 1.0;
    auto rows = schubert_nc_check(sigma, {}, NcMode::Sup, {v}, {0.2}, 1.0, 0.1, 0.1);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].bound == doctest::Approx(std::pow(0.1, -0.1) * 0.2));
    CHECK(rows[0].mass == doctest::Approx(2.0 * 0.2 / M_PI).epsilon(0.1));
}

TEST_CASE("multislicing on the uniform grid matches the closed form") {
    auto grid = unit_grid(64);
    SimplexSpec spec;
    spec.blocks = {1, 2};
    spec.k0 = 1;
    spec.kappa = 0.1;
    spec.eta = 1.0;
    double rho = 1.0 / 64.0;
    // exponents chosen so the boxes fit inside [0,1)^2 (d rho^{t} <= 1/2)
    std::vector<MultisliceTheta> thetas = {
        {Flag::standard(2), ExponentVector{Eigen::Vector2d(0.4, 0.8)}},
        {Flag::standard(2), ExponentVector{Eigen::Vector2d(0.45, 0.65)}},
    };
    for (double alpha : {0.55, 0.9}) {
        for (double gain : {0.02, 0.3}) {
            auto rep = multislicing_verify(grid, thetas, rho, alpha, gain, 0.02, spec);
            for (const auto& row : rep.rows) {
                const auto& th = thetas[static_cast<std::size_t>(row.theta_index)];
                Box box{th.flag, th.t, rho, Eigen::Vector2d(0, 0)};
                bool closed_form = std::pow(box.leb(), 1.0 - alpha) <= std::pow(rho, gain);
                // counting error is way below the sweep margins here
                CHECK(row.pass == closed_form);
            }
        }
    }
}

TEST_CASE("multislicing: dirac loses all its mass, budget one always passes") {
    DiscreteSet dirac;
    dirac.points.push_back(Eigen::Vector2d(0.5, 0.5));
    dirac.weights = {1.0};
    SimplexSpec spec;
    spec.blocks = {1, 2};
    spec.k0 = 1;
    spec.kappa = 0.1;
    spec.eta = 1.0;
    std::vector<MultisliceTheta> thetas = {
        {Flag::standard(2), ExponentVector{Eigen::Vector2d(0.2, 0.8)}}};
    auto rep = multislicing_verify(dirac, thetas, 1.0 / 64, 0.5, 0.1, 0.01, spec);
    // greedy on the single atom keeps exactly the cap
    CHECK(rep.rows[0].trash_mass ==
          doctest::Approx(1.0 - rep.rows[0].threshold).epsilon(1e-9));
    CHECK(rep.rows[0].trash_mass > 0.5);
    CHECK_FALSE(rep.rows[0].pass);
    auto rep_budget1 = multislicing_verify(dirac, thetas, 1.0 / 64, 0.5, 0.1, 1.0, spec);
    CHECK(rep_budget1.rows[0].pass);
    // exponent outside the simplex is a precondition error
    std::vector<MultisliceTheta> bad = {
        {Flag::standard(2), ExponentVector{Eigen::Vector2d(0.0, 0.05)}}};
    CHECK_THROWS_AS(multislicing_verify(dirac, bad, 1.0 / 64, 0.5, 0.1, 0.5, spec),
                    std::invalid_argument);
}

TEST_CASE("isotropic multislicing agrees with single scale robustness bracket") {
    auto grid = unit_grid(32);
    SimplexSpec spec;
    spec.blocks = {1, 2};
    spec.k0 = 1;
    spec.kappa = 0.0;  // isotropic exponents have no k0-gap
    spec.eta = 0.0;
    double rho = 0.05;
    std::vector<MultisliceTheta> thetas = {
        {Flag::standard(2), ExponentVector{Eigen::Vector2d(0.5, 0.5)}}};
    // isotropic box = cube of half-width 2*rho^{1/2}; with gain 0 the cap is
    // leb^alpha, comparable to the ball caps of robust_decompose
    double alpha = 0.6;
    auto multi = multislicing_verify(grid, thetas, rho, alpha, 0.0, 0.5, spec);
    double w = 2.0 * std::pow(rho, 0.5);
    Box box{Flag::standard(2), thetas[0].t, rho, Eigen::Vector2d(0, 0)};
    double cap_box = std::pow(box.leb(), alpha);
    // robust at the circumscribed/inscribed ball radii brackets the box cap
    auto scales_in = std::vector<double>{w};
    auto rep_in = robust_decompose(grid, std::log(cap_box) / (2 * std::log(w)), scales_in,
                                   euclid);
    // both should report no trash at these calm parameters
    CHECK(multi.rows[0].trash_mass == 0.0);
    CHECK(rep_in.trash_mass == 0.0);
}

TEST_CASE("linearization: identity needs one translate") {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(1, 0, 0, 1)}};
    mu.weights = {1.0};
    auto x = ManifoldPoint::torus(Eigen::Vector2d(0.5, 0.5));
    auto y = ManifoldPoint::torus(Eigen::Vector2d(0.52, 0.5));
    auto rep = linearization_check(DiffeoWord::single(0), mu.gens, x, y, 0.1, 0.05, 400, 7);
    CHECK(rep.sample_points > 50);
    CHECK(rep.translate_count == 1);
}

TEST_CASE("linearization: linear maps need few translates") {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(2, 1, 1, 1)}};
    mu.weights = {1.0};
    auto x = ManifoldPoint::torus(Eigen::Vector2d(0.37, 0.61));
    Philox rng(83, 3);
    for (int it = 0; it < 5; ++it) {
        auto y = sample_point(ManifoldKind::torus(2), rng);
        auto rep =
            linearization_check(DiffeoWord::single(0), mu.gens, x, y, 0.08, 0.04, 300, 11 + it);
        CHECK(rep.translate_count <= 4);
    }
    CHECK_THROWS_AS(
        linearization_check(DiffeoWord::single(0), mu.gens, x, x, 0.1, 0.5, 10, 1),
        std::invalid_argument);
}

TEST_CASE("dimension increment: volume-like input keeps alpha near one") {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(1, 1, 0, 1)}, ToralLinear{mat2(1, 0, 1, 1)},
               ToralLinear{mat2(1, -1, 0, 1)}, ToralLinear{mat2(1, 0, -1, 1)}};
    mu.weights = {0.25, 0.25, 0.25, 0.25};
    EmpiricalMeasure nu;
    int n = 24;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            nu.atoms.push_back(
                ManifoldPoint::torus(Eigen::Vector2d((i + 0.5) / n, (j + 0.5) / n)));
            nu.weights.push_back(1.0 / (n * n));
        }
    double rho = 1.0 / 128.0;
    auto rep = dimension_increment_experiment(mu, nu, 0.45, rho, 0.05, 4, 91, 2);
    CHECK(rep.alpha_achieved >= 0.45);
    CHECK(rep.tau_before <= 0.05);
}

TEST_CASE("dimension increment: dirac input is refused") {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(1, 1, 0, 1)}};
    mu.weights = {1.0};
    EmpiricalMeasure dirac;
    dirac.atoms.push_back(ManifoldPoint::torus(Eigen::Vector2d(0.3, 0.3)));
    dirac.weights = {1.0};
    CHECK_THROWS_AS(
        dimension_increment_experiment(mu, dirac, 0.5, 1.0 / 64, 0.05, 4, 3),
        std::invalid_argument);
}
