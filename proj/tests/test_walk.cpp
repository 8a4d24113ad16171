#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "ergolab/walk.hpp"

using namespace ergolab;

namespace {

Eigen::MatrixXi mat2(int a, int b, int c, int d) {
    Eigen::MatrixXi m(2, 2);
    m << a, b, c, d;
    return m;
}

GeneratorMeasure sl2z_walk() {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(1, 1, 0, 1)}, ToralLinear{mat2(1, 0, 1, 1)},
               ToralLinear{mat2(1, -1, 0, 1)}, ToralLinear{mat2(1, 0, -1, 1)}};
    mu.weights = {0.25, 0.25, 0.25, 0.25};
    return mu;
}

GeneratorMeasure cat_walk() {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(2, 1, 1, 1)}};
    mu.weights = {1.0};
    return mu;
}

ManifoldPoint tp(double a, double b) { return ManifoldPoint::torus(Eigen::Vector2d(a, b)); }

}  // namespace

TEST_CASE("sample_word basics") {
    auto mu = sl2z_walk();
    CHECK(sample_word(mu, 0, 1).length() == 0);
    auto w1 = sample_word(mu, 50, 123);
    auto w2 = sample_word(mu, 50, 123);
    REQUIRE(w1.length() == 50);
    for (std::size_t i = 0; i < 50; ++i) CHECK(w1.letters[i].index == w2.letters[i].index);
    auto w3 = sample_word(mu, 50, 124);
    bool differ = false;
    for (std::size_t i = 0; i < 50; ++i)
        if (w1.letters[i].index != w3.letters[i].index) differ = true;
    CHECK(differ);
    // degenerate law
    auto cat = cat_walk();
    auto wc = sample_word(cat, 10000, 5);
    for (const auto& l : wc.letters) REQUIRE(l.index == 0);
}

TEST_CASE("empirical pushforward basics") {
    auto mu = cat_walk();
    auto x = tp(0.3, 0.4);
    auto nu0 = empirical_pushforward(mu, x, 0, 32, 7);
    CHECK(nu0.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& a : nu0.atoms) CHECK(distance(a, x) == 0.0);
    // deterministic mu: all atoms equal g^n x
    auto nu3 = empirical_pushforward(mu, x, 3, 16, 7);
    DiffeoWord w;
    for (int i = 0; i < 3; ++i) w.letters.push_back({0, false});
    auto gx = apply(w, mu.gens, x);
    for (const auto& a : nu3.atoms) CHECK(distance(a, gx) < 1e-12);
}

TEST_CASE("pushforward splits mass binomially for a two-map law") {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(2, 1, 1, 1)}, ToralLinear{mat2(1, -1, -1, 2)}};
    mu.weights = {0.5, 0.5};
    auto x = tp(0.31, 0.17);
    int N = 20000;
    auto nu = empirical_pushforward(mu, x, 1, N, 99);
    auto a0 = apply(DiffeoWord::single(0), mu.gens, x);
    int c0 = 0;
    for (const auto& a : nu.atoms)
        if (distance(a, a0) < 1e-12) ++c0;
    double freq = static_cast<double>(c0) / N;
    double sigma = std::sqrt(0.25 / N);
    CHECK(std::abs(freq - 0.5) < 3.0 * sigma + 1e-12);
}

TEST_CASE("pushforward is thread-count invariant") {
    auto mu = sl2z_walk();
    auto x = tp(0.41, 0.73);
    auto nu1 = empirical_pushforward(mu, x, 20, 500, 2024, 1);
    auto nu8 = empirical_pushforward(mu, x, 20, 500, 2024, 8);
    REQUIRE(nu1.atoms.size() == nu8.atoms.size());
    for (std::size_t i = 0; i < nu1.atoms.size(); ++i) {
        CHECK((nu1.atoms[i].coords - nu8.atoms[i].coords).norm() == 0.0);
    }
}

TEST_CASE("max ball mass") {
    EmpiricalMeasure nu;
    nu.atoms = {tp(0.1, 0.1)};
    nu.weights = {0.7};
    auto r = max_ball_mass(nu, 0.05);
    CHECK(r.mass == doctest::Approx(0.7));
    CHECK(r.witness == 0);

    EmpiricalMeasure two;
    two.atoms = {tp(0.1, 0.1), tp(0.6, 0.6)};
    two.weights = {0.5, 0.5};
    auto r2 = max_ball_mass(two, 0.1);
    CHECK(r2.mass == doctest::Approx(0.5));

    EmpiricalMeasure empty;
    CHECK_THROWS_AS(max_ball_mass(empty, 0.1), std::domain_error);
}

TEST_CASE("max ball mass against a direct count on a grid") {
    EmpiricalMeasure nu;
    int n = 100;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            nu.atoms.push_back(tp((i + 0.5) / n, (j + 0.5) / n));
            nu.weights.push_back(1.0 / (n * n));
        }
    double rho = 0.05;
    auto r = max_ball_mass(nu, rho);
    // disk area pi rho^2 with grid granularity
    CHECK(r.mass == doctest::Approx(M_PI * rho * rho).epsilon(0.15));
    // independent oracle: count around the witness
    const auto& c = nu.atoms[static_cast<std::size_t>(r.witness)];
    double direct = 0.0;
    for (std::size_t k = 0; k < nu.atoms.size(); ++k)
        if (distance(c, nu.atoms[k]) < rho) direct += nu.weights[k];
    CHECK(r.mass == direct);
}

TEST_CASE("atom decay: fixed point stays at mass one") {
    auto mu = sl2z_walk();  // all generators fix the origin
    auto curve = atom_decay_curve(mu, tp(0, 0), 5, 200, 3);
    for (double v : curve) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("atom decay: deterministic irrational rotation keeps a single atom") {
    double ang = 1.0;  // irrational multiple of pi
    Eigen::MatrixXd q(3, 3);
    q << std::cos(ang), -std::sin(ang), 0, std::sin(ang), std::cos(ang), 0, 0, 0, 1;
    GeneratorMeasure mu;
    mu.gens = {SphereRotation{q}};
    mu.weights = {1.0};
    auto x = ManifoldPoint::sphere(Eigen::Vector3d(1, 0, 0));
    auto curve = atom_decay_curve(mu, x, 6, 100, 4);
    for (double v : curve) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("atom decay: random SL2Z walk decays to the sampling floor") {
    auto mu = sl2z_walk();
    auto x = tp(std::sqrt(2.0) - 1.0, std::sqrt(3.0) - 1.0);
    int N = 2000;
    auto curve = atom_decay_curve(mu, x, 40, N, 5);
    CHECK(curve[0] == doctest::Approx(1.0));
    CHECK(curve[40] <= 6.0 / N);
    CHECK(curve[40] < curve[12]);
    CHECK(curve[12] < curve[4]);
    CHECK(curve[4] < curve[0]);
    // duplicate-counting oracle: max multiplicity of exactly equal images
    // (linear words give bit-equal coordinates) brackets the cluster mass.
    EmpiricalMeasure nu = empirical_pushforward(mu, x, 40, N, 5);
    std::map<std::pair<double, double>, int> mult;
    int best = 0;
    for (const auto& a : nu.atoms)
        best = std::max(best, ++mult[{a.coords[0], a.coords[1]}]);
    CHECK(curve[40] * N >= best - 0.5);
    CHECK(curve[40] * N <= best + 2.5);
}

TEST_CASE("ldp: gamma formula and trivial observables") {
    FiniteChain chain;
    chain.transition = {{0.5, 0.5}, {0.5, 0.5}};
    chain.observable = {-1.0, 0.0};
    auto rep = ldp_moment_check(chain, 0.5, {1, 10, 100});
    CHECK(rep.gamma == doctest::Approx(0.125));  // eps/(1+sup|f|)^2 with sup=1
    CHECK(rep.pass);

    FiniteChain zero;
    zero.transition = {{1.0, 0.0}, {0.0, 1.0}};
    zero.observable = {0.0, 0.0};
    auto rz = ldp_moment_check(zero, 0.25, {1, 50});
    CHECK(rz.lhs[0] == doctest::Approx(1.0));
    CHECK(rz.lhs[1] == doctest::Approx(1.0));
    CHECK(rz.pass);
}

TEST_CASE("ldp: constant minus-one observable is exactly exp(-gamma n)") {
    FiniteChain chain;
    chain.transition = {{0.3, 0.7}, {0.6, 0.4}};
    chain.observable = {-1.0, -1.0};
    auto rep = ldp_moment_check(chain, 0.5, {1, 7, 200});
    for (std::size_t i = 0; i < rep.steps.size(); ++i) {
        CHECK(rep.lhs[i] ==
              doctest::Approx(std::exp(-rep.gamma * rep.steps[i])).epsilon(1e-12));
    }
    CHECK(rep.pass);
}

TEST_CASE("ldp: drift violation names the witness state") {
    FiniteChain chain;
    chain.transition = {{0.5, 0.5}, {0.1, 0.9}};
    chain.observable = {-1.0, 1.0};  // state 1 drifts upward
    try {
        ldp_moment_check(chain, 0.5, {10});
        CHECK(false);
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("state 1") != std::string::npos);
    }
}

TEST_CASE("ldp: markov tail bound follows when the moment bound passes") {
    FiniteChain chain;
    chain.transition = {{0.3, 0.7}, {0.5, 0.5}};
    chain.observable = {1.0, -1.0};
    for (double eps : {0.1, 0.25, 0.5}) {
        auto rep = ldp_moment_check(chain, eps, {10, 50, 200});
        CHECK(rep.pass);
        for (std::size_t i = 0; i < rep.steps.size(); ++i)
            CHECK(rep.tail_prob[i] <= rep.tail_bound[i] * (1 + 1e-12));
    }
}

TEST_CASE("generator measure validation") {
    GeneratorMeasure mu;
    mu.gens = {ToralLinear{mat2(1, 1, 0, 1)}};
    mu.weights = {0.5};
    CHECK_THROWS_AS(mu.validate(), std::invalid_argument);
    mu.weights = {1.0};
    CHECK_NOTHROW(mu.validate());
}

TEST_CASE("sampled ldp bound for the walk chain") {
    auto mu = sl2z_walk();
    auto f = [](const ManifoldPoint& p) {
        return -0.2 + 0.1 * std::cos(2.0 * M_PI * p.coords[0]);
    };
    auto rep = ldp_moment_check_sampled(mu, f, 0.3, tp(0.37, 0.59), 0.25, {5, 20, 60},
                                        400, 71, 2);
    CHECK(rep.gamma == doctest::Approx(0.25 / (1.3 * 1.3)));
    CHECK(rep.pass);
    for (std::size_t i = 0; i < rep.steps.size(); ++i)
        CHECK(rep.lhs[i] - 2.0 * rep.lhs_stderr[i] <= rep.rhs[i]);
    // upward-drifting observable is rejected with a witness
    auto bad = [](const ManifoldPoint&) { return 0.5; };
    CHECK_THROWS_AS(
        ldp_moment_check_sampled(mu, bad, 0.5, tp(0.1, 0.1), 0.25, {5}, 50, 71),
        std::invalid_argument);
}
