#include "ergolab/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ergolab/parallel.hpp"

namespace ergolab {

namespace {

// Shared greedy extraction: while some candidate region's kept mass exceeds
// its cap, shave atoms inside it (heaviest first, ties by index) until the
// region obeys the cap. Regions are revisited because shaving one can
// unlock another; the loop terminates since mass only decreases and each
// round removes a positive amount.
struct Region {
    std::vector<int> members;
    double cap = 0.0;
};

double greedy_extract(std::vector<double>& kept, std::vector<double>& trash,
                      const std::vector<Region>& regions) {
    auto region_mass = [&](const Region& r) {
        double m = 0.0;
        for (int i : r.members) m += kept[static_cast<std::size_t>(i)];
        return m;
    };
    double removed = 0.0;
    for (;;) {
        // largest overflow first
        double worst = 0.0;
        int worst_idx = -1;
        for (std::size_t k = 0; k < regions.size(); ++k) {
            double over = region_mass(regions[k]) - regions[k].cap;
            if (over > worst + 1e-15) {
                worst = over;
                worst_idx = static_cast<int>(k);
            }
        }
        if (worst_idx < 0) break;
        const Region& r = regions[static_cast<std::size_t>(worst_idx)];
        // shave heaviest members first, ties by atom index
        std::vector<int> order = r.members;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            double wa = kept[static_cast<std::size_t>(a)];
            double wb = kept[static_cast<std::size_t>(b)];
            if (wa != wb) return wa > wb;
            return a < b;
        });
        double need = worst;
        for (int i : order) {
            if (need <= 0.0) break;
            double take = std::min(kept[static_cast<std::size_t>(i)], need);
            kept[static_cast<std::size_t>(i)] -= take;
            trash[static_cast<std::size_t>(i)] += take;
            removed += take;
            need -= take;
        }
    }
    return removed;
}

}  // namespace

void Flag::validate() const {
    int d = static_cast<int>(basis.rows());
    if (basis.cols() != d) throw std::invalid_argument("dimension: flag basis must be square");
    double err = (basis.transpose() * basis - Eigen::MatrixXd::Identity(d, d))
                     .lpNorm<Eigen::Infinity>();
    if (err > 1e-10) throw std::invalid_argument("dimension: flag basis not orthonormal");
}

void ExponentVector::validate() const {
    for (int i = 0; i < t.size(); ++i) {
        if (t(i) < 0.0 || t(i) > 1.0)
            throw std::invalid_argument("dimension: exponents must lie in [0,1]");
        if (i > 0 && t(i) < t(i - 1))
            throw std::invalid_argument("dimension: exponents must be nondecreasing");
    }
}

SimplexMembership simplex_membership(const ExponentVector& t, const SimplexSpec& spec) {
    t.validate();
    int d = static_cast<int>(t.t.size());
    SimplexMembership m;
    if (spec.blocks.empty() || spec.blocks.back() != d)
        throw std::invalid_argument("dimension: simplex blocks must end at d");
    // blocks = (d_1, ..., d_{m+1}); d_0 = 0 implicit.
    int m_blocks = static_cast<int>(spec.blocks.size());
    if (spec.k0 < 1 || spec.k0 >= m_blocks)
        throw std::invalid_argument("dimension: k0 out of range");
    int d2 = spec.blocks.size() >= 2 ? spec.blocks[1] : spec.blocks[0];
    m.floor_ok = t.t(d2 - 1) >= spec.kappa;
    int dk0 = spec.blocks[static_cast<std::size_t>(spec.k0 - 1)];
    int dk1 = spec.blocks[static_cast<std::size_t>(spec.k0)];
    m.gap_ok = t.t(dk1 - 1) - t.t(dk0 - 1) >= spec.kappa;
    m.pinch_ok = true;
    int lo = 0;
    for (int bi = 0; bi < m_blocks; ++bi) {
        int hi = spec.blocks[static_cast<std::size_t>(bi)];
        for (int i = lo; i < hi; ++i)
            for (int j = lo; j < hi; ++j)
                if (std::abs(t.t(i) - t.t(j)) > spec.eta) m.pinch_ok = false;
        lo = hi;
    }
    return m;
}

bool Box::contains(const Eigen::VectorXd& v) const {
    int d = static_cast<int>(flag.basis.rows());
    for (int j = 0; j < d; ++j) {
        if (std::abs(flag.basis.col(j).dot(v - center)) > half_width(j)) return false;
    }
    return true;
}

double Box::half_width(int j) const {
    int d = static_cast<int>(flag.basis.rows());
    return d * std::pow(rho, t.t(j));
}

double Box::leb() const {
    int d = static_cast<int>(flag.basis.rows());
    double acc = 1.0;
    for (int j = 0; j < d; ++j) acc *= 2.0 * half_width(j);
    return acc;
}

double DiscreteSet::total() const {
    if (weights.empty()) return static_cast<double>(points.size());
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

long covering_number(const DiscreteSet& a, double rho) {
    if (rho <= 0.0) throw std::invalid_argument("dimension: covering scale must be positive");
    if (a.points.empty()) return 0;
    std::map<std::vector<long>, bool> cells;
    for (const auto& p : a.points) {
        std::vector<long> cell(static_cast<std::size_t>(p.size()));
        for (int i = 0; i < p.size(); ++i)
            cell[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(p(i) / rho));
        cells[cell] = true;
    }
    return static_cast<long>(cells.size());
}

namespace {

RobustReport robust_impl(std::size_t n, double total_dim_alpha_unused, double alpha, int d,
                         const std::vector<double>& scales,
                         const std::function<double(std::size_t, std::size_t)>& pair_dist,
                         const std::vector<double>& w0) {
    (void)total_dim_alpha_unused;
    RobustReport rep;
    rep.kept_weights = w0;
    rep.trash_weights.assign(n, 0.0);

    std::vector<Region> regions;
    for (double rho : scales) {
        double cap = std::pow(rho, d * alpha);
        for (std::size_t i = 0; i < n; ++i) {
            Region r;
            r.cap = cap;
            for (std::size_t j = 0; j < n; ++j)
                if (pair_dist(i, j) < rho) r.members.push_back(static_cast<int>(j));
            regions.push_back(std::move(r));
        }
    }
    rep.trash_mass = greedy_extract(rep.kept_weights, rep.trash_weights, regions);

    rep.certified = true;
    for (double rho : scales) {
        RobustCertRow row;
        row.scale = rho;
        row.bound = std::pow(rho, d * alpha);
        row.bound_2x = std::pow(2.0 * rho, d * alpha);
        for (std::size_t i = 0; i < n; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double dd = pair_dist(i, j);
                if (dd < rho) m1 += rep.kept_weights[j];
                if (dd < 2.0 * rho) m2 += rep.kept_weights[j];
            }
            row.max_ball_mass = std::max(row.max_ball_mass, m1);
            row.max_ball_mass_2x = std::max(row.max_ball_mass_2x, m2);
        }
        row.pass = row.max_ball_mass <= row.bound * (1.0 + 1e-12);
        if (!row.pass) rep.certified = false;
        rep.certificate.push_back(row);
    }
    return rep;
}

}  // namespace

RobustReport robust_decompose(const DiscreteSet& nu, double alpha,
                              const std::vector<double>& scales,
                              const std::function<double(const Eigen::VectorXd&,
                                                         const Eigen::VectorXd&)>& dist) {
    std::size_t n = nu.points.size();
    std::vector<double> w0(n);
    for (std::size_t i = 0; i < n; ++i) w0[i] = nu.weight(i);
    auto pd = [&](std::size_t i, std::size_t j) { return dist(nu.points[i], nu.points[j]); };
    return robust_impl(n, 0.0, alpha, nu.dim(), scales, pd, w0);
}

RobustReport robust_decompose(const EmpiricalMeasure& nu, double alpha,
                              const std::vector<double>& scales) {
    std::size_t n = nu.atoms.size();
    std::vector<double> w0 = nu.weights;
    int d = n ? nu.atoms[0].kind.d : 0;
    auto pd = [&](std::size_t i, std::size_t j) { return distance(nu.atoms[i], nu.atoms[j]); };
    return robust_impl(n, 0.0, alpha, d, scales, pd, w0);
}

std::vector<double> scale_interval(double lo, double hi, int per_octave) {
    if (lo <= 0.0 || hi < lo) throw std::invalid_argument("dimension: bad scale interval");
    std::vector<double> out;
    double octaves = std::log2(hi / lo);
    int count = std::max(1, static_cast<int>(std::ceil(octaves * per_octave))) + 1;
    for (int i = 0; i < count; ++i)
        out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
    return out;
}

double box_mass(const DiscreteSet& nu, const Box& box) {
    double acc = 0.0;
    for (std::size_t i = 0; i < nu.points.size(); ++i)
        if (box.contains(nu.points[i])) acc += nu.weight(i);
    return acc;
}

namespace {

// dist(W, Sigma_{d'}(V)) as the j-th smallest principal angle between W and
// V with j = floor((d'/d) dim V) + 1; forcing a j-dimensional intersection
// with V requires rotating W by at least that angle.
double schubert_distance(const Eigen::MatrixXd& w, const Eigen::MatrixXd& v, int d) {
    int dimv = static_cast<int>(v.cols());
    int dprime = static_cast<int>(w.cols());
    int jmin = static_cast<int>(std::floor(static_cast<double>(dprime) * dimv / d)) + 1;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(w.transpose() * v, Eigen::ComputeFullU);
    // singular values descending = cos of principal angles ascending
    int pairs = static_cast<int>(svd.singularValues().size());
    if (jmin > pairs) return M_PI / 2.0;  // cannot intersect that much
    double c = std::clamp(svd.singularValues()(jmin - 1), 0.0, 1.0);
    Eigen::VectorXd wu = w * svd.matrixU().col(jmin - 1);
    double s = (wu - v * (v.transpose() * wu)).norm();
    return std::atan2(s, c);
}

}  // namespace

std::vector<SchubertRow> schubert_nc_check(const std::vector<Eigen::MatrixXd>& sigma_samples,
                                           const std::vector<double>& sigma_weights,
                                           NcMode mode,
                                           const std::vector<Eigen::MatrixXd>& v_grid,
                                           const std::vector<double>& r_list, double c,
                                           double rho, double eps) {
    if (sigma_samples.empty()) throw std::invalid_argument("dimension: empty sigma sample");
    int d = static_cast<int>(sigma_samples[0].rows());
    double total = 0.0;
    std::vector<double> w(sigma_samples.size(), 1.0);
    if (!sigma_weights.empty()) w = sigma_weights;
    for (double x : w) total += x;

    std::vector<SchubertRow> rows;
    for (std::size_t vi = 0; vi < v_grid.size(); ++vi) {
        for (double r : r_list) {
            SchubertRow row;
            row.v_index = static_cast<int>(vi);
            row.r = r;
            double mass = 0.0;
            for (std::size_t s = 0; s < sigma_samples.size(); ++s) {
                double dist = mode == NcMode::Sub
                                  ? schubert_distance(sigma_samples[s], v_grid[vi], d)
                                  : smallest_principal_angle(v_grid[vi], sigma_samples[s]);
                if (dist < r) mass += w[s];
            }
            row.mass = mass / total;
            row.bound = mode == NcMode::Sub ? std::pow(r, c)
                                            : std::pow(rho, -eps) * std::pow(r, c);
            row.pass = row.mass < row.bound;
            rows.push_back(row);
        }
    }
    return rows;
}

namespace {

// Points bucketed by the box half-widths in flag coordinates; exact
// atom-centered translate masses come from scanning the 3^d neighbor cells.
struct FlagBuckets {
    std::map<std::vector<long>, std::vector<int>> cells;
    std::vector<Eigen::VectorXd> coords;
    Eigen::VectorXd widths;

    std::vector<long> key_of(const Eigen::VectorXd& u) const {
        std::vector<long> k(static_cast<std::size_t>(u.size()));
        for (int j = 0; j < u.size(); ++j)
            k[static_cast<std::size_t>(j)] = static_cast<long>(std::floor(u(j) / widths(j)));
        return k;
    }
};

FlagBuckets bucket_points(const DiscreteSet& nu, const Box& box) {
    FlagBuckets b;
    int d = nu.dim();
    b.widths.resize(d);
    for (int j = 0; j < d; ++j) b.widths(j) = box.half_width(j);
    b.coords.reserve(nu.points.size());
    for (std::size_t i = 0; i < nu.points.size(); ++i) {
        Eigen::VectorXd u = box.flag.basis.transpose() * nu.points[i];
        b.coords.push_back(u);
        b.cells[b.key_of(u)].push_back(static_cast<int>(i));
    }
    return b;
}

template <typename Visit>
void visit_neighbors(const FlagBuckets& b, const std::vector<long>& key, Visit&& visit) {
    int d = static_cast<int>(key.size());
    std::vector<long> k = key;
    std::function<void(int)> rec = [&](int axis) {
        if (axis == d) {
            auto it = b.cells.find(k);
            if (it != b.cells.end())
                for (int idx : it->second) visit(idx);
            return;
        }
        for (long off = -1; off <= 1; ++off) {
            k[static_cast<std::size_t>(axis)] = key[static_cast<std::size_t>(axis)] + off;
            rec(axis + 1);
        }
        k[static_cast<std::size_t>(axis)] = key[static_cast<std::size_t>(axis)];
    };
    rec(0);
}

double translate_mass(const FlagBuckets& b, const std::vector<double>& w,
                      std::size_t center) {
    double acc = 0.0;
    const Eigen::VectorXd& c = b.coords[center];
    visit_neighbors(b, b.key_of(c), [&](int j) {
        const Eigen::VectorXd& u = b.coords[static_cast<std::size_t>(j)];
        bool inside = true;
        for (int a = 0; a < u.size(); ++a)
            if (std::abs(u(a) - c(a)) > b.widths(a)) inside = false;
        if (inside) acc += w[static_cast<std::size_t>(j)];
    });
    return acc;
}

// Max-overlap segment tree: range add, global max.
class MaxAddTree {
  public:
    explicit MaxAddTree(std::size_t n) : n_(n), best_(4 * n, 0.0), lazy_(4 * n, 0.0) {}
    void add(std::size_t lo, std::size_t hi, double v) {  // [lo, hi)
        if (lo >= hi) return;
        add_rec(1, 0, n_, lo, hi, v);
    }
    double max() const { return best_[1]; }

  private:
    void add_rec(std::size_t node, std::size_t l, std::size_t r, std::size_t lo,
                 std::size_t hi, double v) {
        if (hi <= l || r <= lo) return;
        if (lo <= l && r <= hi) {
            best_[node] += v;
            lazy_[node] += v;
            return;
        }
        std::size_t mid = (l + r) / 2;
        add_rec(2 * node, l, mid, lo, hi, v);
        add_rec(2 * node + 1, mid, r, lo, hi, v);
        best_[node] = std::max(best_[2 * node], best_[2 * node + 1]) + lazy_[node];
    }
    std::size_t n_;
    std::vector<double> best_, lazy_;
};

// Exact sup over ALL translates of the axis box (half-widths w) of the
// weighted point mass, for d = 2, by plane sweep: each point covers a
// (2w1 x 2w2) rectangle of admissible centers; the answer is the maximal
// rectangle overlap.
double sup_translate_mass_2d(const std::vector<Eigen::VectorXd>& coords,
                             const std::vector<double>& w, double w1, double w2) {
    struct Event {
        double u;
        int type;  // +1 open, -1 close
        std::size_t lo, hi;
        double weight;
    };
    std::size_t n = coords.size();
    std::vector<double> vs;
    vs.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        vs.push_back(coords[i](1) - w2);
        vs.push_back(coords[i](1) + w2);
    }
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    auto v_index = [&](double x) {
        return static_cast<std::size_t>(std::lower_bound(vs.begin(), vs.end(), x) -
                                        vs.begin());
    };
    std::vector<Event> events;
    events.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = v_index(coords[i](1) - w2);
        std::size_t hi = v_index(coords[i](1) + w2);
        events.push_back({coords[i](0) - w1, +1, lo, hi + 1, w[i]});
        events.push_back({coords[i](0) + w1, -1, lo, hi + 1, w[i]});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.u != b.u) return a.u < b.u;
        return a.type > b.type;  // opens before closes: closed boxes
    });
    MaxAddTree tree(vs.size() + 1);
    double best = 0.0;
    for (const auto& e : events) {
        tree.add(e.lo, e.hi, e.type > 0 ? e.weight : -e.weight);
        best = std::max(best, tree.max());
    }
    return best;
}

}  // namespace

MultisliceReport multislicing_verify(const DiscreteSet& nu,
                                     const std::vector<MultisliceTheta>& thetas,
                                     double rho, double alpha, double gain,
                                     double budget, const SimplexSpec& spec,
                                     int threads) {
    for (const auto& th : thetas) {
        th.flag.validate();
        if (!simplex_membership(th.t, spec).ok())
            throw std::invalid_argument("dimension: exponent outside the declared simplex");
    }
    std::size_t n = nu.points.size();
    // bounding-box diagonal: an upper bound on diam(supp nu) within sqrt(d),
    // only used to clamp zeta
    double diam = 0.0;
    if (n > 0) {
        Eigen::VectorXd lo = nu.points[0], hi = nu.points[0];
        for (const auto& pt : nu.points) {
            lo = lo.cwiseMin(pt);
            hi = hi.cwiseMax(pt);
        }
        diam = (hi - lo).norm();
    }
    const std::size_t greedy_limit = 1200;

    MultisliceReport rep;
    rep.rows.resize(thetas.size());
    parallel_for(thetas.size(), threads, [&](std::size_t ti) {
        const auto& th = thetas[ti];
        int d = nu.dim();
        double zeta = std::min(1.0, std::max(diam, std::pow(rho, th.t.t(0))));
        Box box{th.flag, th.t, rho, Eigen::VectorXd::Zero(d)};
        double threshold = std::pow(rho, gain) * std::pow(box.leb(), alpha);

        MultisliceRow row;
        row.theta_index = static_cast<int>(ti);
        row.nu_mass = nu.total();
        row.zeta_d = std::pow(zeta, d);
        row.threshold = threshold;
        double norm = row.nu_mass + row.zeta_d;

        FlagBuckets buckets = bucket_points(nu, box);
        std::vector<double> w0(n);
        for (std::size_t i = 0; i < n; ++i) w0[i] = nu.weight(i);
        // sup over translates: exact sweep for d = 2, bucketed atom-centered
        // scan otherwise (atom-centered is a lower bound of the sweep value)
        double sup = 0.0;
        if (d == 2) {
            sup = sup_translate_mass_2d(buckets.coords, w0, buckets.widths(0),
                                        buckets.widths(1));
        } else {
            for (std::size_t i = 0; i < n; ++i)
                sup = std::max(sup, translate_mass(buckets, w0, i));
        }

        if (sup <= threshold * (1.0 + 1e-12)) {
            row.trash_mass = 0.0;
        } else if (n <= greedy_limit) {
            // primary path: the atom-centered greedy extraction
            std::vector<double> kept = w0, trash(n, 0.0);
            std::vector<Region> regions;
            for (std::size_t i = 0; i < n; ++i) {
                Region r;
                r.cap = threshold;
                Box translated = box;
                translated.center = nu.points[i];
                for (std::size_t j = 0; j < n; ++j)
                    if (translated.contains(nu.points[j]))
                        r.members.push_back(static_cast<int>(j));
                regions.push_back(std::move(r));
            }
            row.trash_mass = greedy_extract(kept, trash, regions);
        } else {
            // Large instance: bracket the minimal trash instead of running
            // the quadratic greedy.
            // Upper bound: uniform thinning by threshold/sup is a valid
            // decomposition (every translate scales down by the same factor).
            double ub = (1.0 - threshold / sup) * row.nu_mass;
            // Lower bound: after any valid extraction, every w-cell of the
            // flag lattice keeps at most the cap (a kept atom inside the
            // cell centers a box containing it), and the cells are disjoint.
            double lb = 0.0;
            for (const auto& [key, members] : buckets.cells) {
                double m = 0.0;
                for (int i : members) m += w0[static_cast<std::size_t>(i)];
                lb += std::max(0.0, m - threshold);
            }
            if (lb / norm > budget) {
                row.trash_mass = lb;  // enough to decide: fail
            } else {
                row.trash_mass = ub;
            }
        }
        row.trash_fraction = row.trash_mass / norm;
        row.pass = row.trash_fraction <= budget;
        rep.rows[ti] = row;
    });
    int failing = 0;
    for (const auto& r : rep.rows)
        if (!r.pass) ++failing;
    rep.failing_fraction = thetas.empty() ? 0.0
                                          : static_cast<double>(failing) /
                                                static_cast<double>(thetas.size());
    return rep;
}

LinearizationReport linearization_check(const DiffeoWord& g, const std::vector<Generator>& gens,
                                        const ManifoldPoint& x, const ManifoldPoint& y,
                                        double zeta, double r, int sample_count,
                                        std::uint64_t seed) {
    if (!(zeta * zeta <= r * (1.0 + 1e-12) && r <= zeta * (1.0 + 1e-12)))
        throw std::invalid_argument("dimension: need zeta^2 <= r <= zeta");
    LinearizationReport rep;
    int d = x.kind.d;

    // Precondition surrogate: zeta small against the C^2 budget.
    std::vector<int> support;
    for (const auto& l : g.letters)
        if (std::find(support.begin(), support.end(), l.index) == support.end())
            support.push_back(l.index);
    if (!support.empty()) {
        DerivativeBounds db = derivative_bounds(gens, support);
        double c0 = 2.0 * db.d2;
        rep.precondition_ok = zeta <= std::pow(c0, -2.0);
    }

    // Sample z in B_r(y), keep g(z) in B_zeta(x), chart through phi_x.
    ManifoldPoint q = apply(g.inverse(), gens, x);
    FrameAtPoint fy = canonical_frame(y);
    FrameAtPoint fx = canonical_frame(x);
    std::vector<Eigen::VectorXd> pts;
    Philox rng(seed, 0x11AE);
    for (int s = 0; s < sample_count; ++s) {
        Eigen::VectorXd u(d);
        for (;;) {
            for (int i = 0; i < d; ++i) u(i) = 2.0 * rng.next_double() - 1.0;
            if (u.norm() <= 1.0) break;
        }
        ManifoldPoint z = exp_map({y, r * (fy.columns * u)});
        ManifoldPoint gz = apply(g, gens, z);
        if (distance(gz, x) < zeta) {
            pts.push_back(fx.columns.transpose() * log_map(x, gz).components);
        }
    }
    rep.sample_points = static_cast<int>(pts.size());
    if (pts.empty()) return rep;

    // Ellipsoid D(phi_x g)(q, B_r): membership via |J^{-1}(p - c)| <= r.
    Eigen::MatrixXd j = jacobian(g, gens, q);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(j);
    auto covered_by = [&](const Eigen::VectorXd& p, const Eigen::VectorXd& c) {
        return (lu.solve(p - c)).norm() <= r * (1.0 + 1e-9);
    };

    // Candidate centers: the image of y's center first, then sample points.
    std::vector<Eigen::VectorXd> candidates;
    {
        ManifoldPoint gy = apply(g, gens, y);
        if (distance(gy, x) < x.kind.injectivity_radius() * 0.99)
            candidates.push_back(fx.columns.transpose() * log_map(x, gy).components);
    }
    for (const auto& p : pts) candidates.push_back(p);

    std::vector<bool> covered(pts.size(), false);
    std::size_t remaining = pts.size();
    while (remaining > 0) {
        // candidate covering the most uncovered points; ties by order
        std::size_t best = 0, best_count = 0;
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            std::size_t cnt = 0;
            for (std::size_t pi = 0; pi < pts.size(); ++pi)
                if (!covered[pi] && covered_by(pts[pi], candidates[ci])) ++cnt;
            if (cnt > best_count) {
                best_count = cnt;
                best = ci;
            }
        }
        if (best_count == 0) {
            // isolated leftovers: one translate each
            for (std::size_t pi = 0; pi < pts.size(); ++pi)
                if (!covered[pi]) ++rep.translate_count;
            break;
        }
        for (std::size_t pi = 0; pi < pts.size(); ++pi)
            if (!covered[pi] && covered_by(pts[pi], candidates[best])) {
                covered[pi] = true;
                --remaining;
            }
        ++rep.translate_count;
    }
    return rep;
}

IncrementReport dimension_increment_experiment(const GeneratorMeasure& mu,
                                               const EmpiricalMeasure& nu0, double alpha,
                                               double rho, double tau_budget,
                                               int splits_per_atom, std::uint64_t seed,
                                               int threads, double a0_override) {
    IncrementReport rep;
    rep.alpha_before = alpha;

    // Precondition: nu0 certified (alpha, B_{[rho, rho^{1/4}]}, tau)-robust.
    auto scales = scale_interval(rho, std::pow(rho, 0.25));
    RobustReport before = robust_decompose(nu0, alpha, scales);
    rep.tau_before = before.trash_mass;
    if (rep.tau_before > tau_budget)
        throw std::invalid_argument(
            "dimension: nu0 robustness certificate failed (trash above budget)");

    std::vector<int> all_support(mu.gens.size());
    std::iota(all_support.begin(), all_support.end(), 0);
    DerivativeBounds db = derivative_bounds(mu.gens, all_support);
    double a0 = a0_override > 0.0
                    ? a0_override
                    : std::min(1.0, 1.0 / (20.0 * std::max(1e-9, std::log(db.d1))));
    int n_rho = std::max(1, static_cast<int>(std::ceil(a0 * std::abs(std::log(rho)))));
    rep.steps = n_rho;

    // mu^{n_rho} * nu0 as an empirical measure: split every atom.
    EmpiricalMeasure conv;
    std::size_t total = nu0.atoms.size() * static_cast<std::size_t>(splits_per_atom);
    conv.atoms.resize(total, nu0.atoms.empty() ? ManifoldPoint::torus(Eigen::Vector2d(0, 0))
                                               : nu0.atoms[0]);
    conv.weights.assign(total, 0.0);
    parallel_for(total, threads, [&](std::size_t idx) {
        std::size_t ai = idx / static_cast<std::size_t>(splits_per_atom);
        DiffeoWord w = sample_word(mu, n_rho, seed, substream(0xD1E, idx));
        conv.atoms[idx] = apply(w, mu.gens, nu0.atoms[ai]);
        conv.weights[idx] = nu0.weights[ai] / splits_per_atom;
    });

    double half_scale = std::pow(rho, 0.5);
    for (double ap = alpha; ap <= std::min(1.0, alpha + 0.2) + 1e-9; ap += 0.02) {
        RobustReport after = robust_decompose(conv, ap, {half_scale});
        rep.alpha_grid.push_back(ap);
        rep.tau_after.push_back(after.trash_mass);
    }
    rep.alpha_achieved = alpha;
    rep.tau_achieved = 1.0;
    double budget_after = rep.tau_before + std::pow(rho, 0.05);
    for (std::size_t i = 0; i < rep.alpha_grid.size(); ++i) {
        if (rep.tau_after[i] <= budget_after) {
            rep.alpha_achieved = rep.alpha_grid[i];
            rep.tau_achieved = rep.tau_after[i];
        }
    }
    return rep;
}

}  // namespace ergolab
