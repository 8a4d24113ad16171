#include "ergolab/transport.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ergolab {

namespace {

// Spanning-tree basis for the bipartite transportation problem with an
// artificial root. Nodes: sources [0, n1), sinks [n1, n1+n2), root last.
// Arc ids: i*n2 + j for source i -> sink j, then one artificial arc per
// non-root node.
class NetworkSimplex {
  public:
    NetworkSimplex(const std::vector<double>& supply, const std::vector<double>& demand,
                   const Eigen::MatrixXd& cost)
        : n1_(supply.size()), n2_(demand.size()), cost_(cost) {
        std::size_t nn = n1_ + n2_ + 1;
        root_ = n1_ + n2_;
        parent_.assign(nn, -1);
        parent_arc_.assign(nn, -1);
        children_.assign(nn, {});
        pi_.assign(nn, 0.0);
        flow_.assign(n1_ * n2_ + nn, 0.0);
        basic_.assign(n1_ * n2_ + nn, false);

        double maxc = 1.0;
        for (std::size_t i = 0; i < n1_; ++i)
            for (std::size_t j = 0; j < n2_; ++j) maxc = std::max(maxc, cost_(i, j));
        big_m_ = maxc * static_cast<double>(nn) + 1.0;

        // Initial basis: every node hangs off the root by its artificial arc.
        for (std::size_t v = 0; v < nn - 1; ++v) {
            parent_[v] = static_cast<long>(root_);
            parent_arc_[v] = static_cast<long>(n1_ * n2_ + v);
            basic_[static_cast<std::size_t>(parent_arc_[v])] = true;
            children_[root_].push_back(static_cast<long>(v));
            if (v < n1_) {
                flow_[static_cast<std::size_t>(parent_arc_[v])] = supply[v];  // v -> root
                pi_[v] = big_m_;   // rc(v -> root) = M - pi_v + 0 = 0
            } else {
                flow_[static_cast<std::size_t>(parent_arc_[v])] = demand[v - n1_];  // root -> v
                pi_[v] = -big_m_;  // rc(root -> v) = M - 0 + pi_v = 0
            }
        }
        pi_[root_] = 0.0;
    }

    // reduced cost of bipartite arc i -> j (j in sink indexing)
    double reduced(std::size_t i, std::size_t j) const {
        return cost_(i, j) - pi_[i] + pi_[n1_ + j];
    }

    TransportResult run() {
        const std::size_t m = n1_ * n2_;
        const std::size_t block = std::max<std::size_t>(64, static_cast<std::size_t>(std::sqrt(static_cast<double>(m))));
        std::size_t cursor = 0;
        long pivots = 0;
        const long pivot_limit = static_cast<long>(200 * (n1_ + n2_) + 20 * m / (n1_ + n2_ + 1) * (n1_ + n2_));
        const double eps = 1e-12;

        for (;;) {
            // block search for the most negative reduced cost
            long enter = -1;
            double best = -eps;
            std::size_t scanned = 0;
            while (scanned < m) {
                std::size_t end = std::min(m, cursor + block);
                for (std::size_t a = cursor; a < end; ++a) {
                    double rc = reduced(a / n2_, a % n2_);
                    if (rc < best) {
                        best = rc;
                        enter = static_cast<long>(a);
                    }
                }
                scanned += end - cursor;
                cursor = end == m ? 0 : end;
                if (enter >= 0) break;
            }
            if (enter < 0) break;  // optimal
            pivot(static_cast<std::size_t>(enter));
            if (++pivots > pivot_limit)
                throw std::runtime_error("transport: pivot limit exceeded");
        }

        TransportResult res;
        res.pivots = pivots;
        double total = 0.0;
        bool artificial_clean = true;
        for (std::size_t a = 0; a < m; ++a) total += flow_[a] * cost_(a / n2_, a % n2_);
        for (std::size_t a = m; a < flow_.size(); ++a)
            if (flow_[a] > 1e-9 && basic_[a] && a - m != root_) {
                // artificial arc still carrying flow: unbalanced input
                if (std::abs(flow_[a]) > 1e-9) artificial_clean = false;
            }
        res.cost = total;
        res.optimal = artificial_clean;
        res.potential_src.assign(n1_, 0.0);
        res.potential_snk.assign(n2_, 0.0);
        for (std::size_t i = 0; i < n1_; ++i) res.potential_src[i] = pi_[i];
        for (std::size_t j = 0; j < n2_; ++j) res.potential_snk[j] = pi_[n1_ + j];
        return res;
    }

  private:
    // Arc direction bookkeeping: bipartite arc i -> (n1+j); artificial arcs
    // point source -> root and root -> sink.
    std::pair<long, long> arc_ends(std::size_t a) const {
        if (a < n1_ * n2_)
            return {static_cast<long>(a / n2_), static_cast<long>(n1_ + a % n2_)};
        std::size_t v = a - n1_ * n2_;
        if (v < n1_) return {static_cast<long>(v), static_cast<long>(root_)};
        return {static_cast<long>(root_), static_cast<long>(v)};
    }

    void pivot(std::size_t enter_arc) {
        auto [src, dst] = arc_ends(enter_arc);
        // Walk both endpoints to the root, recording the path.
        std::vector<long> up_src = path_to_root(src);
        std::vector<long> up_dst = path_to_root(dst);
        // Trim to the LCA.
        std::size_t is = up_src.size(), id = up_dst.size();
        while (is > 1 && id > 1 && up_src[is - 2] == up_dst[id - 2]) {
            --is;
            --id;
        }
        long lca = up_src[is - 1];

        // Max push t: flow increases on arcs aligned with the cycle
        // direction (src->dst through the entering arc), decreases on the
        // others; t is the min decreasing flow.
        // The directed loop is src ->(enter) dst -> up to lca -> down to src.
        // dst-side steps traverse v -> parent: arcs pointing parent -> child
        // run backward and lose t. src-side steps traverse parent -> v:
        // arcs pointing child -> parent run backward and lose t.
        double t = std::numeric_limits<double>::infinity();
        long leave_arc = -1;
        bool leave_on_src_side = true;
        for (std::size_t k = 0; k + 1 < is; ++k) {
            long v = up_src[k];
            std::size_t a = static_cast<std::size_t>(parent_arc_[v]);
            auto [u, w] = arc_ends(a);
            bool arc_up = (u == v);
            if (arc_up && flow_[a] < t - 1e-15) {
                t = flow_[a];
                leave_arc = static_cast<long>(a);
                leave_on_src_side = true;
            }
        }
        for (std::size_t k = 0; k + 1 < id; ++k) {
            long v = up_dst[k];
            std::size_t a = static_cast<std::size_t>(parent_arc_[v]);
            auto [u, w] = arc_ends(a);
            bool arc_up = (u == v);
            if (!arc_up && flow_[a] < t - 1e-15) {
                t = flow_[a];
                leave_arc = static_cast<long>(a);
                leave_on_src_side = false;
            }
        }
        (void)lca;
        if (leave_arc < 0) {
            // degenerate: entering arc forms a cycle with no bound; should
            // not happen in transportation (no capacities but conservation
            // bounds all flows)
            throw std::runtime_error("transport: unbounded pivot");
        }
        if (!std::isfinite(t)) t = 0.0;

        // Apply the push.
        flow_[enter_arc] += t;
        for (std::size_t k = 0; k + 1 < is; ++k) {
            long v = up_src[k];
            std::size_t a = static_cast<std::size_t>(parent_arc_[v]);
            auto [u, w] = arc_ends(a);
            flow_[a] += (u == v) ? -t : t;
        }
        for (std::size_t k = 0; k + 1 < id; ++k) {
            long v = up_dst[k];
            std::size_t a = static_cast<std::size_t>(parent_arc_[v]);
            auto [u, w] = arc_ends(a);
            flow_[a] += (u == v) ? t : -t;
        }

        // Replace leave_arc by enter_arc in the tree. The subtree that got
        // cut is re-rooted at the entering arc's endpoint on that side.
        long cut_child;  // node whose parent link is removed
        {
            // find the node on the cycle whose parent_arc_ == leave_arc
            cut_child = -1;
            const auto& side = leave_on_src_side ? up_src : up_dst;
            std::size_t lim = leave_on_src_side ? is : id;
            for (std::size_t k = 0; k + 1 < lim; ++k) {
                if (parent_arc_[side[k]] == leave_arc) {
                    cut_child = side[k];
                    break;
                }
            }
        }
        if (cut_child < 0) throw std::runtime_error("transport: tree bookkeeping failed");

        // Reverse parent pointers along cut_child .. (src or dst), then hang
        // that end on the other side via the entering arc.
        long attach = leave_on_src_side ? src : dst;   // endpoint inside the cut subtree
        long anchor = leave_on_src_side ? dst : src;   // endpoint that stays
        reroot(attach, cut_child);
        detach_child(parent_of_after_cut_, cut_child);
        parent_[attach] = anchor;
        parent_arc_[attach] = static_cast<long>(enter_arc);
        children_[static_cast<std::size_t>(anchor)].push_back(attach);
        basic_[enter_arc] = true;
        basic_[static_cast<std::size_t>(leave_arc)] = false;
        flow_[static_cast<std::size_t>(leave_arc)] = 0.0;

        // Potentials shift by a constant on the re-attached subtree.
        double delta = -reduced_of_arc(enter_arc, attach);
        shift_subtree(attach, delta);
    }

    double reduced_of_arc(std::size_t a, long child_end) {
        auto [u, w] = arc_ends(a);
        double c = a < n1_ * n2_ ? cost_(a / n2_, a % n2_) : big_m_;
        double rc = c - pi_[static_cast<std::size_t>(u)] + pi_[static_cast<std::size_t>(w)];
        // The tree equation for the child's potential must make rc vanish;
        // the sign of the needed shift depends on which end is the child.
        return (child_end == u) ? -rc : rc;
    }

    std::vector<long> path_to_root(long v) {
        std::vector<long> path;
        while (v >= 0) {
            path.push_back(v);
            v = parent_[static_cast<std::size_t>(v)];
        }
        return path;
    }

    void detach_child(long parent, long child) {
        auto& ch = children_[static_cast<std::size_t>(parent)];
        for (std::size_t k = 0; k < ch.size(); ++k)
            if (ch[k] == child) {
                ch.erase(ch.begin() + static_cast<long>(k));
                return;
            }
    }

    // Reverse the parent chain from `new_root` up to `old_top` so that
    // new_root becomes the root of the cut subtree. Records the parent the
    // old_top had (to detach it from the main tree).
    void reroot(long new_root, long old_top) {
        std::vector<long> chain;
        long v = new_root;
        while (true) {
            chain.push_back(v);
            if (v == old_top) break;
            v = parent_[static_cast<std::size_t>(v)];
        }
        parent_of_after_cut_ = parent_[static_cast<std::size_t>(old_top)];
        for (std::size_t k = chain.size(); k-- > 1;) {
            long upper = chain[k];
            long lower = chain[k - 1];
            // upper becomes child of lower
            detach_child(upper, lower);
            parent_[static_cast<std::size_t>(upper)] = lower;
            parent_arc_[static_cast<std::size_t>(upper)] =
                parent_arc_[static_cast<std::size_t>(lower)];
            children_[static_cast<std::size_t>(lower)].push_back(upper);
        }
        parent_[static_cast<std::size_t>(new_root)] = -1;
        parent_arc_[static_cast<std::size_t>(new_root)] = -1;
    }

    void shift_subtree(long top, double delta) {
        std::vector<long> stack = {top};
        while (!stack.empty()) {
            long v = stack.back();
            stack.pop_back();
            pi_[static_cast<std::size_t>(v)] += delta;
            for (long c : children_[static_cast<std::size_t>(v)]) stack.push_back(c);
        }
    }

    std::size_t n1_, n2_, root_;
    const Eigen::MatrixXd& cost_;
    double big_m_ = 0.0;
    std::vector<long> parent_, parent_arc_;
    std::vector<std::vector<long>> children_;
    std::vector<double> pi_, flow_;
    std::vector<bool> basic_;
    long parent_of_after_cut_ = -1;
};

}  // namespace

TransportResult solve_transport(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const Eigen::MatrixXd& cost) {
    if (supply.empty() || demand.empty())
        throw std::invalid_argument("transport: empty marginals");
    double sa = 0.0, sb = 0.0;
    for (double x : supply) sa += x;
    for (double x : demand) sb += x;
    if (std::abs(sa - sb) > 1e-9)
        throw std::invalid_argument("transport: unbalanced marginals");
    NetworkSimplex ns(supply, demand, cost);
    return ns.run();
}

}  // namespace ergolab
