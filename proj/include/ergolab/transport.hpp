#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ergolab {

struct TransportResult {
    double cost = 0.0;
    std::vector<double> potential_src;   // pi on sources
    std::vector<double> potential_snk;   // pi on sinks
    bool optimal = false;
    long pivots = 0;
};

// Exact dense bipartite transportation by network simplex (spanning-tree
// basis, block pivot search). Supplies and demands must balance to 1e-12;
// costs are arbitrary nonnegative reals.
TransportResult solve_transport(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const Eigen::MatrixXd& cost);

}  // namespace ergolab
