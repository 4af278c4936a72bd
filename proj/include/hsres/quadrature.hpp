#pragma once

#include <vector>

namespace hsres {

/// Nodes and weights on the reference interval [-1, 1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

QuadratureRule gauss_legendre(int n);

/// Gauss-Lobatto-Legendre nodes (including both end points) for a Lagrange
/// element of the given polynomial order.
std::vector<double> gauss_lobatto_nodes(int order);

/// Lagrange interpolation basis on arbitrary distinct nodes of [-1, 1].
class LagrangeBasis {
public:
    explicit LagrangeBasis(std::vector<double> nodes);

    int size() const noexcept { return static_cast<int>(nodes_.size()); }
    const std::vector<double>& nodes() const noexcept { return nodes_; }

    void evaluate(double x, double* values, double* derivatives) const;

private:
    std::vector<double> nodes_;
    std::vector<double> bary_;
};

} // namespace hsres
