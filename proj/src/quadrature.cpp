#include "hsres/quadrature.hpp"

#include "hsres/error.hpp"

#include <cmath>
#include <numbers>

namespace hsres {

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence
void legendre(int n, double x, double& p, double& dp)
{
    double p0 = 1.0, p1 = x;
    if (n == 0) {
        p = 1.0;
        dp = 0.0;
        return;
    }
    for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
    }
    p = p1;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
}

} // namespace

QuadratureRule gauss_legendre(int n)
{
    require(n >= 1, ErrorKind::Domain, "quadrature order must be >= 1");
    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double p = 0.0, dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            legendre(n, x, p, dp);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        legendre(n, x, p, dp);
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

std::vector<double> gauss_lobatto_nodes(int order)
{
    require(order >= 1, ErrorKind::Domain, "element order must be >= 1");
    std::vector<double> x(static_cast<std::size_t>(order + 1));
    x.front() = -1.0;
    x.back() = 1.0;
    // interior nodes are the roots of P_order'
    for (int i = 1; i < order; ++i) {
        double t = -std::cos(std::numbers::pi * i / order);
        for (int it = 0; it < 100; ++it) {
            // Newton on (1 - t^2) P'(t) = n (P_{n-1} - t P_n)
            double p = 0.0, dp = 0.0;
            legendre(order, t, p, dp);
            const double d2p = (2.0 * t * dp - order * (order + 1.0) * p) / (1.0 - t * t);
            const double dt = dp / d2p;
            t -= dt;
            if (std::abs(dt) < 1e-16)
                break;
        }
        x[static_cast<std::size_t>(i)] = t;
    }
    return x;
}

LagrangeBasis::LagrangeBasis(std::vector<double> nodes) : nodes_(std::move(nodes))
{
    const std::size_t n = nodes_.size();
    bary_.assign(n, 1.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
            if (k != j)
                bary_[j] /= (nodes_[j] - nodes_[k]);
}

void LagrangeBasis::evaluate(double x, double* values, double* derivatives) const
{
    const std::size_t n = nodes_.size();
    for (std::size_t j = 0; j < n; ++j) {
        double v = bary_[j];
        double d = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == j)
                continue;
            // product rule accumulated alongside the value
            d = d * (x - nodes_[k]) + v;
            v *= (x - nodes_[k]);
        }
        values[j] = v;
        if (derivatives)
            derivatives[j] = d;
    }
}

} // namespace hsres
