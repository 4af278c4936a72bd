#include "hsres/models.hpp"

#include <algorithm>
#include <cmath>

namespace hsres {

void ToyModel::potential(double rho, RealMatrix& U) const
{
    auto gauss = [](double x, double w) { return std::exp(-(x / w) * (x / w)); };
    U.setZero(2, 2);
    U(0, 0) = -well1 * gauss(rho, range1);
    U(1, 1) = threshold2 - well2 * gauss(rho, range2) + barrier * gauss(rho - barrier_at, barrier_width);
    U(0, 1) = U(1, 0) = coupling * gauss(rho - coupling_at, coupling_width);
}

std::shared_ptr<AnalyticCouplings> ToyModel::couplings() const
{
    const ToyModel copy = *this;
    return std::make_shared<AnalyticCouplings>(2, [copy](double rho, RealMatrix& W) { copy.potential(rho, W); });
}

ChannelSet ToyModel::channels() const
{
    return ChannelSet({0.0, threshold2}, {reduced_mass, reduced_mass});
}

double ToyModel::range() const
{
    // exp(-x^2) < 1e-16 for x > 6.07
    const double x = 6.1;
    return std::max({x * range1, x * range2, barrier_at + x * barrier_width, coupling_at + x * coupling_width});
}

std::shared_ptr<AnalyticCouplings> constant_couplings(int channels, double c)
{
    return std::make_shared<AnalyticCouplings>(channels, [c](double, RealMatrix& W) {
        W.diagonal().setConstant(c);
    });
}

std::shared_ptr<AnalyticCouplings> barrier_couplings()
{
    return std::make_shared<AnalyticCouplings>(1, [](double rho, RealMatrix& W) {
        W(0, 0) = 15.0 / (4.0 * rho * rho);
    });
}

} // namespace hsres
