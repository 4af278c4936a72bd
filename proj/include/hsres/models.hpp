#pragma once

// Closed-form radial models used for testing and for the toy pipeline.

#include "hsres/radial.hpp"

#include <memory>

namespace hsres {

/// Two open channels with thresholds 0 and `threshold2`. Channel 2 holds a
/// well behind a Gaussian barrier, which traps a narrow shape resonance; a
/// Gaussian coupling localized at the well lets it decay into channel 1 too.
struct ToyModel {
    double threshold2 = 0.5;
    double well1 = 1.0;       // depth of the shallow channel-1 well
    double range1 = 2.0;
    double well2 = 6.0;       // depth of the channel-2 well
    double range2 = 1.5;
    double barrier = 6.0;     // height of the channel-2 barrier
    double barrier_at = 4.0;
    double barrier_width = 1.0;
    double coupling = 0.05;
    double coupling_at = 2.0;
    double coupling_width = 1.0;
    double reduced_mass = 0.5; // so that k_i = q_i

    void potential(double rho, RealMatrix& U) const;
    std::shared_ptr<AnalyticCouplings> couplings() const;
    ChannelSet channels() const;
    /// Radius beyond which every potential term is below 1e-16.
    double range() const;
};

/// n uncoupled channels with W = c (box test mode).
std::shared_ptr<AnalyticCouplings> constant_couplings(int channels, double c);

/// One channel with the bare 15/(4 rho^2) hyperradial barrier.
std::shared_ptr<AnalyticCouplings> barrier_couplings();

} // namespace hsres
