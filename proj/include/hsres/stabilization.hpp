#pragma once

// Stabilization method: box eigenvalues Lambda_j(alpha) over a range of box
// sizes, detection of the plateau left by a narrow resonance, and K-matrix
// sampling at the box eigenvalues around it.

#include "hsres/radial.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace hsres {

struct ScanConfig {
    double alpha_min = 50.0;
    double alpha_max = 400.0;
    double alpha_step = 1.0;
    int n_levels = 12;
    // levels nearest to this energy; lowest levels when unset
    std::optional<double> target;
    // plateaus are searched for in [energy_min, energy_max] only
    std::optional<double> energy_min;
    std::optional<double> energy_max;
    int resonance = 0;            // which plateau, counted upward in energy
    int max_samples = 400;
    double window_halfwidth = 1.0; // in units of the estimated width
    double flat_fraction = 0.05;

    void validate() const;
    std::vector<double> alphas() const;
};

/// Branches are labelled by their absolute position in the box spectrum,
/// which is what continuous tracking through (nearly exact) crossings gives
/// for a one-dimensional Dirichlet problem.
struct StabilizationSpectrum {
    std::vector<double> alpha;
    std::vector<int> branch;  // absolute level index of each column
    RealMatrix Lambda;        // alpha x branch, NaN where not computed
    // lowest open threshold; a free box level has dLambda/dalpha = -2 (Lambda - threshold) / alpha
    double threshold = std::numeric_limits<double>::quiet_NaN();

    int rows() const noexcept { return static_cast<int>(alpha.size()); }
    int columns() const noexcept { return static_cast<int>(branch.size()); }
};

struct WindowSample {
    double energy = 0.0;
    double alpha = 0.0;
    int branch = 0;
};

struct ResonanceWindow {
    bool found = false;
    double E_center = 0.0;
    double width_estimate = 0.0;
    int plateaus = 0; // plateau clusters found in the search range
    std::vector<WindowSample> samples; // ascending in energy
};

StabilizationSpectrum scan_branches(const RadialProblem& problem, const ScanConfig& config);

/// Plateau clusters: energies where branches are flat, grouped. Ascending.
struct Plateau {
    double energy = 0.0; // median flat energy
    double low = 0.0;
    double high = 0.0;
    std::vector<int> branches;
};
std::vector<Plateau> find_plateaus(const StabilizationSpectrum& spectrum, const ScanConfig& config);

/// Center of a two-level avoided crossing between adjacent columns c and
/// c + 1: the gap squared is fitted by a parabola and the branch midpoint by a
/// line around the smallest gap. Returns nothing when the minimum lies on the
/// edge of the scanned range.
struct Crossing {
    double alpha = 0.0;
    double energy = 0.0;
    double gap = 0.0;
};
std::optional<Crossing> avoided_crossing(const StabilizationSpectrum& spectrum, int column);

ResonanceWindow detect_resonance(const StabilizationSpectrum& spectrum, const ScanConfig& config);

/// K at every window energy; energies closer than 1e-14 are merged.
std::vector<KSample> sample_k(const RadialProblem& problem, const ResonanceWindow& window);

} // namespace hsres
