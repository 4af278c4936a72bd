#include "hsres/stabilization.hpp"

#include "hsres/error.hpp"
#include "hsres/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hsres {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v)
{
    if (v.empty())
        return nan;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lo);
    }
    return m;
}

double quantile(std::vector<double> v, double q)
{
    if (v.empty())
        return nan;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= v.size())
        return v.back();
    return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

} // namespace

void ScanConfig::validate() const
{
    require(alpha_min < alpha_max, ErrorKind::Validation, "scan needs alpha_min < alpha_max");
    require(alpha_step > 0.0, ErrorKind::Validation, "scan needs alpha_step > 0");
    require(n_levels >= 2, ErrorKind::Validation, "scan needs at least two levels");
    require(max_samples >= 1, ErrorKind::Validation, "scan needs max_samples >= 1");
    require(window_halfwidth > 0.0, ErrorKind::Validation, "window halfwidth must be positive");
    require(flat_fraction > 0.0 && flat_fraction < 1.0, ErrorKind::Validation,
            "flat fraction must lie in (0, 1)");
    require(resonance >= 0, ErrorKind::Validation, "resonance index must be >= 0");
    if (energy_min && energy_max)
        require(*energy_min < *energy_max, ErrorKind::Validation, "empty plateau search range");
}

std::vector<double> ScanConfig::alphas() const
{
    std::vector<double> out;
    const double span = alpha_max - alpha_min;
    const long n = static_cast<long>(std::floor(span / alpha_step * (1.0 + 1e-12)));
    for (long k = 0; k <= n; ++k)
        out.push_back(alpha_min + static_cast<double>(k) * alpha_step);
    return out;
}

StabilizationSpectrum scan_branches(const RadialProblem& problem, const ScanConfig& config)
{
    config.validate();
    const std::vector<double> alphas = config.alphas();
    std::vector<BoxLevels> levels(alphas.size());
    parallel_for(alphas.size(), [&](std::size_t i) {
        levels[i] = stabilization_eigenvalues(problem, alphas[i], config.n_levels, config.target);
    });

    int lo = std::numeric_limits<int>::max(), hi = -1;
    for (const auto& l : levels) {
        lo = std::min(lo, l.first_index);
        hi = std::max(hi, l.first_index + static_cast<int>(l.values.size()) - 1);
    }
    StabilizationSpectrum out;
    out.alpha = alphas;
    out.threshold = problem.channel_set().thresholds().front();
    for (int j = lo; j <= hi; ++j)
        out.branch.push_back(j);
    out.Lambda = RealMatrix::Constant(static_cast<Eigen::Index>(alphas.size()), hi - lo + 1, nan);
    for (std::size_t i = 0; i < levels.size(); ++i)
        for (std::size_t k = 0; k < levels[i].values.size(); ++k)
            out.Lambda(static_cast<Eigen::Index>(i), levels[i].first_index - lo + static_cast<int>(k)) =
                levels[i].values[k];
    return out;
}

std::vector<Plateau> find_plateaus(const StabilizationSpectrum& s, const ScanConfig& config)
{
    const int nr = s.rows(), nc = s.columns();
    struct Flat {
        double energy;
        int column;
    };
    std::vector<double> slopes, spacings;
    std::vector<std::pair<double, Flat>> candidates; // |slope|, point
    for (int c = 0; c < nc; ++c) {
        for (int r = 0; r + 1 < nr; ++r) {
            const double a = s.Lambda(r, c), b = s.Lambda(r + 1, c);
            if (!std::isfinite(a) || !std::isfinite(b))
                continue;
            const double a0 = s.alpha[static_cast<std::size_t>(r)];
            const double a1 = s.alpha[static_cast<std::size_t>(r + 1)];
            double slope = std::abs((b - a) / (a1 - a0));
            // relative to a free level at the same energy and box size
            const double above = 0.5 * (a + b) - s.threshold;
            if (std::isfinite(s.threshold) && above > 0.0)
                slope *= 0.5 * (a0 + a1) / (2.0 * above);
            slopes.push_back(slope);
            candidates.push_back({slope, {0.5 * (a + b), c}});
        }
    }
    for (int r = 0; r < nr; ++r)
        for (int c = 0; c + 1 < nc; ++c)
            if (std::isfinite(s.Lambda(r, c)) && std::isfinite(s.Lambda(r, c + 1)))
                spacings.push_back(s.Lambda(r, c + 1) - s.Lambda(r, c));
    if (slopes.empty())
        return {};

    // upper quartile: a two-branch crossing spends half its points on the plateau
    const double reference = quantile(slopes, 0.75);
    const double spacing = median(spacings);
    std::vector<Flat> flats;
    for (const auto& [slope, f] : candidates) {
        if (slope >= config.flat_fraction * reference)
            continue;
        if (config.energy_min && f.energy < *config.energy_min)
            continue;
        if (config.energy_max && f.energy > *config.energy_max)
            continue;
        flats.push_back(f);
    }
    std::sort(flats.begin(), flats.end(), [](const Flat& a, const Flat& b) { return a.energy < b.energy; });

    std::vector<Plateau> out;
    const double join = std::isfinite(spacing) ? 0.25 * spacing : std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < flats.size()) {
        std::size_t j = i + 1;
        while (j < flats.size() && flats[j].energy - flats[j - 1].energy <= join)
            ++j;
        Plateau p;
        std::vector<double> energies;
        for (std::size_t k = i; k < j; ++k) {
            energies.push_back(flats[k].energy);
            if (std::find(p.branches.begin(), p.branches.end(), flats[k].column) == p.branches.end())
                p.branches.push_back(flats[k].column);
        }
        std::sort(p.branches.begin(), p.branches.end());
        p.energy = median(energies);
        p.low = flats[i].energy;
        p.high = flats[j - 1].energy;
        if (p.branches.size() >= 2)
            out.push_back(std::move(p));
        i = j;
    }
    return out;
}

std::optional<Crossing> avoided_crossing(const StabilizationSpectrum& s, int column)
{
    if (column < 0 || column + 1 >= s.columns())
        return std::nullopt;
    std::vector<int> rows;
    for (int r = 0; r < s.rows(); ++r)
        if (std::isfinite(s.Lambda(r, column)) && std::isfinite(s.Lambda(r, column + 1)))
            rows.push_back(r);
    if (rows.size() < 3)
        return std::nullopt;
    std::size_t best = 0;
    for (std::size_t k = 1; k < rows.size(); ++k)
        if (s.Lambda(rows[k], column + 1) - s.Lambda(rows[k], column) <
            s.Lambda(rows[best], column + 1) - s.Lambda(rows[best], column))
            best = k;
    if (best == 0 || best + 1 == rows.size())
        return std::nullopt;
    // the rows around the minimum must be contiguous scan points
    const std::size_t k0 = best >= 2 ? best - 2 : best - 1;
    const std::size_t k1 = std::min(rows.size() - 1, best + 2);
    for (std::size_t k = k0; k < k1; ++k)
        if (rows[k + 1] != rows[k] + 1)
            return std::nullopt;

    const double x0 = s.alpha[static_cast<std::size_t>(rows[best])];
    const int m = static_cast<int>(k1 - k0 + 1);
    Eigen::MatrixXd A(m, 3), L(m, 2);
    Eigen::VectorXd g2(m), mid(m);
    for (int i = 0; i < m; ++i) {
        const int r = rows[k0 + static_cast<std::size_t>(i)];
        const double x = s.alpha[static_cast<std::size_t>(r)] - x0;
        const double lo = s.Lambda(r, column), hi = s.Lambda(r, column + 1);
        A.row(i) << x * x, x, 1.0;
        L.row(i) << x, 1.0;
        g2(i) = (hi - lo) * (hi - lo);
        mid(i) = 0.5 * (hi + lo);
    }
    const Eigen::Vector3d c = A.colPivHouseholderQr().solve(g2);
    if (!(c(0) > 0.0))
        return std::nullopt;
    const double xc = -c(1) / (2.0 * c(0));
    const double span_lo = s.alpha[static_cast<std::size_t>(rows[k0])] - x0;
    const double span_hi = s.alpha[static_cast<std::size_t>(rows[k1])] - x0;
    if (xc < span_lo || xc > span_hi)
        return std::nullopt;
    const Eigen::Vector2d l = L.colPivHouseholderQr().solve(mid);
    Crossing out;
    out.alpha = x0 + xc;
    out.energy = l(0) * xc + l(1);
    out.gap = std::sqrt(std::max(c(2) - c(1) * c(1) / (4.0 * c(0)), 0.0));
    return out;
}

ResonanceWindow detect_resonance(const StabilizationSpectrum& s, const ScanConfig& config)
{
    config.validate();
    require(s.columns() >= 2 && s.rows() >= 10, ErrorKind::Domain,
            "resonance detection needs at least 2 branches over 10 box sizes");
    ResonanceWindow out;
    const std::vector<Plateau> plateaus = find_plateaus(s, config);
    out.plateaus = static_cast<int>(plateaus.size());
    if (config.resonance >= out.plateaus)
        return out;
    const Plateau& p = plateaus[static_cast<std::size_t>(config.resonance)];

    const double spread = std::max(p.high - p.low, 1e-12 * std::max(1.0, std::abs(p.energy)));
    std::vector<double> centers, gaps;
    for (int c = 0; c + 1 < s.columns(); ++c) {
        const bool touches = std::binary_search(p.branches.begin(), p.branches.end(), c) ||
                             std::binary_search(p.branches.begin(), p.branches.end(), c + 1);
        if (!touches)
            continue;
        const auto x = avoided_crossing(s, c);
        if (x && x->energy >= p.low - spread && x->energy <= p.high + spread) {
            centers.push_back(x->energy);
            gaps.push_back(x->gap);
        }
    }
    out.found = true;
    if (!centers.empty()) {
        out.E_center = median(centers);
        out.width_estimate = median(gaps);
    }
    if (centers.empty() || !(out.width_estimate > 0.0)) {
        out.E_center = p.energy;
        out.width_estimate = 0.5 * spread;
    }

    const double lo = out.E_center - config.window_halfwidth * out.width_estimate;
    const double hi = out.E_center + config.window_halfwidth * out.width_estimate;
    std::vector<WindowSample> all;
    for (int r = 0; r < s.rows(); ++r)
        for (int c = 0; c < s.columns(); ++c) {
            const double e = s.Lambda(r, c);
            if (std::isfinite(e) && e >= lo && e <= hi)
                all.push_back({e, s.alpha[static_cast<std::size_t>(r)], s.branch[static_cast<std::size_t>(c)]});
        }
    std::sort(all.begin(), all.end(), [](const WindowSample& a, const WindowSample& b) {
        return a.energy < b.energy || (a.energy == b.energy && a.alpha < b.alpha);
    });
    std::vector<WindowSample> unique;
    for (const auto& w : all)
        if (unique.empty() || w.energy - unique.back().energy > 1e-14)
            unique.push_back(w);
    const std::size_t cap = static_cast<std::size_t>(config.max_samples);
    if (unique.size() > cap) {
        std::vector<WindowSample> thinned;
        for (std::size_t k = 0; k < cap; ++k) {
            const std::size_t idx = cap == 1 ? unique.size() / 2 : k * (unique.size() - 1) / (cap - 1);
            thinned.push_back(unique[idx]);
        }
        unique = std::move(thinned);
    }
    out.samples = std::move(unique);
    return out;
}

std::vector<KSample> sample_k(const RadialProblem& problem, const ResonanceWindow& window)
{
    require(!window.samples.empty(), ErrorKind::Domain, "empty resonance window");
    std::vector<double> energies;
    for (const auto& w : window.samples)
        energies.push_back(w.energy);
    std::sort(energies.begin(), energies.end());
    std::vector<double> unique;
    for (double e : energies)
        if (unique.empty() || e - unique.back() > 1e-14)
            unique.push_back(e);
    std::vector<KSample> out(unique.size());
    parallel_for(unique.size(), [&](std::size_t i) { out[i] = extract_k(problem, unique[i]); });
    return out;
}

} // namespace hsres
