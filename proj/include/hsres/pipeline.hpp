#pragma once

// Batch pipeline: terms -> couplings -> scan -> sample -> fit -> xsec. Every
// stage writes its result to the output directory with a digest of the
// configuration it depends on; a stage whose output already carries the
// current digest is not recomputed.

#include "hsres/ahs.hpp"
#include "hsres/fit.hpp"
#include "hsres/io.hpp"
#include "hsres/models.hpp"
#include "hsres/radial.hpp"
#include "hsres/stabilization.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hsres {

enum class SystemKind { Ahs, Toy, Free };
enum class Stage { Terms, Couplings, Scan, Sample, Fit, Xsec };

const char* to_string(SystemKind kind) noexcept;
const char* to_string(Stage stage) noexcept;
SystemKind parse_system(const std::string& name);
Stage parse_stage(const std::string& name);

struct RunConfig {
    SystemKind system = SystemKind::Ahs;
    ThreeBodyMasses masses;
    HyperangularGrid grid;
    AdiabaticOptions basis;
    double rho_min = 0.05;
    double rho_max = 500.0;
    int rho_points = 400;
    // open-channel thresholds; derived from the masses (or the toy model) when empty
    std::vector<double> thresholds;
    // energy E0 is reported against; the upper n = 2 level of heavy 1 by default
    std::optional<double> reference_energy;
    ToyModel toy;
    double rho_start = 0.05;
    double rho_match = 500.0;
    RadialMeshOptions radial;
    ScanConfig scan;
    FitModel model = FitModel::General;
    int xsec_points = 401;
    double xsec_span = 10.0; // profile half-range in units of Gamma
    std::filesystem::path out = "hsres-out";

    /// Defaults for a system: the reference dt-mu run, the toy
    /// two-channel model, or the V = 0 hyperangular test system.
    static RunConfig defaults(SystemKind system);
    /// Structured-text (JSON) file with optional sections system, masses,
    /// grid, basis, channels, toy, radial, scan, fit, xsec, output. Missing
    /// keys keep the system defaults; unknown keys are rejected.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text);

    void validate() const;
    /// Canonical text of everything stage `s` depends on, upstream included.
    std::string canonical(Stage s) const;
    std::string digest(Stage s) const;
    std::vector<double> rho_grid() const;
};

struct StageOutcome {
    Stage stage = Stage::Terms;
    bool reused = false;
    std::vector<std::filesystem::path> files;
    std::string summary;
};

/// Three profiles over the resonance: (i) E, K11, K12, K22 at the sampled
/// energies; (ii) E, 1/(K11 - a1), 1/(K12 - a), 1/(K22 - a2) at the same
/// energies; (iii) E, sigma11, sigma12, sigma22 of the fitted K on a uniform
/// grid of `points` energies over E0 +- span Gamma.
struct Profiles {
    DataTable k;
    DataTable inverse;
    DataTable cross_sections;
};
Profiles emit_profiles(const BWPoleParams& params, const std::vector<KSample>& samples, const ChannelSet& channels,
                       int points, double span, const std::string& digest);

class Pipeline {
public:
    explicit Pipeline(RunConfig config);

    const RunConfig& config() const noexcept { return config_; }
    std::filesystem::path path(Stage s) const;

    /// Runs one stage; its inputs must already be cached with matching digests.
    StageOutcome run(Stage s);
    /// Runs every stage up to and including `last` in order, reusing caches.
    std::vector<StageOutcome> run_through(Stage last);

    ChannelSet channels() const;
    double reference_energy() const;
    RadialProblem radial_problem() const;

private:
    StageOutcome terms();
    StageOutcome couplings();
    StageOutcome scan();
    StageOutcome sample();
    StageOutcome fit_stage();
    StageOutcome xsec();
    /// Loads a cached stage output, or fails naming the stage to run.
    DataTable cached(Stage s) const;
    bool current(Stage s) const;

    RunConfig config_;
};

/// Summary row in the layout of the resonance tables: binding -E0, E0 below
/// the reference energy, Gamma and Gamma2/Gamma.
std::string summary_row(const ResonanceReport& report, double reference_energy);

} // namespace hsres
