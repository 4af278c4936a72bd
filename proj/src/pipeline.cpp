#include "hsres/pipeline.hpp"

#include "hsres/error.hpp"
#include "hsres/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace hsres {

using json = nlohmann::json;

namespace {

constexpr Stage all_stages[] = {Stage::Terms, Stage::Couplings, Stage::Scan,
                                Stage::Sample, Stage::Fit, Stage::Xsec};

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed)
{
    require(j.is_object(), ErrorKind::Validation, "config section '" + section + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        require(ok.count(k) > 0, ErrorKind::Validation, "unknown key '" + k + "' in config section '" + section + "'");
}

template <class T>
void get(const json& j, const char* key, T& target)
{
    if (j.contains(key))
        target = j.at(key).get<T>();
}

template <class T>
void get(const json& j, const char* key, std::optional<T>& target)
{
    if (j.contains(key)) {
        if (j.at(key).is_null())
            target.reset();
        else
            target = j.at(key).get<T>();
    }
}

template <class T>
json opt(const std::optional<T>& v)
{
    return v ? json(*v) : json(nullptr);
}

json masses_json(const ThreeBodyMasses& m)
{
    return {{"m1", m.m1}, {"m2", m.m2}, {"z1", m.z1}, {"z2", m.z2}, {"z_light", m.z_light}};
}

json grid_json(const HyperangularGrid& g)
{
    return {{"n_chi", g.n_chi},
            {"n_theta", g.n_theta},
            {"graded", g.graded},
            {"cluster_fraction", g.cluster_fraction},
            {"width_scale", g.width_scale},
            {"halo_scale", g.halo_scale},
            {"cusp_weight", g.cusp_weight},
            {"cusp_width", g.cusp_width}};
}

json toy_json(const ToyModel& t)
{
    return {{"threshold2", t.threshold2},   {"well1", t.well1},
            {"range1", t.range1},           {"well2", t.well2},
            {"range2", t.range2},           {"barrier", t.barrier},
            {"barrier_at", t.barrier_at},   {"barrier_width", t.barrier_width},
            {"coupling", t.coupling},       {"coupling_at", t.coupling_at},
            {"coupling_width", t.coupling_width}, {"reduced_mass", t.reduced_mass}};
}

json radial_json(const RunConfig& c)
{
    const RadialMeshOptions& o = c.radial;
    return {{"rho_start", c.rho_start},
            {"rho_match", c.rho_match},
            {"order", o.order},
            {"max_element", o.max_element},
            {"min_element", o.min_element},
            {"relative_element", o.relative_element},
            {"energy_max", o.energy_max},
            {"elements_per_wavelength", o.elements_per_wavelength},
            {"extra_quadrature", o.extra_quadrature}};
}

json channels_json(const RunConfig& c)
{
    return {{"thresholds", c.thresholds}, {"reference_energy", opt(c.reference_energy)}};
}

json scan_json(const ScanConfig& s)
{
    return {{"alpha_min", s.alpha_min}, {"alpha_max", s.alpha_max}, {"alpha_step", s.alpha_step},
            {"n_levels", s.n_levels},   {"target", opt(s.target)}};
}

json window_json(const ScanConfig& s)
{
    return {{"energy_min", opt(s.energy_min)},
            {"energy_max", opt(s.energy_max)},
            {"resonance", s.resonance},
            {"max_samples", s.max_samples},
            {"window_halfwidth", s.window_halfwidth},
            {"flat_fraction", s.flat_fraction}};
}

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string sci(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*e", digits, v);
    return buf;
}

} // namespace

const char* to_string(SystemKind kind) noexcept
{
    switch (kind) {
    case SystemKind::Ahs: return "ahs";
    case SystemKind::Toy: return "toy";
    case SystemKind::Free: return "free";
    }
    return "?";
}

const char* to_string(Stage stage) noexcept
{
    switch (stage) {
    case Stage::Terms: return "terms";
    case Stage::Couplings: return "couplings";
    case Stage::Scan: return "scan";
    case Stage::Sample: return "sample";
    case Stage::Fit: return "fit";
    case Stage::Xsec: return "xsec";
    }
    return "?";
}

SystemKind parse_system(const std::string& name)
{
    for (SystemKind k : {SystemKind::Ahs, SystemKind::Toy, SystemKind::Free})
        if (name == to_string(k))
            return k;
    throw Error(ErrorKind::Validation, "unknown system '" + name + "' (ahs, toy or free)");
}

Stage parse_stage(const std::string& name)
{
    for (Stage s : all_stages)
        if (name == to_string(s))
            return s;
    throw Error(ErrorKind::Validation,
                "unknown stage '" + name + "' (terms, couplings, scan, sample, fit or xsec)");
}

RunConfig RunConfig::defaults(SystemKind system)
{
    RunConfig c;
    c.system = system;
    switch (system) {
    case SystemKind::Ahs: {
        const double upper = c.masses.atomic_level(1, 2);
        c.scan.alpha_min = 50.0;
        c.scan.alpha_max = 400.0;
        c.scan.alpha_step = 1.0;
        c.scan.n_levels = 16;
        c.scan.target = -0.145;
        c.scan.energy_min = -0.17;
        c.scan.energy_max = upper;
        break;
    }
    case SystemKind::Toy:
        c.rho_start = 0.0;
        c.rho_match = 40.0;
        c.radial.relative_element = 0.0;
        c.radial.max_element = 0.5;
        c.radial.energy_max = 4.0;
        c.scan.alpha_min = 20.0;
        c.scan.alpha_max = 40.0;
        c.scan.alpha_step = 0.05;
        c.scan.n_levels = 10;
        c.scan.target = 2.0;
        c.scan.energy_min = 1.0;
        c.scan.energy_max = 3.0;
        break;
    case SystemKind::Free:
        c.grid.n_chi = 61;
        c.grid.n_theta = 61;
        c.grid.graded = false;
        c.rho_min = 0.5;
        c.rho_max = 10.0;
        c.rho_points = 20;
        break;
    }
    return c;
}

RunConfig RunConfig::parse(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("config is not valid JSON: ") + e.what());
    }
    require(root.is_object(), ErrorKind::Validation, "config must be a JSON object");
    check_keys(root, "top level",
               {"system", "masses", "grid", "basis", "channels", "toy", "radial", "scan", "fit", "xsec", "output"});
    try {
        RunConfig c = defaults(parse_system(root.value("system", std::string("ahs"))));
        if (root.contains("masses")) {
            const json& j = root["masses"];
            check_keys(j, "masses", {"m1", "m2", "z1", "z2", "z_light"});
            get(j, "m1", c.masses.m1);
            get(j, "m2", c.masses.m2);
            get(j, "z1", c.masses.z1);
            get(j, "z2", c.masses.z2);
            get(j, "z_light", c.masses.z_light);
        }
        if (root.contains("grid")) {
            const json& j = root["grid"];
            check_keys(j, "grid", {"n_chi", "n_theta", "graded", "cluster_fraction", "width_scale", "halo_scale",
                                   "cusp_weight", "cusp_width"});
            get(j, "n_chi", c.grid.n_chi);
            get(j, "n_theta", c.grid.n_theta);
            get(j, "graded", c.grid.graded);
            get(j, "cluster_fraction", c.grid.cluster_fraction);
            get(j, "width_scale", c.grid.width_scale);
            get(j, "halo_scale", c.grid.halo_scale);
            get(j, "cusp_weight", c.grid.cusp_weight);
            get(j, "cusp_width", c.grid.cusp_width);
        }
        if (root.contains("basis")) {
            const json& j = root["basis"];
            check_keys(j, "basis", {"n_terms", "rho_min", "rho_max", "rho_points", "derivative_step", "threads",
                                    "refine_passes", "max_rotation", "min_interval"});
            get(j, "n_terms", c.basis.n_terms);
            get(j, "rho_min", c.rho_min);
            get(j, "rho_max", c.rho_max);
            get(j, "rho_points", c.rho_points);
            get(j, "derivative_step", c.basis.derivative_step);
            get(j, "threads", c.basis.threads);
            get(j, "refine_passes", c.basis.refine_passes);
            get(j, "max_rotation", c.basis.max_rotation);
            get(j, "min_interval", c.basis.min_interval);
        }
        if (root.contains("channels")) {
            const json& j = root["channels"];
            check_keys(j, "channels", {"thresholds", "reference_energy"});
            get(j, "thresholds", c.thresholds);
            get(j, "reference_energy", c.reference_energy);
        }
        if (root.contains("toy")) {
            const json& j = root["toy"];
            check_keys(j, "toy", {"threshold2", "well1", "range1", "well2", "range2", "barrier", "barrier_at",
                                  "barrier_width", "coupling", "coupling_at", "coupling_width", "reduced_mass"});
            get(j, "threshold2", c.toy.threshold2);
            get(j, "well1", c.toy.well1);
            get(j, "range1", c.toy.range1);
            get(j, "well2", c.toy.well2);
            get(j, "range2", c.toy.range2);
            get(j, "barrier", c.toy.barrier);
            get(j, "barrier_at", c.toy.barrier_at);
            get(j, "barrier_width", c.toy.barrier_width);
            get(j, "coupling", c.toy.coupling);
            get(j, "coupling_at", c.toy.coupling_at);
            get(j, "coupling_width", c.toy.coupling_width);
            get(j, "reduced_mass", c.toy.reduced_mass);
        }
        if (root.contains("radial")) {
            const json& j = root["radial"];
            check_keys(j, "radial", {"rho_start", "rho_match", "order", "max_element", "min_element",
                                     "relative_element", "energy_max", "elements_per_wavelength",
                                     "extra_quadrature"});
            get(j, "rho_start", c.rho_start);
            get(j, "rho_match", c.rho_match);
            get(j, "order", c.radial.order);
            get(j, "max_element", c.radial.max_element);
            get(j, "min_element", c.radial.min_element);
            get(j, "relative_element", c.radial.relative_element);
            get(j, "energy_max", c.radial.energy_max);
            get(j, "elements_per_wavelength", c.radial.elements_per_wavelength);
            get(j, "extra_quadrature", c.radial.extra_quadrature);
        }
        if (root.contains("scan")) {
            const json& j = root["scan"];
            check_keys(j, "scan", {"alpha_min", "alpha_max", "alpha_step", "n_levels", "target", "energy_min",
                                   "energy_max", "resonance", "max_samples", "window_halfwidth", "flat_fraction"});
            get(j, "alpha_min", c.scan.alpha_min);
            get(j, "alpha_max", c.scan.alpha_max);
            get(j, "alpha_step", c.scan.alpha_step);
            get(j, "n_levels", c.scan.n_levels);
            get(j, "target", c.scan.target);
            get(j, "energy_min", c.scan.energy_min);
            get(j, "energy_max", c.scan.energy_max);
            get(j, "resonance", c.scan.resonance);
            get(j, "max_samples", c.scan.max_samples);
            get(j, "window_halfwidth", c.scan.window_halfwidth);
            get(j, "flat_fraction", c.scan.flat_fraction);
        }
        if (c.system == SystemKind::Ahs && !(root.contains("scan") && root["scan"].contains("energy_max")))
            c.scan.energy_max = c.masses.atomic_level(1, 2);
        if (root.contains("fit")) {
            const json& j = root["fit"];
            check_keys(j, "fit", {"model"});
            if (j.contains("model"))
                c.model = parse_fit_model(j["model"].get<std::string>());
        }
        if (root.contains("xsec")) {
            const json& j = root["xsec"];
            check_keys(j, "xsec", {"points", "span"});
            get(j, "points", c.xsec_points);
            get(j, "span", c.xsec_span);
        }
        if (root.contains("output")) {
            const json& j = root["output"];
            check_keys(j, "output", {"directory"});
            if (j.contains("directory"))
                c.out = j["directory"].get<std::string>();
        }
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("bad config value: ") + e.what());
    }
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot read config " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse(os.str());
}

void RunConfig::validate() const
{
    masses.validate();
    grid.validate();
    require(basis.n_terms >= 1, ErrorKind::Validation, "basis needs n_terms >= 1");
    require(rho_min > 0.0 && rho_min < rho_max, ErrorKind::Validation, "basis needs 0 < rho_min < rho_max");
    require(rho_points >= 2, ErrorKind::Validation, "basis needs at least two rho points");
    require(rho_start >= 0.0 && rho_start < rho_match, ErrorKind::Validation,
            "radial needs 0 <= rho_start < rho_match");
    for (double t : thresholds)
        require(std::isfinite(t), ErrorKind::Validation, "thresholds must be finite");
    require(xsec_points >= 2, ErrorKind::Validation, "xsec needs at least two points");
    require(xsec_span > 0.0, ErrorKind::Validation, "xsec span must be positive");
    scan.validate();
}

std::string RunConfig::canonical(Stage s) const
{
    json j;
    j["system"] = to_string(system);
    if (system != SystemKind::Toy) {
        j["masses"] = masses_json(masses);
        j["grid"] = grid_json(grid);
        j["basis"] = {{"n_terms", basis.n_terms}, {"rho_min", rho_min}, {"rho_max", rho_max},
                      {"rho_points", rho_points}};
    }
    if (s == Stage::Terms)
        return j.dump();
    if (system != SystemKind::Toy) {
        j["basis"]["derivative_step"] = basis.derivative_step;
        j["basis"]["refine_passes"] = basis.refine_passes;
        j["basis"]["max_rotation"] = basis.max_rotation;
        j["basis"]["min_interval"] = basis.min_interval;
    } else {
        j["toy"] = toy_json(toy);
    }
    if (s == Stage::Couplings)
        return j.dump();
    j["channels"] = channels_json(*this);
    j["radial"] = radial_json(*this);
    j["scan"] = scan_json(scan);
    if (s == Stage::Scan)
        return j.dump();
    j["window"] = window_json(scan);
    if (s == Stage::Sample)
        return j.dump();
    j["fit"] = {{"model", to_string(model)}};
    if (s == Stage::Fit)
        return j.dump();
    j["xsec"] = {{"points", xsec_points}, {"span", xsec_span}};
    return j.dump();
}

std::string RunConfig::digest(Stage s) const
{
    return hex_digest(fnv1a(canonical(s)));
}

std::vector<double> RunConfig::rho_grid() const
{
    return geometric_grid(rho_min, rho_max, rho_points);
}

Profiles emit_profiles(const BWPoleParams& p, const std::vector<KSample>& samples, const ChannelSet& channels,
                       int points, double span, const std::string& digest)
{
    require(!samples.empty(), ErrorKind::Domain, "profiles need K samples");
    require(points >= 2 && span > 0.0, ErrorKind::Validation, "profiles need >= 2 points and a positive span");
    require(channels.n_open() == 2, ErrorKind::UnsupportedShape, "profiles are defined for two open channels");
    const ResonanceReport report = resonance_from_pole(p);
    const double top = std::max(channels.thresholds()[0], channels.thresholds()[1]);
    const double lo = report.E0 - span * report.Gamma, hi = report.E0 + span * report.Gamma;
    require(lo > top, ErrorKind::Domain,
            "profile range starts at " + format_number(lo) + ", below the threshold " + format_number(top));

    Profiles out;
    out.k.kind = "profile-k";
    out.inverse.kind = "profile-inverse";
    out.cross_sections.kind = "profile-xsec";
    for (DataTable* t : {&out.k, &out.inverse, &out.cross_sections}) {
        t->digest = digest;
        t->meta["E0"] = format_number(report.E0);
        t->meta["Gamma"] = format_number(report.Gamma);
    }
    out.k.columns = {"E", "K11", "K12", "K22"};
    out.inverse.columns = {"E", "inv_K11_a1", "inv_K12_a", "inv_K22_a2"};
    out.cross_sections.columns = {"E", "sigma11", "sigma12", "sigma22"};
    for (const auto& s : samples) {
        const RealMatrix& K = s.K.entries;
        require(K.rows() == 2 && K.cols() == 2, ErrorKind::UnsupportedShape, "profiles need 2x2 K samples");
        out.k.rows.push_back({s.K.energy, K(0, 0), K(0, 1), K(1, 1)});
        out.inverse.rows.push_back(
            {s.K.energy, 1.0 / (K(0, 0) - p.a1), 1.0 / (K(0, 1) - p.a), 1.0 / (K(1, 1) - p.a2)});
    }
    for (int i = 0; i < points; ++i) {
        const double E = lo + (hi - lo) * i / (points - 1);
        if (E == p.E1)
            continue;
        const Eigen::Matrix2d sigma = cross_sections(bw_k(p, E), channels);
        out.cross_sections.rows.push_back({E, sigma(0, 0), sigma(0, 1), sigma(1, 1)});
    }
    return out;
}

std::string summary_row(const ResonanceReport& r, double reference)
{
    std::ostringstream os;
    os << "-E0 " << fixed(-r.E0, 6) << "  E0-Eref " << sci(r.E0 - reference, 6) << "  Gamma " << sci(r.Gamma)
       << "  Gamma2/Gamma " << (r.branching.size() == 2 ? fixed(r.branching[1], 3) : std::string("n/a"));
    return os.str();
}

Pipeline::Pipeline(RunConfig config) : config_(std::move(config))
{
    config_.validate();
}

std::filesystem::path Pipeline::path(Stage s) const
{
    const std::string v = "-v" + std::to_string(config_.scan.resonance);
    const std::string m = std::string("-") + to_string(config_.model);
    switch (s) {
    case Stage::Terms: return config_.out / "terms.dat";
    case Stage::Couplings: return config_.out / "couplings.dat";
    case Stage::Scan: return config_.out / "branches.dat";
    case Stage::Sample: return config_.out / ("ksamples" + v + ".dat");
    case Stage::Fit: return config_.out / ("fit" + v + m + ".txt");
    case Stage::Xsec: return config_.out / ("profile-xsec" + v + m + ".dat");
    }
    return {};
}

bool Pipeline::current(Stage s) const
{
    if (file_digest(path(s)) != config_.digest(s))
        return false;
    if (s == Stage::Xsec) {
        const auto dir = path(s).parent_path();
        const std::string suffix = path(s).filename().string().substr(std::string("profile-xsec").size());
        return file_digest(dir / ("profile-k" + suffix)) == config_.digest(s) &&
               file_digest(dir / ("profile-inverse" + suffix)) == config_.digest(s);
    }
    return true;
}

DataTable Pipeline::cached(Stage s) const
{
    const std::filesystem::path p = path(s);
    require(std::filesystem::exists(p), ErrorKind::Stage,
            std::string("missing ") + p.string() + "; run the '" + to_string(s) + "' stage first");
    require(file_digest(p) == config_.digest(s), ErrorKind::Stage,
            p.string() + " was produced by a different configuration; rerun the '" + to_string(s) + "' stage");
    return read_table(p);
}

ChannelSet Pipeline::channels() const
{
    switch (config_.system) {
    case SystemKind::Toy: {
        const ChannelSet c = config_.toy.channels();
        if (config_.thresholds.empty())
            return c;
        return ChannelSet(config_.thresholds, c.reduced_masses());
    }
    case SystemKind::Ahs: {
        const ChannelSet c = atomic_channels(config_.masses);
        if (config_.thresholds.empty())
            return c;
        return ChannelSet(config_.thresholds, c.reduced_masses());
    }
    case SystemKind::Free: break;
    }
    throw Error(ErrorKind::Stage, "the free system has no scattering channels");
}

double Pipeline::reference_energy() const
{
    if (config_.reference_energy)
        return *config_.reference_energy;
    if (config_.system == SystemKind::Ahs)
        return config_.masses.atomic_level(1, 2);
    const ChannelSet c = channels();
    return *std::max_element(c.thresholds().begin(), c.thresholds().end());
}

RadialProblem Pipeline::radial_problem() const
{
    if (config_.system == SystemKind::Toy)
        return RadialProblem(config_.toy.couplings(), channels(), config_.rho_start, config_.rho_match,
                             config_.radial);
    require(config_.system == SystemKind::Ahs, ErrorKind::Stage, "the free system has no radial problem");
    const AdiabaticSolution s = adiabatic_from_table(cached(Stage::Couplings));
    auto couplings = std::make_shared<const AdiabaticCouplings>(s, config_.basis.n_terms);
    const double start = std::max(config_.rho_start, couplings->rho_min());
    const double match = std::min(config_.rho_match, couplings->rho_max());
    return RadialProblem(couplings, channels(), start, match, config_.radial);
}

StageOutcome Pipeline::run(Stage s)
{
    try {
        if (current(s)) {
            StageOutcome o;
            o.stage = s;
            o.reused = true;
            o.files.push_back(path(s));
            o.summary = std::string(to_string(s)) + ": " + path(s).string() + " is up to date";
            return o;
        }
        switch (s) {
        case Stage::Terms: return terms();
        case Stage::Couplings: return couplings();
        case Stage::Scan: return scan();
        case Stage::Sample: return sample();
        case Stage::Fit: return fit_stage();
        case Stage::Xsec: return xsec();
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Stage)
            throw;
        throw Error(ErrorKind::Stage, std::string(to_string(s)) + " stage: " + e.what());
    }
    throw Error(ErrorKind::Stage, "unknown stage");
}

std::vector<StageOutcome> Pipeline::run_through(Stage last)
{
    std::vector<StageOutcome> out;
    for (Stage s : all_stages) {
        const bool hyperangular = s == Stage::Terms || s == Stage::Couplings;
        if (!(config_.system == SystemKind::Toy && hyperangular))
            out.push_back(run(s));
        if (s == last || (config_.system == SystemKind::Free && s == Stage::Terms))
            break;
    }
    return out;
}

StageOutcome Pipeline::terms()
{
    require(config_.system != SystemKind::Toy, ErrorKind::Stage, "the toy system has no hyperangular terms");
    const PotentialMode mode = config_.system == SystemKind::Free ? PotentialMode::Free : PotentialMode::Coulomb;
    const std::vector<double> grid = config_.rho_grid();
    std::vector<AngularStates> states(grid.size());
    parallel_for(
        grid.size(),
        [&](std::size_t i) {
            const double rho = grid[i];
            const AdiabaticOperator op =
                assemble_adiabatic_operator(config_.masses, build_mesh(config_.masses, config_.grid, rho), mode);
            states[i] = solve_angular(op, rho, config_.basis.n_terms);
            states[i].vectors.resize(0, 0);
        },
        config_.basis.threads);
    write_table(path(Stage::Terms), terms_table(states, config_.digest(Stage::Terms)));
    StageOutcome o;
    o.stage = Stage::Terms;
    o.files.push_back(path(Stage::Terms));
    std::ostringstream os;
    os << "terms: " << grid.size() << " rho points, eps(rho_max) =";
    for (Eigen::Index j = 0; j < states.back().energies.size(); ++j)
        os << ' ' << fixed(states.back().energies(j), 6);
    o.summary = os.str();
    return o;
}

StageOutcome Pipeline::couplings()
{
    require(config_.system == SystemKind::Ahs, ErrorKind::Stage,
            std::string("couplings need the Coulomb three-body system, not '") + to_string(config_.system) + "'");
    const AdiabaticSolution s = compute_adiabatic(config_.masses, config_.grid, config_.rho_grid(), config_.basis);
    write_table(path(Stage::Couplings), adiabatic_table(s, config_.digest(Stage::Couplings)));
    StageOutcome o;
    o.stage = Stage::Couplings;
    o.files.push_back(path(Stage::Couplings));
    o.summary = "couplings: " + std::to_string(s.rho.size()) + " rho points after refinement, min overlap " +
                fixed(s.min_overlap, 4);
    return o;
}

StageOutcome Pipeline::scan()
{
    const RadialProblem problem = radial_problem();
    const StabilizationSpectrum spectrum = scan_branches(problem, config_.scan);
    write_table(path(Stage::Scan), branch_table(spectrum, config_.digest(Stage::Scan)));
    const std::vector<Plateau> plateaus = find_plateaus(spectrum, config_.scan);
    StageOutcome o;
    o.stage = Stage::Scan;
    o.files.push_back(path(Stage::Scan));
    std::ostringstream os;
    os << "scan: " << spectrum.rows() << " box sizes, " << spectrum.columns() << " branches, " << plateaus.size()
       << " plateau(s)";
    for (const auto& p : plateaus)
        os << ' ' << fixed(p.energy, 6);
    o.summary = os.str();
    return o;
}

StageOutcome Pipeline::sample()
{
    const DataTable branches = cached(Stage::Scan);
    StabilizationSpectrum spectrum;
    spectrum.threshold = std::stod(branches.at("threshold"));
    const int first = std::stoi(branches.at("first_level"));
    const int columns = static_cast<int>(branches.columns.size()) - 1;
    for (int c = 0; c < columns; ++c)
        spectrum.branch.push_back(first + c);
    spectrum.Lambda.resize(static_cast<Eigen::Index>(branches.rows.size()), columns);
    for (std::size_t r = 0; r < branches.rows.size(); ++r) {
        require(branches.rows[r].size() == static_cast<std::size_t>(columns + 1), ErrorKind::Io,
                "ragged branch file");
        spectrum.alpha.push_back(branches.rows[r][0]);
        for (int c = 0; c < columns; ++c)
            spectrum.Lambda(static_cast<Eigen::Index>(r), c) = branches.rows[r][static_cast<std::size_t>(c + 1)];
    }
    const ResonanceWindow window = detect_resonance(spectrum, config_.scan);
    require(window.found, ErrorKind::Stage,
            "no resonance " + std::to_string(config_.scan.resonance) + " detected (" +
                std::to_string(window.plateaus) + " plateau(s) in the search range)");
    const RadialProblem problem = radial_problem();
    const std::vector<KSample> samples = sample_k(problem, window);
    write_table(path(Stage::Sample), sample_table(samples, window, config_.digest(Stage::Sample)));
    StageOutcome o;
    o.stage = Stage::Sample;
    o.files.push_back(path(Stage::Sample));
    o.summary = "sample: " + std::to_string(samples.size()) + " K samples around E = " +
                format_number(window.E_center) + " (width estimate " + sci(window.width_estimate, 2) + ")";
    return o;
}

StageOutcome Pipeline::fit_stage()
{
    const std::vector<KSample> samples = samples_from_table(cached(Stage::Sample));
    const ModelComparison cmp = compare_models(samples);
    const FitResult& r = config_.model == FitModel::General ? cmp.general : cmp.diagonal;
    const double ref = reference_energy();
    const std::string row = summary_row(r.report, ref);
    write_fit_report(path(Stage::Fit), r, &cmp,
                     {{"resonance", std::to_string(config_.scan.resonance)},
                      {"reference_energy", format_number(ref)},
                      {"summary", row}},
                     config_.digest(Stage::Fit));
    StageOutcome o;
    o.stage = Stage::Fit;
    o.files.push_back(path(Stage::Fit));
    o.summary = "fit (" + std::string(to_string(r.model)) + ", v=" + std::to_string(config_.scan.resonance) +
                "): " + row + "  residual " + sci(r.residual, 2) + "  branching shift (diagonal - general) " +
                sci(cmp.branching_shift, 3);
    return o;
}

StageOutcome Pipeline::xsec()
{
    const std::filesystem::path fit_path = path(Stage::Fit);
    require(file_digest(fit_path) == config_.digest(Stage::Fit), ErrorKind::Stage,
            "missing or stale " + fit_path.string() + "; run the 'fit' stage first");
    const BWPoleParams params = read_fit_params(fit_path);
    const std::vector<KSample> samples = samples_from_table(cached(Stage::Sample));
    const Profiles p =
        emit_profiles(params, samples, channels(), config_.xsec_points, config_.xsec_span, config_.digest(Stage::Xsec));
    const auto dir = path(Stage::Xsec).parent_path();
    const std::string suffix = path(Stage::Xsec).filename().string().substr(std::string("profile-xsec").size());
    StageOutcome o;
    o.stage = Stage::Xsec;
    o.files = {dir / ("profile-k" + suffix), dir / ("profile-inverse" + suffix), path(Stage::Xsec)};
    write_table(o.files[0], p.k);
    write_table(o.files[1], p.inverse);
    // written last: its digest marks the stage complete
    write_table(o.files[2], p.cross_sections);
    o.summary = "xsec: " + std::to_string(p.cross_sections.rows.size()) + " cross-section points, " +
                std::to_string(p.k.rows.size()) + " K-profile rows";
    return o;
}

} // namespace hsres
