#include "hsres/io.hpp"

#include "hsres/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hsres {

namespace {

std::string flat_name(const char* prefix, int i, int j)
{
    return std::string(prefix) + std::to_string(i + 1) + std::to_string(j + 1);
}

int count_from(const DataTable& t, const std::string& key)
{
    const std::string& v = t.at(key);
    try {
        const int n = std::stoi(v);
        require(n >= 1, ErrorKind::Io, "bad '" + key + "' in " + t.kind + " file");
        return n;
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::Io, "bad '" + key + "' in " + t.kind + " file");
    }
}

void expect_kind(const DataTable& t, const std::string& kind)
{
    require(t.kind == kind, ErrorKind::Io, "expected a " + kind + " file, found '" + t.kind + "'");
}

void expect_width(const DataTable& t, std::size_t width)
{
    for (const auto& r : t.rows)
        require(r.size() == width, ErrorKind::Io,
                t.kind + " file row has " + std::to_string(r.size()) + " values, expected " +
                    std::to_string(width));
}

} // namespace

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed)
{
    std::uint64_t h = seed;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex_digest(std::uint64_t value)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

const std::string& DataTable::at(const std::string& key) const
{
    const auto it = meta.find(key);
    require(it != meta.end(), ErrorKind::Io, kind + " file has no '" + key + "' entry");
    return it->second;
}

std::string format_number(double value)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void write_table(const std::filesystem::path& path, const DataTable& table)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ostringstream os;
    os << "# hsres " << table.kind << '\n';
    os << "# digest " << table.digest << '\n';
    for (const auto& [k, v] : table.meta)
        os << "# " << k << ' ' << v << '\n';
    os << "# columns";
    for (const auto& c : table.columns)
        os << ' ' << c;
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? " " : "") << format_number(row[i]);
        os << '\n';
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out << os.str();
    require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

DataTable read_table(const std::filesystem::path& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
    DataTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        if (line[0] == '#') {
            std::istringstream is(line.substr(1));
            std::string key;
            is >> key;
            std::string rest;
            std::getline(is >> std::ws, rest);
            if (key == "hsres")
                t.kind = rest;
            else if (key == "digest")
                t.digest = rest;
            else if (key == "columns") {
                std::istringstream cs(rest);
                for (std::string c; cs >> c;)
                    t.columns.push_back(c);
            } else if (!key.empty())
                t.meta[key] = rest;
            continue;
        }
        std::vector<double> row;
        std::istringstream is(line);
        for (std::string tok; is >> tok;) {
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            require(end && *end == '\0', ErrorKind::Io,
                    path.string() + ":" + std::to_string(lineno) + ": not a number '" + tok + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    require(!t.kind.empty(), ErrorKind::Io, path.string() + " has no hsres header");
    return t;
}

std::string file_digest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        return {};
    std::string line;
    while (std::getline(in, line) && !line.empty() && line[0] == '#')
        if (line.rfind("# digest ", 0) == 0)
            return line.substr(9);
    return {};
}

DataTable adiabatic_table(const AdiabaticSolution& s, const std::string& digest)
{
    const int n = s.n_terms();
    DataTable t;
    t.kind = "couplings";
    t.digest = digest;
    t.meta["terms"] = std::to_string(n);
    t.meta["min_overlap"] = format_number(s.min_overlap);
    t.columns.push_back("rho");
    for (int j = 0; j < n; ++j)
        t.columns.push_back("eps" + std::to_string(j + 1));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            t.columns.push_back(flat_name("H", i, j));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            t.columns.push_back(flat_name("Q", i, j));
    for (std::size_t r = 0; r < s.rho.size(); ++r) {
        std::vector<double> row{s.rho[r]};
        for (int j = 0; j < n; ++j)
            row.push_back(s.terms(static_cast<Eigen::Index>(r), j));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                row.push_back(s.H[r](i, j));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                row.push_back(s.Q[r](i, j));
        t.rows.push_back(std::move(row));
    }
    return t;
}

AdiabaticSolution adiabatic_from_table(const DataTable& t)
{
    expect_kind(t, "couplings");
    const int n = count_from(t, "terms");
    expect_width(t, static_cast<std::size_t>(1 + n + 2 * n * n));
    require(!t.rows.empty(), ErrorKind::Io, "couplings file has no rows");
    AdiabaticSolution s;
    s.min_overlap = std::stod(t.at("min_overlap"));
    s.terms.resize(static_cast<Eigen::Index>(t.rows.size()), n);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        s.rho.push_back(row[0]);
        for (int j = 0; j < n; ++j)
            s.terms(static_cast<Eigen::Index>(r), j) = row[static_cast<std::size_t>(1 + j)];
        RealMatrix H(n, n), Q(n, n);
        std::size_t k = static_cast<std::size_t>(1 + n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                H(i, j) = row[k++];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                Q(i, j) = row[k++];
        s.H.push_back(H);
        s.Q.push_back(Q);
    }
    return s;
}

DataTable terms_table(const std::vector<AngularStates>& states, const std::string& digest)
{
    require(!states.empty(), ErrorKind::Domain, "no terms to write");
    const Eigen::Index n = states.front().energies.size();
    DataTable t;
    t.kind = "terms";
    t.digest = digest;
    t.meta["terms"] = std::to_string(n);
    t.columns.push_back("rho");
    for (Eigen::Index j = 0; j < n; ++j)
        t.columns.push_back("eps" + std::to_string(j + 1));
    for (const auto& s : states) {
        std::vector<double> row{s.rho};
        for (Eigen::Index j = 0; j < n; ++j)
            row.push_back(s.energies(j));
        t.rows.push_back(std::move(row));
    }
    return t;
}

DataTable branch_table(const StabilizationSpectrum& s, const std::string& digest)
{
    DataTable t;
    t.kind = "branches";
    t.digest = digest;
    t.meta["first_level"] = s.branch.empty() ? "0" : std::to_string(s.branch.front());
    t.meta["threshold"] = format_number(s.threshold);
    t.columns.push_back("alpha");
    for (int b : s.branch)
        t.columns.push_back("L" + std::to_string(b));
    for (int r = 0; r < s.rows(); ++r) {
        std::vector<double> row{s.alpha[static_cast<std::size_t>(r)]};
        for (int c = 0; c < s.columns(); ++c)
            row.push_back(s.Lambda(r, c));
        t.rows.push_back(std::move(row));
    }
    return t;
}

DataTable sample_table(const std::vector<KSample>& samples, const ResonanceWindow& window,
                       const std::string& digest)
{
    require(!samples.empty(), ErrorKind::Domain, "no K samples to write");
    const int n = static_cast<int>(samples.front().K.entries.rows());
    DataTable t;
    t.kind = "ksamples";
    t.digest = digest;
    t.meta["channels"] = std::to_string(n);
    t.meta["E_center"] = format_number(window.E_center);
    t.meta["width_estimate"] = format_number(window.width_estimate);
    t.columns = {"E", "alpha", "asymmetry"};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            t.columns.push_back(flat_name("K", i, j));
    // box size of the first window sample at each energy
    std::map<double, double> alpha_of;
    for (const auto& w : window.samples)
        alpha_of.emplace(w.energy, w.alpha);
    for (const auto& s : samples) {
        const auto it = alpha_of.find(s.K.energy);
        std::vector<double> row{s.K.energy, it == alpha_of.end() ? std::nan("") : it->second,
                                s.asymmetry_defect};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                row.push_back(s.K.entries(i, j));
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::vector<KSample> samples_from_table(const DataTable& t)
{
    expect_kind(t, "ksamples");
    const int n = count_from(t, "channels");
    expect_width(t, static_cast<std::size_t>(3 + n * n));
    std::vector<KSample> out;
    for (const auto& row : t.rows) {
        KSample s;
        s.K.energy = row[0];
        s.asymmetry_defect = row[2];
        s.K.entries.resize(n, n);
        std::size_t k = 3;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                s.K.entries(i, j) = row[k++];
        out.push_back(std::move(s));
    }
    return out;
}

void write_fit_report(const std::filesystem::path& path, const FitResult& r, const ModelComparison* cmp,
                      const std::vector<std::pair<std::string, std::string>>& extra, const std::string& digest)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ostringstream os;
    auto kv = [&](const std::string& k, double v) { os << k << " = " << format_number(v) << '\n'; };
    os << "# hsres fit\n# digest " << digest << '\n';
    os << "model = " << to_string(r.model) << '\n';
    os << "weighting = " << r.weighting << '\n';
    os << "converged = " << (r.converged ? "true" : "false") << '\n';
    os << "iterations = " << r.iterations << '\n';
    kv("residual", r.residual);
    kv("rank_defect", r.rank_defect);
    kv("E1", r.params.E1);
    kv("a1", r.params.a1);
    kv("a2", r.params.a2);
    kv("a", r.params.a);
    kv("b1", r.params.b1);
    kv("b2", r.params.b2);
    kv("b", r.params.b);
    kv("E0", r.report.E0);
    kv("Gamma", r.report.Gamma);
    for (std::size_t i = 0; i < r.report.partial_widths.size(); ++i) {
        kv("Gamma" + std::to_string(i + 1), r.report.partial_widths[i]);
        kv("branching" + std::to_string(i + 1), r.report.branching[i]);
    }
    for (std::size_t i = 0; i < r.report.eigenphases.size(); ++i)
        kv("Delta" + std::to_string(i + 1), r.report.eigenphases[i]);
    kv("mixing_angle", r.report.mixing_angle);
    os << "degenerate_background = " << (r.report.degenerate_background ? "true" : "false") << '\n';
    os << "ill_conditioned_background = " << (r.report.ill_conditioned_background ? "true" : "false") << '\n';
    if (cmp) {
        kv("diagonal.residual", cmp->diagonal.residual);
        kv("diagonal.E0", cmp->diagonal.report.E0);
        kv("diagonal.Gamma", cmp->diagonal.report.Gamma);
        if (cmp->diagonal.report.branching.size() == 2)
            kv("diagonal.branching2", cmp->diagonal.report.branching[1]);
        kv("residual_ratio", cmp->residual_ratio);
        kv("branching_shift", cmp->branching_shift);
    }
    for (const auto& [k, v] : extra)
        os << k << " = " << v << '\n';
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out << os.str();
}

BWPoleParams read_fit_params(const std::filesystem::path& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
    std::map<std::string, double> v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos)
            continue;
        char* end = nullptr;
        const std::string value = line.substr(eq + 3);
        const double x = std::strtod(value.c_str(), &end);
        if (end && *end == '\0')
            v[line.substr(0, eq)] = x;
    }
    auto get = [&](const char* k) {
        const auto it = v.find(k);
        require(it != v.end(), ErrorKind::Io, path.string() + " has no '" + k + "' entry");
        return it->second;
    };
    BWPoleParams p;
    p.E1 = get("E1");
    p.a1 = get("a1");
    p.a2 = get("a2");
    p.a = get("a");
    p.b1 = get("b1");
    p.b2 = get("b2");
    p.b = get("b");
    return p;
}

} // namespace hsres
