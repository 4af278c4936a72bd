#pragma once

// Line-oriented data files. Every file opens with '#'-prefixed header lines
//   # hsres <kind>
//   # digest <16 hex digits>
//   # <key> <value>          (any number)
//   # columns <name> ...
// followed by whitespace-separated rows of numbers written with 17
// significant digits, so a read-write cycle is exact.

#include "hsres/ahs.hpp"
#include "hsres/fit.hpp"
#include "hsres/stabilization.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hsres {

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hex_digest(std::uint64_t value);

struct DataTable {
    std::string kind;
    std::string digest;
    std::map<std::string, std::string> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    /// Value of a header key; Io error when missing.
    const std::string& at(const std::string& key) const;
};

std::string format_number(double value);

void write_table(const std::filesystem::path& path, const DataTable& table);
DataTable read_table(const std::filesystem::path& path);
/// Digest recorded in a data file, or empty when the file is absent or has none.
std::string file_digest(const std::filesystem::path& path);

DataTable adiabatic_table(const AdiabaticSolution& solution, const std::string& digest);
AdiabaticSolution adiabatic_from_table(const DataTable& table);

/// Terms only: rho and the N lowest eigenvalues.
DataTable terms_table(const std::vector<AngularStates>& states, const std::string& digest);

DataTable branch_table(const StabilizationSpectrum& spectrum, const std::string& digest);

DataTable sample_table(const std::vector<KSample>& samples, const ResonanceWindow& window,
                       const std::string& digest);
std::vector<KSample> samples_from_table(const DataTable& table);

/// Fit report: "key = value" lines after the header, including every pole
/// parameter at full precision so later stages can rebuild the model.
void write_fit_report(const std::filesystem::path& path, const FitResult& result,
                      const ModelComparison* comparison, const std::vector<std::pair<std::string, std::string>>& extra,
                      const std::string& digest);
BWPoleParams read_fit_params(const std::filesystem::path& path);

} // namespace hsres
