#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "jointmodel/gibbs.h"

namespace jointmodel
{

std::vector<std::string> split(std::string_view line, char delim);
std::string trim(std::string_view s);

// Full-precision decimal (17 significant digits); round-trips exactly.
std::string format_double(double v);

// Throws IngestionError naming `source` and `line` on malformed input.
double parse_number(std::string_view text, const std::string& source, std::size_t line);

// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

struct LoadOptions
{
    bool skip_bad_rows = false;
};

// Longitudinal file: header with id, time, y. Outcome file: header with id,
// d and optional covariate columns. Individuals come back sorted by id with
// ascending times; an intercept is prepended to W unless the first
// covariate column is identically 1. `warnings` collects skipped rows.
std::vector<Individual> load_dataset(
    const std::filesystem::path& longitudinal,
    const std::filesystem::path& outcomes,
    const LoadOptions& options = {},
    std::vector<std::string>* warnings = nullptr);

void write_dataset(
    std::span<const Individual> data,
    const std::filesystem::path& longitudinal,
    const std::filesystem::path& outcomes);

// Flat key=value configuration; '#' starts a comment. Unspecified keys
// keep their defaults. Throws ConfigError naming the offending key.
FitConfig parse_config_text(std::string_view text);
FitConfig parse_config(const std::filesystem::path& path);

// Companion paths used by persist_chain: <stem>.x.csv and <stem>.meta.json.
std::filesystem::path chain_x_path(const std::filesystem::path& chain_path);
std::filesystem::path chain_meta_path(const std::filesystem::path& chain_path);

// One row per retained draw, one column per scalar parameter; the random
// effects go to the .x.csv companion and the config echo plus acceptance
// rates to the .meta.json companion.
void persist_chain(const ChainStore& store, const std::filesystem::path& path);

// Throws FormatError with the line number on truncated or mismatched rows.
ChainStore load_chain(const std::filesystem::path& path);

}  // namespace jointmodel
