#pragma once

#include <filesystem>
#include <string>

#include "speccf/analysis.hpp"
#include "speccf/placebo.hpp"

namespace speccf {

// All writers are whole-file atomic (temp file + rename) and deterministic:
// the same inputs produce byte-identical files.

void write_counterfactual_csv(const std::filesystem::path& path, const RunResult& run);
void write_summary_json(const std::filesystem::path& path, const RunResult& run,
                        const RunOptions& opts);
void write_hypothesis_json(const std::filesystem::path& path, const RunResult& run,
                           const RunOptions& opts);
void write_surface_csv(const std::filesystem::path& path, const RunResult& run);
void write_spectrum_csv(const std::filesystem::path& path, const SpectralPrior& prior);
void write_block_spectrum_csv(const std::filesystem::path& path,
                              const BlockSpectralPrior& prior);
void write_placebo_csv(const std::filesystem::path& path, const PlaceboReport& report);
void write_placebo_json(const std::filesystem::path& path, const PlaceboReport& report);

// Machine-readable error payload used by the command-line front end.
std::string error_json(const std::string& code, const std::string& message);

}  // namespace speccf
