#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nslfa/model.hpp"

namespace nslfa {

inline constexpr const char* kLibraryVersion = "1.0.0";
inline constexpr const char* kFitSchema = "nslfa-fit/1";
inline constexpr const char* kManifestSchema = "nslfa-manifest/1";

// Parsed CSV: numeric block, optional header row, optional trailing
// string column interpreted as class labels.
struct CsvTable {
  Matrix values;
  std::vector<std::string> header;
  std::vector<int> labels;
  std::vector<std::string> label_names;  // label id -> original string

  bool has_labels() const { return !labels.empty(); }
};

CsvTable read_csv(const std::string& path);
IntMatrix read_design_csv(const std::string& path);

void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& header,
                      const std::string& manifest_ref);

// 64-bit FNV-1a of a file's bytes, as a hex string.
std::string file_digest(const std::string& path);

nlohmann::json fit_to_json(const FitResult& fit,
                           const std::string& manifest_ref);

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<std::string> input_paths;
  std::vector<std::string> output_paths;
};

// Writes <out_dir>/manifest.json (command, config echo, seed, timestamps,
// version, input digests, output paths) and returns its path.
std::string write_manifest(const RunManifest& manifest,
                           const std::string& out_dir);

}  // namespace nslfa
