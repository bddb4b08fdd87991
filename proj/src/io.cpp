#include "nslfa/io.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace nslfa {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::vector<std::vector<std::string>> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw ParseError("'" + path + "' has no data rows");
  const std::size_t w = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != w) {
      throw ParseError("'" + path + "' row " + std::to_string(r + 1) +
                       " has " + std::to_string(rows[r].size()) +
                       " cells, expected " + std::to_string(w));
    }
  }
  return rows;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  auto rows = read_rows(path);
  const std::size_t width = rows.front().size();

  // header row: any non-numeric cell in the first row
  std::size_t first_data = 0;
  {
    double tmp;
    bool numeric = true;
    for (const auto& c : rows[0]) numeric = numeric && parse_double(c, tmp);
    if (!numeric) first_data = 1;
  }
  if (first_data >= rows.size()) {
    throw ParseError("'" + path + "' has a header but no data");
  }

  // trailing label column: last cell of the first data row non-numeric
  double tmp;
  const bool labeled = !parse_double(rows[first_data].back(), tmp);
  const std::size_t ncols = labeled ? width - 1 : width;
  if (ncols == 0) throw ParseError("'" + path + "' has no numeric columns");

  CsvTable out;
  if (first_data == 1) {
    out.header.assign(rows[0].begin(), rows[0].begin() + ncols);
  }
  const std::size_t nrows = rows.size() - first_data;
  out.values.resize(static_cast<Index>(nrows), static_cast<Index>(ncols));
  for (std::size_t r = 0; r < nrows; ++r) {
    const auto& cells = rows[r + first_data];
    for (std::size_t c = 0; c < ncols; ++c) {
      double v;
      if (!parse_double(cells[c], v)) {
        throw ParseError("'" + path + "' cell (" + std::to_string(r + 1) +
                         "," + std::to_string(c + 1) + ") is not numeric");
      }
      out.values(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
    if (labeled) {
      const std::string& name = cells.back();
      auto it =
          std::find(out.label_names.begin(), out.label_names.end(), name);
      if (it == out.label_names.end()) {
        out.label_names.push_back(name);
        it = std::prev(out.label_names.end());
      }
      out.labels.push_back(
          static_cast<int>(std::distance(out.label_names.begin(), it)));
    }
  }
  return out;
}

IntMatrix read_design_csv(const std::string& path) {
  auto rows = read_rows(path);
  std::size_t first_data = 0;
  {
    double tmp;
    bool numeric = true;
    for (const auto& c : rows[0]) numeric = numeric && parse_double(c, tmp);
    if (!numeric) first_data = 1;
  }
  const std::size_t nrows = rows.size() - first_data;
  const std::size_t ncols = rows.front().size();
  if (nrows == 0) throw ParseError("'" + path + "' has no data rows");
  IntMatrix q(static_cast<Index>(nrows), static_cast<Index>(ncols));
  for (std::size_t r = 0; r < nrows; ++r) {
    for (std::size_t c = 0; c < ncols; ++c) {
      double v;
      if (!parse_double(rows[r + first_data][c], v) ||
          v != std::floor(v)) {
        throw ParseError("design cell (" + std::to_string(r + 1) + "," +
                         std::to_string(c + 1) + ") is not an integer");
      }
      q(static_cast<Index>(r), static_cast<Index>(c)) = static_cast<int>(v);
    }
  }
  return q;
}

void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& header,
                      const std::string& manifest_ref) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out.precision(17);
  if (!manifest_ref.empty()) out << "# manifest: " << manifest_ref << "\n";
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      out << (c ? "," : "") << header[c];
    }
    out << "\n";
  }
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      out << (c ? "," : "") << m(r, c);
    }
    out << "\n";
  }
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for digest");
  std::uint64_t hash = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x00000100000001b3ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(hash));
  return hex;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

nlohmann::json fit_to_json(const FitResult& fit,
                           const std::string& manifest_ref) {
  nlohmann::json j;
  j["schema"] = kFitSchema;
  if (!manifest_ref.empty()) j["manifest"] = manifest_ref;
  j["method"] = fit.method;
  j["seed"] = fit.seed;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["theta"] = {{"w", fit.theta_hat.w},
                {"tau", fit.theta_hat.tau},
                {"sigma2", fit.theta_hat.sigma2}};
  j["x_hat"] = matrix_to_json(fit.x_hat.x);
  j["a_hat"] = matrix_to_json(fit.a_hat.a);
  j["f_hat"] = matrix_to_json(fit.f_hat);
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [it, v] : fit.objective_trace) {
    trace.push_back({it, v});
  }
  j["trace"] = std::move(trace);
  return j;
}

std::string write_manifest(const RunManifest& manifest,
                           const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / "manifest.json").string();

  nlohmann::json j;
  j["schema"] = kManifestSchema;
  j["command"] = manifest.command;
  j["config"] = manifest.config;
  j["seed"] = manifest.seed;
  j["created"] = iso_now();
  j["version"] = kLibraryVersion;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& p : manifest.input_paths) {
    inputs.push_back({{"path", p}, {"fnv1a64", file_digest(p)}});
  }
  j["inputs"] = std::move(inputs);
  j["outputs"] = manifest.output_paths;

  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  return path;
}

}  // namespace nslfa
