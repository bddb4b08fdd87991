#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nslfa/types.hpp"

namespace nslfa {

// Exit-code contract shared by every subcommand:
// 0 success, 1 input/runtime error, 2 domain verdict.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVerdict = 2;

int cmd_check_q(const std::string& design_path, std::ostream& out,
                std::ostream& err);

struct FitArgs {
  std::string data_path;
  std::string design_path;
  std::string method = "joint-map";  // joint-map | iterative
  std::string x_prior = "normal";    // normal | uniform
  std::string algorithm = "scg";     // scg | gd
  Index k = 0;                       // 0: take K from the design matrix
  std::uint64_t seed = 0;
  int links_grid = 0;  // >0: emit per-item link curves on that many points
  std::string out_dir = ".";
};
int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);

struct SimulateArgs {
  std::string scenario;
  std::vector<Index> j_list;  // empty: scenario defaults
  int reps = 20;
  bool full = false;  // 100 replications
  std::vector<std::string> methods = {"nslfa"};
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool dump_replications = false;  // raw per-replication metrics as JSONL
};
int cmd_simulate(const SimulateArgs& args, std::ostream& out,
                 std::ostream& err);

struct OilArgs {
  std::string data_path;
  int subsample = 100;
  double threshold = 0.3;
  std::uint64_t seed = 0;
  bool standardize = false;
  std::string out_dir = ".";
};
int cmd_oil(const OilArgs& args, std::ostream& out, std::ostream& err);

}  // namespace nslfa
