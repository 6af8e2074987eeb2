#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kickhj/potentials.hpp"

namespace kickhj {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& field, const std::string& msg)
      : std::runtime_error("config field '" + field + "': " + msg), field(field) {}
  std::string field;
};

struct Horizons {
  int pad = 60;             // extra steps beyond every window used downstream
  int orbit = 2000;         // forward length of the minimising orbit
  int lyapunov_steps = 2000;
  int green_depth = 50;
  int green_sites = 20;
  int manifold_depth = 30;
  int barrier_depth = 15;
  int barrier_orbits = 20;
};

// Multipliers of h are marked _h.
struct Tolerances {
  double solve_tol = 1e-10;
  int initial_depth = 8;
  int max_depth = 256;
  double converged = 1e-6;
  double fixed_point = 1e-6;
  double semiconcavity_h = 20.0;
  double gap_tol = 1e-9;
  double screen_slope = 100.0;
  double euler_lagrange = 1e-8;
  double chain_tol = 1e-8;
  double transversality_slack = 0.1;
  double se_factor = 3.0;
  double manifold_h = 10.0;
  double negative_control_h = 100.0;
  double barrier_slack_h = 10.0;
  double r_max = 0.2;
};

struct ManifoldSettings {
  double rho = 0.5;
  int nodes = 129;
  double radius = 0.15;  // comparison radius around x0
};

struct NondegSettings {
  int samples = 500;
  double cap_a = 10.0;
  double cap_b = 10.0;
  double valid_fraction = 0.95;
  double cap_tol = 0.1;
  double tau_max = 0.1;
  double envelope_step = 0.01;
  int envelope_half_width = 10;
  int duality_pairs = 200;
  bool control = true;
};

struct ExperimentConfig {
  int dimension = 1;
  json basis_json, density_json;
  PotentialBasis basis;
  DensitySpec density;
  Vec b;
  int N = 256;
  int lift_radius = 2;
  int window_cells = 0;
  Horizons horizons;
  Tolerances tol;
  ManifoldSettings manifold;
  NondegSettings nondeg;
  std::vector<std::string> stages;
  std::uint64_t seed = 1;
  int threads = 0;
};

extern const std::vector<std::string> kStageOrder;
extern const char* const kVersion;

ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::string& path);
// every field with defaults filled in; the hash and the manifest use this form
json effective_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::string& path);

// requested stages plus everything they depend on, in pipeline order
std::vector<std::string> stage_closure(const std::vector<std::string>& requested);

struct StageOutcome {
  std::string name;
  std::string status;  // ok | failed | skipped
  std::string error;
  json invariants = json::array();
  json metrics = json::object();
  std::vector<std::string> files;
  bool passed() const;
};

struct RunResult {
  std::string dir;
  std::vector<StageOutcome> stages;
  bool all_pass = true;
};

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_root, std::ostream* log = nullptr);

// prints the summary; returns 0 iff every invariant passed and every artifact is intact
int report(const std::string& dir, std::ostream& out);

}  // namespace kickhj
