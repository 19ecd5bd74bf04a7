#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace interlace::cli {

// Exit statuses of `run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitNumerical = 3;

// Invalid configuration value; `field` is the config key at fault.
struct ConfigError : std::runtime_error {
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field(std::move(field)) {}
  std::string field;
};

// A check or cross-check that did not hold; `check_id` names it.
struct NumericalFailure : std::runtime_error {
  NumericalFailure(std::string check_id, const std::string& what)
      : std::runtime_error(check_id + ": " + what), check_id(std::move(check_id)) {}
  std::string check_id;
};

struct ExperimentConfig {
  int d = 5;
  double u = 1.0;
  std::int64_t window = 0;     // radius of the observation window; 0 picks set radius + 1
  std::string set = "origin";  // origin | ball:R | points:x,y,..;x,y,.. | random:N:spread
  std::size_t replicas = 100;
  std::uint64_t seed = 20240601;
  std::size_t jobs = 0;  // 0: all cores
  std::string out = "interlace_out";

  // green
  std::int64_t max_radius = 32;
  // capacity
  std::size_t walkers = 40000;
  double rel_bias = 1e-2;
  // sample, graph
  double eps_trunc = 1e-3;
  std::string method = "auto";
  bool write_samples = true;
  std::int64_t inner_radius = 0;  // graph diameter probe; 0 picks window / 2
  // layers
  std::vector<std::int64_t> radii{8, 16};
  std::int64_t r = 1;
  int s_max = 2;
  std::size_t mc_walkers = 20000;
  // checks
  std::string scale = "quick";
  std::vector<std::string> only;
  std::vector<std::string> overrides;  // check.field=value
  // sweep
  std::string over = "sample";
  std::vector<std::string> grid;  // key=v1,v2,...
};

// Parses `set` into sites; throws ConfigError("set", ...).
std::vector<std::vector<std::int64_t>> parse_set_points(const ExperimentConfig& cfg);

// Applies "key=value" to a config, as the sweep grid does.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Runs the command line; diagnostics go to `err`, progress to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace interlace::cli
