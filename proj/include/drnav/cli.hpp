#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "drnav/config.hpp"
#include "drnav/landmarks.hpp"

namespace drnav {

/// Each command returns 0 on success. Module errors are reported on `err`
/// and give exit code 1.
int cmd_simulate(const std::filesystem::path& scenario, const GlobalConfig& cfg, const std::filesystem::path& out_dir,
                 std::ostream& err);
/// `scenario` names a builtin scenario instead of a file.
int cmd_simulate_builtin(const std::string& scenario, const GlobalConfig& cfg, const std::filesystem::path& out_dir,
                         std::ostream& err);
/// An empty `db` path disables landmark calibration.
int cmd_run(const std::filesystem::path& trace, const std::filesystem::path& db, const GlobalConfig& cfg,
            const std::filesystem::path& out, std::ostream& err);
int cmd_eval(const std::filesystem::path& poses, const std::filesystem::path& truth, const GlobalConfig& cfg,
             const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);
int cmd_detect(const std::filesystem::path& trace, const GlobalConfig& cfg, const std::filesystem::path& out,
               std::ostream& err);

/// kind,t_start,t_end,t_anchor,heading_delta_deg,f0..f15
void write_patterns(std::ostream& out, std::span<const DetectedPattern> patterns);

/// Full command line: simulate, run, eval, detect, scenario, config.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace drnav
