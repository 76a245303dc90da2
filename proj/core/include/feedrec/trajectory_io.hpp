#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedrec/domain.hpp"

namespace feedrec {

// Line-delimited trajectory files.
//
//   #feedrec-trajectories v1
//   <user>\t<item>:<feedback>:<dwell>:<propensity>[,...]\t<return_gap>
//
// Feedback tags are click|purchase|skip|leave, dwell is in seconds and the
// return gap in days. Reals are written in shortest round-trip form, so a
// read after a write reproduces every value exactly.
inline constexpr std::string_view kTrajectoryHeader = "#feedrec-trajectories v1";

std::string format_double(double v);
double parse_double(std::string_view text);

std::string format_trajectory(const Trajectory& t);
Trajectory parse_trajectory(std::string_view line);

void write_trajectories(std::ostream& out, std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_trajectories(std::istream& in);

void save_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories);
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);

}  // namespace feedrec
