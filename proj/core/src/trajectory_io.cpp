#include "feedrec/trajectory_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "feedrec/errors.hpp"

namespace feedrec {
namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::uint32_t parse_id(std::string_view text) {
  std::uint32_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("bad integer field '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("failed to format number");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("bad numeric field '" + std::string(text) + "'");
  }
  return v;
}

std::string format_trajectory(const Trajectory& t) {
  std::string line = std::to_string(t.user);
  line += '\t';
  for (std::size_t k = 0; k < t.interactions.size(); ++k) {
    const auto& x = t.interactions[k];
    if (k > 0) line += ',';
    line += std::to_string(x.item);
    line += ':';
    line += to_string(x.feedback);
    line += ':';
    line += format_double(x.dwell);
    line += ':';
    line += format_double(t.propensities.at(k));
  }
  line += '\t';
  line += format_double(t.return_gap);
  return line;
}

Trajectory parse_trajectory(std::string_view line) {
  const auto fields = split(line, '\t');
  if (fields.size() != 3) throw std::invalid_argument("trajectory line needs 3 tab-separated fields");
  Trajectory t;
  t.user = parse_id(fields[0]);
  for (auto record : split(fields[1], ',')) {
    const auto parts = split(record, ':');
    if (parts.size() != 4) throw std::invalid_argument("interaction needs item:feedback:dwell:propensity");
    t.interactions.push_back({parse_id(parts[0]), parse_feedback(parts[1]), parse_double(parts[2])});
    t.propensities.push_back(parse_double(parts[3]));
  }
  t.return_gap = parse_double(fields[2]);
  validate(t);
  return t;
}

void write_trajectories(std::ostream& out, std::span<const Trajectory> trajectories) {
  out << kTrajectoryHeader << '\n';
  for (const auto& t : trajectories) out << format_trajectory(t) << '\n';
}

std::vector<Trajectory> read_trajectories(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader) {
    throw std::invalid_argument("missing trajectory header");
  }
  std::vector<Trajectory> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_trajectory(line));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trajectories(out, trajectories);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot read " + path.string());
  return read_trajectories(in);
}

}  // namespace feedrec
