#pragma once

// Episode CSV and summary JSON emission.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lie_mpc/common.hpp"
#include "lie_mpc/sim.hpp"

namespace lie_mpc {

inline const char* kEpisodeCsvHeader = "t,x,y,z,phi,theta,psi,u,v,w,p,q,r,u1,u2,pos_err,solve_ms";

// One row per recorded sample; solve_ms is empty on the final sample (no solve).
inline void write_episode_csv(std::ostream& out, const EpisodeResult& e)
{
  out << kEpisodeCsvHeader << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < e.time.size(); ++i) {
    out << e.time[i];
    for (int j = 0; j < 6; ++j) out << ',' << e.eta[i](j);
    for (int j = 0; j < 6; ++j) out << ',' << e.nu[i](j);
    out << ',' << e.u[i](0) << ',' << e.u[i](1) << ',' << e.position_error[i] << ',';
    if (i < e.solve_ms.size()) out << e.solve_ms[i];
    out << '\n';
  }
}

inline void write_episode_csv(const std::string& path, const EpisodeResult& e)
{
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  write_episode_csv(out, e);
}

struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // missing cells are NaN

  int column(const std::string& name) const
  {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw std::out_of_range("no CSV column '" + name + "'");
  }
};

inline CsvTable read_csv(std::istream& in)
{
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) {
    return t;
  }
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& c : split(line)) {
      row.push_back(c.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(c));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CsvTable read_csv(const std::string& path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read '" + path + "'");
  }
  return read_csv(in);
}

inline nlohmann::json stats_to_json(const BatchStats& s)
{
  return {{"mean_final_error_m", s.mean_final_error},
          {"max_final_error_m", s.max_final_error},
          {"stderr_final_error_m", s.stderr_final_error},
          {"mean_solve_ms", s.mean_solve_ms},
          {"std_solve_ms", s.std_solve_ms},
          {"max_solve_ms", s.max_solve_ms},
          {"aborted", s.aborted},
          {"solver_failures", s.solver_failures}};
}

inline nlohmann::json episode_summary(const EpisodeResult& e, const std::string& csv_file)
{
  return {{"csv", csv_file},
          {"initial_offset_m", {e.initial.offset(0), e.initial.offset(1)}},
          {"initial_heading_rad", e.initial.heading},
          {"final_error_m", e.final_error},
          {"aborted", e.aborted},
          {"abort_reason", e.abort_reason}};
}

inline std::string sweep_csv_header() { return "controller,speed_mps,angle_rad,mean_final_error_m,max_final_error_m,mean_solve_ms"; }

}  // namespace lie_mpc
