#pragma once

// Vessel parameter files: one `key = values` entry per logical line, values
// whitespace separated and allowed to continue on following lines that have
// no '='. '#' starts a comment. Matrices are row-major.

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lie_mpc/common.hpp"
#include "lie_mpc/hydro.hpp"

namespace lie_mpc {

struct VesselFileError : ParameterError {
  VesselFileError(const std::string& source, int line, const std::string& msg)
      : ParameterError(source + ":" + std::to_string(line) + ": " + msg), line_number(line) {}
  int line_number;
};

namespace detail {

struct Entry
{
  int line = 0;
  std::vector<std::string> tokens;
};

inline std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<double> to_numbers(const std::string& source, const std::string& key, const Entry& entry)
{
  std::vector<double> out;
  out.reserve(entry.tokens.size());
  for (const auto& tok : entry.tokens) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) {
        throw std::invalid_argument(tok);
      }
    } catch (const std::exception&) {
      throw VesselFileError(source, entry.line, "key '" + key + "': '" + tok + "' is not a number");
    }
  }
  return out;
}

}  // namespace detail

inline VesselParams parse_vessel(std::istream& in, const std::string& source = "<vessel>")
{
  static const std::set<std::string> known = {
      "name", "mass", "cog", "inertia", "added_mass", "damping_linear", "damping_quadratic", "restoring",
      "lever_arm", "thrust_coeff_pos", "thrust_coeff_neg", "thrust_limits", "coriolis_am_mask"};

  std::map<std::string, detail::Entry> entries;
  std::string current;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    line = detail::trim(line);
    if (line.empty()) {
      continue;
    }
    std::string values = line;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      current = detail::trim(line.substr(0, eq));
      if (!known.count(current)) {
        throw VesselFileError(source, line_no, "unknown key '" + current + "'");
      }
      if (entries.count(current)) {
        throw VesselFileError(source, line_no, "duplicate key '" + current + "'");
      }
      entries[current].line = line_no;
      values = line.substr(eq + 1);
    } else if (current.empty()) {
      throw VesselFileError(source, line_no, "expected 'key = values'");
    }
    std::istringstream ss(values);
    std::string tok;
    while (ss >> tok) {
      entries[current].tokens.push_back(tok);
    }
  }

  auto numbers = [&](const std::string& key, std::size_t count) {
    const auto it = entries.find(key);
    if (it == entries.end()) {
      throw VesselFileError(source, line_no, "missing key '" + key + "'");
    }
    auto v = detail::to_numbers(source, key, it->second);
    if (v.size() != count) {
      throw VesselFileError(source, it->second.line,
                            "key '" + key + "' expects " + std::to_string(count) + " values, got " +
                                std::to_string(v.size()));
    }
    return v;
  };
  auto line_of = [&](const std::string& key) { return entries.at(key).line; };

  VesselParams p;
  p.mass = numbers("mass", 1)[0];
  p.cog = Eigen::Map<const Vec3>(numbers("cog", 3).data());
  p.inertia = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(numbers("inertia", 9).data());
  p.added_mass = Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>>(numbers("added_mass", 36).data());
  p.damping_linear = Eigen::Map<const Vec6>(numbers("damping_linear", 6).data());
  p.damping_quadratic = Eigen::Map<const Vec6>(numbers("damping_quadratic", 6).data());
  p.restoring = Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>>(numbers("restoring", 36).data());
  p.lever_arm = numbers("lever_arm", 1)[0];
  p.thrust_coeff_pos = numbers("thrust_coeff_pos", 1)[0];
  p.thrust_coeff_neg = numbers("thrust_coeff_neg", 1)[0];
  const auto limits = numbers("thrust_limits", 2);
  p.thrust_min = limits[0];
  p.thrust_max = limits[1];

  if (const auto it = entries.find("coriolis_am_mask"); it != entries.end()) {
    for (const auto& tok : it->second.tokens) {
      const auto comma = tok.find(',');
      int r = -1, c = -1;
      try {
        if (comma == std::string::npos) {
          throw std::invalid_argument(tok);
        }
        r = std::stoi(tok.substr(0, comma));
        c = std::stoi(tok.substr(comma + 1));
      } catch (const std::exception&) {
        throw VesselFileError(source, it->second.line, "coriolis_am_mask entries are 'row,col', got '" + tok + "'");
      }
      if (r < 0 || r > 5 || c < 0 || c > 5) {
        throw VesselFileError(source, it->second.line, "coriolis_am_mask entry '" + tok + "' out of range 0..5");
      }
      p.coriolis_am_mask.emplace_back(r, c);
    }
  }

  // map validation failures back to the offending lines
  if (!(p.mass > 0.0)) {
    throw VesselFileError(source, line_of("mass"), "mass must be positive");
  }
  for (int i = 0; i < 6; ++i) {
    if (p.damping_linear(i) > 0.0) {
      throw VesselFileError(source, line_of("damping_linear"), "damping coefficients must be non-positive");
    }
    if (p.damping_quadratic(i) > 0.0) {
      throw VesselFileError(source, line_of("damping_quadratic"), "damping coefficients must be non-positive");
    }
  }
  if ((p.inertia - p.inertia.transpose()).norm() > 1e-9 * (1.0 + p.inertia.norm())) {
    throw VesselFileError(source, line_of("inertia"), "inertia matrix is not symmetric");
  }
  if ((p.added_mass - p.added_mass.transpose()).norm() > 1e-9 * (1.0 + p.added_mass.norm())) {
    throw VesselFileError(source, line_of("added_mass"), "added mass matrix is not symmetric");
  }
  try {
    validate(p);
  } catch (const ParameterError& e) {
    throw VesselFileError(source, line_of("added_mass"), e.what());
  }
  return p;
}

inline VesselParams load_vessel(const std::string& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ParameterError("cannot open vessel file '" + path + "'");
  }
  return parse_vessel(in, path);
}

inline void write_vessel(std::ostream& out, const VesselParams& p)
{
  out.precision(17);
  auto row = [&](const auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << "   ";
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out << ' ' << m(i, j);
      }
      out << '\n';
    }
  };
  out << "mass = " << p.mass << '\n';
  out << "cog = " << p.cog.transpose() << '\n';
  out << "inertia =\n";
  row(p.inertia);
  out << "added_mass =\n";
  row(p.added_mass);
  out << "damping_linear = " << p.damping_linear.transpose() << '\n';
  out << "damping_quadratic = " << p.damping_quadratic.transpose() << '\n';
  out << "restoring =\n";
  row(p.restoring);
  out << "lever_arm = " << p.lever_arm << '\n';
  out << "thrust_coeff_pos = " << p.thrust_coeff_pos << '\n';
  out << "thrust_coeff_neg = " << p.thrust_coeff_neg << '\n';
  out << "thrust_limits = " << p.thrust_min << ' ' << p.thrust_max << '\n';
  out << "coriolis_am_mask =";
  for (const auto& [r, c] : p.coriolis_am_mask) {
    out << ' ' << r << ',' << c;
  }
  out << '\n';
}

}  // namespace lie_mpc
