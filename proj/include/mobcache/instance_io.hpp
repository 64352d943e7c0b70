#pragma once

// Plain-text placement instances. Example:
//
//   # two SBSs, three files
//   sbs 2
//   files 3
//   cache_cost 1.5
//   sbs_retrieval 180
//   mbs_base 13
//   mbs_link 370
//   sizes 1 1 1
//   capacities 1 1
//   density
//   0.1 0.2 0.3
//   0.4 0.5 0.6
//
// Keys may appear in any order before `density`, which is followed by
// exactly `sbs` rows of `files` values. `sizes` defaults to all ones and the
// cost constants default to the reference values. `#` starts a comment.

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mobcache/placement.hpp"

namespace mobcache {

inline PlacementProblem read_instance(std::istream& in) {
  std::optional<std::size_t> sbs;
  std::optional<std::size_t> files;
  CostParams costs;
  std::vector<double> sizes;
  std::vector<double> capacities;
  std::vector<double> density;
  bool in_density = false;

  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw ConfigError(detail::concat("instance line ", line_no, ": ", what));
  };
  const auto read_values = [&](std::istringstream& ss, std::vector<double>& out) {
    double v = 0.0;
    while (ss >> v) out.push_back(v);
    if (!ss.eof()) fail("expected a number");
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    if (in_density) {
      read_values(ss, density);
      continue;
    }
    std::string key;
    if (!(ss >> key)) continue;
    if (key == "sbs" || key == "files") {
      long long v = 0;
      if (!(ss >> v) || v <= 0) fail(key + " must be a positive integer");
      (key == "sbs" ? sbs : files) = static_cast<std::size_t>(v);
    } else if (key == "cache_cost") {
      if (!(ss >> costs.cache_cost)) fail("bad cache_cost");
    } else if (key == "sbs_retrieval") {
      if (!(ss >> costs.sbs_retrieval)) fail("bad sbs_retrieval");
    } else if (key == "mbs_base") {
      if (!(ss >> costs.mbs_base)) fail("bad mbs_base");
    } else if (key == "mbs_link") {
      if (!(ss >> costs.mbs_link)) fail("bad mbs_link");
    } else if (key == "sizes") {
      read_values(ss, sizes);
    } else if (key == "capacities") {
      read_values(ss, capacities);
    } else if (key == "density") {
      in_density = true;
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!sbs || !files) throw ConfigError("instance must declare sbs and files");
  if (sizes.empty()) sizes.assign(*files, 1.0);
  if (sizes.size() != *files) throw ConfigError("sizes must list one value per file");
  if (capacities.size() == 1 && *sbs > 1) capacities.assign(*sbs, capacities.front());
  if (capacities.size() != *sbs) throw ConfigError("capacities must list one value per SBS");
  if (density.size() != *sbs * *files) {
    throw ConfigError(detail::concat("density must hold ", *sbs * *files, " values, got ",
                                     density.size()));
  }
  DensityTable table(*sbs, *files);
  for (std::size_t i = 0; i < density.size(); ++i) table(i / *files, i % *files) = density[i];

  try {
    PlacementProblem problem{ContentCatalog(std::move(sizes)), costs, std::move(capacities),
                             std::move(table)};
    problem.validate();
    return problem;
  } catch (const ContractError& e) {
    throw ConfigError(std::string("invalid instance: ") + e.what());
  }
}

inline PlacementProblem read_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open instance file " + path);
  return read_instance(in);
}

inline void write_instance(std::ostream& out, const PlacementProblem& p) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "sbs " << p.sbs_count() << "\nfiles " << p.file_count() << '\n';
  out << "cache_cost " << p.costs.cache_cost << "\nsbs_retrieval " << p.costs.sbs_retrieval
      << "\nmbs_base " << p.costs.mbs_base << "\nmbs_link " << p.costs.mbs_link << '\n';
  out << "sizes";
  for (double g : p.catalog.sizes()) out << ' ' << g;
  out << "\ncapacities";
  for (double c : p.capacities) out << ' ' << c;
  out << "\ndensity\n";
  for (std::size_t k = 0; k < p.sbs_count(); ++k) {
    for (std::size_t f = 0; f < p.file_count(); ++f) out << (f ? " " : "") << p.density(k, f);
    out << '\n';
  }
}

}  // namespace mobcache
