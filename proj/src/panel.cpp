#include "crosspop/panel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace crosspop {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

const char* to_string(Population p) {
  switch (p) {
    case Population::MSM: return "MSM";
    case Population::FSW: return "FSW";
    case Population::PWID: return "PWID";
  }
  return "?";
}

std::optional<Population> parse_population(std::string_view s) {
  if (s == "MSM") return Population::MSM;
  if (s == "FSW") return Population::FSW;
  if (s == "PWID") return Population::PWID;
  return std::nullopt;
}

const char* to_string(Region r) {
  switch (r) {
    case Region::EasternSouthernAfrica: return "Eastern and Southern Africa";
    case Region::WesternCentralAfrica: return "Western and Central Africa";
    case Region::MiddleEastNorthAfrica: return "Middle East and North Africa";
    case Region::AsiaPacific: return "Asia and the Pacific";
    case Region::EasternEuropeCentralAsia: return "Eastern Europe and Central Asia";
    case Region::WesternCentralEuropeNorthAmerica:
      return "Western and Central Europe and North America";
    case Region::LatinAmericaCaribbean: return "Latin America and the Caribbean";
  }
  return "?";
}

const char* region_code(Region r) {
  switch (r) {
    case Region::EasternSouthernAfrica: return "ESA";
    case Region::WesternCentralAfrica: return "WCA";
    case Region::MiddleEastNorthAfrica: return "MENA";
    case Region::AsiaPacific: return "AP";
    case Region::EasternEuropeCentralAsia: return "EECA";
    case Region::WesternCentralEuropeNorthAmerica: return "WCENA";
    case Region::LatinAmericaCaribbean: return "LAC";
  }
  return "?";
}

std::optional<Region> parse_region(std::string_view s) {
  for (int r = 0; r < kNumRegions; ++r) {
    const auto region = static_cast<Region>(r);
    if (s == to_string(region) || s == region_code(region)) return region;
  }
  return std::nullopt;
}

Eigen::Index flat_index(const Cell& cell, int n_countries, const YearRange& years) {
  if (cell.country < 0 || cell.country >= n_countries)
    throw IndexOutOfRange("country index " + std::to_string(cell.country) + " outside [0, " +
                          std::to_string(n_countries) + ")");
  if (!years.contains(cell.year))
    throw IndexOutOfRange("year " + std::to_string(cell.year) + " outside " +
                          std::to_string(years.first) + ".." + std::to_string(years.last));
  const int ny = years.count();
  return static_cast<Eigen::Index>(cell.country) * block_size(years) +
         static_cast<int>(cell.pop) * ny + (cell.year - years.first);
}

Cell unflat_index(Eigen::Index idx, int n_countries, const YearRange& years) {
  const Eigen::Index total = static_cast<Eigen::Index>(n_countries) * block_size(years);
  if (idx < 0 || idx >= total)
    throw IndexOutOfRange("flat index " + std::to_string(idx) + " outside [0, " +
                          std::to_string(total) + ")");
  const int bs = block_size(years);
  const int ny = years.count();
  Cell c;
  c.country = static_cast<int>(idx / bs);
  const int within = static_cast<int>(idx % bs);
  c.pop = static_cast<Population>(within / ny);
  c.year = years.first + within % ny;
  return c;
}

CountryTable load_country_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open country table " + path.string());
  CountryTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (line_no == 1) {
      if (fields.size() != 2 || fields[0] != "country" || fields[1] != "region")
        throw MalformedRow("line 1: country table header must be 'country,region'");
      continue;
    }
    if (fields.size() != 2)
      throw MalformedRow("line " + std::to_string(line_no) + ": expected 2 fields, got " +
                         std::to_string(fields.size()));
    const auto region = parse_region(fields[1]);
    if (!region)
      throw MalformedRow("line " + std::to_string(line_no) + ": unknown region '" + fields[1] +
                         "'");
    if (table.index_of.count(fields[0]))
      throw DuplicateConflict("line " + std::to_string(line_no) + ": country '" + fields[0] +
                              "' listed twice");
    table.index_of.emplace(fields[0], table.size());
    table.codes.push_back(fields[0]);
    table.regions.push_back(*region);
  }
  if (table.codes.empty()) throw MalformedRow("country table has no rows");
  return table;
}

void save_country_table(const CountryTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write country table " + path.string());
  out << "country,region\n";
  for (int i = 0; i < table.size(); ++i)
    out << table.codes[i] << ',' << to_string(table.regions[i]) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

Eigen::Index PanelData::n_observed() const {
  Eigen::Index n = 0;
  for (auto m : mask) n += m != 0;
  return n;
}

int PanelData::obs_count(int country, Population pop) const {
  const int ny = years.count();
  const Eigen::Index base =
      static_cast<Eigen::Index>(country) * block_size(years) + static_cast<int>(pop) * ny;
  int n = 0;
  for (int t = 0; t < ny; ++t) n += mask[static_cast<std::size_t>(base + t)] != 0;
  return n;
}

std::vector<int> PanelData::observed_offsets(int country) const {
  const int bs = block_size(years);
  const Eigen::Index base = static_cast<Eigen::Index>(country) * bs;
  std::vector<int> offsets;
  for (int j = 0; j < bs; ++j)
    if (mask[static_cast<std::size_t>(base + j)]) offsets.push_back(j);
  return offsets;
}

std::vector<Eigen::Index> PanelData::observed_cells() const {
  std::vector<Eigen::Index> cells;
  for (Eigen::Index i = 0; i < size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) cells.push_back(i);
  return cells;
}

PanelData PanelData::masked(const std::vector<Eigen::Index>& hide) const {
  PanelData out = *this;
  for (Eigen::Index i : hide) {
    out.mask[static_cast<std::size_t>(i)] = 0;
    out.y[i] = 0.0;
  }
  return out;
}

PanelData load_panel(const std::filesystem::path& observations, const CountryTable& table,
                     const LoadOptions& options) {
  if (options.years.first > options.years.last)
    throw ConfigError("year window " + std::to_string(options.years.first) + ".." +
                      std::to_string(options.years.last) + " is empty");
  std::ifstream in(observations);
  if (!in) throw IoError("cannot open observation file " + observations.string());

  PanelData panel;
  panel.years = options.years;
  panel.country_codes = table.codes;
  panel.region_of = table.regions;
  const Eigen::Index total = static_cast<Eigen::Index>(table.size()) * block_size(panel.years);
  panel.y = Eigen::VectorXd::Zero(total);
  panel.mask.assign(static_cast<std::size_t>(total), 0);

  // Cell -> list of prevalence values, to apply the duplicate rule after
  // the whole file is read.
  std::map<Eigen::Index, std::vector<double>> seen;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (line_no == 1) {
      if (fields.size() != 4 || fields[0] != "country" || fields[1] != "population" ||
          fields[2] != "year" || fields[3] != "prevalence")
        throw MalformedRow("line 1: header must be 'country,population,year,prevalence'");
      continue;
    }
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != 4)
      throw MalformedRow(where + "expected 4 fields, got " + std::to_string(fields.size()));

    const auto country = table.index_of.find(fields[0]);
    if (country == table.index_of.end())
      throw UnknownCountry(where + "country '" + fields[0] + "' not in country table");

    const auto pop = parse_population(fields[1]);
    if (!pop) throw MalformedRow(where + "unknown population '" + fields[1] + "'");

    int year = 0;
    try {
      std::size_t used = 0;
      year = std::stoi(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw MalformedRow(where + "bad year '" + fields[2] + "'");
    }
    if (!panel.years.contains(year))
      throw MalformedRow(where + "year " + std::to_string(year) + " outside " +
                         std::to_string(panel.years.first) + ".." +
                         std::to_string(panel.years.last));

    double prevalence = 0.0;
    try {
      std::size_t used = 0;
      prevalence = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw MalformedRow(where + "bad prevalence '" + fields[3] + "'");
    }
    if (options.percent) prevalence /= 100.0;
    if (!(prevalence > 0.0 && prevalence < 1.0))
      throw PrevalenceOutOfRange(where + "prevalence " + format_full(prevalence) +
                                 " not strictly inside (0, 1)");

    const Eigen::Index idx = panel.flat({country->second, *pop, year});
    seen[idx].push_back(prevalence);
  }

  for (const auto& [idx, values] : seen) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*hi - *lo > options.duplicate_tolerance) {
      const Cell c = panel.cell_at(idx);
      throw DuplicateConflict("cell (" + panel.country_codes[c.country] + "," +
                              to_string(c.pop) + "," + std::to_string(c.year) +
                              ") has conflicting values " + format_full(*lo) + " and " +
                              format_full(*hi));
    }
    double log_sum = 0.0;
    for (double v : values) log_sum += std::log(v);
    panel.y[idx] = log_sum / static_cast<double>(values.size());
    panel.mask[static_cast<std::size_t>(idx)] = 1;
  }
  return panel;
}

PanelData load_panel(const std::filesystem::path& observations,
                     const std::filesystem::path& country_table, const LoadOptions& options) {
  return load_panel(observations, load_country_table(country_table), options);
}

void export_panel(const PanelData& panel, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write observation file " + path.string());
  out << "country,population,year,prevalence\n";
  for (Eigen::Index i = 0; i < panel.size(); ++i) {
    if (!panel.observed(i)) continue;
    const Cell c = panel.cell_at(i);
    // The file schema requires prevalence in (0,1); the Gaussian law on the
    // log scale does not enforce that, so a simulated panel whose draws
    // cross zero cannot be written in this format.
    if (!(panel.y[i] < 0.0))
      throw PrevalenceOutOfRange(
          "cell (" + panel.country_codes[c.country] + "," + to_string(c.pop) + "," +
          std::to_string(c.year) + ") has log value " + format_full(panel.y[i]) +
          " >= 0; prevalence would leave (0,1)");
    out << panel.country_codes[c.country] << ',' << to_string(c.pop) << ',' << c.year << ','
        << format_full(std::exp(panel.y[i])) << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

SparsityProfile sparsity_profile(const PanelData& panel) {
  SparsityProfile profile;
  for (int i = 0; i < panel.n_countries(); ++i) {
    for (Population pop : kPopulations) {
      const int n = panel.obs_count(i, pop);
      const int k = static_cast<int>(pop);
      if (n == 0)
        ++profile.none[k];
      else if (n <= 4)
        ++profile.low[k];
      else
        ++profile.high[k];
    }
  }
  return profile;
}

} // namespace crosspop
