#ifndef CROSSPOP_PANEL_HPP
#define CROSSPOP_PANEL_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "crosspop/errors.hpp"

namespace crosspop {

// The three key populations, in the fixed ordinal order used by every
// block layout in the model.
enum class Population : int { MSM = 0, FSW = 1, PWID = 2 };
inline constexpr int kNumPopulations = 3;
inline constexpr std::array<Population, 3> kPopulations{Population::MSM, Population::FSW,
                                                        Population::PWID};

const char* to_string(Population p);
std::optional<Population> parse_population(std::string_view s);

// The seven UNAIDS regions.
enum class Region : int {
  EasternSouthernAfrica = 0,
  WesternCentralAfrica,
  MiddleEastNorthAfrica,
  AsiaPacific,
  EasternEuropeCentralAsia,
  WesternCentralEuropeNorthAmerica,
  LatinAmericaCaribbean,
};
inline constexpr int kNumRegions = 7;

const char* to_string(Region r);   // canonical long name used in data files
const char* region_code(Region r); // short code used in parameter names
std::optional<Region> parse_region(std::string_view s); // accepts either form

struct YearRange {
  int first = 2011;
  int last = 2021;
  int count() const { return last - first + 1; }
  bool contains(int y) const { return y >= first && y <= last; }
  bool operator==(const YearRange&) const = default;
};

struct Cell {
  int country = 0; // 0-based
  Population pop = Population::MSM;
  int year = 2011; // calendar year
  bool operator==(const Cell&) const = default;
};

// Flat vector layout: country-major, population blocks within a country,
// years within a population. With 3 populations and 11 years each country
// occupies a contiguous block of 33 entries.
Eigen::Index flat_index(const Cell& cell, int n_countries, const YearRange& years);
Cell unflat_index(Eigen::Index idx, int n_countries, const YearRange& years);

inline int block_size(const YearRange& years) { return kNumPopulations * years.count(); }

struct CountryTable {
  std::vector<std::string> codes;  // position defines the country index
  std::vector<Region> regions;
  std::unordered_map<std::string, int> index_of;

  int size() const { return static_cast<int>(codes.size()); }
};

CountryTable load_country_table(const std::filesystem::path& path);
void save_country_table(const CountryTable& table, const std::filesystem::path& path);

struct LoadOptions {
  YearRange years{};
  bool percent = false;              // inputs are percentages, divide by 100
  double duplicate_tolerance = 1e-12; // max prevalence gap merged by log-scale averaging
};

// Observed log-prevalence panel. Immutable after construction; safe to
// share across threads.
struct PanelData {
  YearRange years{};
  std::vector<std::string> country_codes;
  std::vector<Region> region_of;
  Eigen::VectorXd y;              // log prevalence; zero where unobserved
  std::vector<std::uint8_t> mask; // 1 where observed

  int n_countries() const { return static_cast<int>(country_codes.size()); }
  Eigen::Index size() const { return y.size(); }
  Eigen::Index flat(const Cell& c) const { return flat_index(c, n_countries(), years); }
  Cell cell_at(Eigen::Index i) const { return unflat_index(i, n_countries(), years); }
  bool observed(Eigen::Index i) const { return mask[static_cast<std::size_t>(i)] != 0; }

  Eigen::Index n_observed() const;
  int obs_count(int country, Population pop) const;
  // Offsets of observed entries within a country's block, ascending.
  std::vector<int> observed_offsets(int country) const;
  std::vector<Eigen::Index> observed_cells() const;

  // Copy with the given cells hidden (used by cross-validation).
  PanelData masked(const std::vector<Eigen::Index>& hide) const;
};

PanelData load_panel(const std::filesystem::path& observations, const CountryTable& table,
                     const LoadOptions& options = {});
PanelData load_panel(const std::filesystem::path& observations,
                     const std::filesystem::path& country_table,
                     const LoadOptions& options = {});

// Writes the observed cells back out in the observation-file format,
// exponentiating to the prevalence scale at full precision.
void export_panel(const PanelData& panel, const std::filesystem::path& path);

// Per-population histogram of countries by observation count:
// none, 1-4, and 5 or more.
struct SparsityProfile {
  std::array<int, kNumPopulations> none{};
  std::array<int, kNumPopulations> low{};  // 1-4 observations
  std::array<int, kNumPopulations> high{}; // >= 5 observations
};

SparsityProfile sparsity_profile(const PanelData& panel);

} // namespace crosspop

#endif
