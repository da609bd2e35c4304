#include "crosspop/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "crosspop/rng.hpp"

namespace crosspop {

namespace {

constexpr std::uint64_t kSimStream = 0x73696dULL;     // "sim"
constexpr std::uint64_t kMaskStream = 0x6d61736bULL;  // "mask"

std::string synthetic_code(int i) {
  std::string code = "AAA";
  code[2] = static_cast<char>('A' + i % 26);
  code[1] = static_cast<char>('A' + (i / 26) % 26);
  code[0] = static_cast<char>('A' + (i / 676) % 26);
  return code;
}

// Largest-remainder apportionment of n countries across the three
// categories.
std::array<int, 3> category_counts(const MissingnessProfile& profile, int n) {
  const std::array<double, 3> f{profile.none, profile.low, profile.high};
  const double total = f[0] + f[1] + f[2];
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("missingness fractions must sum to 1 (got " + std::to_string(total) + ")");
  std::array<int, 3> counts{};
  std::array<double, 3> remainder{};
  int assigned = 0;
  for (int c = 0; c < 3; ++c) {
    const double exact = f[static_cast<std::size_t>(c)] * n;
    counts[static_cast<std::size_t>(c)] = static_cast<int>(std::floor(exact));
    remainder[static_cast<std::size_t>(c)] = exact - std::floor(exact);
    assigned += counts[static_cast<std::size_t>(c)];
  }
  while (assigned < n) {
    const int best = static_cast<int>(
        std::max_element(remainder.begin(), remainder.end()) - remainder.begin());
    ++counts[static_cast<std::size_t>(best)];
    remainder[static_cast<std::size_t>(best)] = -1.0;
    ++assigned;
  }
  return counts;
}

} // namespace

CountryTable scenario_country_table(const ScenarioSpec& spec) {
  if (spec.region_rule != "round_robin")
    throw ConfigError("unknown region rule '" + spec.region_rule + "'");
  CountryTable table;
  for (int i = 0; i < spec.n_countries; ++i) {
    table.codes.push_back(synthetic_code(i));
    table.regions.push_back(static_cast<Region>(i % kNumRegions));
    table.index_of.emplace(table.codes.back(), i);
  }
  return table;
}

SimulatedPanel simulate_panel(const ScenarioSpec& spec) {
  const CountryTable table = scenario_country_table(spec);
  const int ny = spec.years.count();
  const int bs = block_size(spec.years);

  const auto cov = try_country_covariance(spec.truth, ny);
  if (!cov) throw NotPositiveDefinite("scenario truth does not assemble to a PD block");

  SimulatedPanel out;
  out.panel.years = spec.years;
  out.panel.country_codes = table.codes;
  out.panel.region_of = table.regions;
  const Eigen::Index total = static_cast<Eigen::Index>(spec.n_countries) * bs;
  out.truth.resize(total);
  out.panel.y = Eigen::VectorXd::Zero(total);
  out.panel.mask.assign(static_cast<std::size_t>(total), 0);

  const Eigen::VectorXd mu = mean_vector(spec.truth, out.panel);
  for (int i = 0; i < spec.n_countries; ++i) {
    Rng rng(spec.seed, {kSimStream, static_cast<std::uint64_t>(i)});
    Eigen::VectorXd z(bs);
    for (int j = 0; j < bs; ++j) z[j] = rng.normal();
    const Eigen::Index base = static_cast<Eigen::Index>(i) * bs;
    out.truth.segment(base, bs) = mu.segment(base, bs) + cov->chol.matrixL() * z;
  }

  // Mask per population: shuffle the country order, deal the category
  // counts, then pick observed years uniformly within each country.
  for (int k = 0; k < kNumPopulations; ++k) {
    const auto counts = category_counts(spec.missingness[static_cast<std::size_t>(k)],
                                        spec.n_countries);
    std::vector<int> order(static_cast<std::size_t>(spec.n_countries));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed, {kMaskStream, static_cast<std::uint64_t>(k)});
    rng.shuffle(order);

    for (int pos = 0; pos < spec.n_countries; ++pos) {
      const int i = order[static_cast<std::size_t>(pos)];
      int n_obs = 0;
      if (pos < counts[0]) {
        n_obs = 0;
      } else if (pos < counts[0] + counts[1]) {
        n_obs = static_cast<int>(rng.uniform_int(1, std::min(4, ny)));
      } else {
        n_obs = static_cast<int>(rng.uniform_int(std::min(5, ny), ny));
      }
      if (n_obs == 0) continue;
      std::vector<int> year_order(static_cast<std::size_t>(ny));
      std::iota(year_order.begin(), year_order.end(), 0);
      rng.shuffle(year_order);
      const Eigen::Index base =
          static_cast<Eigen::Index>(i) * bs + static_cast<Eigen::Index>(k) * ny;
      for (int a = 0; a < n_obs; ++a) {
        const Eigen::Index idx = base + year_order[static_cast<std::size_t>(a)];
        out.panel.mask[static_cast<std::size_t>(idx)] = 1;
        out.panel.y[idx] = out.truth[idx];
      }
    }
  }
  return out;
}

RecoveryReport recovery_experiment(const ScenarioSpec& spec, const PriorSpec& prior,
                                   const SamplerConfig& config) {
  const SimulatedPanel sim = simulate_panel(spec);
  const PosteriorDraws draws = sample_posterior(sim.panel, prior, config);
  const StructuralParams::Vector truth = spec.truth.pack();

  RecoveryReport report;
  report.diag = diagnostics(draws);
  int covered = 0, free_count = 0;
  const auto& names = StructuralParams::names();
  for (int j = 0; j < kNumParams; ++j) {
    const ParamSummary s = summarize_column(draws.draws.col(j));
    RecoveryRow row;
    row.name = names[static_cast<std::size_t>(j)];
    row.truth = truth[j];
    row.mean = s.mean;
    row.q025 = s.q025;
    row.q975 = s.q975;
    row.fixed = !config.model.free[j];
    row.covered = truth[j] >= s.q025 && truth[j] <= s.q975;
    row.z = s.sd > 0.0 ? (s.mean - truth[j]) / s.sd : 0.0;
    if (!row.fixed) {
      ++free_count;
      covered += row.covered;
    }
    report.rows.push_back(std::move(row));
  }
  report.coverage = free_count > 0 ? static_cast<double>(covered) / free_count : 0.0;
  return report;
}

namespace {

using SectionMap = std::map<std::string, std::map<std::string, std::string>>;

SectionMap parse_sections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  SectionMap sections;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = line;
    const auto hash = t.find('#');
    if (hash != std::string::npos) t = t.substr(0, hash);
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
    std::size_t b = 0;
    while (b < t.size() && std::isspace(static_cast<unsigned char>(t[b]))) ++b;
    t = t.substr(b);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = t.substr(1, t.size() - 2);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = t.substr(0, eq);
    std::string value = t.substr(eq + 1);
    while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
    std::size_t vb = 0;
    while (vb < value.size() && std::isspace(static_cast<unsigned char>(value[vb]))) ++vb;
    sections[section][key] = value.substr(vb);
  }
  return sections;
}

double to_double(const std::string& s, const std::string& key) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": '" + s + "'");
  }
}

} // namespace

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  const SectionMap sections = parse_sections(path);
  ScenarioSpec spec;

  if (const auto it = sections.find("scenario"); it != sections.end()) {
    for (const auto& [key, value] : it->second) {
      if (key == "n_countries")
        spec.n_countries = static_cast<int>(to_double(value, key));
      else if (key == "seed")
        spec.seed = static_cast<std::uint64_t>(std::stoull(value));
      else if (key == "year_first")
        spec.years.first = static_cast<int>(to_double(value, key));
      else if (key == "year_last")
        spec.years.last = static_cast<int>(to_double(value, key));
      else if (key == "region_rule")
        spec.region_rule = value;
      else
        throw ConfigError("unknown scenario key '" + key + "'");
    }
  }
  if (spec.years.first > spec.years.last)
    throw ConfigError("scenario year window is empty");
  if (spec.n_countries < 1) throw ConfigError("n_countries must be positive");
  if (const auto it = sections.find("truth"); it != sections.end()) {
    const auto& names = StructuralParams::names();
    StructuralParams::Vector v = spec.truth.pack();
    for (const auto& [key, value] : it->second) {
      const auto pos = std::find(names.begin(), names.end(), key);
      if (pos == names.end()) throw ConfigError("unknown parameter '" + key + "' in [truth]");
      v[static_cast<int>(pos - names.begin())] = to_double(value, key);
    }
    spec.truth = StructuralParams::unpack(v);
  }
  if (const auto it = sections.find("missingness"); it != sections.end()) {
    for (const auto& [key, value] : it->second) {
      const auto pop = parse_population(key == "msm"    ? "MSM"
                                        : key == "fsw"  ? "FSW"
                                        : key == "pwid" ? "PWID"
                                                        : key);
      if (!pop) throw ConfigError("unknown missingness key '" + key + "'");
      std::stringstream ss(value);
      std::string part;
      std::vector<double> f;
      while (std::getline(ss, part, ',')) f.push_back(to_double(part, key));
      if (f.size() != 3)
        throw ConfigError("missingness for " + key + " needs three fractions");
      spec.missingness[static_cast<std::size_t>(*pop)] = {f[0], f[1], f[2]};
    }
  }
  return spec;
}

void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scenario file " + path.string());
  char buf[40];
  out << "[scenario]\n";
  out << "n_countries = " << spec.n_countries << '\n';
  out << "seed = " << spec.seed << '\n';
  out << "year_first = " << spec.years.first << '\n';
  out << "year_last = " << spec.years.last << '\n';
  out << "region_rule = " << spec.region_rule << "\n\n";
  out << "[truth]\n";
  const auto& names = StructuralParams::names();
  const StructuralParams::Vector v = spec.truth.pack();
  for (int j = 0; j < kNumParams; ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[j]);
    out << names[static_cast<std::size_t>(j)] << " = " << buf << '\n';
  }
  out << "\n[missingness]\n";
  const std::array<const char*, 3> keys{"msm", "fsw", "pwid"};
  for (int k = 0; k < kNumPopulations; ++k) {
    const auto& p = spec.missingness[static_cast<std::size_t>(k)];
    out << keys[static_cast<std::size_t>(k)] << " = " << p.none << ',' << p.low << ',' << p.high
        << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

} // namespace crosspop
