#include "crosspop/posterior.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "crosspop/rng.hpp"
#include "crosspop/stats.hpp"

namespace crosspop {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kChainStream = 0x636861696eULL; // "chain"

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

std::string PriorSpec::label() const {
  const char* fam = family == PriorFamily::Laplace ? "laplace" : "normal";
  std::ostringstream os;
  os << fam << ':' << scale;
  return os.str();
}

PriorSpec PriorSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view fam = text.substr(0, colon);
  PriorSpec spec;
  if (fam == "laplace")
    spec.family = PriorFamily::Laplace;
  else if (fam == "normal")
    spec.family = PriorFamily::Normal;
  else
    throw ConfigError("unknown prior family '" + std::string(fam) +
                      "' (expected laplace or normal)");
  if (colon != std::string_view::npos) {
    try {
      spec.scale = std::stod(std::string(text.substr(colon + 1)));
    } catch (const std::exception&) {
      throw ConfigError("bad prior scale in '" + std::string(text) + "'");
    }
  }
  if (!(spec.scale > 0.0)) throw ConfigError("prior scale must be positive");
  return spec;
}

double log_prior(const StructuralParams::Vector& v, const PriorSpec& prior) {
  const double b = prior.scale;
  if (prior.family == PriorFamily::Laplace)
    return -kNumParams * std::log(2.0 * b) - v.array().abs().sum() / b;
  return -0.5 * kNumParams * std::log(2.0 * std::numbers::pi * b * b) -
         0.5 * v.squaredNorm() / (b * b);
}

double log_prior(const StructuralParams& params, const PriorSpec& prior) {
  return log_prior(params.pack(), prior);
}

ModelConfig ModelConfig::full() { return ModelConfig(); }

ModelConfig ModelConfig::no_cross_pop() {
  ModelConfig m;
  m.tag = "no_cross_pop";
  for (int pair = 0; pair < 3; ++pair) m.free[StructuralParams::rho_index(pair)] = false;
  return m;
}

ModelConfig ModelConfig::no_country() {
  ModelConfig m;
  m.tag = "no_country";
  for (Population k : kPopulations) m.free[StructuralParams::tau_index(k)] = false;
  return m;
}

ModelConfig ModelConfig::no_time() {
  ModelConfig m;
  m.tag = "no_time";
  for (Population k : kPopulations) m.free[StructuralParams::gamma_index(k)] = false;
  return m;
}

ModelConfig ModelConfig::from_tag(const std::string& tag) {
  if (tag == "full") return full();
  if (tag == "no_cross_pop") return no_cross_pop();
  if (tag == "no_country") return no_country();
  if (tag == "no_time") return no_time();
  throw ConfigError("unknown model tag '" + tag +
                    "' (expected full, no_cross_pop, no_country or no_time)");
}

double log_likelihood(const StructuralParams& params, const PanelData& panel) {
  const int ny = panel.years.count();
  const auto cov = try_country_covariance(params, ny);
  if (!cov) return kNegInf;

  const double log2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (int i = 0; i < panel.n_countries(); ++i) {
    const auto offsets = panel.observed_offsets(i);
    if (offsets.empty()) continue;
    const int n = static_cast<int>(offsets.size());
    const Eigen::Index base = static_cast<Eigen::Index>(i) * block_size(panel.years);
    const int r = static_cast<int>(panel.region_of[i]);

    Eigen::MatrixXd sub(n, n);
    Eigen::VectorXd resid(n);
    for (int a = 0; a < n; ++a) {
      const int pop_a = offsets[a] / ny;
      resid[a] = panel.y[base + offsets[a]] - params.mu(r, pop_a);
      for (int b = 0; b < n; ++b) sub(a, b) = cov->sigma(offsets[a], offsets[b]);
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(sub);
    if (llt.info() != Eigen::Success) return kNegInf;
    const double log_det =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double quad = llt.matrixL().solve(resid).squaredNorm();
    total += -0.5 * (n * log2pi + log_det + quad);
  }
  return total;
}

LogPosterior::LogPosterior(const PanelData& panel, PriorSpec prior)
    : n_years_(panel.years.count()), prior_(prior) {
  std::map<std::vector<int>, int> pattern_ids;
  countries_.reserve(static_cast<std::size_t>(panel.n_countries()));
  for (int i = 0; i < panel.n_countries(); ++i) {
    CountryData c;
    c.region = static_cast<int>(panel.region_of[i]);
    c.offsets = panel.observed_offsets(i);
    if (!c.offsets.empty()) {
      auto [it, inserted] =
          pattern_ids.emplace(c.offsets, static_cast<int>(pattern_offsets_.size()));
      if (inserted) pattern_offsets_.push_back(c.offsets);
      c.pattern = it->second;
      const Eigen::Index base = static_cast<Eigen::Index>(i) * block_size(panel.years);
      c.y_obs.resize(static_cast<Eigen::Index>(c.offsets.size()));
      for (std::size_t a = 0; a < c.offsets.size(); ++a)
        c.y_obs[static_cast<Eigen::Index>(a)] = panel.y[base + c.offsets[a]];
    }
    countries_.push_back(std::move(c));
  }
}

const LogPosterior::CovCache* LogPosterior::covariance_for(const StructuralParams& params) {
  Eigen::Matrix<double, 12, 1> key;
  key << params.tau, params.s, params.gamma, params.rho;
  ++clock_;
  for (auto& slot : cache_) {
    if (slot.valid && slot.key == key) {
      slot.age = clock_;
      return &slot;
    }
  }
  const auto cov = try_country_covariance(params, n_years_);
  if (!cov) return nullptr;

  auto& slot = cache_[0].age <= cache_[1].age ? cache_[0] : cache_[1];
  slot.key = key;
  slot.valid = true;
  slot.age = clock_;
  slot.patterns.clear();
  slot.patterns.reserve(pattern_offsets_.size());
  for (const auto& offsets : pattern_offsets_) {
    Pattern pat;
    pat.offsets = offsets;
    const int n = static_cast<int>(offsets.size());
    Eigen::MatrixXd sub(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) sub(a, b) = cov->sigma(offsets[a], offsets[b]);
    pat.llt.compute(sub);
    if (pat.llt.info() != Eigen::Success) {
      slot.valid = false;
      return nullptr;
    }
    pat.log_det = 2.0 * pat.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    slot.patterns.push_back(std::move(pat));
  }
  return &slot;
}

double LogPosterior::likelihood_only(const StructuralParams::Vector& v) {
  const StructuralParams params = StructuralParams::unpack(v);
  const CovCache* cov = covariance_for(params);
  if (cov == nullptr) return kNegInf;

  const double log2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  Eigen::VectorXd resid;
  for (const auto& c : countries_) {
    if (c.pattern < 0) continue;
    const auto& pat = cov->patterns[static_cast<std::size_t>(c.pattern)];
    const int n = static_cast<int>(pat.offsets.size());
    resid.resize(n);
    for (int a = 0; a < n; ++a)
      resid[a] = c.y_obs[a] - params.mu(c.region, pat.offsets[a] / n_years_);
    const double quad = pat.llt.matrixL().solve(resid).squaredNorm();
    total += -0.5 * (n * log2pi + pat.log_det + quad);
  }
  return total;
}

double LogPosterior::operator()(const StructuralParams::Vector& v) {
  const double lik = likelihood_only(v);
  if (lik == kNegInf) return kNegInf;
  return lik + log_prior(v, prior_);
}

namespace {

// Data-informed starting point: regional means at per-(region, population)
// observed medians, unit variances and precisions, zero couplings.
StructuralParams::Vector initial_point(const PanelData& panel, const ModelConfig& model) {
  StructuralParams p;
  const int ny = panel.years.count();
  std::array<std::array<std::vector<double>, kNumPopulations>, kNumRegions> pools;
  std::array<std::vector<double>, kNumPopulations> pop_pools;
  for (int i = 0; i < panel.n_countries(); ++i) {
    const int r = static_cast<int>(panel.region_of[i]);
    const Eigen::Index base = static_cast<Eigen::Index>(i) * block_size(panel.years);
    for (int off = 0; off < block_size(panel.years); ++off) {
      if (!panel.observed(base + off)) continue;
      const int k = off / ny;
      pools[r][k].push_back(panel.y[base + off]);
      pop_pools[k].push_back(panel.y[base + off]);
    }
  }
  for (int r = 0; r < kNumRegions; ++r) {
    for (int k = 0; k < kNumPopulations; ++k) {
      if (!pools[r][k].empty())
        p.mu(r, k) = median(pools[r][k]);
      else if (!pop_pools[k].empty())
        p.mu(r, k) = median(pop_pools[k]);
      else
        p.mu(r, k) = -2.0;
    }
  }
  p.tau.setOnes();
  p.s.setOnes();
  p.gamma.setZero();
  p.rho.setZero();
  StructuralParams::Vector v = p.pack();
  model.apply_fixed(v);
  return v;
}

bool is_positive_param(int j) {
  for (Population k : kPopulations)
    if (j == StructuralParams::tau_index(k) || j == StructuralParams::s_index(k)) return true;
  return false;
}

struct ChainResult {
  Eigen::MatrixXd draws;
  Eigen::VectorXd log_density;
  double acceptance = 0.0;
};

ChainResult run_chain(const PanelData& panel, const PriorSpec& prior,
                      const SamplerConfig& config, int chain,
                      const StructuralParams::Vector& init_center) {
  Rng rng(config.seed, {kChainStream, static_cast<std::uint64_t>(chain)});
  LogPosterior posterior(panel, prior);

  std::vector<int> free_idx;
  for (int j = 0; j < kNumParams; ++j)
    if (config.model.free[j]) free_idx.push_back(j);

  StructuralParams::Vector x = init_center;
  double lp = kNegInf;
  for (int attempt = 0; attempt < config.max_init_attempts; ++attempt) {
    StructuralParams::Vector candidate = init_center;
    if (attempt > 0 || config.init_jitter > 0.0) {
      for (int j : free_idx) {
        candidate[j] += config.init_jitter * rng.normal();
        if (is_positive_param(j)) candidate[j] = std::abs(candidate[j]);
      }
    }
    const double clp = posterior(candidate);
    if (std::isfinite(clp)) {
      x = candidate;
      lp = clp;
      break;
    }
  }
  if (!std::isfinite(lp))
    throw AllProposalsInvalid("no positive-definite starting point found in " +
                              std::to_string(config.max_init_attempts) + " attempts");

  Eigen::VectorXd scale = Eigen::VectorXd::Constant(kNumParams, 0.1);
  const int warmup = config.effective_warmup();
  const int total = warmup + config.draws_per_chain;
  const auto nf = static_cast<Eigen::Index>(free_idx.size());

  ChainResult result;
  result.draws.resize(config.draws_per_chain, kNumParams);
  result.log_density.resize(config.draws_per_chain);

  // Running moments of the free coordinates (Welford), feeding the joint
  // proposal. The single-site scan supplies per-parameter scales and keeps
  // the chain moving near the PD boundary; the joint move follows the
  // posterior's correlation ridges, which single-site steps traverse
  // slowly.
  Eigen::VectorXd run_mean = Eigen::VectorXd::Zero(nf);
  Eigen::MatrixXd run_m2 = Eigen::MatrixXd::Zero(nf, nf);
  double run_n = 0.0;
  const int joint_start = std::max(50, warmup / 4);

  // Two joint blocks: all free coordinates, and the covariance-parameter
  // subset (tau, s, gamma, rho), whose mutual ridges dominate the
  // autocorrelation time. The smaller block takes larger steps.
  std::vector<Eigen::Index> cov_pos;
  for (Eigen::Index a = 0; a < nf; ++a)
    if (free_idx[static_cast<std::size_t>(a)] >= 21) cov_pos.push_back(a);
  struct JointBlock {
    std::vector<Eigen::Index> pos; // positions within the free vector
    Eigen::LLT<Eigen::MatrixXd> chol;
    double log_scale = 0.0;
    bool ready = false;
  };
  std::vector<JointBlock> blocks;
  {
    JointBlock all;
    all.pos.resize(static_cast<std::size_t>(nf));
    for (Eigen::Index a = 0; a < nf; ++a) all.pos[static_cast<std::size_t>(a)] = a;
    all.log_scale = std::log(2.38 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(nf, 1))));
    blocks.push_back(std::move(all));
    if (!cov_pos.empty() && cov_pos.size() < static_cast<std::size_t>(nf)) {
      JointBlock cov;
      cov.pos = cov_pos;
      cov.log_scale = std::log(2.38 / std::sqrt(static_cast<double>(cov_pos.size())));
      blocks.push_back(std::move(cov));
    }
  }

  double accept_sum = 0.0;
  std::int64_t accept_n = 0;
  for (int iter = 0; iter < total; ++iter) {
    const double gain =
        iter < warmup ? 1.0 / std::pow(static_cast<double>(iter) + 1.0, 0.6) : 0.0;

    for (int j : free_idx) {
      StructuralParams::Vector proposal = x;
      proposal[j] += scale[j] * rng.normal();
      if (is_positive_param(j)) proposal[j] = std::abs(proposal[j]);
      const double plp = posterior(proposal);
      const double alpha = plp <= kNegInf ? 0.0 : std::min(1.0, std::exp(plp - lp));
      if (rng.uniform() < alpha) {
        x = proposal;
        lp = plp;
      }
      if (iter < warmup) {
        scale[j] *= std::exp(gain * (alpha - config.target_accept));
        scale[j] = std::clamp(scale[j], 1e-7, 1e3);
      } else {
        accept_sum += alpha;
        ++accept_n;
      }
    }

    if (iter < warmup) {
      // Accumulate moments and refresh the joint proposal factor. The
      // accumulator restarts halfway through warmup so the final estimate
      // is not dragged by the pre-convergence history.
      if (iter == warmup / 2) {
        run_mean.setZero();
        run_m2.setZero();
        run_n = 0.0;
      }
      run_n += 1.0;
      Eigen::VectorXd xf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) xf[a] = x[free_idx[static_cast<std::size_t>(a)]];
      const Eigen::VectorXd delta = xf - run_mean;
      run_mean += delta / run_n;
      run_m2 += delta * (xf - run_mean).transpose();
      if (iter >= joint_start && run_n > static_cast<double>(nf)) {
        const Eigen::MatrixXd cov = run_m2 / (run_n - 1.0);
        for (auto& block : blocks) {
          const auto nb = static_cast<Eigen::Index>(block.pos.size());
          Eigen::MatrixXd sub(nb, nb);
          for (Eigen::Index a = 0; a < nb; ++a)
            for (Eigen::Index b = 0; b < nb; ++b)
              sub(a, b) = cov(block.pos[static_cast<std::size_t>(a)],
                              block.pos[static_cast<std::size_t>(b)]);
          sub.diagonal().array() += 1e-10;
          block.chol.compute(sub);
          block.ready = block.chol.info() == Eigen::Success;
        }
      }
    }

    for (int rep = 0; rep < config.joint_moves; ++rep) {
      // First move covers all free coordinates; the rest concentrate on the
      // covariance block, where the autocorrelation time lives.
      JointBlock& block = rep == 0 ? blocks.front() : blocks.back();
      if (!block.ready) continue;
      const auto nb = static_cast<Eigen::Index>(block.pos.size());
      Eigen::VectorXd z(nb);
      for (Eigen::Index a = 0; a < nb; ++a) z[a] = rng.normal();
      Eigen::VectorXd step = block.chol.matrixL() * z;
      step *= std::exp(block.log_scale);
      StructuralParams::Vector proposal = x;
      for (Eigen::Index a = 0; a < nb; ++a) {
        const int j = free_idx[static_cast<std::size_t>(block.pos[static_cast<std::size_t>(a)])];
        proposal[j] += step[a];
        if (is_positive_param(j)) proposal[j] = std::abs(proposal[j]);
      }
      const double plp = posterior(proposal);
      const double alpha = plp <= kNegInf ? 0.0 : std::min(1.0, std::exp(plp - lp));
      if (rng.uniform() < alpha) {
        x = proposal;
        lp = plp;
      }
      if (iter < warmup) block.log_scale += gain * (alpha - config.target_accept);
    }

    if (iter >= warmup) {
      result.draws.row(iter - warmup) = x.transpose();
      result.log_density[iter - warmup] = lp;
    }
  }
  result.acceptance = accept_n > 0 ? accept_sum / static_cast<double>(accept_n) : 0.0;
  return result;
}

} // namespace

PosteriorDraws sample_posterior(const PanelData& panel, const PriorSpec& prior,
                                const SamplerConfig& config) {
  if (panel.n_observed() == 0)
    throw TooFewObservations("cannot fit a panel with no observed cells");
  if (config.chains < 1 || config.draws_per_chain < 1)
    throw ConfigError("chains and draws_per_chain must be at least 1");

  const StructuralParams::Vector init_center = initial_point(panel, config.model);

  std::vector<ChainResult> results(static_cast<std::size_t>(config.chains));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(config.chains));

  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  const int threads = std::clamp(config.threads > 0 ? config.threads : hw, 1, config.chains);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int c = next.fetch_add(1);
      if (c >= config.chains) return;
      try {
        results[static_cast<std::size_t>(c)] =
            run_chain(panel, prior, config, c, init_center);
      } catch (...) {
        failures[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);

  PosteriorDraws out;
  out.seed = config.seed;
  out.chains = config.chains;
  out.warmup = config.effective_warmup();
  out.draws_per_chain = config.draws_per_chain;
  out.model = config.model;
  out.prior = prior;
  out.draws.resize(config.total_draws(), kNumParams);
  out.chain_id.resize(config.total_draws());
  out.log_density.resize(config.total_draws());
  for (int c = 0; c < config.chains; ++c) {
    const auto& r = results[static_cast<std::size_t>(c)];
    const Eigen::Index row0 = static_cast<Eigen::Index>(c) * config.draws_per_chain;
    out.draws.middleRows(row0, config.draws_per_chain) = r.draws;
    out.log_density.segment(row0, config.draws_per_chain) = r.log_density;
    out.chain_id.segment(row0, config.draws_per_chain).setConstant(c);
    out.acceptance.push_back(r.acceptance);
  }
  return out;
}

void write_draws(const PosteriorDraws& draws, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write draws file " + path.string());
  out << "chain,iteration";
  for (const auto& name : StructuralParams::names()) out << ',' << name;
  out << ",log_density\n";
  for (Eigen::Index d = 0; d < draws.n_draws(); ++d) {
    out << draws.chain_id[d] << ','
        << (draws.draws_per_chain > 0 ? d % draws.draws_per_chain : d) + 1;
    for (int j = 0; j < kNumParams; ++j) out << ',' << format_full(draws.draws(d, j));
    out << ',' << format_full(draws.log_density[d]) << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

PosteriorDraws read_draws(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open draws file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw MalformedRow("draws file is empty");

  std::vector<Eigen::VectorXd> rows;
  std::vector<int> chains;
  std::vector<double> lps;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != static_cast<std::size_t>(kNumParams) + 3)
      throw MalformedRow("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(kNumParams + 3) + " fields");
    chains.push_back(std::stoi(fields[0]));
    Eigen::VectorXd v(kNumParams);
    for (int j = 0; j < kNumParams; ++j) v[j] = std::stod(fields[static_cast<std::size_t>(j) + 2]);
    rows.push_back(std::move(v));
    lps.push_back(std::stod(fields.back()));
  }
  if (rows.empty()) throw InsufficientDraws("draws file has no draws");

  PosteriorDraws out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.draws.resize(n, kNumParams);
  out.chain_id.resize(n);
  out.log_density.resize(n);
  for (Eigen::Index d = 0; d < n; ++d) {
    out.draws.row(d) = rows[static_cast<std::size_t>(d)].transpose();
    out.chain_id[d] = chains[static_cast<std::size_t>(d)];
    out.log_density[d] = lps[static_cast<std::size_t>(d)];
  }
  out.chains = out.chain_id.size() > 0 ? out.chain_id.maxCoeff() + 1 : 0;
  out.draws_per_chain = out.chains > 0 ? static_cast<int>(n) / out.chains : 0;
  return out;
}

ParamSummary summarize_column(const Eigen::VectorXd& column) {
  ParamSummary s;
  s.mean = column.mean();
  s.sd = std::sqrt(sample_variance(column));
  s.q025 = quantile(column, 0.025);
  s.median = quantile(column, 0.5);
  s.q975 = quantile(column, 0.975);
  return s;
}

} // namespace crosspop
