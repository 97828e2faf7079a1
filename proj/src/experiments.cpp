#include "blocklr/experiments.hpp"

#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "blocklr/io.hpp"
#include "blocklr/rng.hpp"
#include "blocklr/sensing.hpp"

namespace blocklr {

std::string to_string(Method m) {
  switch (m) {
    case Method::kConvex: return "convex";
    case Method::kSpectral: return "spectral";
    case Method::kGd: return "gd";
  }
  return "?";
}

std::string to_string(Metric m) {
  return m == Metric::kSubspaceAngle ? "subspace_angle" : "normalized_error";
}

std::string to_string(AlphaBetaSource s) {
  return s == AlphaBetaSource::kOracle ? "oracle" : "estimated";
}

Method parse_method(const std::string& s) {
  if (s == "convex") return Method::kConvex;
  if (s == "spectral") return Method::kSpectral;
  if (s == "gd") return Method::kGd;
  throw DomainError("unknown method '" + s + "' (convex, spectral, gd)");
}

Metric parse_metric(const std::string& s) {
  if (s == "subspace_angle") return Metric::kSubspaceAngle;
  if (s == "normalized_error") return Metric::kNormalizedError;
  throw DomainError("unknown metric '" + s + "' (subspace_angle, normalized_error)");
}

AlphaBetaSource parse_alpha_beta_source(const std::string& s) {
  if (s == "oracle") return AlphaBetaSource::kOracle;
  if (s == "estimated") return AlphaBetaSource::kEstimated;
  throw DomainError("unknown alpha_beta_source '" + s + "' (oracle, estimated)");
}

namespace {

void require_ascending(const std::vector<Index>& v, const char* name) {
  if (v.empty()) throw DomainError(std::string(name) + " must be nonempty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 1) throw DomainError(std::string(name) + " entries must be positive");
    if (i > 0 && v[i] <= v[i - 1]) {
      throw DomainError(std::string(name) + " must be strictly ascending");
    }
  }
}

}  // namespace

void SweepConfig::validate() const {
  if (M < 1 || N < 1 || r < 1) throw DomainError("sweep: M, N, r must be positive");
  require_ascending(K_values, "K_values");
  require_ascending(L_values, "L_values");
  if (r > std::min(M, N * K_values.front())) {
    throw DomainError("sweep: r exceeds min(M, N*K) for K = " + std::to_string(K_values.front()));
  }
  if (trials < 1) throw DomainError("sweep: trials must be >= 1");
  if (snr_db && !std::isfinite(*snr_db)) throw DomainError("sweep: snr_db must be finite");
}

nlohmann::json to_json(const SweepConfig& cfg) {
  nlohmann::json j;
  j["M"] = cfg.M;
  j["N"] = cfg.N;
  j["r"] = cfg.r;
  j["K_values"] = cfg.K_values;
  j["L_values"] = cfg.L_values;
  if (cfg.snr_db) {
    j["snr_db"] = *cfg.snr_db;
  } else {
    j["snr_db"] = "noiseless";
  }
  j["trials"] = cfg.trials;
  j["master_seed"] = cfg.master_seed;
  j["method"] = to_string(cfg.method);
  j["metric"] = to_string(cfg.metric);
  j["alpha_beta_source"] = to_string(cfg.alpha_beta_source);
  return j;
}

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "M", "N", "r", "K_values", "L_values", "snr_db", "trials", "master_seed",
      "method", "metric", "alpha_beta_source"};
  if (!j.is_object()) throw DomainError("sweep config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw DomainError("sweep config: unknown field '" + key + "'");
  }
  SweepConfig cfg;
  try {
    if (j.contains("M")) cfg.M = j.at("M").get<Index>();
    if (j.contains("N")) cfg.N = j.at("N").get<Index>();
    if (j.contains("r")) cfg.r = j.at("r").get<Index>();
    if (j.contains("K_values")) cfg.K_values = j.at("K_values").get<std::vector<Index>>();
    if (j.contains("L_values")) cfg.L_values = j.at("L_values").get<std::vector<Index>>();
    if (j.contains("snr_db")) {
      const auto& s = j.at("snr_db");
      if (s.is_string()) {
        if (s.get<std::string>() != "noiseless") {
          throw DomainError("sweep config: snr_db must be a number or \"noiseless\"");
        }
        cfg.snr_db.reset();
      } else {
        cfg.snr_db = s.get<double>();
      }
    }
    if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
    if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("method")) cfg.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("metric")) cfg.metric = parse_metric(j.at("metric").get<std::string>());
    if (j.contains("alpha_beta_source")) {
      cfg.alpha_beta_source = parse_alpha_beta_source(j.at("alpha_beta_source").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("sweep config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

nlohmann::json admm_json(const AdmmSettings& s) {
  return {{"rho0", s.rho0},           {"eps_abs", s.eps_abs},
          {"eps_rel", s.eps_rel},     {"max_iter", s.max_iter},
          {"balance_mu", s.balance_mu}, {"balance_tau", s.balance_tau},
          {"balance_relative", s.balance_relative}, {"balance_every", s.balance_every},
          {"balance_until", s.balance_until}};
}

}  // namespace

nlohmann::json to_json(const SweepSolvers& s) {
  nlohmann::json j;
  j["estimator"] = admm_json(s.admm);
  j["dollar_norm"] = admm_json(s.dollar);
  j["dollar_norm"]["beta_bisect_tol"] = s.dollar.beta_bisect_tol;
  j["gd"] = {{"max_iter", s.gd.max_iter},
             {"armijo_c", s.gd.armijo_c},
             {"armijo_shrink", s.gd.armijo_shrink},
             {"init_step", s.gd.init_step},
             {"grad_tol", s.gd.grad_tol}};
  return j;
}

double median_of(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::uint64_t trial_seed(std::uint64_t master, Index K, Index L, int t) {
  return derive_seed(master, {std::uint64_t(K), std::uint64_t(L), std::uint64_t(t)});
}

namespace {

Mat<double> leading_left_vectors(const Mat<double>& a, Index r) {
  return thin_svd(a).U.leftCols(r);
}

}  // namespace

TrialOutcome run_trial(const SweepConfig& cfg, const SweepSolvers& solvers, Index K, Index L,
                       int t) {
  TrialOutcome out;
  out.K = K;
  out.L = L;
  out.trial = t;
  try {
    const ProblemDims dims{cfg.M, cfg.N, K, L, cfg.r};
    const std::uint64_t seed = trial_seed(cfg.master_seed, K, L, t);
    const auto truth = gen_ground_truth<double>(dims, derive_seed(seed, Stream::kGroundTruth));
    const auto ens = gen_ensemble<double>(dims, derive_seed(seed, Stream::kEnsemble));
    const double sigma = cfg.snr_db ? sigma_for_snr_db(truth.X, *cfg.snr_db) : 0.0;
    const auto ms = measure(truth.X, ens, sigma, derive_seed(seed, Stream::kNoise));
    const BlockMatrixd x0 = backproject(ens, ms);

    BlockMatrixd x_hat;
    Mat<double> u_est;
    switch (cfg.method) {
      case Method::kSpectral:
        u_est = spectral_column_space(x0, cfg.r);
        x_hat = truncate_rank(x0, cfg.r);
        break;
      case Method::kConvex: {
        EstimatorConfig ec;
        static_cast<AdmmSettings&>(ec) = solvers.admm;
        ec.init_rank = cfg.r;
        if (cfg.alpha_beta_source == AlphaBetaSource::kOracle) {
          ec.alpha = inf_frob_norm(truth.X);
          ec.beta = dollar_norm(truth.X, solvers.dollar).value;
        } else {
          const auto ab = estimate_alpha_beta(x0, cfg.r, solvers.dollar);
          ec.alpha = ab.alpha;
          ec.beta = ab.beta;
        }
        try {
          x_hat = estimate(ens, ms, ec).X_hat;
        } catch (const EstimateNotConverged<double>& e) {
          x_hat = e.partial().X_hat;
          out.status = kStatusFailed;
          out.detail = e.what();
        }
        u_est = leading_left_vectors(x_hat.matrix(), cfg.r);
        break;
      }
      case Method::kGd: {
        GdResult<double> gd;
        try {
          gd = gd_refine(ens, ms, spectral_init(x0, cfg.r), solvers.gd);
        } catch (const GdStalled<double>& e) {
          gd = e.last();
          out.status = kStatusStalled;
          out.detail = e.what();
        }
        x_hat = gd.iterate.assemble();
        u_est = leading_left_vectors(gd.iterate.U, cfg.r);
        break;
      }
    }
    out.value = cfg.metric == Metric::kSubspaceAngle ? subspace_angle(truth.U, u_est)
                                                     : normalized_error(x_hat, truth.X);
  } catch (const Error& e) {
    out.status = kStatusError;
    out.detail = e.what();
    out.value = std::nan("");
  }
  return out;
}

namespace {

void finalize(ExperimentRecord& rec) {
  std::vector<double> ok;
  rec.failures = 0;
  for (const auto& t : rec.trials) {
    if (t.counts()) {
      ok.push_back(t.value);
    } else {
      ++rec.failures;
    }
  }
  rec.median = median_of(std::move(ok));
}

}  // namespace

std::vector<ExperimentRecord> run_sweep(const SweepConfig& cfg, const SweepSolvers& solvers,
                                        const ProgressFn& progress) {
  cfg.validate();
  if (solvers.threads < 1) throw DomainError("sweep: threads must be >= 1");

  struct Task {
    std::size_t cell;
    Index K, L;
    int t;
  };
  std::vector<ExperimentRecord> records;
  std::vector<Task> tasks;
  for (Index K : cfg.K_values) {
    for (Index L : cfg.L_values) {
      ExperimentRecord rec;
      rec.K = K;
      rec.L = L;
      rec.trials.resize(cfg.trials);
      records.push_back(std::move(rec));
      for (int t = 0; t < cfg.trials; ++t) tasks.push_back({records.size() - 1, K, L, t});
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& task = tasks[i];
      TrialOutcome o = run_trial(cfg, solvers, task.K, task.L, task.t);
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(o);
      }
      records[task.cell].trials[task.t] = std::move(o);
    }
  };
  const int n_threads = std::min<int>(solvers.threads, int(tasks.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& rec : records) finalize(rec);
  return records;
}

std::string results_csv(const std::vector<ExperimentRecord>& records, Metric metric) {
  std::string out = "K,L,trial,metric,value,status\n";
  const std::string name = to_string(metric);
  for (const auto& rec : records) {
    for (const auto& t : rec.trials) {
      out += std::to_string(rec.K) + "," + std::to_string(rec.L) + "," +
             std::to_string(t.trial) + "," + name + "," + format_double(t.value) + "," +
             t.status + "\n";
    }
  }
  return out;
}

std::vector<ExperimentRecord> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "K,L,trial,metric,value,status") {
    throw IoError("results file: missing header K,L,trial,metric,value,status");
  }
  std::vector<ExperimentRecord> records;
  std::map<std::pair<Index, Index>, std::size_t> index;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) {
      throw IoError("results file line " + std::to_string(line_no) + ": expected 6 fields");
    }
    TrialOutcome o;
    try {
      o.K = Index(std::stoll(f[0]));
      o.L = Index(std::stoll(f[1]));
      o.trial = std::stoi(f[2]);
      o.value = parse_double(f[4]);
    } catch (const std::exception& e) {
      throw IoError("results file line " + std::to_string(line_no) + ": " + e.what());
    }
    o.status = f[5];
    const auto key = std::make_pair(o.K, o.L);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, records.size()).first;
      records.push_back({});
      records.back().K = o.K;
      records.back().L = o.L;
    }
    records[it->second].trials.push_back(std::move(o));
  }
  for (auto& rec : records) finalize(rec);
  return records;
}

PhaseDiagram emit_phase_diagram(const std::vector<ExperimentRecord>& records,
                                double threshold_log10) {
  if (records.empty()) throw DomainError("phase diagram: no records");
  std::set<Index> ks, ls;
  std::map<std::pair<Index, Index>, const ExperimentRecord*> cells;
  for (const auto& rec : records) {
    ks.insert(rec.K);
    ls.insert(rec.L);
    cells[{rec.K, rec.L}] = &rec;
  }
  std::string missing;
  for (Index K : ks) {
    for (Index L : ls) {
      if (!cells.count({K, L})) {
        missing += (missing.empty() ? "" : ", ") + std::string("(K=") + std::to_string(K) +
                   ", L=" + std::to_string(L) + ")";
      }
    }
  }
  if (!missing.empty()) throw DomainError("phase diagram: missing cells " + missing);

  PhaseDiagram pd;
  pd.threshold_log10 = threshold_log10;
  pd.K_values.assign(ks.begin(), ks.end());
  pd.L_values.assign(ls.begin(), ls.end());
  for (Index L : pd.L_values) {
    std::vector<double> row;
    std::vector<bool> ok;
    for (Index K : pd.K_values) {
      const ExperimentRecord& rec = *cells.at({K, L});
      const double v = rec.valid() ? std::log10(rec.median) : std::nan("");
      row.push_back(v);
      ok.push_back(rec.valid() && v <= threshold_log10);
    }
    pd.log10_median.push_back(std::move(row));
    pd.success.push_back(std::move(ok));
  }
  return pd;
}

std::string PhaseDiagram::grid_csv() const {
  std::string out = "L\\K";
  for (Index K : K_values) out += "," + std::to_string(K);
  out += "\n";
  for (std::size_t i = 0; i < L_values.size(); ++i) {
    out += std::to_string(L_values[i]);
    for (double v : log10_median[i]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

std::string PhaseDiagram::mask_pgm() const {
  std::string out = "P2\n" + std::to_string(K_values.size()) + " " +
                    std::to_string(L_values.size()) + "\n255\n";
  for (std::size_t i = L_values.size(); i-- > 0;) {
    for (std::size_t j = 0; j < K_values.size(); ++j) {
      if (j) out += ' ';
      out += success[i][j] ? "255" : "0";
    }
    out += "\n";
  }
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json run_manifest(const SweepConfig& cfg, const SweepSolvers& solvers,
                            const std::vector<Artifact>& artifacts) {
  nlohmann::json j;
  j["config"] = to_json(cfg);
  j["solvers"] = to_json(solvers);
  j["artifacts"] = nlohmann::json::object();
  for (const auto& a : artifacts) {
    j["artifacts"][a.name] = {{"bytes", a.contents.size()}, {"fnv1a64", fnv1a_hex(a.contents)}};
  }
  return j;
}

}  // namespace blocklr
