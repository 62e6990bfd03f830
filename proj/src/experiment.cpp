#include "fedadg/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedadg/util.hpp"

namespace fedadg {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMmdSampleCap = 128;  // keeps the O(n^2) kernels cheap

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// CSV cell: NaN means "not applicable", rendered empty.
std::string fmt_cell(double v) { return std::isnan(v) ? "" : fmt_double(v); }

std::string fmt_angle(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%gdeg", v);
  return buf;
}

}  // namespace

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::mode_label() const {
  if (mode == RunMode::fedavg) return "fedavg";
  if (!use_rp) return "fedadg_no_rp";
  if (!class_conditioned) return "fedadg_no_onehot";
  return "fedadg";
}

TrainingParams ExperimentConfig::training_params() const {
  TrainingParams tp;
  tp.mode = mode;
  tp.reference = reference;
  tp.laplace_scale = laplace_scale;
  tp.use_rp = use_rp;
  tp.class_conditioned = class_conditioned;
  tp.e0 = e0;
  tp.e1 = e1;
  tp.batch_size = batch_size;
  tp.base_lr = base_lr;
  tp.weights.lambda0 = lambda0;
  tp.weights.lambda1 = lambda1;
  tp.label_smoothing = label_smoothing;
  tp.input_dim = suite.input_dim;
  tp.num_classes = suite.num_classes;
  tp.feature_dim = feature_dim;
  tp.rp_dim = rp_dim;
  tp.noise_dim = noise_dim;
  tp.hidden_dim = hidden_dim;
  tp.weighted_aggregation = weighted_aggregation;
  return tp;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["mode"] = mode_label();
  j["reference"] = reference_mode_name(reference);
  j["laplace_scale"] = laplace_scale;
  j["suite"] = {
      {"family", family_name(suite.family)},
      {"angles", suite.domain_angles},
      {"samples_per_domain", suite.samples_per_domain},
      {"noise", suite.noise},
      {"input_dim", suite.input_dim},
      {"num_classes", suite.num_classes},
  };
  j["rounds"] = rounds;
  j["e0"] = e0;
  j["e1"] = e1;
  j["batch_size"] = batch_size;
  j["base_lr"] = base_lr;
  j["lambda0"] = lambda0;
  j["lambda1"] = lambda1;
  j["label_smoothing"] = label_smoothing;
  j["feature_dim"] = feature_dim;
  j["rp_dim"] = rp_dim;
  j["noise_dim"] = noise_dim;
  j["hidden_dim"] = hidden_dim;
  j["weighted_aggregation"] = weighted_aggregation;
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;
  return j;
}

std::uint64_t ExperimentConfig::hash() const {
  // Identify the experiment by what it computes, not where it writes:
  // reruns into different directories share a hash and produce identical
  // artifacts.
  nlohmann::json j = to_json();  // object keys are sorted
  j.erase("output_dir");
  return fnv1a64(j.dump());
}

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

void check_keys(const nlohmann::json& j, const char* scope,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(std::string(scope) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) config_error("unknown key '" + key + "' in " + scope);
  }
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      config_error(std::string("key '") + key + "' has the wrong type");
    }
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "config",
             {"mode", "reference", "laplace_scale", "suite", "rounds", "e0",
              "e1", "batch_size", "base_lr", "lambda0", "lambda1",
              "label_smoothing", "feature_dim", "rp_dim", "noise_dim",
              "hidden_dim", "weighted_aggregation", "seeds", "output_dir"});
  ExperimentConfig c;
  if (j.contains("mode")) {
    const std::string m = j.at("mode").get<std::string>();
    if (m == "fedadg") {
      c.mode = RunMode::fedadg;
    } else if (m == "fedavg") {
      c.mode = RunMode::fedavg;
    } else if (m == "fedadg_no_rp") {
      c.mode = RunMode::fedadg;
      c.use_rp = false;
    } else if (m == "fedadg_no_onehot") {
      c.mode = RunMode::fedadg;
      c.class_conditioned = false;
    } else {
      config_error("unknown mode '" + m + "'");
    }
  }
  if (j.contains("reference")) {
    const std::string r = j.at("reference").get<std::string>();
    if (r == "adaptive") c.reference = ReferenceMode::adaptive;
    else if (r == "gaussian") c.reference = ReferenceMode::gaussian;
    else if (r == "uniform") c.reference = ReferenceMode::uniform;
    else if (r == "laplace") c.reference = ReferenceMode::laplace;
    else config_error("unknown reference '" + r + "'");
  }
  read_if(j, "laplace_scale", c.laplace_scale);
  if (j.contains("suite")) {
    const nlohmann::json& s = j.at("suite");
    check_keys(s, "suite", {"family", "angles", "samples_per_domain", "noise",
                            "input_dim", "num_classes"});
    if (s.contains("family")) {
      c.suite.family = family_from_name(s.at("family").get<std::string>());
    }
    read_if(s, "angles", c.suite.domain_angles);
    read_if(s, "samples_per_domain", c.suite.samples_per_domain);
    read_if(s, "noise", c.suite.noise);
    read_if(s, "input_dim", c.suite.input_dim);
    read_if(s, "num_classes", c.suite.num_classes);
  }
  read_if(j, "rounds", c.rounds);
  read_if(j, "e0", c.e0);
  read_if(j, "e1", c.e1);
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "base_lr", c.base_lr);
  read_if(j, "lambda0", c.lambda0);
  read_if(j, "lambda1", c.lambda1);
  read_if(j, "label_smoothing", c.label_smoothing);
  read_if(j, "feature_dim", c.feature_dim);
  read_if(j, "rp_dim", c.rp_dim);
  read_if(j, "noise_dim", c.noise_dim);
  read_if(j, "hidden_dim", c.hidden_dim);
  read_if(j, "weighted_aggregation", c.weighted_aggregation);
  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array()) config_error("seeds must be an array");
    for (const auto& s : j.at("seeds")) {
      // json wraps negative integers into uint64 silently; reject instead.
      if (!s.is_number_unsigned() &&
          !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
        config_error("seeds must be nonnegative integers");
      }
    }
  }
  read_if(j, "seeds", c.seeds);
  read_if(j, "output_dir", c.output_dir);

  if (c.suite.domain_angles.size() < 3) {
    config_error("suite.angles needs at least 3 domains");
  }
  for (double a : c.suite.domain_angles) {
    if (!std::isfinite(a)) config_error("suite.angles must be finite");
  }
  if (c.suite.samples_per_domain < 2 * c.suite.num_classes) {
    config_error("samples_per_domain too small for num_classes");
  }
  if (c.suite.noise < 0.0 || !std::isfinite(c.suite.noise)) {
    config_error("suite.noise must be nonnegative");
  }
  if (c.batch_size < 1) config_error("batch_size must be >= 1");
  if (!(c.base_lr > 0.0) || !std::isfinite(c.base_lr)) {
    config_error("base_lr must be positive");
  }
  if (c.lambda0 < 0.0 || c.lambda1 < 0.0) {
    config_error("lambda0 and lambda1 must be nonnegative");
  }
  if (c.label_smoothing < 0.0 || c.label_smoothing >= 1.0) {
    config_error("label_smoothing must be in [0, 1)");
  }
  if (c.laplace_scale <= 0.0) config_error("laplace_scale must be positive");
  if (c.feature_dim < 1 || c.rp_dim < 1 || c.noise_dim < 1 ||
      c.hidden_dim < 1) {
    config_error("network dimensions must be >= 1");
  }
  if (c.suite.num_classes < 2) config_error("num_classes must be >= 2");
  if (c.suite.input_dim < 2) config_error("input_dim must be >= 2");
  if (c.seeds.empty()) config_error("seeds must be nonempty");
  if (c.output_dir.empty()) config_error("output_dir must be nonempty");
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: " + path + " is not valid JSON: " +
                                e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Evaluation at round barriers

namespace {

struct EvalNets {
  FeatureExtractor f;
  Classifier c;
  DistributionGenerator g;
  bool has_gan = false;
};

EvalNets eval_nets(const TrainingParams& tp, const ParameterVector& global) {
  // Shapes from a throwaway stream; every value is then overwritten.
  Rng dummy(0);
  EvalNets nets;
  nets.f = FeatureExtractor(dummy, tp.input_dim, tp.hidden_dim, tp.feature_dim);
  nets.c = Classifier(dummy, tp.feature_dim, tp.num_classes);
  nets.f.unflatten(global);
  nets.c.unflatten(global);
  if (tp.has_gan()) {
    nets.g = DistributionGenerator(dummy, tp.noise_dim, tp.num_classes,
                                   tp.feature_dim, tp.class_conditioned);
    nets.g.unflatten(global);
    nets.has_gan = true;
  }
  return nets;
}

std::vector<std::size_t> all_indices(const DomainDataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

RoundMetrics evaluate_round(const TrainingParams& tp, const ServerState& server,
                            const ExperimentSplit& split, std::size_t round,
                            std::uint64_t seed,
                            const std::vector<ClientReport>* reports) {
  EvalNets nets = eval_nets(tp, server.global);
  const std::size_t k = split.sources.size();

  RoundMetrics m;
  m.round = round;
  m.client_losses.assign(k, {kNan, kNan, kNan, kNan});
  if (reports) {
    for (std::size_t i = 0; i < k; ++i) {
      m.client_losses[i] = {(*reports)[i].l_err, (*reports)[i].l_adv_f,
                            (*reports)[i].l_adv_d, (*reports)[i].l_adv_g};
    }
  }

  for (const DomainDataset& src : split.sources) {
    m.source_acc.push_back(accuracy(nets.f, nets.c, src, src.test_idx));
  }
  m.target_acc = accuracy(nets.f, nets.c, split.target,
                          all_indices(split.target));

  // Alignment diagnostics on capped held-out batches; noise for the reference
  // batches comes from a per-round stream so evaluation never perturbs
  // training randomness.
  Rng eval_rng(derive_seed(seed, "eval", round));
  std::vector<ClientFeatureBatch> batches(k);
  for (std::size_t i = 0; i < k; ++i) {
    const DomainDataset& src = split.sources[i];
    std::vector<std::size_t> idx(
        src.test_idx.begin(),
        src.test_idx.begin() +
            static_cast<std::ptrdiff_t>(
                std::min(kMmdSampleCap, src.test_idx.size())));
    auto [x, y] = gather(src, idx);
    batches[i].features = nets.f.extract(nullptr, x);
    batches[i].labels = y;
    if (nets.has_gan) {
      Tensor z = sample_noise(eval_rng, y.size(), tp.noise_dim);
      batches[i].generated =
          nets.g.generate(nullptr, z, one_hot(y, tp.num_classes));
    }
  }
  AlignmentReport rep = alignment_report(batches, tp.num_classes, false);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      m.pairwise_mmd.push_back(rep.pairwise[i][j]);
    }
  }
  if (nets.has_gan) m.ref_mmd = rep.reference;
  return m;
}

}  // namespace

RunResult run_single(const ExperimentConfig& config, std::size_t target_index,
                     std::uint64_t seed, const ExecutionOptions& exec,
                     TraceHook* hook) {
  if (target_index >= config.num_domains()) {
    throw std::out_of_range("target index " + std::to_string(target_index) +
                            " out of range");
  }
  const TrainingParams tp = config.training_params();
  const ExperimentSplit split = make_split(config.suite, target_index, seed);
  ServerState server = server_init(tp, split.sources.size(), seed);
  std::vector<ClientState> clients;
  clients.reserve(split.sources.size());
  for (std::size_t i = 0; i < split.sources.size(); ++i) {
    clients.push_back(
        make_client(static_cast<int>(i), split.sources[i], tp, seed));
  }

  RunResult result;
  result.seed = seed;
  result.target_index = target_index;
  result.history.push_back(
      evaluate_round(tp, server, split, 0, seed, nullptr));
  for (std::size_t t = 1; t <= config.rounds; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<ClientReport> reports =
        run_round(server, clients, tp, exec.concurrent_clients, hook);
    const auto t1 = std::chrono::steady_clock::now();
    result.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count());
    result.history.push_back(
        evaluate_round(tp, server, split, t, seed, &reports));
  }
  result.final_params = server.global;
  result.final_target_acc = result.history.back().target_acc;
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

std::string metrics_csv(const ExperimentConfig& config,
                        std::size_t target_index, std::uint64_t seed,
                        const std::vector<RoundMetrics>& history) {
  const bool gan = config.training_params().has_gan();
  const std::size_t k = config.num_clients();
  std::ostringstream out;
  out << "# config_hash=" << hash_hex(config.hash()) << " seed=" << seed
      << " target=" << target_index << " mode=" << config.mode_label() << "\n";
  out << "round";
  for (std::size_t i = 0; i < k; ++i) {
    out << ",c" << i << "_l_err";
    if (gan) {
      out << ",c" << i << "_l_adv_f,c" << i << "_l_adv_d,c" << i << "_l_adv_g";
    }
  }
  for (std::size_t i = 0; i < k; ++i) out << ",c" << i << "_src_acc";
  out << ",target_acc";
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) out << ",mmd_" << i << "_" << j;
  }
  if (gan) {
    for (std::size_t i = 0; i < k; ++i) out << ",c" << i << "_ref_mmd";
  }
  out << "\n";

  for (const RoundMetrics& m : history) {
    out << m.round;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& cl = m.client_losses.at(i);
      out << "," << fmt_cell(cl.l_err);
      if (gan) {
        out << "," << fmt_cell(cl.l_adv_f) << "," << fmt_cell(cl.l_adv_d)
            << "," << fmt_cell(cl.l_adv_g);
      }
    }
    for (std::size_t i = 0; i < k; ++i) out << "," << fmt_cell(m.source_acc.at(i));
    out << "," << fmt_cell(m.target_acc);
    for (double v : m.pairwise_mmd) out << "," << fmt_cell(v);
    if (gan) {
      for (std::size_t i = 0; i < k; ++i) out << "," << fmt_cell(m.ref_mmd.at(i));
    }
    out << "\n";
  }
  return out.str();
}

nlohmann::json run_summary_json(const ExperimentConfig& config,
                                std::size_t target_index, std::uint64_t seed,
                                const RunResult& result) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["config_hash"] = hash_hex(config.hash());
  j["seed"] = seed;
  j["target_index"] = target_index;
  j["target_angle"] = config.suite.domain_angles.at(target_index);
  j["mode"] = config.mode_label();
  j["reference"] = reference_mode_name(config.reference);
  j["rounds"] = config.rounds;
  j["num_clients"] = config.num_clients();
  j["round0_target_acc"] = result.history.front().target_acc;
  j["final_target_acc"] = result.final_target_acc;
  j["final_source_acc"] = result.history.back().source_acc;
  std::vector<double> target_curve;
  for (const RoundMetrics& m : result.history) {
    target_curve.push_back(m.target_acc);
  }
  j["target_acc_by_round"] = target_curve;
  const RoundMetrics& last = result.history.back();
  if (!last.pairwise_mmd.empty()) {
    double acc = 0.0;
    for (double v : last.pairwise_mmd) acc += v;
    j["final_mean_pairwise_mmd"] =
        acc / static_cast<double>(last.pairwise_mmd.size());
  }
  if (!last.ref_mmd.empty()) {
    j["final_ref_mmd"] = last.ref_mmd;
    if (result.history.size() > 1) {
      j["first_round_ref_mmd"] = result.history.at(1).ref_mmd;
    }
  }
  return j;
}

namespace {

std::string run_dir_name(const ExperimentConfig& config,
                         std::size_t target_index, std::uint64_t seed) {
  std::ostringstream os;
  os << "run_" << hash_hex(config.hash()).substr(0, 8) << "_"
     << config.mode_label();
  if (config.reference != ReferenceMode::adaptive) {
    os << "_" << reference_mode_name(config.reference);
  }
  os << "_t" << target_index << "_s" << seed;
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << body;
  if (!f) throw std::runtime_error("short write to " + path.string());
}

std::string trace_log(const ExperimentConfig& config, std::uint64_t seed,
                      const RunResult& result) {
  std::ostringstream out;
  out << "config_hash=" << hash_hex(config.hash()) << " seed=" << seed
      << " target=" << result.target_index << "\n";
  for (std::size_t t = 0; t + 1 < result.history.size(); ++t) {
    const RoundMetrics& m = result.history[t + 1];
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.3f", result.wall_ms.at(t));
    out << "round=" << m.round << " wall_ms=" << wall;
    for (std::size_t i = 0; i < m.client_losses.size(); ++i) {
      const auto& cl = m.client_losses[i];
      out << " c" << i << "_l_err=" << fmt_cell(cl.l_err);
      if (!std::isnan(cl.l_adv_f)) {
        out << " c" << i << "_l_adv_f=" << fmt_cell(cl.l_adv_f) << " c" << i
            << "_l_adv_d=" << fmt_cell(cl.l_adv_d) << " c" << i
            << "_l_adv_g=" << fmt_cell(cl.l_adv_g);
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      const ExecutionOptions& exec) {
  std::vector<RunRecord> records;
  for (std::size_t target = 0; target < config.num_domains(); ++target) {
    for (std::uint64_t seed : config.seeds) {
      RunResult result = run_single(config, target, seed, exec);
      const std::filesystem::path dir =
          std::filesystem::path(config.output_dir) /
          run_dir_name(config, target, seed);
      std::filesystem::create_directories(dir);
      write_text(dir / "metrics.csv",
                 metrics_csv(config, target, seed, result.history));
      write_text(dir / "summary.json",
                 run_summary_json(config, target, seed, result).dump(2) + "\n");
      write_text(dir / "trace.log", trace_log(config, seed, result));
      Checkpoint ckpt;
      ckpt.seed = seed;
      ckpt.config_hash = config.hash();
      ckpt.params = result.final_params;
      write_checkpoint((dir / "checkpoint.bin").string(), ckpt);
      records.push_back({target, seed, result.final_target_acc, dir.string()});
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Results tables and sweeps

void ResultsTable::check_avg_column(double tol) const {
  for (std::size_t r = 0; r < cells.size(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c + 1 < cells[r].size(); ++c) {
      acc += cells[r][c].mean;
    }
    const double avg = acc / static_cast<double>(cells[r].size() - 1);
    if (std::abs(avg - cells[r].back().mean) > tol) {
      throw std::logic_error("results table: avg column mismatch in row " +
                             row_labels.at(r));
    }
  }
}

std::string ResultsTable::to_csv() const {
  std::ostringstream out;
  out << "mode";
  for (const std::string& c : col_labels) {
    out << "," << c << "_mean," << c << "_std";
  }
  out << "\n";
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    out << row_labels[r];
    for (const Cell& cell : cells[r]) {
      out << "," << fmt_double(cell.mean) << "," << fmt_double(cell.stddev);
    }
    out << "\n";
  }
  return out.str();
}

std::string ResultsTable::pretty() const {
  std::ostringstream out;
  out << "target ->";
  for (const std::string& c : col_labels) out << "  " << c;
  out << "\n";
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    out << row_labels[r] << ":";
    for (const Cell& cell : cells[r]) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "  %.4f+-%.4f", cell.mean, cell.stddev);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

namespace {

ResultsTable build_table(
    const std::vector<std::pair<std::string, ExperimentConfig>>& rows,
    const ExecutionOptions& exec) {
  ResultsTable table;
  for (const auto& [label, config] : rows) {
    std::vector<RunRecord> recs = run_experiment(config, exec);
    const std::size_t targets = config.num_domains();
    const std::size_t n_seeds = config.seeds.size();
    if (table.col_labels.empty()) {
      for (double a : config.suite.domain_angles) {
        table.col_labels.push_back(fmt_angle(a));
      }
      table.col_labels.push_back("avg");
    }
    std::vector<std::vector<double>> by_target(targets);
    std::vector<double> by_seed(n_seeds, 0.0);
    for (const RunRecord& r : recs) {
      by_target[r.target_index].push_back(r.final_target_acc);
      for (std::size_t si = 0; si < n_seeds; ++si) {
        if (config.seeds[si] == r.seed) {
          by_seed[si] += r.final_target_acc / static_cast<double>(targets);
        }
      }
    }
    auto mean_std = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      return ResultsTable::Cell{mean,
                                std::sqrt(var / static_cast<double>(v.size()))};
    };
    std::vector<ResultsTable::Cell> row;
    double avg_of_means = 0.0;
    for (std::size_t t = 0; t < targets; ++t) {
      row.push_back(mean_std(by_target[t]));
      avg_of_means += row.back().mean;
    }
    ResultsTable::Cell avg = mean_std(by_seed);
    // The average cell's mean is exactly the mean of the per-target means;
    // its std is the seed-level spread of the cross-target average.
    avg.mean = avg_of_means / static_cast<double>(targets);
    row.push_back(avg);
    table.row_labels.push_back(label);
    table.cells.push_back(std::move(row));
  }
  return table;
}

}  // namespace

ResultsTable ablation_suite(const ExperimentConfig& base,
                            const ExecutionOptions& exec) {
  // Table-4 row order; all rows share splits and seeds (paired comparison).
  std::vector<std::pair<std::string, ExperimentConfig>> rows;
  ExperimentConfig fedavg = base;
  fedavg.mode = RunMode::fedavg;
  fedavg.use_rp = true;
  fedavg.class_conditioned = true;
  fedavg.reference = ReferenceMode::adaptive;
  rows.emplace_back("FedAvg", fedavg);

  ExperimentConfig no_rp = base;
  no_rp.mode = RunMode::fedadg;
  no_rp.use_rp = false;
  no_rp.class_conditioned = true;
  rows.emplace_back("FedADG w/o RP", no_rp);

  ExperimentConfig no_onehot = base;
  no_onehot.mode = RunMode::fedadg;
  no_onehot.use_rp = true;
  no_onehot.class_conditioned = false;
  rows.emplace_back("FedADG w/o one-hot", no_onehot);

  ExperimentConfig full = base;
  full.mode = RunMode::fedadg;
  full.use_rp = true;
  full.class_conditioned = true;
  rows.emplace_back("FedADG", full);

  return build_table(rows, exec);
}

ResultsTable fixed_reference_suite(const ExperimentConfig& base,
                                   const ExecutionOptions& exec) {
  // Table-5 row order, adaptive FedADG last.
  std::vector<std::pair<std::string, ExperimentConfig>> rows;
  auto fixed = [&](ReferenceMode ref) {
    ExperimentConfig c = base;
    c.mode = RunMode::fedadg;
    c.reference = ref;
    return c;
  };
  rows.emplace_back("N(0,I)", fixed(ReferenceMode::gaussian));
  rows.emplace_back("U[-1,1]", fixed(ReferenceMode::uniform));
  rows.emplace_back("Laplace(1/sqrt(2))", fixed(ReferenceMode::laplace));
  rows.emplace_back("FedADG", fixed(ReferenceMode::adaptive));
  return build_table(rows, exec);
}

std::string RpSweepResult::to_csv() const {
  std::ostringstream out;
  out << "ratio,target,seed,accuracy\n";
  for (const RpSweepPoint& p : points) {
    char ratio[32];
    std::snprintf(ratio, sizeof(ratio), "%g", p.ratio);
    out << ratio << "," << p.target_index << "," << p.seed << ","
        << fmt_double(p.accuracy) << "\n";
  }
  return out.str();
}

RpSweepResult rp_sweep(const ExperimentConfig& base,
                       const std::vector<double>& ratios,
                       const ExecutionOptions& exec) {
  if (ratios.empty()) throw std::invalid_argument("rp_sweep: no ratios");
  RpSweepResult result;
  for (double ratio : ratios) {
    const double rp = ratio * static_cast<double>(base.feature_dim);
    if (!(rp >= 1.0)) {
      throw std::invalid_argument("rp_sweep: ratio " + std::to_string(ratio) +
                                  " gives rp_dim < 1");
    }
    ExperimentConfig config = base;
    config.mode = RunMode::fedadg;
    config.use_rp = true;
    config.rp_dim = static_cast<std::size_t>(std::llround(rp));
    for (const RunRecord& rec : run_experiment(config, exec)) {
      result.points.push_back(
          {ratio, rec.target_index, rec.seed, rec.final_target_acc});
    }
  }
  return result;
}

}  // namespace fedadg
