// Command-line front end: run | ablation | fixed-ref | rp-sweep | dump-data.
// Configuration comes from an optional JSON file plus per-key flag overrides
// (flags win and are logged to stderr). Failures exit nonzero with a one-line
// error JSON on stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedadg/domains.hpp"
#include "fedadg/experiment.hpp"

namespace {

using fedadg::ExperimentConfig;

struct Overrides {
  std::optional<std::string> mode, reference, output_dir, family;
  std::optional<double> laplace_scale, base_lr, lambda0, lambda1,
      label_smoothing, noise;
  std::optional<std::size_t> rounds, e0, e1, batch_size, feature_dim, rp_dim,
      noise_dim, hidden_dim, samples, input_dim, num_classes;
  std::optional<bool> weighted_aggregation;
  std::optional<std::vector<double>> angles;
  std::optional<std::vector<std::uint64_t>> seeds;
};

void add_override_flags(CLI::App& cmd, std::string& config_path, Overrides& o) {
  cmd.add_option("--config", config_path, "JSON config file");
  cmd.add_option("--mode", o.mode,
                 "fedadg | fedavg | fedadg_no_rp | fedadg_no_onehot");
  cmd.add_option("--reference", o.reference,
                 "adaptive | gaussian | uniform | laplace");
  cmd.add_option("--laplace-scale", o.laplace_scale, "fixed Laplace scale b");
  cmd.add_option("--rounds", o.rounds, "federated rounds T");
  cmd.add_option("--e0", o.e0, "classifier-only epochs per round");
  cmd.add_option("--e1", o.e1, "adversarial epochs per round");
  cmd.add_option("--batch-size", o.batch_size, "mini-batch size");
  cmd.add_option("--base-lr", o.base_lr, "F/C learning rate (G/D get 0.7x)");
  cmd.add_option("--lambda0", o.lambda0, "weight on L_adv_f");
  cmd.add_option("--lambda1", o.lambda1, "weight on L_err");
  cmd.add_option("--label-smoothing", o.label_smoothing, "CE smoothing eps");
  cmd.add_option("--feature-dim", o.feature_dim, "feature dimension");
  cmd.add_option("--rp-dim", o.rp_dim, "random projection dimension");
  cmd.add_option("--noise-dim", o.noise_dim, "generator noise dimension");
  cmd.add_option("--hidden-dim", o.hidden_dim, "extractor hidden width");
  cmd.add_option("--weighted-aggregation", o.weighted_aggregation,
                 "weight client updates by train-set size");
  cmd.add_option("--seeds", o.seeds, "experiment seeds");
  cmd.add_option("--output-dir", o.output_dir, "run directory root");
  cmd.add_option("--suite-family", o.family,
                 "rotated_two_moons | shifted_gaussian_mixture");
  cmd.add_option("--suite-angles", o.angles, "domain rotation angles, degrees");
  cmd.add_option("--suite-samples", o.samples, "samples per domain");
  cmd.add_option("--suite-noise", o.noise, "domain noise level");
  cmd.add_option("--suite-input-dim", o.input_dim, "sample dimension");
  cmd.add_option("--suite-num-classes", o.num_classes, "number of classes");
}

template <typename T>
void apply(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (!v) return;
  j[key] = *v;
  std::cerr << "override " << key << "=" << nlohmann::json(*v).dump() << "\n";
}

template <typename T>
void apply_suite(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (!v) return;
  j["suite"][key] = *v;
  std::cerr << "override suite." << key << "=" << nlohmann::json(*v).dump()
            << "\n";
}

ExperimentConfig resolve_config(const std::string& config_path,
                                const Overrides& o) {
  ExperimentConfig base;
  if (!config_path.empty()) base = ExperimentConfig::from_file(config_path);
  nlohmann::json j = base.to_json();
  apply(j, "mode", o.mode);
  apply(j, "reference", o.reference);
  apply(j, "laplace_scale", o.laplace_scale);
  apply(j, "rounds", o.rounds);
  apply(j, "e0", o.e0);
  apply(j, "e1", o.e1);
  apply(j, "batch_size", o.batch_size);
  apply(j, "base_lr", o.base_lr);
  apply(j, "lambda0", o.lambda0);
  apply(j, "lambda1", o.lambda1);
  apply(j, "label_smoothing", o.label_smoothing);
  apply(j, "feature_dim", o.feature_dim);
  apply(j, "rp_dim", o.rp_dim);
  apply(j, "noise_dim", o.noise_dim);
  apply(j, "hidden_dim", o.hidden_dim);
  apply(j, "weighted_aggregation", o.weighted_aggregation);
  apply(j, "seeds", o.seeds);
  apply(j, "output_dir", o.output_dir);
  apply_suite(j, "family", o.family);
  apply_suite(j, "angles", o.angles);
  apply_suite(j, "samples_per_domain", o.samples);
  apply_suite(j, "noise", o.noise);
  apply_suite(j, "input_dim", o.input_dim);
  apply_suite(j, "num_classes", o.num_classes);
  return ExperimentConfig::from_json(j);  // full validation after overrides
}

void write_or_print(const std::string& path, const std::string& body) {
  if (path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << body;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated adversarial domain-generalization experiments"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides o;
  bool concurrent = false;

  auto* run = app.add_subcommand("run", "train every (target, seed) pair");
  add_override_flags(*run, config_path, o);
  run->add_flag("--concurrent", concurrent,
                "run clients on one thread each (same results as sequential)");

  auto* ablation =
      app.add_subcommand("ablation", "FedAvg / w-o RP / w-o one-hot / FedADG");
  add_override_flags(*ablation, config_path, o);
  ablation->add_flag("--concurrent", concurrent);

  auto* fixed_ref = app.add_subcommand(
      "fixed-ref", "fixed reference distributions vs adaptive FedADG");
  add_override_flags(*fixed_ref, config_path, o);
  fixed_ref->add_flag("--concurrent", concurrent);

  std::vector<double> ratios{0.25, 0.5, 1.0, 2.0};
  auto* sweep = app.add_subcommand("rp-sweep", "projection-size ratio sweep");
  add_override_flags(*sweep, config_path, o);
  sweep->add_flag("--concurrent", concurrent);
  sweep->add_option("--ratios", ratios, "rp_dim / feature_dim ratios");

  std::string dump_out;
  std::uint64_t dump_seed = 0;
  bool dump_seed_set = false;
  auto* dump = app.add_subcommand("dump-data", "emit the domain suite as CSV");
  add_override_flags(*dump, config_path, o);
  dump->add_option("--seed", dump_seed, "seed (default: first config seed)")
      ->each([&](const std::string&) { dump_seed_set = true; });
  dump->add_option("--out", dump_out, "output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig config = resolve_config(config_path, o);
    const fedadg::ExecutionOptions exec{concurrent};

    if (run->parsed()) {
      const auto records = fedadg::run_experiment(config, exec);
      double sum = 0.0;
      for (const auto& r : records) {
        std::cout << "target=" << r.target_index << " seed=" << r.seed
                  << " final_target_acc=" << r.final_target_acc << " dir="
                  << r.run_dir << "\n";
        sum += r.final_target_acc;
      }
      std::cout << "mean_target_acc="
                << sum / static_cast<double>(records.size()) << "\n";
    } else if (ablation->parsed()) {
      const auto table = fedadg::ablation_suite(config, exec);
      table.check_avg_column();
      std::cout << table.pretty();
      const auto path = std::filesystem::path(config.output_dir) /
                        ("ablation_" + fedadg::hash_hex(config.hash()).substr(0, 8) + ".csv");
      std::filesystem::create_directories(config.output_dir);
      write_or_print(path.string(), table.to_csv());
      std::cout << "table_csv=" << path.string() << "\n";
    } else if (fixed_ref->parsed()) {
      const auto table = fedadg::fixed_reference_suite(config, exec);
      table.check_avg_column();
      std::cout << table.pretty();
      const auto path = std::filesystem::path(config.output_dir) /
                        ("fixed_ref_" + fedadg::hash_hex(config.hash()).substr(0, 8) + ".csv");
      std::filesystem::create_directories(config.output_dir);
      write_or_print(path.string(), table.to_csv());
      std::cout << "table_csv=" << path.string() << "\n";
    } else if (sweep->parsed()) {
      const auto result = fedadg::rp_sweep(config, ratios, exec);
      const auto path = std::filesystem::path(config.output_dir) /
                        ("rp_sweep_" + fedadg::hash_hex(config.hash()).substr(0, 8) + ".csv");
      std::filesystem::create_directories(config.output_dir);
      write_or_print(path.string(), result.to_csv());
      std::cout << "sweep_csv=" << path.string() << "\n";
    } else if (dump->parsed()) {
      const std::uint64_t seed = dump_seed_set ? dump_seed : config.seeds.front();
      // target choice does not matter for the dump: all leave-one-out splits
      // share the same generated domains, so dump them all in angle order.
      const auto split = fedadg::make_split(config.suite, 0, seed);
      std::vector<const fedadg::DomainDataset*> all;
      all.push_back(&split.target);
      for (const auto& s : split.sources) all.push_back(&s);
      std::sort(all.begin(), all.end(),
                [](const auto* a, const auto* b) {
                  return a->domain_id < b->domain_id;
                });
      std::ostringstream body;
      fedadg::dump_datasets_csv(body, all);
      write_or_print(dump_out, body.str());
    }
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
