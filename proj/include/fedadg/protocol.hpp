#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "fedadg/domains.hpp"
#include "fedadg/losses.hpp"
#include "fedadg/networks.hpp"
#include "fedadg/params.hpp"
#include "fedadg/rng.hpp"

namespace fedadg {

enum class RunMode { fedadg, fedavg };

// What plays the "positive samples" for the discriminator: features drawn
// from the trained generator (adaptive) or from a fixed distribution.
enum class ReferenceMode { adaptive, gaussian, uniform, laplace };

std::string run_mode_name(RunMode m);
std::string reference_mode_name(ReferenceMode m);

// Everything client_update and server_init need to know. Learning rates
// follow a 10:7 split: F and C step at base_lr, G and D at 0.7 * base_lr.
struct TrainingParams {
  RunMode mode = RunMode::fedadg;
  ReferenceMode reference = ReferenceMode::adaptive;
  double laplace_scale = 0.7071067811865476;  // 1/sqrt(2)
  bool use_rp = true;             // false: identity projection (ablation)
  bool class_conditioned = true;  // false: no one-hot inputs (ablation)
  std::size_t e0 = 2;             // classifier-only epochs per round
  std::size_t e1 = 5;             // adversarial epochs per round
  std::size_t batch_size = 32;
  double base_lr = 0.035;
  LossWeights weights;
  double label_smoothing = 0.1;
  std::size_t input_dim = 2;
  std::size_t num_classes = 2;
  std::size_t feature_dim = 32;
  std::size_t rp_dim = 16;
  std::size_t noise_dim = 16;
  std::size_t hidden_dim = 64;
  bool weighted_aggregation = false;  // off-by-default sensitivity flag

  double gan_lr() const { return 0.7 * base_lr; }
  bool has_gan() const { return mode == RunMode::fedadg; }
  bool trains_generator() const {
    return has_gan() && reference == ReferenceMode::adaptive;
  }
};

// The only thing that crosses the client/server boundary: {w_f, w_c, w_g}.
// Discriminator weights, projection matrices, samples and labels are all
// rejected at serialization AND deserialization time.
bool is_federated_segment(const std::string& name);

struct RoundMessage {
  enum class Direction : std::uint8_t { server_to_client = 0, client_to_server = 1 };
  Direction direction = Direction::server_to_client;
  std::uint64_t round = 0;
  ParameterVector params;

  std::vector<std::uint8_t> serialize() const;
  static RoundMessage deserialize(const std::uint8_t* data, std::size_t len);
};

struct ServerState {
  std::uint64_t round = 0;
  std::size_t num_clients = 0;
  ParameterVector global;
  std::size_t history_limit = 1;
  std::deque<ParameterVector> history;  // most recent last, bounded
};

struct ClientState {
  int id = 0;
  const DomainDataset* data = nullptr;
  FeatureExtractor f;
  Classifier c;
  DistributionGenerator g;  // present but untrained under fixed references
  Discriminator d;          // local only, never serialized
  bool has_gan = false;
  Rng batch_rng{0};
  Rng noise_rng{0};
  std::size_t epochs_run = 0;  // monotone bookkeeping
};

// Step s1. Global components drawn from the "server_init" stream of the
// experiment seed. Rejects K < 2.
ServerState server_init(const TrainingParams& params, std::size_t num_clients,
                        std::uint64_t seed);

// Local state for client k: discriminator from the per-client "disc" stream,
// shared projection from the experiment-wide "rp" stream.
ClientState make_client(int id, const DomainDataset& data,
                        const TrainingParams& params, std::uint64_t seed);

// Shuffled copy of the real mini-batch's labels: the empirical label
// distribution of generated samples matches S_x exactly.
std::vector<int> noise_batch_labels(Rng& rng, const std::vector<int>& real_labels);

// Diagnostic taps for protocol-trace tests. `on_client_begin` fires once per
// round right after the broadcast parameters are installed; `on_step` fires
// after each optimizer step with the step's protocol label ("c2c3" classifier
// step, "c5" adversarial extractor step, "c7" discriminator step, "c8"
// generator step). Hooks are for sequential runs; run_round rejects
// hook+concurrent.
struct TraceHook {
  virtual ~TraceHook() = default;
  virtual void on_message(const RoundMessage&) {}
  virtual void on_client_begin(const ClientState&) {}
  virtual void on_step(const ClientState&, std::string_view /*step*/) {}
};

struct ClientReport {
  int id = 0;
  ParameterVector params;
  // Mean training-loss parts over the round; NaN where not applicable.
  double l_err = 0.0, l_adv_f = 0.0, l_adv_d = 0.0, l_adv_g = 0.0;
};

// Steps c1-c9. Mutates local state, returns the uploaded parameters and the
// round's mean loss parts. `round` is for error coordinates only.
ClientReport client_update(ClientState& state, const ParameterVector& w,
                           const TrainingParams& params, std::uint64_t round,
                           TraceHook* hook = nullptr);

// Steps s2-s3: broadcast, client updates (sequentially or on one thread per
// client), then the unweighted mean over sorted client ids. Every message is
// forced through its byte serialization so the whitelist applies to real
// traffic, not just intent.
std::vector<ClientReport> run_round(ServerState& server,
                                    std::vector<ClientState>& clients,
                                    const TrainingParams& params,
                                    bool concurrent = false,
                                    TraceHook* hook = nullptr);

}  // namespace fedadg
