#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedlorar/data.hpp"
#include "fedlorar/model.hpp"
#include "fedlorar/optim.hpp"
#include "fedlorar/tensor.hpp"

namespace fedlorar {

enum class AlgorithmKind { FedAvg, FedOpt, FedProx };
enum class WeightingKind { Size, Equal, LossReductionOnly, Lorar };

AlgorithmKind algorithm_kind_from_string(const std::string& s);
std::string to_string(AlgorithmKind k);
WeightingKind weighting_kind_from_string(const std::string& s);
std::string to_string(WeightingKind k);

struct AlgorithmSpec {
    AlgorithmKind kind = AlgorithmKind::FedOpt;
    double mu = 0.0001; // fedprox proximal coefficient
    OptimizerSpec client_opt{OptimizerKind::Sgd, 0.05, 0.0, 0.999, 1e-8};
    OptimizerSpec server_opt{OptimizerKind::SgdMomentum, 1.0, 0.9, 0.999, 1e-8};
    std::vector<std::size_t> local_epochs; // per client; empty = default_local_epochs for all
    std::size_t default_local_epochs = 1;
    std::size_t batch_size = 32;
    std::size_t rounds = 60;
    WeightingKind weighting = WeightingKind::Size;
};

void validate(const AlgorithmSpec& spec);

// fedavg fixes the server rule to plain sgd with eta = 1; fedprox with
// mu = 0 degenerates to fedavg's local objective.
OptimizerSpec effective_server_opt(const AlgorithmSpec& spec);

std::size_t local_epochs_for(const AlgorithmSpec& spec, std::size_t client_index);

// Per-round client message: the local change delta = w_t - w_local and the
// scalar |D_i| * (max epoch loss - min epoch loss) the server needs for
// loss-reduction weighting.
struct ClientUpdate {
    int client_id = 0;
    ParamVector delta;
    double weighted_loss_reduction = 0.0; // |D_i| * deltaL_i
    std::uint64_t train_size = 0;
    std::vector<double> epoch_losses;
};

struct DevMetrics {
    double macro_avg = 0.0;
    double micro_avg = 0.0;
};

struct RoundRecord {
    std::size_t round = 0;
    std::vector<double> weights; // p_i, ascending client_id
    double aggregate_norm = 0.0;
    std::vector<std::vector<double>> epoch_losses; // per client
    bool weight_fallback = false; // degenerate denominator, fell back per mechanism
    std::optional<DevMetrics> dev;
};

// Runs E_i local epochs of mini-batch steps from global_w and packages the
// resulting update. Epoch shuffling and any optimizer state are seeded by
// round_seed so replays are exact.
ClientUpdate local_training(int client_id, const ParamVector& global_w,
                            const ClientDataset& dataset, const ModelSpec& model,
                            const AlgorithmSpec& algo, std::uint64_t round_seed);

struct WeightResult {
    std::vector<double> weights;
    bool fallback = false;
};

// Per-client aggregation weights p_i for one round. Degenerate loss
// reductions fall back to size weights (lorar) or equal weights
// (loss-reduction-only) and set the fallback flag.
WeightResult compute_weights(const std::vector<ClientUpdate>& updates, WeightingKind mechanism);

// delta-w = sum p_i delta_i, then one server optimizer step treating
// delta-w as the pseudo-gradient.
ParamVector aggregate_and_update(Optimizer& server_opt, const ParamVector& global_w,
                                 const std::vector<ClientUpdate>& updates,
                                 const std::vector<double>& weights);

// Per-round seed shared by both transports.
std::uint64_t round_seed(std::uint64_t run_seed, std::size_t round);

// One logical client as seen by the server's round loop. The in-process
// and socket transports implement the same interface, so the server-side
// protocol is shared verbatim between them.
class ClientEndpoint {
public:
    virtual ~ClientEndpoint() = default;
    virtual int client_id() const = 0;
    virtual ClientUpdate run_round(std::size_t round, const ParamVector& global_w,
                                   std::uint64_t seed) = 0;
    virtual void shutdown() {}
};

class LocalClientEndpoint : public ClientEndpoint {
public:
    LocalClientEndpoint(const ClientDataset* dataset, const ModelSpec* model,
                        const AlgorithmSpec* algo)
        : dataset_(dataset), model_(model), algo_(algo) {}
    int client_id() const override { return dataset_->client_id; }
    ClientUpdate run_round(std::size_t round, const ParamVector& global_w,
                           std::uint64_t seed) override;

private:
    const ClientDataset* dataset_;
    const ModelSpec* model_;
    const AlgorithmSpec* algo_;
};

using DevEvaluator = std::function<DevMetrics(const ParamVector&)>;

struct FederatedResult {
    ParamVector final_model;
    ParamVector best_model;
    std::size_t best_round = 0; // round index whose dev eval won
    double best_micro = -1.0;
    std::vector<RoundRecord> rounds;
};

// Shared round loop: broadcast, collect (sorted by client_id), weight,
// aggregate, server step, periodic dev evaluation with best-checkpoint
// tracking by merged-dev MicroAvg.
FederatedResult run_round_loop(const ModelSpec& model, const AlgorithmSpec& algo,
                               std::vector<ClientEndpoint*> endpoints, std::uint64_t seed,
                               std::size_t eval_every, const DevEvaluator& dev_eval);

// In-process driver over a generated population; clients train on worker
// threads, one per client.
FederatedResult run_federated(const ModelSpec& model, const AlgorithmSpec& algo,
                              const Population& population, std::uint64_t seed,
                              std::size_t eval_every);

// Merged-dev evaluator used for best-model selection.
DevEvaluator merged_dev_evaluator(const ModelSpec& model, const Population& population);

// Line-delimited JSON for the round log.
std::string to_jsonl_line(const RoundRecord& rec);
RoundRecord round_record_from_json(const std::string& line);

} // namespace fedlorar
