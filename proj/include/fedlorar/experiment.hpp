#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedlorar/datagen.hpp"
#include "fedlorar/engine.hpp"
#include "fedlorar/metrics.hpp"

namespace fedlorar {

enum class Paradigm { Finetune, Centralized, Federated };

Paradigm paradigm_from_string(const std::string& s);
std::string to_string(Paradigm p);

enum class Transport { InProc, Tcp };

struct ExperimentConfig {
    Paradigm paradigm = Paradigm::Federated;
    AlgorithmSpec algo;
    ModelSpec model;
    PopulationSpec population;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::size_t eval_every = 5;
    std::size_t max_epochs = 60; // finetune / centralized epoch budget
    Transport transport = Transport::InProc;
    std::string bind_addr = "127.0.0.1";
    int port = 15751;
};

// Reference configuration mirroring the eight-client setup: Table-1 train
// sizes, 60 rounds, server lr 1 with momentum 0.9, mu = 1e-4, local epochs
// 6 for the two largest clients and 12 for the rest, dev eval every 5.
ExperimentConfig default_config();

// Six epochs for the two largest clients, twelve for everyone else.
std::vector<std::size_t> default_local_epochs(const std::vector<std::size_t>& sizes);

// Flat key = value file with '#' comments; unknown keys are rejected.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
void apply_config_line(ExperimentConfig& config, const std::string& key, const std::string& value);

// Cross-field validation (model vs population dims).
void validate(const ExperimentConfig& config);

std::string config_to_json(const ExperimentConfig& config);

// One model per client from the shared initialization; per-client
// dev-based best checkpoint; scored on that client's test split.
EvalReport run_finetune(const ExperimentConfig& config, const Population& population);

// One model on the merged training data; best checkpoint by merged-dev
// MicroAvg; scored per client.
EvalReport run_centralized(const ExperimentConfig& config, const Population& population);

struct FederatedExperimentOutput {
    EvalReport report; // best model scored on per-client test splits
    FederatedResult result;
};

// Runs the federated paradigm (in-process or over TCP as the server) and
// writes manifest.json, rounds.jsonl, dev_curve.csv, loss_client_<id>.csv
// and report.json under output_dir.
FederatedExperimentOutput run_federated_experiment(const ExperimentConfig& config);

void write_manifest(const ExperimentConfig& config, const std::string& dir);
void write_round_log(const std::vector<RoundRecord>& rounds, const std::string& path);
std::vector<RoundRecord> read_round_log(const std::string& path);

// Plot data from a round log: per-client step/loss CSVs and the dev curve.
void emit_plot_data(const std::vector<RoundRecord>& rounds, const std::string& dir);

// Table-shaped comparison across finished runs (reads report.json files).
std::string compare_runs(const std::vector<std::string>& run_dirs);

} // namespace fedlorar
