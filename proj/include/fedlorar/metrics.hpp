#pragma once

#include <string>
#include <vector>

#include "fedlorar/data.hpp"
#include "fedlorar/model.hpp"

namespace fedlorar {

struct ClientScore {
    int client_id = 0;
    std::size_t test_size = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
};

struct EvalReport {
    std::vector<ClientScore> per_client;
    double macro_avg = 0.0; // mean of per-client accuracies
    double micro_avg = 0.0; // pooled correct / pooled size
};

// Arithmetic mean of per-client accuracies.
double macro_average(const std::vector<double>& accuracies);

// Pooled accuracy from integer correct counts and test sizes.
double micro_average(const std::vector<std::size_t>& correct,
                     const std::vector<std::size_t>& sizes);

// Scores the global model on every client's test split.
EvalReport evaluate_all(const ModelSpec& spec, const ParamVector& w, const Population& population);

// JSON serialization and a table layout (per-client columns, then
// MacroAvg and MicroAvg, percentages with two decimals).
std::string to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);
std::string to_table_text(const std::string& row_label, const EvalReport& report);

} // namespace fedlorar
