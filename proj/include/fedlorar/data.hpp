#pragma once

#include <cstddef>
#include <vector>

namespace fedlorar {

// A labeled split. Inputs are row-major (size x input_dim). Targets hold
// class indices for classification and real values for regression.
struct Split {
    std::vector<double> inputs;
    std::vector<double> targets;
    std::size_t size = 0;
    std::size_t input_dim = 0;
};

// One client's data: train/dev/test drawn from the same client distribution.
// `train.size` is the |D_i| that enters every weighting formula.
struct ClientDataset {
    int client_id = 0;
    Split train;
    Split dev;
    Split test;
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;

    std::size_t size() const { return train.size; }
};

using Population = std::vector<ClientDataset>;

} // namespace fedlorar
