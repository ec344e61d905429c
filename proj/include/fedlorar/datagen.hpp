#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedlorar/data.hpp"

namespace fedlorar {

// Synthetic heterogeneous population: per-client size skew (explicit size
// vector), label skew (Dirichlet class priors), and per-client feature
// rotation for distribution shift.
struct PopulationSpec {
    std::size_t num_clients = 8;
    std::vector<std::size_t> sizes; // train sizes |D_i|
    double label_skew_alpha = 0.3;
    std::vector<double> rotation_angles; // radians per client; empty = spread over [0, max]
    double max_rotation = 1.0;
    std::size_t num_classes = 8;
    std::size_t input_dim = 16;
    double class_separation = 2.0;
    double noise_sigma = 1.0;
    // train:dev:test ratio, train fixed at `sizes`
    double dev_fraction = 1.0 / 7.0;
    double test_fraction = 2.0 / 7.0;
    std::uint64_t seed = 0;
};

// Train sizes from the eight-client reference population (two large, three
// medium, three small).
std::vector<std::size_t> reference_client_sizes();

PopulationSpec default_population_spec();

void validate(const PopulationSpec& spec);

// Deterministic in spec.seed. Class-conditional Gaussians with shared
// global means; client i's prior is Dirichlet(alpha) and its inputs are
// rotated by its angle. Dev/test are drawn fresh from the same client
// distribution.
Population generate_population(const PopulationSpec& spec);

// Concatenates clients (ascending client_id) into one dataset.
ClientDataset merge(const Population& datasets);

// Columnar text format: header line, then one example per line as
// comma-separated features, a tab, and the integer label.
void save_split(std::ostream& os, const Split& split);
Split load_split(std::istream& is);
void save_dataset(const ClientDataset& ds, const std::string& dir);
ClientDataset load_dataset(const std::string& dir, int client_id);

} // namespace fedlorar
