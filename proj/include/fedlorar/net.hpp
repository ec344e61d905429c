#pragma once

#include <cstdint>
#include <string>

#include "fedlorar/engine.hpp"

namespace fedlorar {

// TCP transport for the round protocol (Hello -> [GlobalModel -> Update]*
// -> Shutdown). Frame format per wire.hpp; a dropped client aborts the run
// with ClientDisconnected.

// Blocks until num_clients have connected and sent Hello, then drives the
// shared round loop over the sockets. Produces the same FederatedResult as
// the in-process driver for the same config and seed.
FederatedResult run_server(const std::string& bind_addr, int port, const ModelSpec& model,
                           const AlgorithmSpec& algo, std::size_t num_clients, std::uint64_t seed,
                           std::size_t eval_every, const DevEvaluator& dev_eval);

// Client loop: connect, Hello, then train on each received global model
// until Shutdown. The run seed must match the server's so per-round
// training seeds agree.
void run_client(const std::string& server_addr, int port, int client_id,
                const ClientDataset& dataset, const ModelSpec& model, const AlgorithmSpec& algo,
                std::uint64_t seed);

} // namespace fedlorar
