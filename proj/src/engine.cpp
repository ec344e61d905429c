#include "fedlorar/engine.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "fedlorar/errors.hpp"
#include "fedlorar/rng.hpp"

namespace fedlorar {

AlgorithmKind algorithm_kind_from_string(const std::string& s) {
    if (s == "fedavg") return AlgorithmKind::FedAvg;
    if (s == "fedopt") return AlgorithmKind::FedOpt;
    if (s == "fedprox") return AlgorithmKind::FedProx;
    throw InvalidSpec("unknown algorithm: " + s);
}

std::string to_string(AlgorithmKind k) {
    switch (k) {
    case AlgorithmKind::FedAvg: return "fedavg";
    case AlgorithmKind::FedOpt: return "fedopt";
    case AlgorithmKind::FedProx: return "fedprox";
    }
    return "?";
}

WeightingKind weighting_kind_from_string(const std::string& s) {
    if (s == "size") return WeightingKind::Size;
    if (s == "equal") return WeightingKind::Equal;
    if (s == "lr" || s == "loss-reduction-only") return WeightingKind::LossReductionOnly;
    if (s == "lorar") return WeightingKind::Lorar;
    throw InvalidSpec("unknown weighting mechanism: " + s);
}

std::string to_string(WeightingKind k) {
    switch (k) {
    case WeightingKind::Size: return "size";
    case WeightingKind::Equal: return "equal";
    case WeightingKind::LossReductionOnly: return "loss-reduction-only";
    case WeightingKind::Lorar: return "lorar";
    }
    return "?";
}

void validate(const AlgorithmSpec& spec) {
    if (spec.mu < 0.0) throw InvalidSpec("mu must be >= 0");
    if (spec.batch_size < 1) throw InvalidSpec("batch_size must be >= 1");
    if (spec.default_local_epochs < 1) throw InvalidSpec("local epochs must be >= 1");
    for (std::size_t e : spec.local_epochs) {
        if (e < 1) throw InvalidSpec("local epochs must be >= 1");
    }
    validate(spec.client_opt);
    validate(spec.server_opt);
}

OptimizerSpec effective_server_opt(const AlgorithmSpec& spec) {
    // only fedopt runs a real server optimizer; fedavg and fedprox average
    // the deltas directly (unit-rate sgd on the pseudo-gradient)
    if (spec.kind == AlgorithmKind::FedOpt) return spec.server_opt;
    return OptimizerSpec{OptimizerKind::Sgd, 1.0, 0.0, 0.999, 1e-8};
}

std::size_t local_epochs_for(const AlgorithmSpec& spec, std::size_t client_index) {
    if (spec.local_epochs.empty()) return spec.default_local_epochs;
    if (client_index >= spec.local_epochs.size()) {
        throw InvalidSpec("no local_epochs entry for client " + std::to_string(client_index));
    }
    return spec.local_epochs[client_index];
}

std::uint64_t round_seed(std::uint64_t run_seed, std::size_t round) {
    return derive_seed(run_seed, 0x70f4d, round);
}

ClientUpdate local_training(int client_id, const ParamVector& global_w,
                            const ClientDataset& dataset, const ModelSpec& model,
                            const AlgorithmSpec& algo, std::uint64_t seed) {
    validate(algo);
    if (dataset.train.size == 0) throw EmptyDataset("client has no training examples");
    if (global_w.size() != param_dim(model)) {
        throw DimensionMismatch("local_training: global model dim != spec dim");
    }
    const bool prox = algo.kind == AlgorithmKind::FedProx && algo.mu > 0.0;

    ParamVector w = global_w;
    Optimizer opt(algo.client_opt);
    Rng rng(derive_seed(seed, 0x10ca1, static_cast<std::uint64_t>(client_id)));

    const std::size_t epochs = local_epochs_for(algo, static_cast<std::size_t>(client_id));
    const std::size_t n = dataset.train.size;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::vector<double> epoch_losses;
    epoch_losses.reserve(epochs);
    Batch batch;
    batch.split = &dataset.train;

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t num_batches = 0;
        for (std::size_t start = 0; start < n; start += algo.batch_size) {
            const std::size_t end = std::min(n, start + algo.batch_size);
            batch.rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                              order.begin() + static_cast<std::ptrdiff_t>(end));
            auto [batch_loss, grad] = loss_and_grad(model, w, batch);
            if (prox) {
                // Eq: f_i(w,b) + mu/2 ||w - w_t||^2, gradient mu * (w - w_t)
                double prox_term = 0.0;
                for (std::size_t k = 0; k < w.size(); ++k) {
                    const double diff = w[k] - global_w[k];
                    grad[k] += algo.mu * diff;
                    prox_term += diff * diff;
                }
                batch_loss += 0.5 * algo.mu * prox_term;
            }
            loss_sum += batch_loss;
            ++num_batches;
            opt.step(w, grad);
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(num_batches));
    }

    ClientUpdate update;
    update.client_id = client_id;
    update.train_size = dataset.train.size;
    update.epoch_losses = std::move(epoch_losses);
    update.delta = axpy(-1.0, w, global_w); // w_t - w_local
    const auto [min_it, max_it] =
        std::minmax_element(update.epoch_losses.begin(), update.epoch_losses.end());
    const double reduction = std::max(0.0, *max_it - *min_it);
    update.weighted_loss_reduction = static_cast<double>(update.train_size) * reduction;
    return update;
}

WeightResult compute_weights(const std::vector<ClientUpdate>& updates, WeightingKind mechanism) {
    if (updates.empty()) throw EmptyInput("compute_weights: no updates");
    const std::size_t n = updates.size();
    WeightResult result;
    result.weights.resize(n);

    auto size_weights = [&] {
        double total = 0.0;
        for (const auto& u : updates) total += static_cast<double>(u.train_size);
        for (std::size_t i = 0; i < n; ++i) {
            result.weights[i] = static_cast<double>(updates[i].train_size) / total;
        }
    };
    auto equal_weights = [&] {
        std::fill(result.weights.begin(), result.weights.end(), 1.0 / static_cast<double>(n));
    };

    switch (mechanism) {
    case WeightingKind::Size:
        size_weights();
        break;
    case WeightingKind::Equal:
        equal_weights();
        break;
    case WeightingKind::LossReductionOnly: {
        // deltaL_i recovered from the wire scalar |D_i| * deltaL_i
        double total = 0.0;
        for (const auto& u : updates) {
            total += u.weighted_loss_reduction / static_cast<double>(u.train_size);
        }
        if (total <= 0.0) {
            equal_weights();
            result.fallback = true;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            result.weights[i] =
                updates[i].weighted_loss_reduction / static_cast<double>(updates[i].train_size) / total;
        }
        break;
    }
    case WeightingKind::Lorar: {
        double total = 0.0;
        for (const auto& u : updates) total += u.weighted_loss_reduction;
        if (total <= 0.0) {
            // all clients at a plateau; size weighting is the base case
            size_weights();
            result.fallback = true;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            result.weights[i] = updates[i].weighted_loss_reduction / total;
        }
        break;
    }
    }
    return result;
}

ParamVector aggregate_and_update(Optimizer& server_opt, const ParamVector& global_w,
                                 const std::vector<ClientUpdate>& updates,
                                 const std::vector<double>& weights) {
    if (updates.size() != weights.size()) {
        throw DimensionMismatch("aggregate_and_update: weights/updates length mismatch");
    }
    std::vector<ParamVector> deltas;
    deltas.reserve(updates.size());
    for (const auto& u : updates) {
        if (u.delta.size() != global_w.size()) {
            throw DimensionMismatch("aggregate_and_update: update dim != global dim");
        }
        deltas.push_back(u.delta);
    }
    const ParamVector aggregate = weighted_sum(weights, deltas);
    ParamVector w = global_w;
    server_opt.step(w, aggregate);
    return w;
}

ClientUpdate LocalClientEndpoint::run_round(std::size_t /*round*/, const ParamVector& global_w,
                                            std::uint64_t seed) {
    return local_training(dataset_->client_id, global_w, *dataset_, *model_, *algo_, seed);
}

FederatedResult run_round_loop(const ModelSpec& model, const AlgorithmSpec& algo,
                               std::vector<ClientEndpoint*> endpoints, std::uint64_t seed,
                               std::size_t eval_every, const DevEvaluator& dev_eval) {
    validate(algo);
    if (endpoints.empty()) throw EmptyPopulation("run_round_loop: no clients");
    if (eval_every == 0) throw InvalidSpec("eval_every must be >= 1");
    std::sort(endpoints.begin(), endpoints.end(),
              [](const ClientEndpoint* a, const ClientEndpoint* b) {
                  return a->client_id() < b->client_id();
              });

    FederatedResult result;
    ParamVector w = init_params(model, seed);
    Optimizer server_opt(effective_server_opt(algo));

    for (std::size_t t = 0; t < algo.rounds; ++t) {
        const std::uint64_t rseed = round_seed(seed, t);
        std::vector<ClientUpdate> updates(endpoints.size());
        std::vector<std::exception_ptr> errors(endpoints.size());
        {
            std::vector<std::thread> workers;
            workers.reserve(endpoints.size());
            for (std::size_t i = 0; i < endpoints.size(); ++i) {
                workers.emplace_back([&, i] {
                    try {
                        updates[i] = endpoints[i]->run_round(t, w, rseed);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                });
            }
            for (auto& th : workers) th.join();
        }
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
        // round barrier passed; fix the aggregation order
        std::sort(updates.begin(), updates.end(),
                  [](const ClientUpdate& a, const ClientUpdate& b) {
                      return a.client_id < b.client_id;
                  });

        auto weighting = compute_weights(updates, algo.weighting);
        const ParamVector next_w = aggregate_and_update(server_opt, w, updates, weighting.weights);

        RoundRecord rec;
        rec.round = t;
        rec.weights = weighting.weights;
        rec.weight_fallback = weighting.fallback;
        {
            // ||delta-w|| of the weighted aggregate, not of the applied server step
            std::vector<ParamVector> deltas;
            deltas.reserve(updates.size());
            for (const auto& u : updates) deltas.push_back(u.delta);
            rec.aggregate_norm = l2_norm(weighted_sum(weighting.weights, deltas));
        }
        rec.epoch_losses.reserve(updates.size());
        for (const auto& u : updates) rec.epoch_losses.push_back(u.epoch_losses);

        w = next_w;

        if ((t + 1) % eval_every == 0 && dev_eval) {
            const DevMetrics dm = dev_eval(w);
            rec.dev = dm;
            if (dm.micro_avg > result.best_micro) {
                result.best_micro = dm.micro_avg;
                result.best_model = w;
                result.best_round = t;
            }
        }
        result.rounds.push_back(std::move(rec));
    }

    for (auto* ep : endpoints) ep->shutdown();
    result.final_model = w;
    if (result.best_model.empty()) {
        // no dev evaluation happened inside the horizon
        result.best_model = result.final_model;
        result.best_round = algo.rounds == 0 ? 0 : algo.rounds - 1;
    }
    return result;
}

DevEvaluator merged_dev_evaluator(const ModelSpec& model, const Population& population) {
    return [&model, &population](const ParamVector& w) {
        DevMetrics dm;
        std::size_t correct = 0;
        std::size_t total = 0;
        double acc_sum = 0.0;
        for (const auto& client : population) {
            const std::size_t c = count_correct(model, w, client.dev);
            correct += c;
            total += client.dev.size;
            acc_sum += static_cast<double>(c) / static_cast<double>(client.dev.size);
        }
        dm.macro_avg = acc_sum / static_cast<double>(population.size());
        dm.micro_avg = static_cast<double>(correct) / static_cast<double>(total);
        return dm;
    };
}

FederatedResult run_federated(const ModelSpec& model, const AlgorithmSpec& algo,
                              const Population& population, std::uint64_t seed,
                              std::size_t eval_every) {
    if (population.empty()) throw EmptyPopulation("run_federated: empty population");
    std::vector<LocalClientEndpoint> locals;
    locals.reserve(population.size());
    for (const auto& client : population) {
        locals.emplace_back(&client, &model, &algo);
    }
    std::vector<ClientEndpoint*> endpoints;
    for (auto& ep : locals) endpoints.push_back(&ep);
    return run_round_loop(model, algo, endpoints, seed, eval_every,
                          merged_dev_evaluator(model, population));
}

std::string to_jsonl_line(const RoundRecord& rec) {
    nlohmann::ordered_json j;
    j["round"] = rec.round;
    j["weights"] = rec.weights;
    j["aggregate_norm"] = rec.aggregate_norm;
    j["epoch_losses"] = rec.epoch_losses;
    j["weight_fallback"] = rec.weight_fallback;
    if (rec.dev) {
        j["dev"] = {{"macro_avg", rec.dev->macro_avg}, {"micro_avg", rec.dev->micro_avg}};
    }
    return j.dump();
}

RoundRecord round_record_from_json(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    RoundRecord rec;
    rec.round = j.at("round").get<std::size_t>();
    rec.weights = j.at("weights").get<std::vector<double>>();
    rec.aggregate_norm = j.at("aggregate_norm").get<double>();
    rec.epoch_losses = j.at("epoch_losses").get<std::vector<std::vector<double>>>();
    rec.weight_fallback = j.at("weight_fallback").get<bool>();
    if (j.contains("dev")) {
        DevMetrics dm;
        dm.macro_avg = j["dev"].at("macro_avg").get<double>();
        dm.micro_avg = j["dev"].at("micro_avg").get<double>();
        rec.dev = dm;
    }
    return rec;
}

} // namespace fedlorar
