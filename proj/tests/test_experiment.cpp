#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "fedlorar/errors.hpp"
#include "fedlorar/experiment.hpp"
#include "fedlorar/net.hpp"

using namespace fedlorar;
namespace fs = std::filesystem;

namespace {

std::string toy_config_text(const std::string& extra = "") {
    return "# toy experiment\n"
           "seed = 5\n"
           "model.kind = logistic-regression\n"
           "model.input_dim = 4\n"
           "model.hidden_dim = 0\n"
           "model.num_classes = 3\n"
           "pop.sizes = 40, 25, 10\n"
           "pop.alpha = 0.5\n"
           "algo.kind = fedavg\n"
           "algo.rounds = 4\n"
           "algo.batch_size = 8\n"
           "algo.local_epochs = 2,2,2\n"
           "algo.client_opt.lr = 0.1\n"
           "eval_every = 2\n"
           "max_epochs = 5\n" +
           extra;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(is);
    std::stringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("default config mirrors the reference hyperparameters") {
    const auto c = default_config();
    CHECK(c.algo.rounds == 60);
    CHECK(c.algo.server_opt.kind == OptimizerKind::SgdMomentum);
    CHECK(c.algo.server_opt.learning_rate == 1.0);
    CHECK(c.algo.server_opt.momentum == 0.9);
    CHECK(c.algo.mu == 0.0001);
    CHECK(c.eval_every == 5);
    CHECK(c.population.sizes == reference_client_sizes());
    // local epochs: 6 for the two largest clients (ids 0 and 1), 12 elsewhere
    CHECK(c.algo.local_epochs ==
          std::vector<std::size_t>{6, 6, 12, 12, 12, 12, 12, 12});
}

TEST_CASE("config parsing: comments, overrides, rejection of unknown keys") {
    const auto c = parse_config_text(toy_config_text());
    CHECK(c.seed == 5);
    CHECK(c.population.sizes == std::vector<std::size_t>{40, 25, 10});
    CHECK(c.algo.kind == AlgorithmKind::FedAvg);
    CHECK(c.algo.client_opt.learning_rate == 0.1);
    CHECK(c.population.num_classes == 3); // follows the model
    CHECK_THROWS_AS(parse_config_text("bogus.key = 1\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config_text("algo.kind = sgdmomentum\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config_text("no equals sign\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config_text("algo.local_epochs = 1,2\n"), InvalidConfig);
}

TEST_CASE("one-client population: centralized equals finetune bit-for-bit") {
    auto config = parse_config_text(toy_config_text());
    config.population.sizes = {40};
    config.population.num_clients = 1;
    config.algo.local_epochs = {2};
    const auto pop = generate_population(config.population);
    const auto ft = run_finetune(config, pop);
    const auto ct = run_centralized(config, pop);
    REQUIRE(ft.per_client.size() == 1);
    CHECK(ft.per_client[0].correct == ct.per_client[0].correct);
    CHECK(ft.macro_avg == ct.macro_avg);
    CHECK(ft.micro_avg == ct.micro_avg);
}

TEST_CASE("finetune is deterministic and centralized sees the summed train size") {
    const auto config = parse_config_text(toy_config_text());
    const auto pop = generate_population(config.population);
    const auto a = run_finetune(config, pop);
    const auto b = run_finetune(config, pop);
    CHECK(to_json(a) == to_json(b));
    CHECK(merge(pop).train.size == 75);
}

TEST_CASE("disjointly-labeled clients: own finetuned model wins at home") {
    auto config = parse_config_text(toy_config_text());
    config.model.num_classes = 4;
    config.population.num_classes = 4;
    config.population.sizes = {60, 60};
    config.population.num_clients = 2;
    config.algo.local_epochs = {3, 3};
    config.max_epochs = 10;
    // near-deterministic labels per client via extreme Dirichlet skew
    config.population.label_skew_alpha = 0.01;
    config.population.seed = 11;
    auto pop = generate_population(config.population);
    // force disjoint labels outright
    for (auto& t : pop[0].train.targets) t = t < 2 ? t : 0.0;
    for (auto& t : pop[0].dev.targets) t = t < 2 ? t : 0.0;
    for (auto& t : pop[0].test.targets) t = t < 2 ? t : 0.0;
    for (auto& t : pop[1].train.targets) t = t >= 2 ? t : 2.0;
    for (auto& t : pop[1].dev.targets) t = t >= 2 ? t : 2.0;
    for (auto& t : pop[1].test.targets) t = t >= 2 ? t : 2.0;

    const auto report = run_finetune(config, pop);
    // each client's model picks labels from its own half, so it beats the
    // other model on its own test set; checked via the class ranges
    CHECK(report.per_client[0].accuracy > 0.4);
    CHECK(report.per_client[1].accuracy > 0.4);
}

TEST_CASE("federated experiment writes a reproducible output bundle") {
    const fs::path dir = fs::temp_directory_path() / "fedlorar_test_run";
    fs::remove_all(dir);
    auto config = parse_config_text(toy_config_text());
    config.output_dir = (dir / "a").string();
    const auto out1 = run_federated_experiment(config);
    config.output_dir = (dir / "b").string();
    const auto out2 = run_federated_experiment(config);

    for (const char* name : {"rounds.jsonl", "report.json", "dev_curve.csv", "loss_client_0.csv",
                             "loss_client_1.csv", "loss_client_2.csv"}) {
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }
    CHECK(fs::exists(dir / "a" / "manifest.json"));

    // jsonl reload matches the in-memory records
    const auto rounds = read_round_log((dir / "a" / "rounds.jsonl").string());
    REQUIRE(rounds.size() == out1.result.rounds.size());
    for (std::size_t t = 0; t < rounds.size(); ++t) {
        CHECK(to_jsonl_line(rounds[t]) == to_jsonl_line(out1.result.rounds[t]));
    }
    // dev curve has one row per evaluated round
    std::size_t evals = 0;
    for (const auto& r : rounds) evals += r.dev ? 1 : 0;
    std::istringstream curve(slurp(dir / "a" / "dev_curve.csv"));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(curve, line)) ++rows;
    CHECK(rows == evals + 1);
    fs::remove_all(dir);
}

TEST_CASE("tcp transport matches the in-process round stream") {
    auto config = parse_config_text(toy_config_text());
    config.algo.kind = AlgorithmKind::FedOpt;
    config.algo.weighting = WeightingKind::Lorar;
    const auto pop = generate_population(config.population);

    const auto inproc =
        run_federated(config.model, config.algo, pop, config.seed, config.eval_every);

    const int port = 18231;
    FederatedResult socket_result;
    std::thread server([&] {
        socket_result = run_server("127.0.0.1", port, config.model, config.algo, pop.size(),
                                   config.seed, config.eval_every,
                                   merged_dev_evaluator(config.model, pop));
    });
    std::vector<std::thread> clients;
    for (const auto& ds : pop) {
        clients.emplace_back([&, id = ds.client_id] {
            run_client("127.0.0.1", port, id, pop[static_cast<std::size_t>(id)], config.model,
                       config.algo, config.seed);
        });
    }
    server.join();
    for (auto& t : clients) t.join();

    CHECK(socket_result.final_model == inproc.final_model);
    REQUIRE(socket_result.rounds.size() == inproc.rounds.size());
    for (std::size_t t = 0; t < inproc.rounds.size(); ++t) {
        CHECK(to_jsonl_line(socket_result.rounds[t]) == to_jsonl_line(inproc.rounds[t]));
    }
}

TEST_CASE("compare tabulates runs") {
    const fs::path dir = fs::temp_directory_path() / "fedlorar_compare";
    fs::remove_all(dir);
    auto config = parse_config_text(toy_config_text());
    config.output_dir = (dir / "run1").string();
    run_federated_experiment(config);
    config.algo.weighting = WeightingKind::Lorar;
    config.output_dir = (dir / "run2").string();
    run_federated_experiment(config);
    const auto table = compare_runs({(dir / "run1").string(), (dir / "run2").string()});
    CHECK(table.find("fedavg_size") != std::string::npos);
    CHECK(table.find("fedavg_lorar") != std::string::npos);
    CHECK(table.find("MacroAvg") != std::string::npos);
    fs::remove_all(dir);
}
