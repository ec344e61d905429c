#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedlorar/errors.hpp"
#include "fedlorar/experiment.hpp"
#include "fedlorar/net.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fedlorar;

int log_level() {
    const char* env = std::getenv("FEDLORAR_LOG");
    if (!env) return 0;
    const std::string v(env);
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[fedlorar] " << msg << "\n";
}

struct CommonArgs {
    std::string config_path;
    std::string seed;
    std::string out;
    std::string algo;
    std::string weighting;
    std::string transport;
    std::string rounds;
    std::string eval_every;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (key = value lines)");
    cmd->add_option("--seed", args.seed, "RNG seed override");
    cmd->add_option("--out", args.out, "output directory override");
    cmd->add_option("--algo", args.algo, "fedavg|fedopt|fedprox");
    cmd->add_option("--weighting", args.weighting, "size|equal|lr|lorar");
    cmd->add_option("--transport", args.transport, "inproc|tcp");
    cmd->add_option("--rounds", args.rounds, "communication rounds override");
    cmd->add_option("--eval-every", args.eval_every, "dev evaluation period override");
}

ExperimentConfig load_config(const CommonArgs& args) {
    ExperimentConfig config =
        args.config_path.empty() ? default_config() : parse_config_file(args.config_path);
    if (!args.seed.empty()) apply_config_line(config, "seed", args.seed);
    if (!args.out.empty()) apply_config_line(config, "out", args.out);
    if (!args.algo.empty()) apply_config_line(config, "algo.kind", args.algo);
    if (!args.weighting.empty()) apply_config_line(config, "algo.weighting", args.weighting);
    if (!args.transport.empty()) apply_config_line(config, "transport", args.transport);
    if (!args.rounds.empty()) apply_config_line(config, "algo.rounds", args.rounds);
    if (!args.eval_every.empty()) apply_config_line(config, "eval_every", args.eval_every);
    validate(config);
    return config;
}

void write_report(const ExperimentConfig& config, const EvalReport& report) {
    fs::create_directories(config.output_dir);
    write_manifest(config, config.output_dir);
    std::ofstream os(fs::path(config.output_dir) / "report.json");
    os << to_json(report) << '\n';
    std::cout << to_table_text(to_string(config.paradigm), report) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedlorar: federated learning experiments with loss-reduction re-weighting"};
    app.require_subcommand(1);

    CommonArgs args;
    int client_id = -1;

    auto* gen = app.add_subcommand("gen-data", "generate and export a client population");
    add_common(gen, args);
    auto* finetune = app.add_subcommand("finetune", "per-client finetuning paradigm");
    add_common(finetune, args);
    auto* centralized = app.add_subcommand("centralized", "merged-data training paradigm");
    add_common(centralized, args);
    auto* federated = app.add_subcommand("federated", "federated rounds (in-process or tcp server)");
    add_common(federated, args);
    auto* serve = app.add_subcommand("serve", "run the aggregation server over tcp");
    add_common(serve, args);
    auto* client = app.add_subcommand("client", "run one client process against a server");
    add_common(client, args);
    client->add_option("--id", client_id, "client id (index into the population)")->required();
    auto* plot = app.add_subcommand("plot-data", "emit plot CSVs from a rounds.jsonl");
    std::string rounds_path;
    std::string plot_out = "plot";
    plot->add_option("--rounds", rounds_path, "path to rounds.jsonl")->required();
    plot->add_option("--out", plot_out, "output directory");
    auto* compare = app.add_subcommand("compare", "tabulate report.json files across run dirs");
    std::vector<std::string> run_dirs;
    compare->add_option("dirs", run_dirs, "run directories")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const ExperimentConfig config = load_config(args);
            const Population pop = generate_population(config.population);
            fs::create_directories(config.output_dir);
            for (const auto& ds : pop) save_dataset(ds, config.output_dir);
            write_manifest(config, config.output_dir);
            std::cout << "wrote " << pop.size() << " clients to " << config.output_dir << "\n";
        } else if (finetune->parsed()) {
            ExperimentConfig config = load_config(args);
            config.paradigm = Paradigm::Finetune;
            const Population pop = generate_population(config.population);
            log_info("finetuning " + std::to_string(pop.size()) + " clients");
            write_report(config, run_finetune(config, pop));
        } else if (centralized->parsed()) {
            ExperimentConfig config = load_config(args);
            config.paradigm = Paradigm::Centralized;
            const Population pop = generate_population(config.population);
            write_report(config, run_centralized(config, pop));
        } else if (federated->parsed() || serve->parsed()) {
            ExperimentConfig config = load_config(args);
            config.paradigm = Paradigm::Federated;
            if (serve->parsed()) config.transport = Transport::Tcp;
            log_info("running " + to_string(config.algo.kind) + "/" +
                     to_string(config.algo.weighting) + " for " +
                     std::to_string(config.algo.rounds) + " rounds");
            const auto out = run_federated_experiment(config);
            std::cout << to_table_text(to_string(config.algo.kind) + "_" +
                                           to_string(config.algo.weighting),
                                       out.report)
                      << "\n";
        } else if (client->parsed()) {
            const ExperimentConfig config = load_config(args);
            const Population pop = generate_population(config.population);
            if (client_id < 0 || static_cast<std::size_t>(client_id) >= pop.size()) {
                throw InvalidConfig("client id out of range");
            }
            log_info("client " + std::to_string(client_id) + " connecting to " +
                     config.bind_addr + ":" + std::to_string(config.port));
            run_client(config.bind_addr, config.port, client_id, pop[client_id], config.model,
                       config.algo, config.seed);
        } else if (plot->parsed()) {
            emit_plot_data(read_round_log(rounds_path), plot_out);
            std::cout << "wrote plot data to " << plot_out << "\n";
        } else if (compare->parsed()) {
            std::cout << compare_runs(run_dirs);
        }
    } catch (const InvalidConfig& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const InvalidSpec& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const ClientDisconnected& e) {
        std::cerr << "transport failure: " << e.what() << "\n";
        return 4;
    } catch (const WireError& e) {
        std::cerr << "transport failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
