#include "fedlorar/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedlorar/errors.hpp"
#include "fedlorar/net.hpp"
#include "fedlorar/rng.hpp"

namespace fedlorar {

namespace fs = std::filesystem;

Paradigm paradigm_from_string(const std::string& s) {
    if (s == "finetune") return Paradigm::Finetune;
    if (s == "centralized") return Paradigm::Centralized;
    if (s == "federated") return Paradigm::Federated;
    throw InvalidConfig("unknown paradigm: " + s);
}

std::string to_string(Paradigm p) {
    switch (p) {
    case Paradigm::Finetune: return "finetune";
    case Paradigm::Centralized: return "centralized";
    case Paradigm::Federated: return "federated";
    }
    return "?";
}

std::vector<std::size_t> default_local_epochs(const std::vector<std::size_t>& sizes) {
    std::vector<std::size_t> order(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
    std::vector<std::size_t> epochs(sizes.size(), 12);
    for (std::size_t r = 0; r < std::min<std::size_t>(2, order.size()); ++r) {
        epochs[order[r]] = 6;
    }
    return epochs;
}

ExperimentConfig default_config() {
    ExperimentConfig config;
    config.model.kind = ModelKind::MlpOneHidden;
    config.model.input_dim = 16;
    config.model.hidden_dim = 16;
    config.model.num_classes = 8;
    config.model.activation = Activation::Relu;

    config.population = default_population_spec();
    config.population.input_dim = config.model.input_dim;
    config.population.num_classes = config.model.num_classes;

    config.algo.kind = AlgorithmKind::FedOpt;
    config.algo.weighting = WeightingKind::Size;
    config.algo.rounds = 60;
    config.algo.batch_size = 32;
    config.algo.mu = 0.0001;
    config.algo.client_opt = OptimizerSpec{OptimizerKind::Sgd, 0.05, 0.0, 0.999, 1e-8};
    config.algo.server_opt = OptimizerSpec{OptimizerKind::SgdMomentum, 1.0, 0.9, 0.999, 1e-8};
    config.algo.local_epochs = default_local_epochs(config.population.sizes);
    config.eval_every = 5;
    return config;
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::size_t> parse_size_list(const std::string& value) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        out.push_back(static_cast<std::size_t>(std::stoull(trim(tok))));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(trim(tok)));
    return out;
}

bool apply_opt_key(OptimizerSpec& opt, const std::string& key, const std::string& value) {
    if (key == "kind") {
        opt.kind = optimizer_kind_from_string(value);
    } else if (key == "lr") {
        opt.learning_rate = std::stod(value);
    } else if (key == "momentum") {
        opt.momentum = std::stod(value);
    } else if (key == "beta2") {
        opt.beta2 = std::stod(value);
    } else if (key == "epsilon") {
        opt.epsilon = std::stod(value);
    } else {
        return false;
    }
    return true;
}

} // namespace

void apply_config_line(ExperimentConfig& c, const std::string& key, const std::string& value) {
    try {
        if (key == "paradigm") {
            c.paradigm = paradigm_from_string(value);
        } else if (key == "seed") {
            c.seed = std::stoull(value);
        } else if (key == "out") {
            c.output_dir = value;
        } else if (key == "eval_every") {
            c.eval_every = std::stoull(value);
        } else if (key == "max_epochs") {
            c.max_epochs = std::stoull(value);
        } else if (key == "transport") {
            if (value == "inproc") {
                c.transport = Transport::InProc;
            } else if (value == "tcp") {
                c.transport = Transport::Tcp;
            } else {
                throw InvalidConfig("unknown transport: " + value);
            }
        } else if (key == "bind") {
            c.bind_addr = value;
        } else if (key == "port") {
            c.port = std::stoi(value);
        } else if (key == "model.kind") {
            c.model.kind = model_kind_from_string(value);
        } else if (key == "model.input_dim") {
            c.model.input_dim = std::stoull(value);
        } else if (key == "model.hidden_dim") {
            c.model.hidden_dim = std::stoull(value);
        } else if (key == "model.num_classes") {
            c.model.num_classes = std::stoull(value);
        } else if (key == "model.activation") {
            c.model.activation = activation_from_string(value);
        } else if (key == "pop.sizes") {
            c.population.sizes = parse_size_list(value);
            c.population.num_clients = c.population.sizes.size();
        } else if (key == "pop.alpha") {
            c.population.label_skew_alpha = std::stod(value);
        } else if (key == "pop.rotation_angles") {
            c.population.rotation_angles = parse_double_list(value);
        } else if (key == "pop.max_rotation") {
            c.population.max_rotation = std::stod(value);
        } else if (key == "pop.class_separation") {
            c.population.class_separation = std::stod(value);
        } else if (key == "pop.noise_sigma") {
            c.population.noise_sigma = std::stod(value);
        } else if (key == "pop.dev_fraction") {
            c.population.dev_fraction = std::stod(value);
        } else if (key == "pop.test_fraction") {
            c.population.test_fraction = std::stod(value);
        } else if (key == "algo.kind") {
            c.algo.kind = algorithm_kind_from_string(value);
        } else if (key == "algo.mu") {
            c.algo.mu = std::stod(value);
        } else if (key == "algo.weighting") {
            c.algo.weighting = weighting_kind_from_string(value);
        } else if (key == "algo.rounds") {
            c.algo.rounds = std::stoull(value);
        } else if (key == "algo.batch_size") {
            c.algo.batch_size = std::stoull(value);
        } else if (key == "algo.local_epochs") {
            c.algo.local_epochs = parse_size_list(value);
        } else if (key == "algo.default_local_epochs") {
            c.algo.default_local_epochs = std::stoull(value);
        } else if (key.rfind("algo.client_opt.", 0) == 0) {
            if (!apply_opt_key(c.algo.client_opt, key.substr(16), value)) {
                throw InvalidConfig("unknown config key: " + key);
            }
        } else if (key.rfind("algo.server_opt.", 0) == 0) {
            if (!apply_opt_key(c.algo.server_opt, key.substr(16), value)) {
                throw InvalidConfig("unknown config key: " + key);
            }
        } else {
            throw InvalidConfig("unknown config key: " + key);
        }
    } catch (const InvalidConfig&) {
        throw;
    } catch (const InvalidSpec& e) {
        throw InvalidConfig(std::string(e.what()) + " (key " + key + ")");
    } catch (const std::exception&) {
        throw InvalidConfig("bad value for key " + key + ": " + value);
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config = default_config();
    bool sizes_overridden = false;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "pop.sizes") sizes_overridden = true;
        apply_config_line(config, key, value);
    }
    // population mirrors the model's dims; local epochs follow a resized population
    config.population.input_dim = config.model.input_dim;
    config.population.num_classes = config.model.num_classes;
    if (sizes_overridden && config.algo.local_epochs.size() != config.population.sizes.size()) {
        config.algo.local_epochs = default_local_epochs(config.population.sizes);
    }
    validate(config);
    return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidConfig("cannot open config file: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

void validate(const ExperimentConfig& config) {
    validate(config.model);
    validate(config.population);
    validate(config.algo);
    if (config.population.input_dim != config.model.input_dim) {
        throw InvalidConfig("population input_dim != model input_dim");
    }
    if (config.population.num_classes != config.model.num_classes) {
        throw InvalidConfig("population num_classes != model num_classes");
    }
    if (!config.algo.local_epochs.empty() &&
        config.algo.local_epochs.size() != config.population.num_clients) {
        throw InvalidConfig("algo.local_epochs length != number of clients");
    }
    if (config.eval_every == 0) throw InvalidConfig("eval_every must be >= 1");
    if (config.max_epochs == 0) throw InvalidConfig("max_epochs must be >= 1");
}

namespace {

nlohmann::ordered_json opt_to_json(const OptimizerSpec& o) {
    return {{"kind", to_string(o.kind)},
            {"lr", o.learning_rate},
            {"momentum", o.momentum},
            {"beta2", o.beta2},
            {"epsilon", o.epsilon}};
}

} // namespace

std::string config_to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["paradigm"] = to_string(c.paradigm);
    j["seed"] = c.seed;
    j["out"] = c.output_dir;
    j["eval_every"] = c.eval_every;
    j["max_epochs"] = c.max_epochs;
    j["transport"] = c.transport == Transport::Tcp ? "tcp" : "inproc";
    j["bind"] = c.bind_addr;
    j["port"] = c.port;
    j["model"] = {{"kind", to_string(c.model.kind)},
                  {"input_dim", c.model.input_dim},
                  {"hidden_dim", c.model.hidden_dim},
                  {"num_classes", c.model.num_classes},
                  {"activation", to_string(c.model.activation)}};
    j["population"] = {{"sizes", c.population.sizes},
                       {"alpha", c.population.label_skew_alpha},
                       {"rotation_angles", c.population.rotation_angles},
                       {"max_rotation", c.population.max_rotation},
                       {"class_separation", c.population.class_separation},
                       {"noise_sigma", c.population.noise_sigma},
                       {"dev_fraction", c.population.dev_fraction},
                       {"test_fraction", c.population.test_fraction}};
    j["algo"] = {{"kind", to_string(c.algo.kind)},
                 {"mu", c.algo.mu},
                 {"weighting", to_string(c.algo.weighting)},
                 {"rounds", c.algo.rounds},
                 {"batch_size", c.algo.batch_size},
                 {"local_epochs", c.algo.local_epochs},
                 {"default_local_epochs", c.algo.default_local_epochs},
                 {"client_opt", opt_to_json(c.algo.client_opt)},
                 {"server_opt", opt_to_json(c.algo.server_opt)}};
    return j.dump(2);
}

namespace {

// Epoch-budget supervised training with dev-based best-checkpoint
// selection; shared by the finetune and centralized paradigms.
ParamVector train_supervised(const ModelSpec& model, const AlgorithmSpec& algo,
                             const ClientDataset& dataset, std::size_t max_epochs,
                             std::uint64_t seed) {
    ParamVector w = init_params(model, seed);
    Optimizer opt(algo.client_opt);
    Rng rng(derive_seed(seed, 0xf17e, static_cast<std::uint64_t>(dataset.client_id)));
    const std::size_t n = dataset.train.size;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Batch batch;
    batch.split = &dataset.train;

    ParamVector best_w = w;
    double best_dev = -1.0;
    for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += algo.batch_size) {
            const std::size_t end = std::min(n, start + algo.batch_size);
            batch.rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                              order.begin() + static_cast<std::ptrdiff_t>(end));
            auto [batch_loss, grad] = loss_and_grad(model, w, batch);
            opt.step(w, grad);
        }
        const double dev_acc = accuracy(model, w, dataset.dev);
        if (dev_acc > best_dev) {
            best_dev = dev_acc;
            best_w = w;
        }
    }
    return best_w;
}

} // namespace

EvalReport run_finetune(const ExperimentConfig& config, const Population& population) {
    validate(config);
    if (population.empty()) throw EmptyPopulation("run_finetune: empty population");
    EvalReport report;
    std::vector<double> accs;
    std::vector<std::size_t> corrects, sizes;
    for (const auto& client : population) {
        const ParamVector best_w =
            train_supervised(config.model, config.algo, client, config.max_epochs, config.seed);
        ClientScore score;
        score.client_id = client.client_id;
        score.test_size = client.test.size;
        score.correct = count_correct(config.model, best_w, client.test);
        score.accuracy = static_cast<double>(score.correct) / static_cast<double>(score.test_size);
        report.per_client.push_back(score);
        accs.push_back(score.accuracy);
        corrects.push_back(score.correct);
        sizes.push_back(score.test_size);
    }
    report.macro_avg = macro_average(accs);
    report.micro_avg = micro_average(corrects, sizes);
    return report;
}

EvalReport run_centralized(const ExperimentConfig& config, const Population& population) {
    validate(config);
    if (population.empty()) throw EmptyPopulation("run_centralized: empty population");
    const ClientDataset merged = merge(population);
    const ParamVector best_w =
        train_supervised(config.model, config.algo, merged, config.max_epochs, config.seed);
    return evaluate_all(config.model, best_w, population);
}

void write_manifest(const ExperimentConfig& config, const std::string& dir) {
    nlohmann::ordered_json j;
    j["tool"] = "fedlorar";
    j["version"] = "0.1.0";
    j["config"] = nlohmann::ordered_json::parse(config_to_json(config));
    std::ofstream os(fs::path(dir) / "manifest.json");
    os << j.dump(2) << '\n';
}

void write_round_log(const std::vector<RoundRecord>& rounds, const std::string& path) {
    std::ofstream os(path);
    for (const auto& rec : rounds) os << to_jsonl_line(rec) << '\n';
}

std::vector<RoundRecord> read_round_log(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidConfig("cannot open round log: " + path);
    std::vector<RoundRecord> rounds;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty()) rounds.push_back(round_record_from_json(line));
    }
    return rounds;
}

void emit_plot_data(const std::vector<RoundRecord>& rounds, const std::string& dir) {
    fs::create_directories(dir);
    const std::size_t num_clients = rounds.empty() ? 0 : rounds.front().epoch_losses.size();
    for (std::size_t i = 0; i < num_clients; ++i) {
        std::ofstream os(fs::path(dir) / ("loss_client_" + std::to_string(i) + ".csv"));
        os.precision(17);
        os << "step,loss\n";
        std::size_t step = 0;
        for (const auto& rec : rounds) {
            for (double loss : rec.epoch_losses[i]) {
                os << step++ << ',' << loss << '\n';
            }
        }
    }
    std::ofstream os(fs::path(dir) / "dev_curve.csv");
    os.precision(17);
    os << "round,dev_macro_avg,dev_micro_avg\n";
    for (const auto& rec : rounds) {
        if (rec.dev) {
            os << rec.round << ',' << rec.dev->macro_avg << ',' << rec.dev->micro_avg << '\n';
        }
    }
}

FederatedExperimentOutput run_federated_experiment(const ExperimentConfig& config) {
    validate(config);
    const Population population = generate_population(config.population);

    FederatedExperimentOutput out;
    if (config.transport == Transport::Tcp) {
        out.result = run_server(config.bind_addr, config.port, config.model, config.algo,
                                population.size(), config.seed, config.eval_every,
                                merged_dev_evaluator(config.model, population));
    } else {
        out.result =
            run_federated(config.model, config.algo, population, config.seed, config.eval_every);
    }
    out.report = evaluate_all(config.model, out.result.best_model, population);

    fs::create_directories(config.output_dir);
    write_manifest(config, config.output_dir);
    write_round_log(out.result.rounds, (fs::path(config.output_dir) / "rounds.jsonl").string());
    emit_plot_data(out.result.rounds, config.output_dir);
    std::ofstream os(fs::path(config.output_dir) / "report.json");
    os << to_json(out.report) << '\n';
    return out;
}

std::string compare_runs(const std::vector<std::string>& run_dirs) {
    std::ostringstream table;
    bool header_done = false;
    for (const auto& dir : run_dirs) {
        std::ifstream rs(fs::path(dir) / "report.json");
        if (!rs) throw InvalidConfig("no report.json in " + dir);
        std::stringstream buf;
        buf << rs.rdbuf();
        const EvalReport report = eval_report_from_json(buf.str());

        std::string label = fs::path(dir).filename().string();
        std::ifstream ms(fs::path(dir) / "manifest.json");
        if (ms) {
            const auto manifest = nlohmann::json::parse(ms);
            const auto& cfg = manifest.at("config");
            label = cfg.at("paradigm").get<std::string>();
            if (label == "federated") {
                label = cfg.at("algo").at("kind").get<std::string>() + "_" +
                        cfg.at("algo").at("weighting").get<std::string>();
            }
        }
        if (!header_done) {
            table << "run";
            for (const auto& s : report.per_client) table << " client" << s.client_id;
            table << " | MacroAvg MicroAvg\n";
            header_done = true;
        }
        table << to_table_text(label, report) << '\n';
    }
    return table.str();
}

} // namespace fedlorar
