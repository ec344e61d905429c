#include "fedlorar/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fedlorar/errors.hpp"
#include "fedlorar/rng.hpp"

namespace fedlorar {

std::vector<std::size_t> reference_client_sizes() {
    return {2629, 4347, 549, 228, 499, 120, 78, 78};
}

PopulationSpec default_population_spec() {
    PopulationSpec spec;
    spec.sizes = reference_client_sizes();
    spec.num_clients = spec.sizes.size();
    return spec;
}

void validate(const PopulationSpec& spec) {
    if (spec.num_clients == 0) throw InvalidSpec("num_clients must be >= 1");
    if (spec.sizes.size() != spec.num_clients) {
        throw InvalidSpec("sizes length must equal num_clients");
    }
    for (std::size_t s : spec.sizes) {
        if (s == 0) throw InvalidSpec("client train size must be >= 1");
    }
    if (!(spec.label_skew_alpha > 0.0)) throw InvalidSpec("label_skew_alpha must be > 0");
    if (!spec.rotation_angles.empty() && spec.rotation_angles.size() != spec.num_clients) {
        throw InvalidSpec("rotation_angles must be empty or one per client");
    }
    if (spec.num_classes < 2) throw InvalidSpec("num_classes must be >= 2");
    if (spec.input_dim < 1) throw InvalidSpec("input_dim must be >= 1");
}

namespace {

// Planar Givens rotation by `angle` on consecutive coordinate pairs.
void rotate_in_place(std::vector<double>& x, std::size_t offset, std::size_t dim, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t k = 0; k + 1 < dim; k += 2) {
        const double a = x[offset + k];
        const double b = x[offset + k + 1];
        x[offset + k] = c * a - s * b;
        x[offset + k + 1] = s * a + c * b;
    }
}

std::vector<std::vector<double>> class_means(const PopulationSpec& spec) {
    Rng rng(derive_seed(spec.seed, 0xc1a55));
    std::vector<std::vector<double>> means(spec.num_classes);
    for (auto& m : means) {
        m.resize(spec.input_dim);
        double norm_sq = 0.0;
        for (auto& v : m) {
            v = rng.normal();
            norm_sq += v * v;
        }
        const double scale = spec.class_separation / std::max(std::sqrt(norm_sq), 1e-12);
        for (auto& v : m) v *= scale;
    }
    return means;
}

Split draw_split(const PopulationSpec& spec, const std::vector<std::vector<double>>& means,
                 const std::vector<double>& prior, double angle, std::size_t n, Rng& rng) {
    Split out;
    out.size = n;
    out.input_dim = spec.input_dim;
    out.inputs.resize(n * spec.input_dim);
    out.targets.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t c = rng.categorical(prior);
        out.targets[r] = static_cast<double>(c);
        const std::size_t off = r * spec.input_dim;
        for (std::size_t k = 0; k < spec.input_dim; ++k) {
            out.inputs[off + k] = means[c][k] + spec.noise_sigma * rng.normal();
        }
        rotate_in_place(out.inputs, off, spec.input_dim, angle);
    }
    return out;
}

} // namespace

Population generate_population(const PopulationSpec& spec) {
    validate(spec);
    const auto means = class_means(spec);
    Population pop;
    pop.reserve(spec.num_clients);
    for (std::size_t i = 0; i < spec.num_clients; ++i) {
        Rng rng(derive_seed(spec.seed, 0xda7a, i));
        const auto prior = rng.dirichlet(spec.label_skew_alpha, spec.num_classes);
        double angle;
        if (!spec.rotation_angles.empty()) {
            angle = spec.rotation_angles[i];
        } else if (spec.num_clients > 1) {
            angle = spec.max_rotation * static_cast<double>(i) /
                    static_cast<double>(spec.num_clients - 1);
        } else {
            angle = 0.0;
        }
        const std::size_t train_n = spec.sizes[i];
        const auto dev_n = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(spec.dev_fraction * train_n)));
        const auto test_n = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(spec.test_fraction * train_n)));

        ClientDataset ds;
        ds.client_id = static_cast<int>(i);
        ds.input_dim = spec.input_dim;
        ds.num_classes = spec.num_classes;
        ds.train = draw_split(spec, means, prior, angle, train_n, rng);
        ds.dev = draw_split(spec, means, prior, angle, dev_n, rng);
        ds.test = draw_split(spec, means, prior, angle, test_n, rng);
        pop.push_back(std::move(ds));
    }
    return pop;
}

namespace {

void append_split(Split& into, const Split& from) {
    into.inputs.insert(into.inputs.end(), from.inputs.begin(), from.inputs.end());
    into.targets.insert(into.targets.end(), from.targets.begin(), from.targets.end());
    into.size += from.size;
}

} // namespace

ClientDataset merge(const Population& datasets) {
    if (datasets.empty()) throw EmptyInput("merge: empty population");
    Population sorted = datasets;
    std::sort(sorted.begin(), sorted.end(),
              [](const ClientDataset& a, const ClientDataset& b) { return a.client_id < b.client_id; });
    ClientDataset out;
    out.client_id = 0;
    out.input_dim = sorted.front().input_dim;
    out.num_classes = sorted.front().num_classes;
    out.train.input_dim = out.dev.input_dim = out.test.input_dim = out.input_dim;
    for (const auto& ds : sorted) {
        if (ds.input_dim != out.input_dim || ds.num_classes != out.num_classes) {
            throw IncompatibleSchemas("merge: clients disagree on input_dim/num_classes");
        }
        append_split(out.train, ds.train);
        append_split(out.dev, ds.dev);
        append_split(out.test, ds.test);
    }
    return out;
}

void save_split(std::ostream& os, const Split& split) {
    for (std::size_t k = 0; k < split.input_dim; ++k) {
        if (k) os << ',';
        os << 'f' << k;
    }
    os << "\tlabel\n";
    os.precision(17);
    for (std::size_t r = 0; r < split.size; ++r) {
        for (std::size_t k = 0; k < split.input_dim; ++k) {
            if (k) os << ',';
            os << split.inputs[r * split.input_dim + k];
        }
        os << '\t' << static_cast<long long>(split.targets[r]) << '\n';
    }
}

Split load_split(std::istream& is) {
    Split out;
    std::string line;
    if (!std::getline(is, line)) throw InvalidConfig("split file: missing header");
    out.input_dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw InvalidConfig("split file: missing label column");
        std::stringstream feats(line.substr(0, tab));
        std::string tok;
        std::size_t count = 0;
        while (std::getline(feats, tok, ',')) {
            out.inputs.push_back(std::stod(tok));
            ++count;
        }
        if (count != out.input_dim) throw InvalidConfig("split file: ragged feature row");
        out.targets.push_back(std::stod(line.substr(tab + 1)));
        ++out.size;
    }
    return out;
}

namespace {

std::string split_path(const std::string& dir, int client_id, const char* which) {
    return dir + "/client_" + std::to_string(client_id) + "_" + which + ".tsv";
}

} // namespace

void save_dataset(const ClientDataset& ds, const std::string& dir) {
    const char* names[3] = {"train", "dev", "test"};
    const Split* splits[3] = {&ds.train, &ds.dev, &ds.test};
    for (int j = 0; j < 3; ++j) {
        std::ofstream os(split_path(dir, ds.client_id, names[j]));
        if (!os) throw InvalidConfig("cannot open " + split_path(dir, ds.client_id, names[j]));
        save_split(os, *splits[j]);
    }
}

ClientDataset load_dataset(const std::string& dir, int client_id) {
    ClientDataset ds;
    ds.client_id = client_id;
    const char* names[3] = {"train", "dev", "test"};
    Split* splits[3] = {&ds.train, &ds.dev, &ds.test};
    for (int j = 0; j < 3; ++j) {
        std::ifstream is(split_path(dir, client_id, names[j]));
        if (!is) throw InvalidConfig("cannot open " + split_path(dir, client_id, names[j]));
        *splits[j] = load_split(is);
    }
    ds.input_dim = ds.train.input_dim;
    std::size_t max_label = 0;
    for (const Split* s : splits) {
        for (double t : s->targets) {
            max_label = std::max(max_label, static_cast<std::size_t>(t));
        }
    }
    ds.num_classes = max_label + 1;
    return ds;
}

} // namespace fedlorar
