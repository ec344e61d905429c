#include "fedlorar/metrics.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "fedlorar/errors.hpp"

namespace fedlorar {

double macro_average(const std::vector<double>& accuracies) {
    if (accuracies.empty()) throw EmptyInput("macro_average: no clients");
    double sum = 0.0;
    for (double a : accuracies) sum += a;
    return sum / static_cast<double>(accuracies.size());
}

double micro_average(const std::vector<std::size_t>& correct,
                     const std::vector<std::size_t>& sizes) {
    if (correct.empty() || correct.size() != sizes.size()) {
        throw EmptyInput("micro_average: empty or mismatched inputs");
    }
    std::size_t c = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < correct.size(); ++i) {
        c += correct[i];
        n += sizes[i];
    }
    if (n == 0) throw EmptyInput("micro_average: zero total test size");
    return static_cast<double>(c) / static_cast<double>(n);
}

EvalReport evaluate_all(const ModelSpec& spec, const ParamVector& w, const Population& population) {
    if (population.empty()) throw EmptyPopulation("evaluate_all: empty population");
    EvalReport report;
    std::vector<double> accs;
    std::vector<std::size_t> corrects;
    std::vector<std::size_t> sizes;
    for (const auto& client : population) {
        ClientScore score;
        score.client_id = client.client_id;
        score.test_size = client.test.size;
        score.correct = count_correct(spec, w, client.test);
        score.accuracy = static_cast<double>(score.correct) / static_cast<double>(score.test_size);
        accs.push_back(score.accuracy);
        corrects.push_back(score.correct);
        sizes.push_back(score.test_size);
        report.per_client.push_back(score);
    }
    report.macro_avg = macro_average(accs);
    report.micro_avg = micro_average(corrects, sizes);
    return report;
}

std::string to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["per_client"] = nlohmann::ordered_json::array();
    for (const auto& s : report.per_client) {
        j["per_client"].push_back({{"client_id", s.client_id},
                                   {"test_size", s.test_size},
                                   {"correct", s.correct},
                                   {"accuracy", s.accuracy}});
    }
    j["macro_avg"] = report.macro_avg;
    j["micro_avg"] = report.micro_avg;
    return j.dump();
}

EvalReport eval_report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    EvalReport report;
    for (const auto& e : j.at("per_client")) {
        ClientScore s;
        s.client_id = e.at("client_id").get<int>();
        s.test_size = e.at("test_size").get<std::size_t>();
        s.correct = e.at("correct").get<std::size_t>();
        s.accuracy = e.at("accuracy").get<double>();
        report.per_client.push_back(s);
    }
    report.macro_avg = j.at("macro_avg").get<double>();
    report.micro_avg = j.at("micro_avg").get<double>();
    return report;
}

std::string to_table_text(const std::string& row_label, const EvalReport& report) {
    std::ostringstream os;
    os << row_label;
    char buf[32];
    for (const auto& s : report.per_client) {
        std::snprintf(buf, sizeof(buf), " %6.2f", 100.0 * s.accuracy);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), " | %6.2f %6.2f", 100.0 * report.macro_avg,
                  100.0 * report.micro_avg);
    os << buf;
    return os.str();
}

} // namespace fedlorar
