#include "predsub/run.hpp"

#include "predsub/error.hpp"
#include "predsub/graph.hpp"
#include "predsub/lowrank.hpp"
#include "predsub/predsub.hpp"
#include "predsub/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <set>
#include <sstream>

#include <omp.h>

#ifndef PREDSUB_VERSION
#define PREDSUB_VERSION "0.0.0"
#endif

namespace predsub {

using ojson = nlohmann::ordered_json;

namespace {

template <typename E>
E parse_enum(std::string_view name, std::initializer_list<std::pair<std::string_view, E>> table, const char* what) {
    for (const auto& [key, value] : table) {
        if (key == name) {
            return value;
        }
    }
    std::string expected;
    for (const auto& entry : table) {
        expected += (expected.empty() ? "" : ", ") + std::string(entry.first);
    }
    throw InvalidArgument("unknown " + std::string(what) + " '" + std::string(name) + "' (expected " + expected + ")");
}

const std::set<std::string>& known_diagnostics() {
    static const std::set<std::string> names{"coherence",   "condition_number", "eigen_scaling",
                                             "assumptions", "error_curve",      "subgraph_rate"};
    return names;
}

// Rethrows the active exception with a location prefix, keeping its type.
[[noreturn]] void rethrow_with_context(const std::string& where) {
    try {
        throw;
    } catch (const ParseError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(where + ": " + e.what());
    } catch (const RankDeficient& e) {
        throw RankDeficient(where + ": " + e.what());
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(where + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(where + ": " + e.what());
    }
}

// Runs body(k) for k in [0, count) in parallel; the first failure in index
// order is rethrown with its replicate label.
template <typename Body, typename Label>
void parallel_replicates(Index count, const Body& body, const Label& label) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic, 1)
    for (Index k = 0; k < count; ++k) {
        try {
            body(k);
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }
    for (Index k = 0; k < count; ++k) {
        if (errors[static_cast<std::size_t>(k)]) {
            try {
                std::rethrow_exception(errors[static_cast<std::size_t>(k)]);
            } catch (...) {
                rethrow_with_context(label(k));
            }
        }
    }
}

template <typename T>
ojson optional_json(const std::optional<T>& value) {
    return value ? ojson(*value) : ojson(nullptr);
}

template <typename T>
std::optional<T> optional_from(const ojson& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return j.at(key).get<T>();
}

// Accepts either a scalar or an array.
template <typename T>
std::vector<T> list_from(const nlohmann::json& j) {
    if (j.is_array()) {
        return j.get<std::vector<T>>();
    }
    return {j.get<T>()};
}

ProbabilityModel config_model(const RunConfig& config) {
    return generate_mmsb(config.n, config.d, config.rho, config.alpha, derive_seed(*config.seed, {stream::kModel}),
                         config.p);
}

struct Variant {
    Method method;
    std::optional<double> a;
    Index m;
};

std::vector<Variant> variants(const RunConfig& config, Index nodes) {
    std::vector<Variant> out;
    for (Method method : config.methods) {
        if (method == Method::ase) {
            out.push_back({method, std::nullopt, nodes});
            continue;
        }
        if (config.m) {
            out.push_back({method, std::nullopt, std::min(*config.m, nodes)});
            continue;
        }
        for (double a : config.a) {
            out.push_back({method, a, subsample_size(nodes, a)});
        }
    }
    return out;
}

Record base_record(Index replicate, const Variant& v, double epsilon) {
    Record r;
    r.replicate = replicate;
    r.method = to_string(v.method);
    r.epsilon = epsilon;
    r.a = v.a;
    r.m = v.m;
    return r;
}

std::map<std::string, double> stage_map(const StageTimings& t) {
    return {{"sample", t.sample},
            {"eig", t.eig},
            {"out_of_sample", t.out_of_sample},
            {"assemble", t.assemble},
            {"total", t.total()}};
}

RunReport start_report(const RunConfig& config) {
    config.validate();
    RunReport report;
    report.version = version_string();
    report.seed = *config.seed;
    report.config = to_json(config);
    return report;
}

void add_derived_m(RunReport& report, const RunConfig& config, Index nodes) {
    if (config.m) {
        return;
    }
    for (double a : config.a) {
        report.derived_m.emplace_back(a, subsample_size(nodes, a));
    }
}

ojson graph_summary(const SparseGraph& graph) {
    ojson j;
    j["n"] = graph.n();
    j["edges"] = graph.num_edges();
    return j;
}

ojson normalizers_json(const Normalizers& z) {
    ojson j;
    j["n"] = z.n;
    j["m"] = z.m;
    j["R_F"] = optional_json(z.R_F);
    j["R_2inf"] = optional_json(z.R_2inf);
    j["R_S"] = optional_json(z.R_S);
    j["frobenius_ratio"] = optional_json(z.frobenius_ratio);
    j["two_inf_ratio"] = optional_json(z.two_inf_ratio);
    j["subgraph_ratio"] = optional_json(z.subgraph_ratio);
    return j;
}

ojson diagnostics_json(const DiagnosticsReport& d) {
    ojson j;
    ojson scalars = ojson::object();
    for (const auto& [key, s] : d.scalars) {
        scalars[key] = {{"value", s.value}, {"tag", s.tag}};
    }
    ojson curves = ojson::object();
    for (const auto& [key, c] : d.curves) {
        curves[key] = {{"x", c.curve.x}, {"y", c.curve.y}, {"tag", c.tag}};
    }
    ojson flags = ojson::object();
    for (const auto& [key, f] : d.flags) {
        flags[key] = {{"violated", f.violated}, {"tag", f.tag}};
    }
    j["scalars"] = std::move(scalars);
    j["curves"] = std::move(curves);
    j["flags"] = std::move(flags);
    j["any_violation"] = d.any_violation();
    return j;
}

TestReport run_one_test(Method method, const SparseGraph& A1, const SparseGraph& A2, Index m, const RunConfig& config,
                        Seed seed) {
    TestOptions options;
    options.statistic = config.statistic;
    switch (method) {
        case Method::predsub:
            return predsub_test(A1, A2, m, config.d, config.B, seed, options);
        case Method::puresub:
            return puresub_test(A1, A2, m, config.d, config.B, seed, options);
        case Method::ase:
            return puresub_test(A1, A2, A1.n(), config.d, config.B, seed, options);
    }
    throw InvalidArgument("unreachable test method");
}

void fill_test_record(Record& record, const TestReport& t, double alpha) {
    record.statistic = t.T0;
    record.p_value = t.p_value;
    record.reject = t.reject(alpha);
    record.p_hat = t.p_hat1;
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

Command parse_command(std::string_view name) {
    return parse_enum<Command>(name,
                               {{"simulate-estimate", Command::simulate_estimate},
                                {"simulate-test", Command::simulate_test},
                                {"estimate", Command::estimate},
                                {"test", Command::test},
                                {"diagnostics", Command::diagnostics}},
                               "command");
}

Method parse_method(std::string_view name) {
    return parse_enum<Method>(
        name, {{"ase", Method::ase}, {"predsub", Method::predsub}, {"puresub", Method::puresub}}, "method");
}

Format parse_format(std::string_view name) {
    return parse_enum<Format>(name, {{"json", Format::json}, {"csv", Format::csv}}, "format");
}

std::string to_string(Command command) {
    switch (command) {
        case Command::simulate_estimate:
            return "simulate-estimate";
        case Command::simulate_test:
            return "simulate-test";
        case Command::estimate:
            return "estimate";
        case Command::test:
            return "test";
        case Command::diagnostics:
            return "diagnostics";
    }
    return "?";
}

std::string to_string(Method method) {
    switch (method) {
        case Method::ase:
            return "ase";
        case Method::predsub:
            return "predsub";
        case Method::puresub:
            return "puresub";
    }
    return "?";
}

std::string to_string(Format format) {
    return format == Format::json ? "json" : "csv";
}

std::string version_string() {
    return PREDSUB_VERSION;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw InvalidArgument("config: " + msg); };
    if (!seed) {
        fail("seed is required");
    }
    if (n < 1 || d < 1 || d > n) {
        fail("need 1 <= d <= n");
    }
    if (p && (*p < 1 || *p > d)) {
        fail("p must lie in [1, d]");
    }
    if (!(rho > 0.0 && rho <= 1.0)) {
        fail("rho must lie in (0, 1]");
    }
    if (!(alpha > 0.0)) {
        fail("alpha must be positive");
    }
    if (epsilon.empty() || std::any_of(epsilon.begin(), epsilon.end(), [](double e) { return !(e >= 0.0); })) {
        fail("epsilon must be a nonempty list of nonnegative values");
    }
    if (methods.empty()) {
        fail("at least one method is required");
    }
    if (std::any_of(a.begin(), a.end(), [](double v) { return !(v >= 0.0); })) {
        fail("a must be nonnegative");
    }
    if (m && *m < d) {
        fail("m must be at least d");
    }
    if (B < 1 || reps < 1) {
        fail("B and reps must be positive");
    }
    if (!(test_alpha > 0.0 && test_alpha < 1.0)) {
        fail("test_alpha must lie in (0, 1)");
    }
    if (min_degree < 0) {
        fail("min_degree must be nonnegative");
    }
    if (threads && *threads < 1) {
        fail("threads must be positive");
    }
    const bool subsampled =
        std::any_of(methods.begin(), methods.end(), [](Method x) { return x != Method::ase; });
    const bool needs_m = command != Command::diagnostics && subsampled;
    if (needs_m && !m && a.empty()) {
        fail("give m or a for subsampled methods");
    }
    switch (command) {
        case Command::simulate_estimate:
        case Command::estimate:
            if (std::find(methods.begin(), methods.end(), Method::puresub) != methods.end()) {
                fail("puresub is a test method; use ase or predsub to estimate");
            }
            break;
        case Command::simulate_test:
        case Command::test:
            if (noiseless) {
                fail("noiseless input applies to estimation only");
            }
            break;
        case Command::diagnostics:
            if (!m && a.empty()) {
                fail("diagnostics need m or a");
            }
            for (const auto& name : diagnostics) {
                if (!known_diagnostics().contains(name)) {
                    fail("unknown diagnostic '" + name + "'");
                }
            }
            break;
    }
    if (command == Command::estimate && inputs.size() != 1) {
        fail("estimate takes exactly one input");
    }
    if (command == Command::test && inputs.size() != (self_test ? 1u : 2u) && inputs.size() != 2) {
        fail("test takes two inputs");
    }
}

std::vector<Index> RunConfig::subsample_sizes(Index nodes) const {
    if (m) {
        return {std::min(*m, nodes)};
    }
    std::vector<Index> out;
    for (double v : a) {
        out.push_back(subsample_size(nodes, v));
    }
    return out;
}

ojson to_json(const RunConfig& c) {
    ojson j;
    j["command"] = to_string(c.command);
    j["n"] = c.n;
    j["d"] = c.d;
    j["p"] = optional_json(c.p);
    j["rho"] = c.rho;
    j["alpha"] = c.alpha;
    j["epsilon"] = c.epsilon;
    std::vector<std::string> methods;
    for (Method m : c.methods) {
        methods.push_back(to_string(m));
    }
    j["methods"] = methods;
    j["a"] = c.a;
    j["m"] = optional_json(c.m);
    j["B"] = c.B;
    j["statistic"] = to_string(c.statistic);
    j["reps"] = c.reps;
    j["test_alpha"] = c.test_alpha;
    j["noiseless"] = c.noiseless;
    j["self_test"] = c.self_test;
    j["seed"] = optional_json(c.seed);
    j["inputs"] = c.inputs;
    j["output"] = optional_json(c.output);
    j["format"] = to_string(c.format);
    j["one_based"] = c.one_based;
    j["min_degree"] = c.min_degree;
    j["embedding_output"] = optional_json(c.embedding_output);
    j["include_timings"] = c.include_timings;
    j["diagnostics"] = c.diagnostics;
    j["m_grid"] = c.m_grid;
    return j;
}

void apply_json(RunConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) {
        throw InvalidArgument("config: top level must be an object");
    }
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "command") {
                c.command = parse_command(v.get<std::string>());
            } else if (key == "n") {
                c.n = v.get<Index>();
            } else if (key == "d") {
                c.d = v.get<Index>();
            } else if (key == "p") {
                c.p = v.is_null() ? std::nullopt : std::optional<Index>(v.get<Index>());
            } else if (key == "rho") {
                c.rho = v.get<double>();
            } else if (key == "alpha") {
                c.alpha = v.get<double>();
            } else if (key == "epsilon") {
                c.epsilon = list_from<double>(v);
            } else if (key == "methods" || key == "method") {
                c.methods.clear();
                for (const auto& name : list_from<std::string>(v)) {
                    c.methods.push_back(parse_method(name));
                }
            } else if (key == "a") {
                c.a = list_from<double>(v);
            } else if (key == "m") {
                c.m = v.is_null() ? std::nullopt : std::optional<Index>(v.get<Index>());
            } else if (key == "B") {
                c.B = v.get<Index>();
            } else if (key == "statistic") {
                c.statistic = parse_statistic(v.get<std::string>());
            } else if (key == "reps") {
                c.reps = v.get<Index>();
            } else if (key == "test_alpha") {
                c.test_alpha = v.get<double>();
            } else if (key == "noiseless") {
                c.noiseless = v.get<bool>();
            } else if (key == "self_test") {
                c.self_test = v.get<bool>();
            } else if (key == "seed") {
                c.seed = v.is_null() ? std::nullopt : std::optional<Seed>(v.get<Seed>());
            } else if (key == "inputs") {
                c.inputs = list_from<std::string>(v);
            } else if (key == "output") {
                c.output = v.is_null() ? std::nullopt : std::optional<std::string>(v.get<std::string>());
            } else if (key == "format") {
                c.format = parse_format(v.get<std::string>());
            } else if (key == "one_based") {
                c.one_based = v.get<bool>();
            } else if (key == "min_degree") {
                c.min_degree = v.get<Index>();
            } else if (key == "embedding_output") {
                c.embedding_output =
                    v.is_null() ? std::nullopt : std::optional<std::string>(v.get<std::string>());
            } else if (key == "include_timings") {
                c.include_timings = v.get<bool>();
            } else if (key == "diagnostics") {
                c.diagnostics = list_from<std::string>(v);
            } else if (key == "m_grid") {
                c.m_grid = list_from<Index>(v);
            } else if (key == "threads") {
                c.threads = v.is_null() ? std::nullopt : std::optional<int>(v.get<int>());
            } else {
                throw InvalidArgument("unknown key");
            }
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("config key '" + key + "': " + e.what());
        } catch (const InvalidArgument& e) {
            throw InvalidArgument("config key '" + key + "': " + e.what());
        }
    }
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    apply_json(c, j);
    return c;
}

void aggregate(RunReport& report) {
    struct Group {
        Aggregate agg;
        std::vector<double> errors;
        Index rejections = 0;
        Index decisions = 0;
        std::map<std::string, double> time_sums;
    };
    std::vector<Group> groups;
    for (std::size_t k = 0; k < report.records.size(); ++k) {
        const Record& r = report.records[k];
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
            return g.agg.method == r.method && g.agg.epsilon == r.epsilon && g.agg.a == r.a && g.agg.m == r.m;
        });
        if (it == groups.end()) {
            Group g;
            g.agg.method = r.method;
            g.agg.epsilon = r.epsilon;
            g.agg.a = r.a;
            g.agg.m = r.m;
            groups.push_back(std::move(g));
            it = std::prev(groups.end());
        }
        ++it->agg.count;
        if (r.error) {
            it->errors.push_back(*r.error);
        }
        if (r.reject) {
            ++it->decisions;
            it->rejections += *r.reject ? 1 : 0;
        }
        if (k < report.timings.size()) {
            for (const auto& [stage, s] : report.timings[k]) {
                it->time_sums[stage] += s;
            }
        }
    }
    report.aggregates.clear();
    report.aggregate_timings.clear();
    for (auto& g : groups) {
        if (!g.errors.empty()) {
            const double count = static_cast<double>(g.errors.size());
            double sum = 0.0;
            for (double e : g.errors) {
                sum += e;
            }
            const double mean = sum / count;
            double ss = 0.0;
            for (double e : g.errors) {
                ss += (e - mean) * (e - mean);
            }
            g.agg.mean_error = mean;
            g.agg.sd_error = g.errors.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
        }
        if (g.decisions > 0) {
            g.agg.rejection_rate = static_cast<double>(g.rejections) / static_cast<double>(g.decisions);
        }
        std::map<std::string, double> means;
        for (const auto& [stage, s] : g.time_sums) {
            means[stage] = s / static_cast<double>(g.agg.count);
        }
        report.aggregates.push_back(g.agg);
        report.aggregate_timings.push_back(std::move(means));
    }
}

ojson to_json(const RunReport& report, bool include_timings) {
    ojson j;
    j["version"] = report.version;
    j["seed"] = report.seed;
    j["config"] = report.config;
    ojson derived = ojson::array();
    for (const auto& [a, m] : report.derived_m) {
        derived.push_back({{"a", a}, {"m", m}});
    }
    j["derived_m"] = std::move(derived);
    ojson records = ojson::array();
    for (const auto& r : report.records) {
        ojson x;
        x["replicate"] = r.replicate;
        x["method"] = r.method;
        x["epsilon"] = r.epsilon;
        x["a"] = optional_json(r.a);
        x["m"] = r.m;
        x["error"] = optional_json(r.error);
        x["statistic"] = optional_json(r.statistic);
        x["p_value"] = optional_json(r.p_value);
        x["reject"] = optional_json(r.reject);
        x["p_hat"] = optional_json(r.p_hat);
        records.push_back(std::move(x));
    }
    j["records"] = std::move(records);
    ojson aggregates = ojson::array();
    for (const auto& g : report.aggregates) {
        ojson x;
        x["method"] = g.method;
        x["epsilon"] = g.epsilon;
        x["a"] = optional_json(g.a);
        x["m"] = g.m;
        x["count"] = g.count;
        x["mean_error"] = optional_json(g.mean_error);
        x["sd_error"] = optional_json(g.sd_error);
        x["rejection_rate"] = optional_json(g.rejection_rate);
        aggregates.push_back(std::move(x));
    }
    j["aggregates"] = std::move(aggregates);
    j["details"] = report.details;
    if (include_timings) {
        j["timings"] = {{"records", report.timings},
                        {"aggregates", report.aggregate_timings},
                        {"run", report.run_timings}};
    }
    return j;
}

RunReport report_from_json(const ojson& j) {
    RunReport report;
    try {
        report.version = j.at("version").get<std::string>();
        report.seed = j.at("seed").get<Seed>();
        report.config = j.at("config");
        for (const auto& x : j.at("derived_m")) {
            report.derived_m.emplace_back(x.at("a").get<double>(), x.at("m").get<Index>());
        }
        for (const auto& x : j.at("records")) {
            Record r;
            r.replicate = x.at("replicate").get<Index>();
            r.method = x.at("method").get<std::string>();
            r.epsilon = x.at("epsilon").get<double>();
            r.a = optional_from<double>(x, "a");
            r.m = x.at("m").get<Index>();
            r.error = optional_from<double>(x, "error");
            r.statistic = optional_from<double>(x, "statistic");
            r.p_value = optional_from<double>(x, "p_value");
            r.reject = optional_from<bool>(x, "reject");
            r.p_hat = optional_from<Index>(x, "p_hat");
            report.records.push_back(std::move(r));
        }
        for (const auto& x : j.at("aggregates")) {
            Aggregate g;
            g.method = x.at("method").get<std::string>();
            g.epsilon = x.at("epsilon").get<double>();
            g.a = optional_from<double>(x, "a");
            g.m = x.at("m").get<Index>();
            g.count = x.at("count").get<Index>();
            g.mean_error = optional_from<double>(x, "mean_error");
            g.sd_error = optional_from<double>(x, "sd_error");
            g.rejection_rate = optional_from<double>(x, "rejection_rate");
            report.aggregates.push_back(std::move(g));
        }
        report.details = j.at("details");
        if (j.contains("timings")) {
            const auto& t = j.at("timings");
            report.timings = t.at("records").get<std::vector<std::map<std::string, double>>>();
            report.aggregate_timings = t.at("aggregates").get<std::vector<std::map<std::string, double>>>();
            report.run_timings = t.at("run").get<std::map<std::string, double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("report: ") + e.what());
    }
    return report;
}

std::string to_csv(const RunReport& report, bool include_timings) {
    std::set<std::string> stages;
    if (include_timings) {
        for (const auto& t : report.timings) {
            for (const auto& entry : t) {
                stages.insert(entry.first);
            }
        }
    }
    std::ostringstream out;
    out << "replicate,method,epsilon,a,m,error,statistic,p_value,reject,p_hat";
    for (const auto& s : stages) {
        out << ",time_" << s;
    }
    out << '\n';
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (std::size_t k = 0; k < report.records.size(); ++k) {
        const Record& r = report.records[k];
        out << r.replicate << ',' << r.method << ',' << format_double(r.epsilon) << ',' << opt(r.a) << ',' << r.m
            << ',' << opt(r.error) << ',' << opt(r.statistic) << ',' << opt(r.p_value) << ','
            << (r.reject ? (*r.reject ? "1" : "0") : "") << ',' << (r.p_hat ? std::to_string(*r.p_hat) : "");
        for (const auto& s : stages) {
            out << ',';
            if (k < report.timings.size()) {
                const auto it = report.timings[k].find(s);
                if (it != report.timings[k].end()) {
                    out << format_double(it->second);
                }
            }
        }
        out << '\n';
    }
    return out.str();
}

void configure_threads(const RunConfig& config) {
    if (config.threads) {
        omp_set_num_threads(*config.threads);
        return;
    }
    if (const char* env = std::getenv("PREDSUB_THREADS")) {
        char* end = nullptr;
        const long value = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || value < 1) {
            throw InvalidArgument("PREDSUB_THREADS must be a positive integer, got '" + std::string(env) + "'");
        }
        omp_set_num_threads(static_cast<int>(value));
    }
}

RunReport run_simulate_estimate(const RunConfig& config) {
    RunReport report = start_report(config);
    detail::StageClock clock;
    const ProbabilityModel model = config_model(config);
    report.run_timings["model"] = clock.lap();
    add_derived_m(report, config, config.n);
    const std::vector<Variant> vs = variants(config, config.n);
    const Seed seed = *config.seed;
    const auto per_rep = static_cast<Index>(vs.size());

    std::vector<Record> records(static_cast<std::size_t>(config.reps * per_rep));
    std::vector<std::map<std::string, double>> timings(records.size());

    parallel_replicates(
        config.reps,
        [&](Index r) {
            detail::StageClock rep_clock;
            SparseGraph graph;
            double generate = 0.0;
            if (!config.noiseless) {
                graph = sample_adjacency(model, derive_seed(seed, {stream::kReplicate, std::uint64_t(r),
                                                                   stream::kAdjacency}));
                generate = rep_clock.lap();
            }
            for (Index k = 0; k < per_rep; ++k) {
                const Variant& v = vs[static_cast<std::size_t>(k)];
                const auto slot = static_cast<std::size_t>(r * per_rep + k);
                Record record = base_record(r, v, 0.0);
                std::map<std::string, double> t;
                if (v.method == Method::ase) {
                    rep_clock.lap();
                    const Embedding emb = config.noiseless ? ase(model_operator(model), config.d)
                                                           : ase(graph, config.d);
                    t["eig"] = rep_clock.lap();
                    t["total"] = t["eig"];
                    record.error = relative_frob_error(LowRankP(emb), model);
                    record.p_hat = emb.p;
                } else {
                    const SubsampleIndex S = uniform_subsample(
                        config.n, v.m,
                        derive_seed(seed, {stream::kReplicate, std::uint64_t(r), stream::kSubsample,
                                           std::uint64_t(k)}));
                    const PredSubResult result =
                        config.noiseless ? predsub_noiseless(model, S, config.d) : predsub_estimate(graph, S, config.d);
                    t = stage_map(result.timings);
                    record.error = relative_frob_error(result.estimate(), model);
                    record.p_hat = result.p_hat();
                }
                if (!config.noiseless) {
                    t["generate"] = generate;
                }
                records[slot] = std::move(record);
                timings[slot] = std::move(t);
            }
        },
        [](Index r) { return "replicate " + std::to_string(r); });

    report.records = std::move(records);
    report.timings = std::move(timings);
    report.details["model"] = {{"n", model.n()}, {"d", model.d()}, {"rho", model.rho()}};
    aggregate(report);
    report.run_timings["total"] = clock.lap() + report.run_timings["model"];
    return report;
}

RunReport run_simulate_test(const RunConfig& config) {
    RunReport report = start_report(config);
    detail::StageClock clock;
    const ProbabilityModel model = config_model(config);
    std::vector<ProbabilityModel> alternatives;
    for (double eps : config.epsilon) {
        alternatives.push_back(perturbed_model(model, eps));
    }
    report.run_timings["model"] = clock.lap();
    add_derived_m(report, config, config.n);
    const std::vector<Variant> vs = variants(config, config.n);
    const Seed seed = *config.seed;
    const auto per_rep = static_cast<Index>(vs.size());
    const auto n_eps = static_cast<Index>(config.epsilon.size());
    const Index jobs = n_eps * config.reps;

    std::vector<Record> records(static_cast<std::size_t>(jobs * per_rep));
    std::vector<std::map<std::string, double>> timings(records.size());

    parallel_replicates(
        jobs,
        [&](Index job) {
            const Index e = job / config.reps;
            const Index r = job % config.reps;
            const auto ue = std::uint64_t(e);
            const auto ur = std::uint64_t(r);
            detail::StageClock rep_clock;
            const SparseGraph A1 = sample_adjacency(model, derive_seed(seed, {stream::kReplicate, ue, ur, 1}));
            const SparseGraph A2 =
                config.self_test ? A1
                                 : sample_adjacency(alternatives[static_cast<std::size_t>(e)],
                                                    derive_seed(seed, {stream::kReplicate, ue, ur, 2}));
            const double generate = rep_clock.lap();
            for (Index k = 0; k < per_rep; ++k) {
                const Variant& v = vs[static_cast<std::size_t>(k)];
                const auto slot = static_cast<std::size_t>(job * per_rep + k);
                const TestReport t =
                    run_one_test(v.method, A1, A2, v.m, config,
                                 derive_seed(seed, {stream::kReplicate, ue, ur, stream::kBootstrap, std::uint64_t(k)}));
                Record record = base_record(r, v, config.epsilon[static_cast<std::size_t>(e)]);
                fill_test_record(record, t, config.test_alpha);
                records[slot] = std::move(record);
                timings[slot] = {{"generate", generate},
                                 {"estimate", t.timings.estimate},
                                 {"bootstrap", t.timings.bootstrap},
                                 {"total", t.timings.estimate + t.timings.bootstrap}};
            }
        },
        [&](Index job) {
            return "epsilon " + format_double(config.epsilon[static_cast<std::size_t>(job / config.reps)]) +
                   ", replicate " + std::to_string(job % config.reps);
        });

    report.records = std::move(records);
    report.timings = std::move(timings);
    report.details["model"] = {{"n", model.n()}, {"d", model.d()}, {"rho", model.rho()}};
    aggregate(report);
    report.run_timings["total"] = clock.lap() + report.run_timings["model"];
    return report;
}

RunReport run_estimate(const RunConfig& config) {
    RunReport report = start_report(config);
    detail::StageClock clock;
    EdgeListOptions io;
    io.one_based = config.one_based;
    SparseGraph graph = load_edge_list(config.inputs.front(), io);
    report.run_timings["load"] = clock.lap();
    report.details["input"] = graph_summary(graph);

    std::vector<Index> nodes(static_cast<std::size_t>(graph.n()));
    std::iota(nodes.begin(), nodes.end(), Index{0});
    if (config.min_degree > 0) {
        DegreeFilterResult filtered = degree_filter(graph, config.min_degree);
        nodes.clear();
        for (Index v = 0; v < graph.n(); ++v) {
            if (filtered.old_to_new[static_cast<std::size_t>(v)] >= 0) {
                nodes.push_back(v);
            }
        }
        graph = std::move(filtered.graph);
        report.details["filtered"] = graph_summary(graph);
    }
    report.run_timings["filter"] = clock.lap();
    add_derived_m(report, config, graph.n());

    for (const Variant& v : variants(config, graph.n())) {
        Record record = base_record(0, v, 0.0);
        std::map<std::string, double> t;
        Embedding emb;
        if (v.method == Method::ase) {
            clock.lap();
            emb = ase(graph, config.d);
            t["eig"] = clock.lap();
            t["total"] = t["eig"];
        } else {
            PredSubResult result = predsub_estimate(graph, v.m, config.d, *config.seed);
            t = stage_map(result.timings);
            report.details["isolated_out_of_sample"] = result.isolated_out_of_sample;
            emb = std::move(result.embedding);
        }
        record.p_hat = emb.p;
        report.details["estimate_frobenius"] = norms(LowRankP(emb)).frobenius;
        report.records.push_back(std::move(record));
        report.timings.push_back(std::move(t));
        if (!report.embedding) {
            report.embedding = std::move(emb);
            report.embedding_nodes = nodes;
        }
    }
    aggregate(report);
    return report;
}

AlignedPair align_graphs(const SparseGraph& first, const SparseGraph& second, Index min_degree) {
    if (min_degree == 0) {
        if (first.n() != second.n()) {
            throw InvalidArgument("node counts differ (" + std::to_string(first.n()) + " vs " +
                                  std::to_string(second.n()) + ")");
        }
        std::vector<Index> nodes(static_cast<std::size_t>(first.n()));
        std::iota(nodes.begin(), nodes.end(), Index{0});
        return {first, second, std::move(nodes)};
    }
    const DegreeFilterResult f1 = degree_filter(first, min_degree);
    const DegreeFilterResult f2 = degree_filter(second, min_degree);
    AlignedPair out;
    std::vector<Index> keep1;
    std::vector<Index> keep2;
    const Index common = std::min(first.n(), second.n());
    for (Index v = 0; v < common; ++v) {
        const Index a = f1.old_to_new[static_cast<std::size_t>(v)];
        const Index b = f2.old_to_new[static_cast<std::size_t>(v)];
        if (a >= 0 && b >= 0) {
            out.nodes.push_back(v);
            keep1.push_back(a);
            keep2.push_back(b);
        }
    }
    out.first = induced_subgraph(f1.graph, keep1);
    out.second = induced_subgraph(f2.graph, keep2);
    return out;
}

RunReport run_test(const RunConfig& config) {
    RunReport report = start_report(config);
    detail::StageClock clock;
    EdgeListOptions io;
    io.one_based = config.one_based;
    const SparseGraph g1 = load_edge_list(config.inputs.at(0), io);
    const SparseGraph g2 = config.inputs.size() > 1 ? load_edge_list(config.inputs.at(1), io) : g1;
    report.run_timings["load"] = clock.lap();
    report.details["inputs"] = {graph_summary(g1), graph_summary(g2)};

    const AlignedPair pair = align_graphs(g1, g2, config.min_degree);
    const SparseGraph& A1 = pair.first;
    const SparseGraph& A2 = config.self_test ? pair.first : pair.second;
    report.details["aligned_n"] = A1.n();
    report.run_timings["filter"] = clock.lap();
    add_derived_m(report, config, A1.n());

    const std::vector<Variant> vs = variants(config, A1.n());
    ojson tests = ojson::array();
    for (std::size_t k = 0; k < vs.size(); ++k) {
        const Variant& v = vs[k];
        const Seed seed = k == 0 ? *config.seed : derive_seed(*config.seed, {stream::kBootstrap, k});
        const TestReport t = run_one_test(v.method, A1, A2, v.m, config, seed);
        Record record = base_record(0, v, 0.0);
        fill_test_record(record, t, config.test_alpha);
        ojson x;
        x["method"] = record.method;
        x["m"] = v.m;
        x["p_hat1"] = t.p_hat1;
        x["p_hat2"] = t.p_hat2;
        x["normalizers"] = normalizers_json(t.normalizers);
        x["bootstrap"] = t.boot;
        tests.push_back(std::move(x));
        report.records.push_back(std::move(record));
        report.timings.push_back({{"estimate", t.timings.estimate},
                                  {"bootstrap", t.timings.bootstrap},
                                  {"total", t.timings.estimate + t.timings.bootstrap}});
    }
    report.details["tests"] = std::move(tests);
    aggregate(report);
    return report;
}

RunReport run_diagnostics(const RunConfig& config) {
    RunReport report = start_report(config);
    detail::StageClock clock;
    const ProbabilityModel model = config_model(config);
    report.run_timings["model"] = clock.lap();
    add_derived_m(report, config, config.n);
    const Index m = config.subsample_sizes(config.n).front();
    const Seed seed = *config.seed;
    const auto wants = [&](const char* name) {
        return std::find(config.diagnostics.begin(), config.diagnostics.end(), name) != config.diagnostics.end();
    };

    DiagnosticsReport diag;
    if (wants("coherence") || wants("condition_number")) {
        const auto spectrum = model_spectrum(model);
        if (wants("coherence")) {
            diag.add("coherence", coherence(spectrum.vectors), "coherence of the model eigenvectors");
        }
        if (wants("condition_number")) {
            diag.add("condition_number", condition_number(spectrum.values), "condition number of P");
        }
        report.run_timings["spectrum"] = clock.lap();
    }
    if (wants("eigen_scaling")) {
        const EigenScalingResult r = eigen_scaling_check(model, m, config.reps, derive_seed(seed, {stream::kInclusion}));
        diag.add("eigen_scaling_max", r.max(), "eigen-scaling deviation, worst trial");
        diag.add("eigen_scaling_mean", r.mean(), "eigen-scaling deviation, mean over trials");
        const double eps = config.epsilon.front();
        if (eps > 0.0) {
            diag.add("eigen_scaling_within", static_cast<double>(r.count_within(eps)),
                     "trials with deviation at most epsilon");
        }
        Curve curve;
        for (std::size_t t = 0; t < r.deviations.size(); ++t) {
            curve.x.push_back(static_cast<double>(r.sample_sizes[t]));
            curve.y.push_back(r.deviations[t]);
        }
        diag.add("eigen_scaling_deviations", std::move(curve), "deviation against realized subsample size");
        report.run_timings["eigen_scaling"] = clock.lap();
    }
    if (wants("assumptions")) {
        AssumptionOptions options;
        options.declared_d = config.d;
        if (!config.m && !config.a.empty()) {
            options.a = config.a.front();
        }
        const DiagnosticsReport a = assumption_report(model, m, options);
        diag.scalars.insert(a.scalars.begin(), a.scalars.end());
        diag.curves.insert(a.curves.begin(), a.curves.end());
        diag.flags.insert(a.flags.begin(), a.flags.end());
        report.run_timings["assumptions"] = clock.lap();
    }
    if (wants("error_curve")) {
        std::vector<double> grid = config.a;
        if (grid.empty()) {
            throw InvalidArgument("error_curve needs a grid of a values");
        }
        ErrorCurveOptions options;
        options.reps = config.reps;
        options.noiseless = config.noiseless;
        const ErrorCurveResult r = error_curve(model, config.d, grid, derive_seed(seed, {stream::kReplicate}), options);
        Curve error;
        Curve sd;
        Curve two_inf;
        for (const auto& point : r.points) {
            error.x.push_back(point.m);
            error.y.push_back(point.mean_error);
            sd.x.push_back(point.m);
            sd.y.push_back(point.sd_error);
            two_inf.x.push_back(point.m);
            two_inf.y.push_back(point.mean_two_inf);
            report.run_timings["error_curve_m" + std::to_string(point.m)] = point.mean_seconds;
        }
        diag.add("error_curve", std::move(error), "mean relative Frobenius error against m");
        diag.add("error_curve_sd", std::move(sd), "standard deviation of the relative error against m");
        diag.add("error_curve_two_inf", std::move(two_inf), "mean aligned two-to-infinity error against m");
        if (r.points.size() >= 2) {
            diag.add("error_curve_two_inf_slope", r.two_inf_slope(), "log-log slope of the two-to-infinity error");
        }
        if (r.baseline) {
            diag.add("ase_mean_error", r.baseline->mean_error, "full ASE mean relative error");
            report.run_timings["error_curve_ase"] = r.baseline->mean_seconds;
        }
        report.run_timings["error_curve"] = clock.lap();
    }
    if (wants("subgraph_rate")) {
        if (config.m_grid.size() < 2) {
            throw InvalidArgument("subgraph_rate needs at least two entries in m_grid");
        }
        const SubgraphRateResult r =
            subgraph_rate(model, config.d, config.m_grid, config.reps, derive_seed(seed, {stream::kReplicate, 1}));
        Curve curve;
        for (const auto& point : r.points) {
            curve.x.push_back(point.m);
            curve.y.push_back(point.mean_error);
        }
        diag.add("subgraph_rate", std::move(curve), "mean aligned subgraph error against m");
        diag.add("subgraph_rate_slope", r.slope, "log-log slope of the subgraph error");
        report.run_timings["subgraph_rate"] = clock.lap();
    }
    report.details["m"] = m;
    report.details["diagnostics"] = diagnostics_json(diag);
    return report;
}

RunReport run(const RunConfig& config) {
    switch (config.command) {
        case Command::simulate_estimate:
            return run_simulate_estimate(config);
        case Command::simulate_test:
            return run_simulate_test(config);
        case Command::estimate:
            return run_estimate(config);
        case Command::test:
            return run_test(config);
        case Command::diagnostics:
            return run_diagnostics(config);
    }
    throw InvalidArgument("unknown command");
}

}  // namespace predsub
