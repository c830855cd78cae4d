#include "predsub/error.hpp"
#include "predsub/run.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw predsub::ParseError(path, 0, "cannot open config file");
    }
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto upto = std::min(e.byte, text.size());
        const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
        throw predsub::ParseError(path, line, "invalid JSON config");
    }
}

void write_embedding(const predsub::RunReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    const auto& X = report.embedding->X;
    out << "node";
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        out << ",x" << c + 1;
    }
    out << '\n';
    char buf[32];
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        out << report.embedding_nodes[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", X(r, c));
            out << ',' << buf;
        }
        out << '\n';
    }
}

// Flag values land here; only the ones given on the command line are
// overlaid on the config file.
struct Flags {
    std::string config_path;
    std::optional<long long> n, d, p, m, B, reps, min_degree, threads;
    std::optional<unsigned long long> seed;
    std::optional<double> rho, alpha, test_alpha;
    std::vector<double> epsilon, a;
    std::vector<std::string> methods, inputs, diagnostics;
    std::vector<long long> m_grid;
    std::optional<std::string> statistic, output, format, embedding_output;
    bool noiseless = false, self_test = false, one_based = false, no_timings = false;
};

void add_options(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config_path, "JSON config file; flags override its keys");
    app->add_option("--n", f.n, "Node count");
    app->add_option("--d", f.d, "Embedding dimension");
    app->add_option("--p", f.p, "Positive eigenvalue count of the generated model");
    app->add_option("--rho", f.rho, "Sparsity factor");
    app->add_option("--alpha", f.alpha, "Dirichlet concentration of memberships");
    app->add_option("--epsilon", f.epsilon, "Perturbation size(s)");
    app->add_option("--method", f.methods, "ase, predsub or puresub (repeatable)");
    app->add_option("--a", f.a, "Subsample exponent(s): m = ceil((log n)^(1+a))");
    app->add_option("--m", f.m, "Subsample size (overrides --a)");
    app->add_option("--B", f.B, "Bootstrap replicates");
    app->add_option("--statistic", f.statistic, "frobenius or two_to_infinity");
    app->add_option("--reps", f.reps, "Monte Carlo replications");
    app->add_option("--test-alpha", f.test_alpha, "Significance level for reject decisions");
    app->add_flag("--noiseless", f.noiseless, "Use the true P instead of sampled graphs");
    app->add_flag("--self-test", f.self_test, "Test each graph against itself");
    app->add_option("--seed", f.seed, "Master seed (required)");
    app->add_option("--input", f.inputs, "Edge-list file(s)");
    app->add_option("--output,-o", f.output, "Report path (default: stdout)");
    app->add_option("--format", f.format, "json or csv");
    app->add_flag("--one-based", f.one_based, "Edge-list indices start at 1");
    app->add_option("--min-degree", f.min_degree, "Drop nodes below this degree");
    app->add_option("--embedding-out", f.embedding_output, "Write the estimated latent positions as CSV");
    app->add_flag("--no-timings", f.no_timings, "Leave the timing section out of the report");
    app->add_option("--diagnostic", f.diagnostics, "Diagnostic to run (repeatable)");
    app->add_option("--m-grid", f.m_grid, "Subsample sizes for the subgraph rate diagnostic");
    app->add_option("--threads", f.threads, "Worker threads (else PREDSUB_THREADS)");
}

json overlay(const Flags& f) {
    json j = json::object();
    auto put = [&j](const char* key, const auto& value) {
        if (value) {
            j[key] = *value;
        }
    };
    auto put_list = [&j](const char* key, const auto& values) {
        if (!values.empty()) {
            j[key] = values;
        }
    };
    put("n", f.n);
    put("d", f.d);
    put("p", f.p);
    put("rho", f.rho);
    put("alpha", f.alpha);
    put_list("epsilon", f.epsilon);
    put_list("methods", f.methods);
    put_list("a", f.a);
    put("m", f.m);
    put("B", f.B);
    put("statistic", f.statistic);
    put("reps", f.reps);
    put("test_alpha", f.test_alpha);
    put("seed", f.seed);
    put_list("inputs", f.inputs);
    put("output", f.output);
    put("format", f.format);
    put("min_degree", f.min_degree);
    put("embedding_output", f.embedding_output);
    put_list("diagnostics", f.diagnostics);
    put_list("m_grid", f.m_grid);
    put("threads", f.threads);
    if (f.noiseless) {
        j["noiseless"] = true;
    }
    if (f.self_test) {
        j["self_test"] = true;
    }
    if (f.one_based) {
        j["one_based"] = true;
    }
    if (f.no_timings) {
        j["include_timings"] = false;
    }
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subsampled spectral estimation and two-sample testing for random dot product graphs"};
    app.set_version_flag("--version", predsub::version_string());
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate-estimate", "Monte Carlo estimation error and timing on generated graphs"},
        {"simulate-test", "Monte Carlo level and power of the two-sample tests"},
        {"estimate", "Estimate latent positions of an edge-list graph"},
        {"test", "Two-sample test on a pair of edge-list graphs"},
        {"diagnostics", "Model and subsampling diagnostics"}};
    for (const auto& [name, help] : commands) {
        add_options(app.add_subcommand(name, help), flags);
    }
    CLI11_PARSE(app, argc, argv);

    try {
        predsub::RunConfig config;
        if (!flags.config_path.empty()) {
            predsub::apply_json(config, read_config_file(flags.config_path));
        }
        config.command = predsub::parse_command(app.get_subcommands().front()->get_name());
        predsub::apply_json(config, overlay(flags));
        config.validate();
        predsub::configure_threads(config);

        const predsub::RunReport report = predsub::run(config);
        const std::string text = config.format == predsub::Format::json
                                     ? predsub::to_json(report, config.include_timings).dump(2) + "\n"
                                     : predsub::to_csv(report, config.include_timings);
        if (config.output) {
            std::ofstream out(*config.output);
            if (!out) {
                throw std::runtime_error("cannot write " + *config.output);
            }
            out << text;
        } else {
            std::cout << text;
        }
        if (config.embedding_output) {
            if (!report.embedding) {
                throw predsub::InvalidArgument("--embedding-out applies to the estimate command");
            }
            write_embedding(report, *config.embedding_output);
        }
    } catch (const predsub::ParseError& e) {
        std::cerr << "error: parse: " << e.what() << '\n';
        return 1;
    } catch (const predsub::InvalidArgument& e) {
        std::cerr << "error: invalid argument: " << e.what() << '\n';
        return 1;
    } catch (const predsub::RankDeficient& e) {
        std::cerr << "error: rank deficient: " << e.what() << '\n';
        return 1;
    } catch (const predsub::ConvergenceError& e) {
        std::cerr << "error: no convergence: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
