#pragma once

#include "predsub/eval.hpp"
#include "predsub/spectral.hpp"
#include "predsub/testing.hpp"
#include "predsub/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace predsub {

enum class Command { simulate_estimate, simulate_test, estimate, test, diagnostics };
enum class Method { ase, predsub, puresub };
enum class Format { json, csv };

Command parse_command(std::string_view name);
Method parse_method(std::string_view name);
Format parse_format(std::string_view name);
std::string to_string(Command command);
std::string to_string(Method method);
std::string to_string(Format format);

struct RunConfig {
    Command command = Command::simulate_estimate;

    Index n = 1000;
    Index d = 2;
    std::optional<Index> p;
    double rho = 0.1;
    /// Dirichlet concentration of the membership rows.
    double alpha = 1.0;
    std::vector<double> epsilon{0.0};

    std::vector<Method> methods{Method::predsub};
    /// Subsample exponents; each yields m = ceil((log n)^{1+a}).
    std::vector<double> a;
    std::optional<Index> m;
    Index B = 100;
    StatisticKind statistic = StatisticKind::frobenius;
    Index reps = 1;
    double test_alpha = 0.05;

    /// Feed the true P instead of sampled graphs.
    bool noiseless = false;
    /// Test a graph against itself.
    bool self_test = false;

    std::optional<Seed> seed;

    std::vector<std::string> inputs;
    std::optional<std::string> output;
    Format format = Format::json;
    bool one_based = false;
    Index min_degree = 0;
    std::optional<std::string> embedding_output;
    bool include_timings = true;

    /// coherence, condition_number, eigen_scaling, assumptions, error_curve, subgraph_rate.
    std::vector<std::string> diagnostics{"coherence", "condition_number", "assumptions"};
    std::vector<Index> m_grid;

    std::optional<int> threads;

    /// Throws InvalidArgument on inconsistent settings.
    void validate() const;
    /// Subsample sizes the config asks for: m if set, else one per entry of a.
    [[nodiscard]] std::vector<Index> subsample_sizes(Index nodes) const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Every key of RunConfig except `threads`, which never changes the output.
nlohmann::ordered_json to_json(const RunConfig& config);
/// Overlays the keys present in `j` onto `config`; unknown keys throw.
void apply_json(RunConfig& config, const nlohmann::json& j);
RunConfig config_from_json(const nlohmann::json& j);

struct Record {
    Index replicate = 0;
    std::string method;
    double epsilon = 0.0;
    std::optional<double> a;
    Index m = 0;
    std::optional<double> error;
    std::optional<double> statistic;
    std::optional<double> p_value;
    std::optional<bool> reject;
    std::optional<Index> p_hat;

    friend bool operator==(const Record&, const Record&) = default;
};

struct Aggregate {
    std::string method;
    double epsilon = 0.0;
    std::optional<double> a;
    Index m = 0;
    Index count = 0;
    std::optional<double> mean_error;
    std::optional<double> sd_error;
    std::optional<double> rejection_rate;

    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct RunReport {
    std::string version;
    Seed seed = 0;
    nlohmann::ordered_json config;
    /// m = ceil((log n)^{1+a}) for each requested a.
    std::vector<std::pair<double, Index>> derived_m;
    std::vector<Record> records;
    std::vector<Aggregate> aggregates;
    /// Graph summary, normalizers, diagnostics.
    nlohmann::ordered_json details = nlohmann::ordered_json::object();
    /// Wall-clock seconds per stage, aligned with `records` and `aggregates`
    /// respectively, plus whole-run stages.
    std::vector<std::map<std::string, double>> timings;
    std::vector<std::map<std::string, double>> aggregate_timings;
    std::map<std::string, double> run_timings;

    /// Kept in memory only; written on request as CSV. Row k belongs to the
    /// input node embedding_nodes[k].
    std::optional<Embedding> embedding;
    std::vector<Index> embedding_nodes;

    friend bool operator==(const RunReport& a, const RunReport& b) {
        return a.version == b.version && a.seed == b.seed && a.config == b.config && a.derived_m == b.derived_m &&
               a.records == b.records && a.aggregates == b.aggregates && a.details == b.details &&
               a.timings == b.timings && a.aggregate_timings == b.aggregate_timings &&
               a.run_timings == b.run_timings;
    }
};

/// Groups records by (method, epsilon, a, m) in first-seen order. Fills
/// report.aggregates and report.aggregate_timings.
void aggregate(RunReport& report);

nlohmann::ordered_json to_json(const RunReport& report, bool include_timings = true);
RunReport report_from_json(const nlohmann::ordered_json& j);
/// One row per record; timing columns are appended when requested.
std::string to_csv(const RunReport& report, bool include_timings = true);

std::string version_string();

RunReport run_simulate_estimate(const RunConfig& config);
RunReport run_simulate_test(const RunConfig& config);
RunReport run_estimate(const RunConfig& config);
RunReport run_test(const RunConfig& config);
RunReport run_diagnostics(const RunConfig& config);
RunReport run(const RunConfig& config);

/// Applies the thread setting: the config value, else PREDSUB_THREADS, else
/// the runtime default.
void configure_threads(const RunConfig& config);

/// Graph pair restricted to the nodes both keep after the degree filter.
struct AlignedPair {
    SparseGraph first;
    SparseGraph second;
    /// Original labels of the kept nodes.
    std::vector<Index> nodes;
};

AlignedPair align_graphs(const SparseGraph& first, const SparseGraph& second, Index min_degree);

}  // namespace predsub
