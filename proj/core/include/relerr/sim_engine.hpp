#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "relerr/model_selection.hpp"

namespace relerr {

struct CorrelationSpec {
    enum class Kind { Independent, AR, Band1, Band2 };
    Kind kind = Kind::Independent;
    double rho = 0.0;  // AR only, in (-1, 1)

    static CorrelationSpec independent() { return {}; }
    static CorrelationSpec ar(double rho) { return {Kind::AR, rho}; }
    static CorrelationSpec band1() { return {Kind::Band1, 0.0}; }
    static CorrelationSpec band2() { return {Kind::Band2, 0.0}; }

    // Tokens: independent, ar:<rho>, band1, band2.
    static CorrelationSpec parse(std::string_view token);
    std::string to_string() const;
};

// Gene correlation matrix: rho^|j-k| (AR), 0.3 at lag 1 (Band1), 0.6/0.3 at lags 1/2 (Band2).
Eigen::MatrixXd correlation_matrix(const CorrelationSpec& spec, std::size_t p);
// Lower Cholesky factor L with L L^T equal to correlation_matrix(spec, p).
Eigen::MatrixXd correlation_factor(const CorrelationSpec& spec, std::size_t p);

enum class ErrorLaw { StdNormalLog, Uniform22Log };

struct ScenarioConfig {
    std::size_t n = 200;
    std::size_t p = 500;
    std::size_t q = 5;
    CorrelationSpec correlation;
    std::size_t n_env_signals = 5;
    std::size_t n_gene_signals = 10;
    std::size_t n_interaction_signals = 20;
    double coef_low = 0.4;
    double coef_high = 1.2;
    ErrorLaw error_law = ErrorLaw::StdNormalLog;
    double target_censor_rate = 0.20;
    bool dichotomize = false;
    // Interactions only among genes carrying a main effect.
    bool restrict_interactions = true;
    std::uint64_t seed = 1;

    void validate() const;
};

// key=value lines; '#' starts a comment. Unknown keys and malformed values throw ConfigError.
ScenarioConfig parse_scenario(std::istream& in);
ScenarioConfig parse_scenario_file(const std::string& path);
std::string format_scenario(const ScenarioConfig& config);

// Level 0 below -1, level 1 on [-1, 0.5), level 2 from 0.5 up.
int dichotomize_level(double z);

struct SimulatedData {
    SurvivalDataset data;  // time-sorted
    CoefficientVector theta_true;
    double c_max = 0.0;
    double censoring_rate = 0.0;
};

SimulatedData generate_dataset(const ScenarioConfig& config);

// Expected censoring proportion mean_i min(t_i / c_max, 1) under c ~ U(0, c_max).
double expected_censoring(std::span<const double> event_times, double c_max);

/// c_max such that the expected censoring proportion on the given event times
/// matches `target`. For target 0 returns 10 * max(t) and appends a warning.
double calibrate_censoring(std::span<const double> event_times, double target,
                           std::vector<std::string>* warnings = nullptr);

struct EvalProtocol {
    std::vector<LossKind> methods{LossKind::LARE, LossKind::LPRE, LossKind::LAD, LossKind::LS};
    std::size_t replicates = 20;
    // Relative-error losses put lambda_max far above the informative range when
    // any event time is tiny, so the grid spans ten decades at 20 points each.
    std::size_t grid_size = 200;
    double ratio = 1e-10;
    // The path stops once the active set exceeds this fraction of the event
    // count; 0 runs the whole grid. Cross-validation uses the same truncated grid.
    double max_active_fraction = 0.3;
    std::size_t folds = 5;
    double gamma = kDefaultGamma;
    bool compute_auc = true;
    bool compute_cv = true;
    std::size_t threads = 1;
    SolverConfig solver;
};

struct MetricSummary {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t count = 0;
};

struct MethodSummary {
    LossKind method = LossKind::LARE;
    MetricSummary auc, se, tpr, fpr;
    std::size_t failures = 0;
};

struct ReplicateRecord {
    std::size_t replicate = 0;
    LossKind method = LossKind::LARE;
    bool failed = false;
    std::string error;
    std::optional<double> auc, se, tpr, fpr;
    double lambda_opt = 0.0;
    double censoring_rate = 0.0;
};

struct ReplicateSummary {
    ScenarioConfig scenario;
    std::vector<ReplicateRecord> records;
    std::vector<MethodSummary> methods;
};

/// Replicate r uses seed config.seed + r; every method sees the same dataset.
ReplicateSummary run_replicates(const ScenarioConfig& config, const EvalProtocol& protocol);

MetricSummary summarize(std::span<const double> values);

// Rows correlation x method with mean/sd pairs for AUC, SE, TPR, FPR.
void write_summary_csv(std::ostream& out, std::span<const ReplicateSummary> summaries);
std::vector<MetricsRow> metrics_rows(const ReplicateSummary& summary);

}  // namespace relerr
