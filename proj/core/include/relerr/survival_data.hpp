#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace relerr {

/// Right-censored observations with environment (E) and gene (G) covariates.
///
/// Row i holds the observed time y_i = min(t_i, c_i), the event indicator
/// (1 = event observed, 0 = censored), the q environment values x_i and the
/// p gene values z_i. Instances are validated on construction and immutable.
class SurvivalDataset {
public:
    SurvivalDataset() = default;
    SurvivalDataset(std::vector<double> times, std::vector<int> status, Eigen::MatrixXd env,
                    Eigen::MatrixXd genes);

    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<int>& status() const noexcept { return status_; }
    const Eigen::MatrixXd& env() const noexcept { return env_; }
    const Eigen::MatrixXd& genes() const noexcept { return genes_; }

    std::size_t n() const noexcept { return times_.size(); }
    std::size_t q() const noexcept { return static_cast<std::size_t>(env_.cols()); }
    std::size_t p() const noexcept { return static_cast<std::size_t>(genes_.cols()); }
    std::size_t events() const noexcept;
    bool is_sorted() const noexcept;

    // Rows in the given order (duplicates allowed).
    SurvivalDataset subset(std::span<const std::size_t> rows) const;
    // Same rows, gene columns restricted to `genes` in the given order.
    SurvivalDataset select_genes(std::span<const std::size_t> genes) const;

private:
    std::vector<double> times_;
    std::vector<int> status_;
    Eigen::MatrixXd env_;
    Eigen::MatrixXd genes_;
};

// Same rows with every environment and gene column centered and scaled to unit
// sample variance. Constant columns are centered only.
SurvivalDataset standardize_covariates(const SurvivalDataset& dataset);

// Nondecreasing times; events before censored at equal times; otherwise stable.
SurvivalDataset sort_by_time(const SurvivalDataset& dataset);
std::vector<std::size_t> time_order(const SurvivalDataset& dataset);

/// Kaplan-Meier weights for a time-sorted status vector.
///
///   w_1 = d_1 / n,
///   w_i = d_i / (n - i + 1) * prod_{j<i} ((n - j) / (n - j + 1))^{d_j}.
///
/// Censored rows get weight zero; the weights sum to the KM mass placed on
/// observed events (exactly 1 when nothing is censored).
class KMWeights {
public:
    KMWeights() = default;
    explicit KMWeights(std::vector<double> values) : values_(std::move(values)) {}

    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    std::size_t size() const noexcept { return values_.size(); }
    double sum() const noexcept;

private:
    std::vector<double> values_;
};

KMWeights kaplan_meier_weights(std::span<const int> status);
KMWeights kaplan_meier_weights(const SurvivalDataset& sorted);

enum class CoordinateKind { Env, Gene, Interaction };

// Zero-based coordinate label. Env uses j, Gene uses k, Interaction uses both.
struct Coordinate {
    CoordinateKind kind = CoordinateKind::Env;
    std::size_t j = 0;
    std::size_t k = 0;

    friend bool operator==(const Coordinate&, const Coordinate&) = default;
};

std::string to_string(CoordinateKind kind);

/// Maps between flat coordinate indices and (kind, j, k) labels for a design
/// with q environment and p gene columns.
///
/// Layout: [x_1..x_q | z_1..z_p | x_1 z_1, x_1 z_2, .., x_1 z_p, x_2 z_1, .., x_q z_p].
class CoordinateMap {
public:
    CoordinateMap() = default;
    CoordinateMap(std::size_t q, std::size_t p) : q_(q), p_(p) {}

    std::size_t q() const noexcept { return q_; }
    std::size_t p() const noexcept { return p_; }
    std::size_t d() const noexcept { return q_ + p_ + q_ * p_; }

    Coordinate coordinate(std::size_t index) const;
    std::size_t index_of(const Coordinate& c) const;

    std::size_t env_index(std::size_t j) const noexcept { return j; }
    std::size_t gene_index(std::size_t k) const noexcept { return q_ + k; }
    std::size_t interaction_index(std::size_t j, std::size_t k) const noexcept {
        return q_ + p_ + j * p_ + k;
    }

private:
    std::size_t q_ = 0;
    std::size_t p_ = 0;
};

/// Expanded predictor matrix u_i = (x_i, z_i, x_i (x) z_i), stored column-major
/// so coordinate descent touches contiguous memory.
class InteractionDesign {
public:
    InteractionDesign() = default;
    InteractionDesign(Eigen::MatrixXd matrix, CoordinateMap map);

    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
    const CoordinateMap& index_map() const noexcept { return map_; }
    std::size_t n() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
    std::size_t d() const noexcept { return static_cast<std::size_t>(matrix_.cols()); }
    std::size_t q() const noexcept { return map_.q(); }
    std::size_t p() const noexcept { return map_.p(); }

    InteractionDesign subset_rows(std::span<const std::size_t> rows) const;

private:
    Eigen::MatrixXd matrix_;
    CoordinateMap map_;
};

InteractionDesign build_design(const Eigen::MatrixXd& env, const Eigen::MatrixXd& genes);
inline InteractionDesign build_design(const SurvivalDataset& dataset) {
    return build_design(dataset.env(), dataset.genes());
}

/// theta = (alpha, beta, xi) over a design's coordinates. The partition views
/// are Eigen segments into the single backing vector.
class CoefficientVector {
public:
    CoefficientVector() = default;
    explicit CoefficientVector(CoordinateMap map)
        : map_(map), values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(map.d()))) {}
    CoefficientVector(CoordinateMap map, Eigen::VectorXd values);

    const CoordinateMap& index_map() const noexcept { return map_; }
    std::size_t d() const noexcept { return static_cast<std::size_t>(values_.size()); }

    const Eigen::VectorXd& values() const noexcept { return values_; }
    Eigen::VectorXd& values() noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[static_cast<Eigen::Index>(i)]; }
    double& operator[](std::size_t i) noexcept { return values_[static_cast<Eigen::Index>(i)]; }

    auto alpha() { return values_.segment(0, q()); }
    auto alpha() const { return values_.segment(0, q()); }
    auto beta() { return values_.segment(q(), p()); }
    auto beta() const { return values_.segment(q(), p()); }
    auto xi() { return values_.segment(q() + p(), q() * p()); }
    auto xi() const { return values_.segment(q() + p(), q() * p()); }

    // Number of strictly nonzero entries.
    std::size_t nnz() const noexcept;
    std::vector<std::size_t> support() const;

private:
    Eigen::Index q() const noexcept { return static_cast<Eigen::Index>(map_.q()); }
    Eigen::Index p() const noexcept { return static_cast<Eigen::Index>(map_.p()); }

    CoordinateMap map_;
    Eigen::VectorXd values_;
};

// CSV with header `time,status,x1..xq,z1..zp`. Throws DataError with the
// offending (1-based, header excluded) row number on malformed input.
SurvivalDataset read_dataset_csv(std::istream& in);
SurvivalDataset read_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& out, const SurvivalDataset& dataset);

// Rows `coordinate_kind,j,k,value` with 1-based j/k and 0 for "not applicable".
// Zero entries are skipped unless include_zeros is set.
void write_coefficients_csv(std::ostream& out, const CoefficientVector& theta,
                            const std::string& value_column, bool include_zeros);

}  // namespace relerr
