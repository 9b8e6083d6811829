#include "relerr/survival_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "relerr/error.hpp"

namespace relerr {

SurvivalDataset::SurvivalDataset(std::vector<double> times, std::vector<int> status,
                                 Eigen::MatrixXd env, Eigen::MatrixXd genes)
    : times_(std::move(times)),
      status_(std::move(status)),
      env_(std::move(env)),
      genes_(std::move(genes)) {
    const auto n = times_.size();
    if (status_.size() != n || static_cast<std::size_t>(env_.rows()) != n ||
        static_cast<std::size_t>(genes_.rows()) != n) {
        throw DimensionError(fmt::format(
            "row counts differ: times={}, status={}, env={}, genes={}", n, status_.size(),
            env_.rows(), genes_.rows()));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(times_[i] > 0.0) || !std::isfinite(times_[i])) {
            throw DataError(fmt::format("row {}: time must be positive and finite, got {}", i + 1,
                                        times_[i]));
        }
        if (status_[i] != 0 && status_[i] != 1) {
            throw DataError(fmt::format("row {}: status must be 0 or 1, got {}", i + 1, status_[i]));
        }
    }
}

std::size_t SurvivalDataset::events() const noexcept {
    return static_cast<std::size_t>(std::count(status_.begin(), status_.end(), 1));
}

bool SurvivalDataset::is_sorted() const noexcept {
    for (std::size_t i = 1; i < times_.size(); ++i) {
        if (times_[i] < times_[i - 1]) return false;
        if (times_[i] == times_[i - 1] && status_[i] > status_[i - 1]) return false;
    }
    return true;
}

SurvivalDataset SurvivalDataset::subset(std::span<const std::size_t> rows) const {
    std::vector<double> t(rows.size());
    std::vector<int> s(rows.size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), env_.cols());
    Eigen::MatrixXd z(static_cast<Eigen::Index>(rows.size()), genes_.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto i = rows[r];
        if (i >= n()) throw DimensionError(fmt::format("row index {} out of range", i));
        t[r] = times_[i];
        s[r] = status_[i];
        x.row(static_cast<Eigen::Index>(r)) = env_.row(static_cast<Eigen::Index>(i));
        z.row(static_cast<Eigen::Index>(r)) = genes_.row(static_cast<Eigen::Index>(i));
    }
    return SurvivalDataset(std::move(t), std::move(s), std::move(x), std::move(z));
}

SurvivalDataset SurvivalDataset::select_genes(std::span<const std::size_t> genes) const {
    Eigen::MatrixXd z(genes_.rows(), static_cast<Eigen::Index>(genes.size()));
    for (std::size_t c = 0; c < genes.size(); ++c) {
        if (genes[c] >= p()) throw DimensionError(fmt::format("gene index {} out of range", genes[c]));
        z.col(static_cast<Eigen::Index>(c)) = genes_.col(static_cast<Eigen::Index>(genes[c]));
    }
    return SurvivalDataset(times_, status_, env_, std::move(z));
}

namespace {

void standardize_columns(Eigen::MatrixXd& m) {
    const double denom = static_cast<double>(std::max<Eigen::Index>(m.rows() - 1, 1));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double mean = m.col(c).mean();
        m.col(c).array() -= mean;
        const double sd = std::sqrt(m.col(c).squaredNorm() / denom);
        if (sd > 0.0) m.col(c) /= sd;
    }
}

}  // namespace

SurvivalDataset standardize_covariates(const SurvivalDataset& dataset) {
    Eigen::MatrixXd env = dataset.env();
    Eigen::MatrixXd genes = dataset.genes();
    standardize_columns(env);
    standardize_columns(genes);
    return SurvivalDataset(dataset.times(), dataset.status(), std::move(env), std::move(genes));
}

std::vector<std::size_t> time_order(const SurvivalDataset& dataset) {
    std::vector<std::size_t> order(dataset.n());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto& t = dataset.times();
    const auto& s = dataset.status();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (t[a] != t[b]) return t[a] < t[b];
        return s[a] > s[b];
    });
    return order;
}

SurvivalDataset sort_by_time(const SurvivalDataset& dataset) {
    const auto order = time_order(dataset);
    return dataset.subset(order);
}

double KMWeights::sum() const noexcept {
    return std::accumulate(values_.begin(), values_.end(), 0.0);
}

KMWeights kaplan_meier_weights(std::span<const int> status) {
    const std::size_t n = status.size();
    if (n == 0) throw DataError("kaplan_meier_weights: empty status vector");
    std::vector<double> w(n, 0.0);
    const double dn = static_cast<double>(n);
    // running = prod_{j<i} ((n-j)/(n-j+1))^{d_j}, 1-based j
    double running = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double at_risk = dn - static_cast<double>(i);  // n - i + 1 in 1-based terms
        if (status[i] == 1) {
            w[i] = running / at_risk;
            running *= (at_risk - 1.0) / at_risk;
        } else if (status[i] != 0) {
            throw DataError(fmt::format("status[{}] must be 0 or 1", i));
        }
    }
    return KMWeights(std::move(w));
}

KMWeights kaplan_meier_weights(const SurvivalDataset& sorted) {
    return kaplan_meier_weights(std::span<const int>(sorted.status()));
}

std::string to_string(CoordinateKind kind) {
    switch (kind) {
        case CoordinateKind::Env: return "env";
        case CoordinateKind::Gene: return "gene";
        case CoordinateKind::Interaction: return "interaction";
    }
    return "unknown";
}

Coordinate CoordinateMap::coordinate(std::size_t index) const {
    if (index < q_) return {CoordinateKind::Env, index, 0};
    if (index < q_ + p_) return {CoordinateKind::Gene, 0, index - q_};
    if (index < d()) {
        const auto r = index - q_ - p_;
        return {CoordinateKind::Interaction, r / p_, r % p_};
    }
    throw DimensionError(fmt::format("coordinate index {} out of range (d = {})", index, d()));
}

std::size_t CoordinateMap::index_of(const Coordinate& c) const {
    switch (c.kind) {
        case CoordinateKind::Env:
            if (c.j < q_) return env_index(c.j);
            break;
        case CoordinateKind::Gene:
            if (c.k < p_) return gene_index(c.k);
            break;
        case CoordinateKind::Interaction:
            if (c.j < q_ && c.k < p_) return interaction_index(c.j, c.k);
            break;
    }
    throw DimensionError(fmt::format("coordinate ({}, {}, {}) outside a q={}, p={} design",
                                     to_string(c.kind), c.j, c.k, q_, p_));
}

InteractionDesign::InteractionDesign(Eigen::MatrixXd matrix, CoordinateMap map)
    : matrix_(std::move(matrix)), map_(map) {
    if (static_cast<std::size_t>(matrix_.cols()) != map_.d()) {
        throw DimensionError(fmt::format("design has {} columns, map expects {}", matrix_.cols(),
                                         map_.d()));
    }
}

InteractionDesign InteractionDesign::subset_rows(std::span<const std::size_t> rows) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), matrix_.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        m.row(static_cast<Eigen::Index>(r)) = matrix_.row(static_cast<Eigen::Index>(rows[r]));
    }
    return InteractionDesign(std::move(m), map_);
}

InteractionDesign build_design(const Eigen::MatrixXd& env, const Eigen::MatrixXd& genes) {
    if (env.rows() != genes.rows()) {
        throw DimensionError(
            fmt::format("env has {} rows but genes has {}", env.rows(), genes.rows()));
    }
    const auto q = env.cols();
    const auto p = genes.cols();
    CoordinateMap map(static_cast<std::size_t>(q), static_cast<std::size_t>(p));
    Eigen::MatrixXd u(env.rows(), static_cast<Eigen::Index>(map.d()));
    u.leftCols(q) = env;
    u.middleCols(q, p) = genes;
    for (Eigen::Index j = 0; j < q; ++j) {
        for (Eigen::Index k = 0; k < p; ++k) {
            u.col(q + p + j * p + k) = env.col(j).cwiseProduct(genes.col(k));
        }
    }
    return InteractionDesign(std::move(u), map);
}

CoefficientVector::CoefficientVector(CoordinateMap map, Eigen::VectorXd values)
    : map_(map), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != map_.d()) {
        throw DimensionError(
            fmt::format("coefficient vector has length {}, expected {}", values_.size(), map_.d()));
    }
}

std::size_t CoefficientVector::nnz() const noexcept {
    return static_cast<std::size_t>((values_.array() != 0.0).count());
}

std::vector<std::size_t> CoefficientVector::support() const {
    std::vector<std::size_t> s;
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
        if (values_[i] != 0.0) s.push_back(static_cast<std::size_t>(i));
    }
    return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& text, std::size_t row, const std::string& column) {
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || text.empty()) {
        throw DataError(fmt::format("row {}: column '{}' is not a number: '{}'", row, column, text));
    }
    return value;
}

}  // namespace

SurvivalDataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV input");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "time" || header[1] != "status") {
        throw DataError("CSV header must start with 'time,status'");
    }
    std::size_t q = 0;
    std::size_t p = 0;
    for (std::size_t c = 2; c < header.size(); ++c) {
        const auto& h = header[c];
        if (h.size() >= 2 && h[0] == 'x' && p == 0 && h == fmt::format("x{}", q + 1)) {
            ++q;
        } else if (h.size() >= 2 && h[0] == 'z' && h == fmt::format("z{}", p + 1)) {
            ++p;
        } else {
            throw DataError(fmt::format(
                "unexpected header column '{}' (expected x1..xq followed by z1..zp)", h));
        }
    }

    std::vector<double> times;
    std::vector<int> status;
    std::vector<double> xs;
    std::vector<double> zs;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++row;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DataError(fmt::format("row {}: expected {} fields, found {}", row, header.size(),
                                        fields.size()));
        }
        const double t = parse_double(fields[0], row, "time");
        if (!(t > 0.0) || !std::isfinite(t)) {
            throw DataError(fmt::format("row {}: time must be positive, got {}", row, fields[0]));
        }
        int s = 0;
        if (fields[1] == "1") {
            s = 1;
        } else if (fields[1] != "0") {
            throw DataError(fmt::format("row {}: status must be 0 or 1, got '{}'", row, fields[1]));
        }
        times.push_back(t);
        status.push_back(s);
        for (std::size_t c = 0; c < q; ++c) xs.push_back(parse_double(fields[2 + c], row, header[2 + c]));
        for (std::size_t c = 0; c < p; ++c) {
            zs.push_back(parse_double(fields[2 + q + c], row, header[2 + q + c]));
        }
    }
    const auto n = static_cast<Eigen::Index>(times.size());
    const auto qi = static_cast<Eigen::Index>(q);
    const auto pi = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd env = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        xs.data(), n, qi);
    Eigen::MatrixXd genes =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(zs.data(), n, pi);
    return SurvivalDataset(std::move(times), std::move(status), std::move(env), std::move(genes));
}

SurvivalDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path));
    return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const SurvivalDataset& dataset) {
    out << "time,status";
    for (std::size_t j = 0; j < dataset.q(); ++j) out << ",x" << j + 1;
    for (std::size_t k = 0; k < dataset.p(); ++k) out << ",z" << k + 1;
    out << '\n';
    fmt::memory_buffer buf;
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        buf.clear();
        const auto r = static_cast<Eigen::Index>(i);
        fmt::format_to(std::back_inserter(buf), "{:.17g},{}", dataset.times()[i], dataset.status()[i]);
        for (Eigen::Index j = 0; j < dataset.env().cols(); ++j) {
            fmt::format_to(std::back_inserter(buf), ",{:.17g}", dataset.env()(r, j));
        }
        for (Eigen::Index k = 0; k < dataset.genes().cols(); ++k) {
            fmt::format_to(std::back_inserter(buf), ",{:.17g}", dataset.genes()(r, k));
        }
        buf.push_back('\n');
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

void write_coefficients_csv(std::ostream& out, const CoefficientVector& theta,
                            const std::string& value_column, bool include_zeros) {
    out << "coordinate_kind,j,k," << value_column << '\n';
    const auto& map = theta.index_map();
    for (std::size_t i = 0; i < theta.d(); ++i) {
        if (!include_zeros && theta[i] == 0.0) continue;
        const auto c = map.coordinate(i);
        std::size_t j = 0;
        std::size_t k = 0;
        if (c.kind != CoordinateKind::Gene) j = c.j + 1;
        if (c.kind != CoordinateKind::Env) k = c.k + 1;
        out << fmt::format("{},{},{},{:.17g}\n", to_string(c.kind), j, k, theta[i]);
    }
}

}  // namespace relerr
