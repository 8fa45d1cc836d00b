#pragma once

// Sparse rating storage, ingestion, scaling, splits and the seen/unseen
// row-column areas used to evaluate extension to new rows and columns.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <iterator>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmf/errors.hpp"
#include "dmf/ndcore.hpp"
#include "dmf/rng.hpp"
#include "json.hpp"

namespace dmf {

/// Linear map between the rating domain [alpha, beta] and [-1, 1].
class RatingScale {
public:
    RatingScale() : RatingScale(1.0, 5.0) {}
    RatingScale(double alpha, double beta) : alpha_(alpha), beta_(beta), mu_((alpha + beta) / 2.0) {
        if (!(alpha < beta)) throw ConfigError("rating range requires alpha < beta");
    }

    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }
    double mu() const noexcept { return mu_; }

    double scale(double x) const noexcept { return (x - mu_) / (mu_ - alpha_); }
    double unscale(double x) const noexcept { return x * (mu_ - alpha_) + mu_; }

    bool operator==(const RatingScale&) const = default;

private:
    double alpha_;
    double beta_;
    double mu_;
};

struct Rating {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;

    bool operator==(const Rating&) const = default;
};

/// Observed entries of an n x m matrix in coordinate form.
class RatingMatrix {
public:
    RatingMatrix(std::size_t n, std::size_t m, std::vector<Rating> entries, RatingScale scale, bool scaled = false,
                 std::vector<std::string> row_ids = {}, std::vector<std::string> col_ids = {})
        : n_(n), m_(m), entries_(std::move(entries)), scale_(scale), scaled_(scaled),
          row_ids_(std::move(row_ids)), col_ids_(std::move(col_ids)) {
        if (!row_ids_.empty() && row_ids_.size() != n_) throw ValidationError("row id table size != n");
        if (!col_ids_.empty() && col_ids_.size() != m_) throw ValidationError("column id table size != m");
        const double lo = scaled_ ? -1.0 : scale_.alpha();
        const double hi = scaled_ ? 1.0 : scale_.beta();
        lookup_.reserve(entries_.size());
        for (std::size_t k = 0; k < entries_.size(); ++k) {
            const Rating& e = entries_[k];
            if (e.row >= n_ || e.col >= m_) {
                throw IndexError("entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                                 ") outside " + std::to_string(n_) + "x" + std::to_string(m_));
            }
            if (!std::isfinite(e.value) || e.value < lo || e.value > hi) {
                throw ValidationError("entry (" + std::to_string(e.row) + "," + std::to_string(e.col) + ") value " +
                                      std::to_string(e.value) + " outside [" + std::to_string(lo) + "," +
                                      std::to_string(hi) + "]");
            }
            if (!lookup_.emplace(key(e.row, e.col), k).second) {
                throw ValidationError("duplicate entry (" + std::to_string(e.row) + "," + std::to_string(e.col) + ")");
            }
        }
    }

    std::size_t rows() const noexcept { return n_; }
    std::size_t cols() const noexcept { return m_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<Rating>& entries() const noexcept { return entries_; }
    const Rating& entry(std::size_t k) const { return entries_.at(k); }
    const RatingScale& scale() const noexcept { return scale_; }
    bool is_scaled() const noexcept { return scaled_; }

    /// Original identifiers, indexed by dense row/column index. Empty when the
    /// matrix was built in memory.
    const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }
    const std::vector<std::string>& col_ids() const noexcept { return col_ids_; }

    std::optional<std::size_t> find(std::size_t row, std::size_t col) const {
        auto it = lookup_.find(key(row, col));
        if (it == lookup_.end()) return std::nullopt;
        return it->second;
    }

private:
    static std::uint64_t key(std::size_t r, std::size_t c) { return (std::uint64_t(r) << 32) ^ std::uint64_t(c); }

    std::size_t n_;
    std::size_t m_;
    std::vector<Rating> entries_;
    RatingScale scale_;
    bool scaled_;
    std::vector<std::string> row_ids_;
    std::vector<std::string> col_ids_;
    std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

// ---------------------------------------------------------------------------
// Ingestion

enum class RatingFormat {
    movielens,  ///< UserID::MovieID::Rating::Timestamp
    csv,        ///< header "user,item,rating[,...]"
};

inline RatingFormat parse_rating_format(std::string_view name) {
    if (name == "movielens" || name == "ml-1m") return RatingFormat::movielens;
    if (name == "csv") return RatingFormat::csv;
    throw ConfigError("unknown data format '" + std::string(name) + "' (expected movielens or csv)");
}

namespace detail {

inline std::vector<std::string_view> split_on(std::string_view line, std::string_view sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + sep.size();
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Dense, first-appearance-order reindexing of string identifiers.
class Reindexer {
public:
    std::size_t operator()(std::string_view id) {
        auto [it, inserted] = index_.try_emplace(std::string(id), ids_.size());
        if (inserted) ids_.emplace_back(id);
        return it->second;
    }
    std::vector<std::string> take() { return std::move(ids_); }

private:
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> ids_;
};

}  // namespace detail

/// Reads ratings from a stream. `source` names the input in error messages.
inline RatingMatrix parse_ratings(std::istream& in, RatingFormat format, RatingScale scale,
                                  const std::string& source = "<stream>") {
    detail::Reindexer users;
    detail::Reindexer items;
    std::vector<Rating> entries;
    std::unordered_map<std::uint64_t, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    bool header_pending = format == RatingFormat::csv;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = detail::trim(line);
        if (text.empty()) continue;
        if (header_pending) {
            const auto cols = detail::split_on(text, ",");
            if (cols.size() < 3 || detail::trim(cols[0]) != "user" || detail::trim(cols[1]) != "item" ||
                detail::trim(cols[2]) != "rating") {
                throw ParseError(source, line_no, "expected header 'user,item,rating'");
            }
            header_pending = false;
            continue;
        }
        const auto fields = format == RatingFormat::movielens ? detail::split_on(text, "::")
                                                              : detail::split_on(text, ",");
        if (format == RatingFormat::movielens && fields.size() != 4) {
            throw ParseError(source, line_no, "expected UserID::MovieID::Rating::Timestamp");
        }
        if (format == RatingFormat::csv && fields.size() < 3) {
            throw ParseError(source, line_no, "expected user,item,rating");
        }
        const std::string_view user = detail::trim(fields[0]);
        const std::string_view item = detail::trim(fields[1]);
        if (user.empty() || item.empty()) throw ParseError(source, line_no, "empty identifier");
        const auto value = detail::to_double(fields[2]);
        if (!value) throw ParseError(source, line_no, "rating is not a number");
        if (*value < scale.alpha() || *value > scale.beta()) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": rating " + std::string(fields[2]) +
                                  " outside [" + std::to_string(scale.alpha()) + "," +
                                  std::to_string(scale.beta()) + "]");
        }
        const std::size_t r = users(user);
        const std::size_t c = items(item);
        const std::uint64_t k = (std::uint64_t(r) << 32) ^ std::uint64_t(c);
        if (!seen.emplace(k, line_no).second) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate entry for user " +
                                  std::string(user) + ", item " + std::string(item));
        }
        entries.push_back({r, c, *value});
    }
    if (entries.empty()) throw ValidationError(source + ": no entries");
    auto row_ids = users.take();
    auto col_ids = items.take();
    const std::size_t n = row_ids.size();
    const std::size_t m = col_ids.size();
    return RatingMatrix(n, m, std::move(entries), scale, false, std::move(row_ids), std::move(col_ids));
}

inline RatingMatrix parse_movielens(const std::string& path, RatingFormat format = RatingFormat::movielens,
                                    RatingScale scale = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ratings file '" + path + "'");
    return parse_ratings(in, format, scale, path);
}

// ---------------------------------------------------------------------------
// Scaling

inline RatingMatrix scale(const RatingMatrix& matrix) {
    if (matrix.is_scaled()) throw StateError("matrix is already scaled");
    std::vector<Rating> entries = matrix.entries();
    for (Rating& e : entries) e.value = std::clamp(matrix.scale().scale(e.value), -1.0, 1.0);
    return RatingMatrix(matrix.rows(), matrix.cols(), std::move(entries), matrix.scale(), true, matrix.row_ids(),
                        matrix.col_ids());
}

inline double unscale(double value, const RatingScale& s) { return s.unscale(value); }

// ---------------------------------------------------------------------------
// Splits

struct SplitFractions {
    double train = 0.75;
    double validation = 0.05;
    double test = 0.20;

    void validate() const {
        if (!(train > 0.0) || validation < 0.0 || test < 0.0 || !std::isfinite(validation) || !std::isfinite(test)) {
            throw ConfigError("split fractions must be non-negative with a positive training share");
        }
        if (std::fabs(train + validation + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    }
};

/// Disjoint entry-index sets, each sorted ascending.
struct SplitSets {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;

    bool operator==(const SplitSets&) const = default;
};

inline SplitSets random_split(std::size_t entry_count, const SplitFractions& fractions, std::uint64_t seed) {
    fractions.validate();
    std::vector<std::size_t> order(entry_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    const auto count = [&](double f) {
        return std::min(entry_count, static_cast<std::size_t>(std::llround(f * static_cast<double>(entry_count))));
    };
    const std::size_t n_train = count(fractions.train);
    const std::size_t n_val = std::min(entry_count - n_train, count(fractions.validation));
    SplitSets out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline SplitSets random_split(const RatingMatrix& matrix, const SplitFractions& fractions, std::uint64_t seed) {
    return random_split(matrix.size(), fractions, seed);
}

/// Sorted intersection of two ascending index lists.
inline std::vector<std::size_t> intersect(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    std::vector<std::size_t> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

// ---------------------------------------------------------------------------
// Areas

/// (I) seen row, seen col; (II) unseen row, seen col; (III) seen row, unseen
/// col; (IV) unseen row, unseen col.
enum class Area { I = 0, II = 1, III = 2, IV = 3 };

inline constexpr std::array<Area, 4> kAllAreas{Area::I, Area::II, Area::III, Area::IV};

inline const char* area_name(Area a) {
    switch (a) {
        case Area::I: return "I";
        case Area::II: return "II";
        case Area::III: return "III";
        case Area::IV: return "IV";
    }
    return "?";
}

inline Area area_of(bool row_seen, bool col_seen) {
    if (row_seen) return col_seen ? Area::I : Area::III;
    return col_seen ? Area::II : Area::IV;
}

/// Ordered subset of [0, total) with O(1) member-to-position lookup.
class Universe {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    Universe() = default;
    Universe(std::vector<std::size_t> members, std::size_t total) : members_(std::move(members)), position_(total, npos) {
        std::sort(members_.begin(), members_.end());
        for (std::size_t p = 0; p < members_.size(); ++p) {
            if (members_[p] >= total) throw IndexError("universe member out of range");
            if (position_[members_[p]] != npos) throw ValidationError("duplicate universe member");
            position_[members_[p]] = p;
        }
    }

    static Universe all(std::size_t total) {
        std::vector<std::size_t> m(total);
        std::iota(m.begin(), m.end(), std::size_t{0});
        return Universe(std::move(m), total);
    }

    std::size_t size() const noexcept { return members_.size(); }
    std::size_t total() const noexcept { return position_.size(); }
    const std::vector<std::size_t>& members() const noexcept { return members_; }
    bool contains(std::size_t i) const { return i < position_.size() && position_[i] != npos; }
    std::size_t position(std::size_t i) const { return i < position_.size() ? position_[i] : npos; }

private:
    std::vector<std::size_t> members_;
    std::vector<std::size_t> position_;
};

struct AreaSplit {
    Universe seen_rows;
    Universe seen_cols;
    std::array<std::vector<std::size_t>, 4> areas;

    const std::vector<std::size_t>& area(Area a) const { return areas[static_cast<std::size_t>(a)]; }

    /// The same areas restricted to a sorted entry subset (e.g. the test split).
    AreaSplit restricted_to(std::span<const std::size_t> subset) const {
        AreaSplit out{seen_rows, seen_cols, {}};
        for (std::size_t a = 0; a < 4; ++a) out.areas[a] = intersect(areas[a], subset);
        return out;
    }
};

/// Assigns every entry of `matrix` to its area given explicit seen sets.
inline AreaSplit make_area_split(const RatingMatrix& matrix, std::vector<std::size_t> seen_rows,
                                 std::vector<std::size_t> seen_cols) {
    AreaSplit out{Universe(std::move(seen_rows), matrix.rows()), Universe(std::move(seen_cols), matrix.cols()), {}};
    if (out.seen_rows.size() == 0 || out.seen_cols.size() == 0) {
        throw ConfigError("area split leaves no seen rows or no seen columns");
    }
    for (std::size_t k = 0; k < matrix.size(); ++k) {
        const Rating& e = matrix.entry(k);
        const Area a = area_of(out.seen_rows.contains(e.row), out.seen_cols.contains(e.col));
        out.areas[static_cast<std::size_t>(a)].push_back(k);
    }
    return out;
}

/// Every row and column seen; all entries fall in area (I).
inline AreaSplit full_area_split(const RatingMatrix& matrix) {
    return make_area_split(matrix, Universe::all(matrix.rows()).members(), Universe::all(matrix.cols()).members());
}

namespace detail {

inline std::vector<std::size_t> pick_seen(std::size_t total, double holdout, Rng& rng) {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    const auto held = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(total)));
    if (held >= total) throw ConfigError("holdout leaves no seen rows or columns");
    order.erase(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace detail

/// Randomly holds out round(fraction * count) rows and columns as unseen.
inline AreaSplit area_split(const RatingMatrix& matrix, double row_holdout, double col_holdout, std::uint64_t seed) {
    if (!(row_holdout > 0.0 && row_holdout < 1.0) || !(col_holdout > 0.0 && col_holdout < 1.0)) {
        throw ConfigError("holdout fractions must lie in (0, 1)");
    }
    Rng rng(seed);
    auto rows = detail::pick_seen(matrix.rows(), row_holdout, rng);
    auto cols = detail::pick_seen(matrix.cols(), col_holdout, rng);
    return make_area_split(matrix, std::move(rows), std::move(cols));
}

// ---------------------------------------------------------------------------
// Model inputs

/// Builds the branch inputs: row i as a vector over the seen columns, column j
/// as a vector over the seen rows. Only `visible` entries contribute; every
/// other coordinate is 0, the scaled midpoint.
class InputIndex {
public:
    using Sparse = std::vector<std::pair<std::size_t, double>>;

    InputIndex(const RatingMatrix& scaled, std::span<const std::size_t> visible, Universe seen_rows,
               Universe seen_cols)
        : seen_rows_(std::move(seen_rows)), seen_cols_(std::move(seen_cols)), by_row_(scaled.rows()),
          by_col_(scaled.cols()) {
        if (!scaled.is_scaled()) throw StateError("InputIndex needs a scaled matrix");
        if (seen_rows_.total() != scaled.rows() || seen_cols_.total() != scaled.cols()) {
            throw DimensionError("universe sizes do not match the matrix");
        }
        for (const std::size_t k : visible) {
            const Rating& e = scaled.entry(k);
            if (const std::size_t p = seen_cols_.position(e.col); p != Universe::npos) by_row_[e.row].push_back({p, e.value});
            if (const std::size_t p = seen_rows_.position(e.row); p != Universe::npos) by_col_[e.col].push_back({p, e.value});
        }
        for (auto& v : by_row_) std::sort(v.begin(), v.end());
        for (auto& v : by_col_) std::sort(v.begin(), v.end());
    }

    /// Length of a row input (number of seen columns).
    std::size_t row_dim() const noexcept { return seen_cols_.size(); }
    /// Length of a column input (number of seen rows).
    std::size_t col_dim() const noexcept { return seen_rows_.size(); }
    std::size_t rows() const noexcept { return by_row_.size(); }
    std::size_t cols() const noexcept { return by_col_.size(); }
    const Universe& seen_rows() const noexcept { return seen_rows_; }
    const Universe& seen_cols() const noexcept { return seen_cols_; }

    const Sparse& row_entries(std::size_t i) const {
        if (i >= by_row_.size()) throw IndexError("row " + std::to_string(i) + " out of range");
        return by_row_[i];
    }
    const Sparse& col_entries(std::size_t j) const {
        if (j >= by_col_.size()) throw IndexError("column " + std::to_string(j) + " out of range");
        return by_col_[j];
    }

    Tensor row_vector(std::size_t i) const { return densify(row_entries(i), row_dim()); }
    Tensor col_vector(std::size_t j) const { return densify(col_entries(j), col_dim()); }

    SparseRows row_batch(std::span<const std::size_t> rows) const {
        SparseRows out;
        out.cols = row_dim();
        for (const std::size_t i : rows) out.push_row(row_entries(i));
        return out;
    }
    SparseRows col_batch(std::span<const std::size_t> cols) const {
        SparseRows out;
        out.cols = col_dim();
        for (const std::size_t j : cols) out.push_row(col_entries(j));
        return out;
    }

    /// Input for a row that is not part of the matrix, from (column, scaled
    /// value) observations. Observations on unseen columns are dropped.
    Sparse external_row(std::span<const std::pair<std::size_t, double>> observations) const {
        return external(observations, seen_cols_);
    }
    Sparse external_col(std::span<const std::pair<std::size_t, double>> observations) const {
        return external(observations, seen_rows_);
    }

    static Tensor densify(const Sparse& entries, std::size_t dim) {
        Tensor out(Shape{dim});
        for (const auto& [p, v] : entries) out[p] = v;
        return out;
    }

private:
    static Sparse external(std::span<const std::pair<std::size_t, double>> obs, const Universe& u) {
        Sparse out;
        for (const auto& [idx, v] : obs)
            if (const std::size_t p = u.position(idx); p != Universe::npos) out.push_back({p, v});
        std::sort(out.begin(), out.end());
        return out;
    }

    Universe seen_rows_;
    Universe seen_cols_;
    std::vector<Sparse> by_row_;
    std::vector<Sparse> by_col_;
};

// ---------------------------------------------------------------------------
// Split manifest

inline constexpr const char* kManifestTag = "dmf-split-manifest";
inline constexpr int kManifestVersion = 1;

struct AreaRecipe {
    double row_holdout = 0.0;
    double col_holdout = 0.0;
    std::vector<std::size_t> seen_rows;
    std::vector<std::size_t> seen_cols;
};

struct SplitManifest {
    std::uint64_t seed = 0;
    SplitFractions fractions;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t entries = 0;
    SplitSets split;
    std::optional<AreaRecipe> areas;

    /// Area split for `matrix`; every row and column is seen when no holdout
    /// was configured.
    AreaSplit area_split_for(const RatingMatrix& matrix) const {
        check_matches(matrix);
        if (!areas) return full_area_split(matrix);
        return make_area_split(matrix, areas->seen_rows, areas->seen_cols);
    }

    void check_matches(const RatingMatrix& matrix) const {
        if (matrix.rows() != rows || matrix.cols() != cols || matrix.size() != entries) {
            throw ValidationError("split manifest describes a " + std::to_string(rows) + "x" + std::to_string(cols) +
                                  " matrix with " + std::to_string(entries) + " entries; data is " +
                                  std::to_string(matrix.rows()) + "x" + std::to_string(matrix.cols()) + " with " +
                                  std::to_string(matrix.size()));
        }
    }
};

inline nlohmann::ordered_json to_json(const SplitManifest& m) {
    nlohmann::ordered_json j;
    j["format"] = kManifestTag;
    j["version"] = kManifestVersion;
    j["seed"] = m.seed;
    j["fractions"] = {m.fractions.train, m.fractions.validation, m.fractions.test};
    j["rows"] = m.rows;
    j["cols"] = m.cols;
    j["entries"] = m.entries;
    j["counts"] = {m.split.train.size(), m.split.validation.size(), m.split.test.size()};
    j["train"] = m.split.train;
    j["validation"] = m.split.validation;
    j["test"] = m.split.test;
    if (m.areas) {
        j["areas"] = {{"row_holdout", m.areas->row_holdout},
                      {"col_holdout", m.areas->col_holdout},
                      {"seen_rows", m.areas->seen_rows},
                      {"seen_cols", m.areas->seen_cols}};
    }
    return j;
}

inline SplitManifest manifest_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kManifestTag) throw FormatError("not a split manifest");
        if (j.at("version").get<int>() != kManifestVersion) {
            throw VersionError("split manifest version " + std::to_string(j.at("version").get<int>()) +
                               " unsupported (expected " + std::to_string(kManifestVersion) + ")");
        }
        SplitManifest m;
        m.seed = j.at("seed").get<std::uint64_t>();
        const auto f = j.at("fractions").get<std::vector<double>>();
        if (f.size() != 3) throw FormatError("manifest fractions must have 3 values");
        m.fractions = {f[0], f[1], f[2]};
        m.rows = j.at("rows").get<std::size_t>();
        m.cols = j.at("cols").get<std::size_t>();
        m.entries = j.at("entries").get<std::size_t>();
        m.split.train = j.at("train").get<std::vector<std::size_t>>();
        m.split.validation = j.at("validation").get<std::vector<std::size_t>>();
        m.split.test = j.at("test").get<std::vector<std::size_t>>();
        if (j.contains("areas")) {
            const auto& a = j.at("areas");
            m.areas = AreaRecipe{a.at("row_holdout").get<double>(), a.at("col_holdout").get<double>(),
                                 a.at("seen_rows").get<std::vector<std::size_t>>(),
                                 a.at("seen_cols").get<std::vector<std::size_t>>()};
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed split manifest: ") + e.what());
    }
}

inline void save_manifest(const SplitManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << to_json(m).dump(1) << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline SplitManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open split manifest '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("split manifest '" + path + "': " + e.what());
    }
    return manifest_from_json(j);
}

}  // namespace dmf
