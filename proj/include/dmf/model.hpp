#pragma once

// Two-branch factorization network: a row branch and a column branch of fully
// connected layers produce latent factors, and their cosine similarity is the
// prediction in [-1, 1].

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmf/data.hpp"
#include "dmf/errors.hpp"
#include "dmf/ndcore.hpp"
#include "dmf/quantizer.hpp"
#include "dmf/rng.hpp"
#include "json.hpp"

namespace dmf {

enum class Activation { selu, identity };

inline const char* activation_name(Activation a) { return a == Activation::selu ? "selu" : "identity"; }

inline Activation parse_activation(const std::string& name) {
    if (name == "selu") return Activation::selu;
    if (name == "identity" || name == "none" || name == "linear") return Activation::identity;
    throw ConfigError("unknown nonlinearity '" + name + "' (expected selu or identity)");
}

inline ElementwiseOp activation_op(Activation a) {
    return {a == Activation::selu ? Elementwise::selu : Elementwise::identity, 1.0, 0.0};
}

/// input_dim -> hidden_dims... -> latent_dim. The nonlinearity follows every
/// hidden layer; the latent layer is linear.
struct BranchConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;
    std::size_t latent_dim = 64;
    Activation nonlinearity = Activation::selu;

    void validate(const char* which) const {
        if (input_dim == 0 || latent_dim == 0 ||
            std::any_of(hidden_dims.begin(), hidden_dims.end(), [](std::size_t w) { return w == 0; })) {
            throw ConfigError(std::string(which) + " branch: all layer widths must be >= 1");
        }
    }

    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w{input_dim};
        w.insert(w.end(), hidden_dims.begin(), hidden_dims.end());
        w.push_back(latent_dim);
        return w;
    }

    bool operator==(const BranchConfig&) const = default;
};

/// y = x W + b, W stored fan_in x fan_out row-major.
struct Layer {
    Tensor weight;
    Tensor bias;
};

struct Branch {
    BranchConfig config;
    std::vector<Layer> layers;
};

struct DmfModel {
    Branch row_branch;
    Branch col_branch;
    RatingScale scale;
    std::optional<Quantizer> quantizer;

    std::size_t latent_dim() const noexcept { return row_branch.config.latent_dim; }

    /// Weights and biases of both branches: row layers then column layers,
    /// each as (weight, bias).
    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        for (Branch* b : {&row_branch, &col_branch})
            for (Layer& l : b->layers) {
                out.push_back(&l.weight);
                out.push_back(&l.bias);
            }
        return out;
    }
    std::vector<const Tensor*> parameters() const {
        std::vector<const Tensor*> out;
        for (const Branch* b : {&row_branch, &col_branch})
            for (const Layer& l : b->layers) {
                out.push_back(&l.weight);
                out.push_back(&l.bias);
            }
        return out;
    }

    /// ||W_X||^2 + ||W_Y||^2 over weight matrices only.
    double weight_norm_squared() const {
        double s = 0.0;
        for (const Branch* b : {&row_branch, &col_branch})
            for (const Layer& l : b->layers)
                for (double w : l.weight.values()) s += w * w;
        return s;
    }
};

namespace detail {

inline Branch init_branch(const BranchConfig& cfg, Rng& rng) {
    Branch b{cfg, {}};
    const auto w = cfg.widths();
    for (std::size_t k = 0; k + 1 < w.size(); ++k) {
        Layer layer{Tensor::matrix(w[k], w[k + 1]), Tensor(Shape{1, w[k + 1]})};
        // Variance 1/fan_in, the scale SELU expects.
        const double limit = std::sqrt(3.0 / static_cast<double>(w[k]));
        for (double& v : layer.weight.values()) v = rng.uniform(-limit, limit);
        b.layers.push_back(std::move(layer));
    }
    return b;
}

}  // namespace detail

/// Weights uniform in +-sqrt(3 / fan_in), biases zero. Deterministic in `seed`.
inline DmfModel init(const BranchConfig& row, const BranchConfig& col, std::uint64_t seed, RatingScale scale = {}) {
    row.validate("row");
    col.validate("column");
    if (row.latent_dim != col.latent_dim) {
        throw ConfigError("latent dimensions differ: row branch " + std::to_string(row.latent_dim) +
                          ", column branch " + std::to_string(col.latent_dim));
    }
    Rng rng(seed);
    DmfModel m;
    m.row_branch = detail::init_branch(row, rng);
    m.col_branch = detail::init_branch(col, rng);
    m.scale = scale;
    return m;
}

// ---------------------------------------------------------------------------
// Plain forward

namespace detail {

inline Tensor finish_layers(const Branch& b, Tensor h, std::size_t first) {
    const ElementwiseOp act = activation_op(b.config.nonlinearity);
    for (std::size_t k = first; k < b.layers.size(); ++k) {
        if (k > 0) h = matmul(h, b.layers[k].weight);
        for (std::size_t r = 0; r < h.rows(); ++r)
            for (std::size_t c = 0; c < h.cols(); ++c) h(r, c) += b.layers[k].bias[c];
        if (k + 1 < b.layers.size() && b.config.nonlinearity != Activation::identity) h = elementwise(act, h);
    }
    return h;
}

}  // namespace detail

/// Batch of dense inputs (B x input_dim, or a single rank-1 input) to B x d latents.
inline Tensor embed(const Branch& b, const Tensor& x) {
    if (x.cols() != b.config.input_dim || x.rank() == 0) {
        throw DimensionError("branch expects inputs of length " + std::to_string(b.config.input_dim) + ", got " +
                             shape_string(x.shape()));
    }
    const Tensor as_matrix(Shape{x.rows(), x.cols()}, std::vector<double>(x.values().begin(), x.values().end()));
    return detail::finish_layers(b, matmul(as_matrix, b.layers.front().weight), 0);
}

inline Tensor embed(const Branch& b, const SparseRows& x) {
    if (x.cols != b.config.input_dim) {
        throw DimensionError("branch expects inputs of length " + std::to_string(b.config.input_dim) + ", got " +
                             std::to_string(x.cols));
    }
    return detail::finish_layers(b, sparse_matmul(x, b.layers.front().weight), 0);
}

namespace detail {
inline Tensor to_vector(const Tensor& row) { return Tensor::vector({row.values().begin(), row.values().end()}); }
}  // namespace detail

/// Latent factor U_i for one row input of length m.
inline Tensor embed_row(const DmfModel& model, const Tensor& x) {
    if (x.rows() != 1) throw DimensionError("embed_row expects a single vector");
    return detail::to_vector(embed(model.row_branch, x));
}

/// Latent factor V_j for one column input of length n.
inline Tensor embed_col(const DmfModel& model, const Tensor& y) {
    if (y.rows() != 1) throw DimensionError("embed_col expects a single vector");
    return detail::to_vector(embed(model.col_branch, y));
}

/// <u, v> / (max(|u|, eps) * max(|v|, eps)).
inline double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw DimensionError("cosine: latent sizes differ");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) dot += u[k] * v[k];
    for (double a : u) nu += a * a;
    for (double a : v) nv += a * a;
    const double denom = std::max(std::sqrt(nu), kNormFloor) * std::max(std::sqrt(nv), kNormFloor);
    return dot / denom;
}

inline double predict(const DmfModel& model, const Tensor& x, const Tensor& y) {
    const Tensor u = embed_row(model, x);
    const Tensor v = embed_col(model, y);
    return cosine(u.values(), v.values());
}

/// Prediction for (i, j) through the input path of the given area. The area
/// must agree with whether i and j are seen rows/columns of `inputs`.
inline double predict_area(const DmfModel& model, Area area, const InputIndex& inputs, std::size_t i, std::size_t j) {
    const Area actual = area_of(inputs.seen_rows().contains(i), inputs.seen_cols().contains(j));
    if (actual != area) {
        throw ContractError(std::string("entry (") + std::to_string(i) + "," + std::to_string(j) + ") lies in area " +
                            area_name(actual) + ", not " + area_name(area));
    }
    return predict(model, inputs.row_vector(i), inputs.col_vector(j));
}

/// Batched predictions for many (row, col) pairs; each distinct row and
/// column is embedded once.
inline std::vector<double> predict_pairs(const DmfModel& model, const InputIndex& inputs,
                                         std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                         std::size_t chunk = 512) {
    std::unordered_map<std::size_t, std::size_t> row_slot, col_slot;
    std::vector<std::size_t> rows, cols;
    for (const auto& [i, j] : pairs) {
        if (row_slot.emplace(i, rows.size()).second) rows.push_back(i);
        if (col_slot.emplace(j, cols.size()).second) cols.push_back(j);
    }
    const std::size_t d = model.latent_dim();
    auto embed_all = [&](const std::vector<std::size_t>& ids, bool row_side) {
        Tensor out = Tensor::matrix(ids.size(), d);
        for (std::size_t start = 0; start < ids.size(); start += chunk) {
            const std::size_t stop = std::min(ids.size(), start + chunk);
            std::span<const std::size_t> part(ids.data() + start, stop - start);
            const Tensor z = row_side ? embed(model.row_branch, inputs.row_batch(part))
                                      : embed(model.col_branch, inputs.col_batch(part));
            std::copy(z.values().begin(), z.values().end(), out.data() + start * d);
        }
        return out;
    };
    const Tensor u = embed_all(rows, true);
    const Tensor v = embed_all(cols, false);
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [i, j] : pairs) {
        const double* ur = u.data() + row_slot[i] * d;
        const double* vr = v.data() + col_slot[j] * d;
        out.push_back(cosine({ur, d}, {vr, d}));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Differentiable forward

struct BranchVars {
    std::vector<std::pair<Var, Var>> layers;  ///< (weight, bias)
};

inline BranchVars bind(Tape& tape, const Branch& b) {
    BranchVars out;
    for (const Layer& l : b.layers) out.layers.push_back({tape.parameter(l.weight), tape.parameter(l.bias)});
    return out;
}

namespace detail {
inline Var finish_layers(const Branch& b, const BranchVars& vars, Var h) {
    const ElementwiseOp act = activation_op(b.config.nonlinearity);
    for (std::size_t k = 0; k < vars.layers.size(); ++k) {
        if (k > 0) h = matmul(h, vars.layers[k].first);
        h = add_row(h, vars.layers[k].second);
        if (k + 1 < vars.layers.size() && b.config.nonlinearity != Activation::identity) h = elementwise(act, h);
    }
    return h;
}
}  // namespace detail

inline Var embed(const Branch& b, const BranchVars& vars, std::shared_ptr<const SparseRows> x) {
    if (x->cols != b.config.input_dim) throw DimensionError("branch input length mismatch");
    return detail::finish_layers(b, vars, sparse_matmul(std::move(x), vars.layers.front().first));
}

inline Var embed(const Branch& b, const BranchVars& vars, Var x) {
    if (x.value().cols() != b.config.input_dim) throw DimensionError("branch input length mismatch");
    return detail::finish_layers(b, vars, matmul(x, vars.layers.front().first));
}

/// Row-wise cosine of two B x d latent batches, giving B x 1.
inline Var cosine_head(Var u, Var v) { return div(row_dot(u, v), mul(row_norm(u), row_norm(v))); }

// ---------------------------------------------------------------------------
// Serialization
//
// Layout (all integers and floats little-endian):
//   8 bytes   magic "DMFMODEL"
//   u32       format version
//   u64       header length L
//   L bytes   JSON header: branch configs, scale, quantizer, array shapes
//   f64[]     arrays in header order, each row-major

inline constexpr char kModelMagic[8] = {'D', 'M', 'F', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

/// Adaptive-moment state saved next to a model so training can resume.
/// Moments follow `DmfModel::parameters()` order, then the quantizer's
/// interior boundaries when present.
struct OptimizerSnapshot {
    std::uint64_t step = 0;
    std::size_t epochs_completed = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

struct ModelFile {
    DmfModel model;
    std::optional<OptimizerSnapshot> optimizer;
};

namespace detail {

inline nlohmann::ordered_json branch_json(const BranchConfig& c) {
    return {{"input_dim", c.input_dim},
            {"hidden_dims", c.hidden_dims},
            {"latent_dim", c.latent_dim},
            {"nonlinearity", activation_name(c.nonlinearity)}};
}

inline BranchConfig branch_from_json(const nlohmann::json& j) {
    BranchConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.nonlinearity = parse_activation(j.at("nonlinearity").get<std::string>());
    return c;
}

inline Branch empty_branch(const BranchConfig& cfg) {
    Branch b{cfg, {}};
    const auto w = cfg.widths();
    for (std::size_t k = 0; k + 1 < w.size(); ++k)
        b.layers.push_back({Tensor::matrix(w[k], w[k + 1]), Tensor(Shape{1, w[k + 1]})});
    return b;
}

}  // namespace detail

inline void save_model(const DmfModel& model, const std::string& path, const OptimizerSnapshot* optimizer = nullptr) {
    std::vector<const Tensor*> arrays = model.parameters();
    nlohmann::ordered_json header;
    header["row_branch"] = detail::branch_json(model.row_branch.config);
    header["col_branch"] = detail::branch_json(model.col_branch.config);
    header["scale"] = {{"alpha", model.scale.alpha()}, {"beta", model.scale.beta()}};
    if (model.quantizer) {
        header["quantizer"] = {{"levels", model.quantizer->levels()}, {"lambda", model.quantizer->lambda()}};
        arrays.push_back(&model.quantizer->interior());
    }
    const std::size_t n_params = arrays.size();
    if (optimizer) {
        if (optimizer->first_moment.size() != n_params || optimizer->second_moment.size() != n_params) {
            throw ContractError("optimizer snapshot does not match the model parameters");
        }
        header["optimizer"] = {{"step", optimizer->step}, {"epochs_completed", optimizer->epochs_completed}};
        for (const Tensor& t : optimizer->first_moment) arrays.push_back(&t);
        for (const Tensor& t : optimizer->second_moment) arrays.push_back(&t);
    }
    auto& shapes = header["arrays"] = nlohmann::ordered_json::array();
    for (const Tensor* t : arrays) shapes.push_back(t->shape());

    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file '" + path + "'");
    const std::uint32_t version = kModelVersion;
    const std::uint64_t length = text.size();
    out.write(kModelMagic, sizeof kModelMagic);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&length), sizeof length);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const Tensor* t : arrays) {
        out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed for model file '" + path + "'");
}

inline ModelFile load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t length = 0;
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
        throw FormatError("'" + path + "' is not a model file");
    }
    if (!in.read(reinterpret_cast<char*>(&version), sizeof version)) throw FormatError("truncated model file");
    if (version != kModelVersion) {
        throw VersionError("model file version " + std::to_string(version) + " unsupported (expected " +
                           std::to_string(kModelVersion) + ")");
    }
    if (!in.read(reinterpret_cast<char*>(&length), sizeof length) || length > (std::uint64_t(1) << 32)) {
        throw FormatError("truncated model file");
    }
    std::string text(length, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw FormatError("truncated model header");

    ModelFile file;
    std::vector<Tensor*> arrays;
    try {
        const auto header = nlohmann::json::parse(text);
        DmfModel& m = file.model;
        m.row_branch = detail::empty_branch(detail::branch_from_json(header.at("row_branch")));
        m.col_branch = detail::empty_branch(detail::branch_from_json(header.at("col_branch")));
        m.scale = RatingScale(header.at("scale").at("alpha").get<double>(), header.at("scale").at("beta").get<double>());
        arrays = m.parameters();
        if (header.contains("quantizer")) {
            const auto& q = header.at("quantizer");
            m.quantizer = Quantizer::uniform(q.at("levels").get<std::vector<double>>(), q.at("lambda").get<double>());
            arrays.push_back(&m.quantizer->interior());
        }
        if (header.contains("optimizer")) {
            const auto& o = header.at("optimizer");
            OptimizerSnapshot snap;
            snap.step = o.at("step").get<std::uint64_t>();
            snap.epochs_completed = o.at("epochs_completed").get<std::size_t>();
            for (const Tensor* t : arrays) {
                snap.first_moment.emplace_back(t->shape());
                snap.second_moment.emplace_back(t->shape());
            }
            file.optimizer = std::move(snap);
            for (Tensor& t : file.optimizer->first_moment) arrays.push_back(&t);
            for (Tensor& t : file.optimizer->second_moment) arrays.push_back(&t);
        }
        const auto shapes = header.at("arrays").get<std::vector<Shape>>();
        if (shapes.size() != arrays.size()) throw FormatError("model header array count mismatch");
        for (std::size_t k = 0; k < shapes.size(); ++k) {
            if (shapes[k] != arrays[k]->shape()) throw FormatError("model header array shape mismatch");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corrupt model header: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("invalid model header: ") + e.what());
    }
    for (Tensor* t : arrays) {
        if (!in.read(reinterpret_cast<char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)))) {
            throw FormatError("truncated model file '" + path + "'");
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in model file '" + path + "'");
    if (const auto& q = file.model.quantizer) {
        try {
            Quantizer check(q->levels(), q->boundaries(), q->lambda());
        } catch (const ConfigError& e) {
            throw FormatError(std::string("model file holds invalid quantizer boundaries: ") + e.what());
        }
    }
    for (const Tensor* t : file.model.parameters()) {
        if (!t->all_finite()) throw FormatError("model file holds non-finite weights");
    }
    return file;
}

inline DmfModel load_model(const std::string& path) { return load_model_file(path).model; }

}  // namespace dmf
