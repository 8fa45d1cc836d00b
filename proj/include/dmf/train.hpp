#pragma once

// Objectives, adaptive-moment optimizer and the epoch loop.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dmf/data.hpp"
#include "dmf/errors.hpp"
#include "dmf/metrics.hpp"
#include "dmf/model.hpp"
#include "dmf/ndcore.hpp"
#include "dmf/quantizer.hpp"
#include "dmf/rng.hpp"
#include "json.hpp"

namespace dmf {

enum class TrainMode { dmf, dmf_d };

inline const char* mode_name(TrainMode m) { return m == TrainMode::dmf ? "dmf" : "dmf-d"; }

inline TrainMode parse_mode(const std::string& s) {
    if (s == "dmf") return TrainMode::dmf;
    if (s == "dmf-d" || s == "dmfd" || s == "dmf_d") return TrainMode::dmf_d;
    throw ConfigError("unknown training mode '" + s + "' (expected dmf or dmf-d)");
}

struct TrainConfig {
    TrainMode mode = TrainMode::dmf;
    double gamma = 1e-5;   ///< weight decay, real-valued objective
    double gamma1 = 1e-5;  ///< weight decay, quantized objective
    double gamma2 = 1e-2;  ///< boundary penalty, quantized objective
    double learning_rate = 1e-3;
    double boundary_learning_rate = 1e-4;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 50;
    std::size_t early_stop_patience = 5;
    std::uint64_t seed = 0;  ///< shuffle seed
    double lambda_start = 5.0;
    double lambda_end = 1e3;
    /// Quantize the residual F - M instead of the prediction F.
    bool residual_quantization = false;

    void validate() const {
        if (!(gamma >= 0.0) || !(gamma1 >= 0.0) || !(gamma2 >= 0.0)) throw ConfigError("penalty weights must be >= 0");
        if (!(learning_rate > 0.0) || !(boundary_learning_rate > 0.0)) throw ConfigError("learning rates must be > 0");
        if (batch_size == 0 || max_epochs == 0) throw ConfigError("batch_size and max_epochs must be >= 1");
        if (early_stop_patience == 0) throw ConfigError("early_stop_patience must be >= 1");
        schedule().validate();
    }

    LambdaSchedule schedule() const { return {lambda_start, lambda_end, max_epochs - 1}; }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_rmse = std::numeric_limits<double>::quiet_NaN();
    double val_mae = std::numeric_limits<double>::quiet_NaN();
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;

    bool operator==(const EpochRecord& o) const {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        return epoch == o.epoch && same(train_loss, o.train_loss) && same(val_rmse, o.val_rmse) &&
               same(val_mae, o.val_mae) && same(lambda, o.lambda) && same(seconds, o.seconds);
    }
};

struct TrainReport {
    TrainMode mode = TrainMode::dmf;
    std::vector<EpochRecord> epochs;
    std::optional<std::size_t> best_epoch;

    /// `epoch,train_loss,val_rmse,val_mae,lambda,seconds`; absent values are
    /// left empty. `with_time = false` writes 0 seconds for reproducible files.
    std::string to_csv(bool with_time = true) const {
        std::ostringstream out;
        out.precision(17);
        out << "epoch,train_loss,val_rmse,val_mae,lambda,seconds\n";
        auto cell = [&](double v) {
            if (!std::isnan(v)) out << v;
        };
        for (const EpochRecord& r : epochs) {
            out << r.epoch << ',';
            cell(r.train_loss);
            out << ',';
            cell(r.val_rmse);
            out << ',';
            cell(r.val_mae);
            out << ',';
            cell(r.lambda);
            out << ',' << (with_time ? r.seconds : 0.0) << '\n';
        }
        return out.str();
    }

    nlohmann::ordered_json summary() const {
        nlohmann::ordered_json j;
        j["mode"] = mode_name(mode);
        j["epochs"] = epochs.size();
        if (best_epoch) {
            const EpochRecord& b = epochs.at(*best_epoch);
            j["best_epoch"] = b.epoch;
            j["best_val_rmse"] = std::isnan(b.val_rmse) ? nlohmann::ordered_json() : nlohmann::ordered_json(b.val_rmse);
            j["best_val_mae"] = std::isnan(b.val_mae) ? nlohmann::ordered_json() : nlohmann::ordered_json(b.val_mae);
        }
        if (!epochs.empty()) j["final_train_loss"] = epochs.back().train_loss;
        return j;
    }
};

// ---------------------------------------------------------------------------
// Objectives

struct LossConfig {
    TrainMode mode = TrainMode::dmf;
    double weight_decay = 0.0;       ///< gamma (real-valued) or gamma1 (quantized)
    double boundary_penalty = 0.0;   ///< gamma2
    bool residual_quantization = false;

    static LossConfig from(const TrainConfig& c) {
        if (c.mode == TrainMode::dmf) return {TrainMode::dmf, c.gamma, 0.0, false};
        return {TrainMode::dmf_d, c.gamma1, c.gamma2, c.residual_quantization};
    }
};

/// A recorded objective. `parameters` follows `DmfModel::parameters()`;
/// `boundaries` is set in quantized mode.
struct Objective {
    Var loss;
    Var fit;  ///< mean squared error term alone
    std::vector<Var> parameters;
    std::optional<Var> boundaries;
};

/// Records the batch objective on `tape`:
///   real-valued: mean (F - M)^2 + gamma * (||W_X||^2 + ||W_Y||^2)
///   quantized:   mean (G(F) - M)^2 + gamma1 * (...) + gamma2 * ||b - b_ref||^2
/// Biases are not penalised. Targets are scaled values.
inline Objective record_objective(Tape& tape, const DmfModel& model, const InputIndex& inputs,
                                  std::span<const Rating> batch, const LossConfig& cfg) {
    if (batch.empty()) throw ContractError("objective over an empty batch");
    if (cfg.mode == TrainMode::dmf_d && !model.quantizer) throw StateError("quantized objective needs a quantizer");
    std::vector<std::size_t> rows, cols;
    Tensor targets = Tensor::matrix(batch.size(), 1);
    for (std::size_t k = 0; k < batch.size(); ++k) {
        rows.push_back(batch[k].row);
        cols.push_back(batch[k].col);
        targets[k] = batch[k].value;
    }
    const BranchVars row_vars = bind(tape, model.row_branch);
    const BranchVars col_vars = bind(tape, model.col_branch);
    Objective obj;
    for (const BranchVars* bv : {&row_vars, &col_vars})
        for (const auto& [w, b] : bv->layers) {
            obj.parameters.push_back(w);
            obj.parameters.push_back(b);
        }
    const Var u = embed(model.row_branch, row_vars, std::make_shared<const SparseRows>(inputs.row_batch(rows)));
    const Var v = embed(model.col_branch, col_vars, std::make_shared<const SparseRows>(inputs.col_batch(cols)));
    const Var pred = cosine_head(u, v);
    const Var target = tape.constant(std::move(targets));

    Var err;
    if (cfg.mode == TrainMode::dmf) {
        err = sub(pred, target);
    } else {
        obj.boundaries = tape.parameter(model.quantizer->interior());
        err = cfg.residual_quantization ? soft_quantize(*model.quantizer, sub(pred, target), *obj.boundaries)
                                        : sub(soft_quantize(*model.quantizer, pred, *obj.boundaries), target);
    }
    obj.fit = scale(sum_squares(err), 1.0 / static_cast<double>(batch.size()));
    Var loss = obj.fit;
    if (cfg.weight_decay != 0.0) {
        for (const BranchVars* bv : {&row_vars, &col_vars})
            for (const auto& layer : bv->layers) loss = add(loss, scale(sum_squares(layer.first), cfg.weight_decay));
    }
    if (cfg.mode == TrainMode::dmf_d && cfg.boundary_penalty != 0.0) {
        loss = add(loss, scale(boundary_penalty(*model.quantizer, *obj.boundaries), cfg.boundary_penalty));
    }
    obj.loss = loss;
    return obj;
}

/// Real-valued objective value over a batch.
inline double loss_dmf(const DmfModel& model, const InputIndex& inputs, std::span<const Rating> batch, double gamma) {
    Tape tape;
    return record_objective(tape, model, inputs, batch, {TrainMode::dmf, gamma, 0.0, false}).loss.item();
}

/// Quantized objective value over a batch at the quantizer's current sharpness.
inline double loss_dmfd(const DmfModel& model, const InputIndex& inputs, std::span<const Rating> batch, double gamma1,
                        double gamma2, bool residual_quantization = false) {
    Tape tape;
    return record_objective(tape, model, inputs, batch, {TrainMode::dmf_d, gamma1, gamma2, residual_quantization})
        .loss.item();
}

// ---------------------------------------------------------------------------
// Optimizer

/// Adam with bias correction; one learning rate per parameter tensor.
class Adam {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

    explicit Adam(std::vector<const Tensor*> shapes) {
        for (const Tensor* t : shapes) {
            m_.emplace_back(t->shape());
            v_.emplace_back(t->shape());
        }
    }

    void restore(const OptimizerSnapshot& snap) {
        if (snap.first_moment.size() != m_.size() || snap.second_moment.size() != v_.size()) {
            throw ConfigError("optimizer state does not match the model");
        }
        for (std::size_t k = 0; k < m_.size(); ++k) {
            if (snap.first_moment[k].shape() != m_[k].shape() || snap.second_moment[k].shape() != v_[k].shape()) {
                throw ConfigError("optimizer state shapes do not match the model");
            }
        }
        m_ = snap.first_moment;
        v_ = snap.second_moment;
        step_ = snap.step;
    }

    OptimizerSnapshot snapshot(std::size_t epochs_completed) const { return {step_, epochs_completed, m_, v_}; }

    std::uint64_t steps() const noexcept { return step_; }

    void step(std::span<Tensor* const> params, std::span<const Tensor> grads, std::span<const double> rates) {
        ++step_;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            Tensor& p = *params[k];
            const Tensor& g = grads[k];
            Tensor& m = m_[k];
            Tensor& v = v_[k];
            const double lr = rates[k];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
                v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEpsilon);
            }
        }
    }

private:
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::uint64_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Prediction in the rating domain

/// Hard-quantized prediction mapped back to the rating domain.
inline double predict_discrete(const DmfModel& model, const Tensor& x, const Tensor& y) {
    if (!model.quantizer) throw StateError("model has no quantizer");
    return model.scale.unscale(model.quantizer->hard(predict(model, x, y)));
}

/// Rating-domain predictions for entries of `scaled`: real-valued, or hard
/// quantized when `discrete` is set.
inline std::vector<PredictionPair> predict_entries(const DmfModel& model, const InputIndex& inputs,
                                                   const RatingMatrix& scaled, std::span<const std::size_t> entries,
                                                   bool discrete) {
    if (discrete && !model.quantizer) throw StateError("model has no quantizer");
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(entries.size());
    for (const std::size_t k : entries) pairs.push_back({scaled.entry(k).row, scaled.entry(k).col});
    const std::vector<double> f = predict_pairs(model, inputs, pairs);
    std::vector<PredictionPair> out;
    out.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const double r = discrete ? model.quantizer->hard(f[k]) : f[k];
        out.push_back({model.scale.unscale(r), model.scale.unscale(scaled.entry(entries[k]).value)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainingData {
    const RatingMatrix& scaled;
    const InputIndex& inputs;
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

struct TrainResult {
    DmfModel best;                 ///< weights with the lowest validation RMSE
    DmfModel last;                 ///< weights after the final step
    OptimizerSnapshot optimizer;   ///< state matching `last`
    TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&, const DmfModel&)>;

/// Applied to the fit term: a large gamma legitimately puts the penalty terms
/// above this on the first step.
inline constexpr double kDivergenceThreshold = 1e6;

/// Minibatch training. Quantized mode runs the whole sharpness schedule
/// (no early stop) so the final epoch reaches `lambda_end`; real-valued mode
/// stops after `early_stop_patience` epochs without validation improvement.
/// `resume` continues from a snapshot taken after `epochs_completed` epochs.
inline TrainResult train(DmfModel model, const TrainingData& data, const TrainConfig& config,
                         const OptimizerSnapshot* resume = nullptr, const EpochCallback& on_epoch = {}) {
    config.validate();
    if (data.train.empty()) throw ConfigError("no training entries");
    if (!data.scaled.is_scaled()) throw StateError("training data must be scaled");
    if (model.row_branch.config.input_dim != data.inputs.row_dim() ||
        model.col_branch.config.input_dim != data.inputs.col_dim()) {
        throw DimensionError("model inputs " + std::to_string(model.row_branch.config.input_dim) + "x" +
                             std::to_string(model.col_branch.config.input_dim) + " do not match data " +
                             std::to_string(data.inputs.row_dim()) + "x" + std::to_string(data.inputs.col_dim()));
    }
    const bool quantized = config.mode == TrainMode::dmf_d;
    if (quantized && !model.quantizer) throw StateError("quantized training needs a quantizer on the model");
    const LossConfig loss_cfg = LossConfig::from(config);

    std::vector<Tensor*> params = model.parameters();
    std::vector<double> rates(params.size(), config.learning_rate);
    if (quantized) {
        params.push_back(&model.quantizer->interior());
        rates.push_back(config.boundary_learning_rate);
    }
    Adam adam(std::vector<const Tensor*>(params.begin(), params.end()));
    std::size_t first_epoch = 0;
    if (resume) {
        adam.restore(*resume);
        first_epoch = resume->epochs_completed;
    }

    TrainResult result{model, model, {}, {}};
    result.report.mode = config.mode;
    double best_rmse = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    std::vector<Rating> batch;
    batch.reserve(config.batch_size);

    for (std::size_t epoch = first_epoch; epoch < config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        if (quantized) {
            model.quantizer->set_lambda(anneal(config.schedule(), epoch));
            rec.lambda = model.quantizer->lambda();
        }
        std::vector<std::size_t> order = data.train;
        Rng(derive_seed(config.seed, "epoch-" + std::to_string(epoch))).shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) batch.push_back(data.scaled.entry(order[k]));
            const auto diverged = [&](const std::string& why) {
                return DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + why);
            };
            Tape tape;
            std::vector<Tensor> grads;
            double loss = 0.0;
            try {
                const Objective obj = record_objective(tape, model, data.inputs, batch, loss_cfg);
                loss = obj.loss.item();
                if (!std::isfinite(loss) || obj.fit.item() > kDivergenceThreshold) {
                    throw diverged("batch loss " + std::to_string(loss));
                }
                tape.backward(obj.loss);
                grads.reserve(params.size());
                for (const Var& p : obj.parameters) grads.push_back(tape.grad(p));
                if (obj.boundaries) grads.push_back(tape.grad(*obj.boundaries));
            } catch (const NumericError& e) {
                throw diverged(e.what());
            }
            adam.step(params, grads, rates);
            if (quantized) model.quantizer->project();
            loss_sum += loss * static_cast<double>(stop - start);
        }
        rec.train_loss = loss_sum / static_cast<double>(order.size());

        if (!data.validation.empty()) {
            std::vector<PredictionPair> pairs;
            try {
                pairs = predict_entries(model, data.inputs, data.scaled, data.validation, quantized);
            } catch (const NumericError& e) {
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
            }
            rec.val_rmse = rmse(pairs);
            rec.val_mae = mae(pairs);
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.report.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec, model);

        const bool improved = data.validation.empty() || rec.val_rmse < best_rmse;
        if (improved) {
            if (!data.validation.empty()) best_rmse = rec.val_rmse;
            result.best = model;
            result.report.best_epoch = result.report.epochs.size() - 1;
            stale = 0;
        } else if (++stale >= config.early_stop_patience && !quantized) {
            break;
        }
    }
    result.last = std::move(model);
    const std::size_t done = result.report.epochs.empty() ? first_epoch : result.report.epochs.back().epoch + 1;
    result.optimizer = adam.snapshot(done);
    return result;
}

}  // namespace dmf
