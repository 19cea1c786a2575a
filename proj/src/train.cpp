#include "gtdl/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gtdl/rng.hpp"

namespace gtdl {

Standardizer Standardizer::fit(const Matrix& values) {
    if (values.rows() == 0) throw DataError("cannot standardize an empty table");
    Standardizer s;
    s.mean = values.colwise().mean().transpose();
    s.scale.resize(values.cols());
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        const double var = (values.col(c).array() - s.mean(c)).square().mean();
        s.scale(c) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Matrix Standardizer::transform(const Matrix& values) const {
    Matrix out = values;
    for (Eigen::Index c = 0; c < out.cols(); ++c) out.col(c) = (out.col(c).array() - mean(c)) / scale(c);
    return out;
}

bool EarlyStopping::update(double loss) {
    if (loss < best_) {
        best_ = loss;
        stale_ = 0;
    } else {
        ++stale_;
    }
    return stale_ >= patience_;
}

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

Matrix TrainedModel::inputs(const Dataset& ds, const std::vector<std::size_t>& rows) const {
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(input_columns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < input_columns.size(); ++j) {
            const auto col = input_columns[j];
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scaler.transform(
                ds.values(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(col)), col);
        }
    return x;
}

Vector TrainedModel::targets(const Dataset& ds, const std::vector<std::size_t>& rows) const {
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = scaler.transform(
            ds.values(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(target_index)), target_index);
    return y;
}

Vector TrainedModel::predict(const Dataset& ds, const std::vector<std::size_t>& rows) const {
    Vector y = model.predict(inputs(ds, rows));
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = scaler.inverse(y(i), target_index);
    return y;
}

AttentionRecord TrainedModel::record_attention(const Dataset& ds, const std::vector<std::size_t>& rows) const {
    return model.record_attention(inputs(ds, rows));
}

TrainedModel build_model(const Dataset& ds, const SplitPlan& split, const ModelConfig& cfg) {
    ds.validate();
    if (split.train.empty()) throw DataError("training split is empty");
    if (!is_disjoint(split, ds.n())) throw DataError("split sets overlap or exceed the dataset");
    const auto columns = token_columns(ds.p(), ds.target_index, cfg.readout);
    std::vector<std::size_t> inputs(columns.begin(), columns.begin() + static_cast<std::ptrdiff_t>(ds.p() - 1));
    Model model(cfg, inputs.size(), make_mask(cfg, ds.truth, ds.target_index));
    return TrainedModel{std::move(model), Standardizer::fit(ds.rows(split.train).values), ds.target_index,
                        std::move(inputs)};
}

TrainResult train(const Dataset& ds, const SplitPlan& split, const ModelConfig& cfg, const TrainOptions& options) {
    if (split.val_earlystop.empty()) throw DataError("early-stopping split is empty");
    if (options.batch_size == 0) throw UsageError("batch size must be positive");
    TrainResult result{build_model(ds, split, cfg), {}, 0, 0, 0.0};
    auto& model = result.trained.model;

    const Matrix x_train = result.trained.inputs(ds, split.train);
    const Vector y_train = result.trained.targets(ds, split.train);
    const Matrix x_val = result.trained.inputs(ds, split.val_earlystop);
    const Vector y_val = result.trained.targets(ds, split.val_earlystop);

    SeededRng rng(derive_seed(cfg.seed, {fnv1a64("shuffle")}));
    Adam adam(model.parameters().size(), cfg.learning_rate);
    EarlyStopping stopper(options.patience);
    std::vector<double> grad(model.parameters().size());
    std::vector<double> best(model.parameters().begin(), model.parameters().end());
    result.best_val_mse = model.loss(x_val, y_val, options.exec);

    const std::size_t n = split.train.size();
    const auto cols = x_train.cols();
    Matrix xb;
    Vector yb;
    for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
        const auto order = rng.permutation(n);
        double train_sse = 0.0;
        for (std::size_t start = 0; start < n; start += options.batch_size) {
            const std::size_t size = std::min(options.batch_size, n - start);
            xb.resize(static_cast<Eigen::Index>(size), cols);
            yb.resize(static_cast<Eigen::Index>(size));
            for (std::size_t i = 0; i < size; ++i) {
                xb.row(static_cast<Eigen::Index>(i)) = x_train.row(static_cast<Eigen::Index>(order[start + i]));
                yb(static_cast<Eigen::Index>(i)) = y_train(static_cast<Eigen::Index>(order[start + i]));
            }
            const double batch_mse = model.loss_and_gradient(xb, yb, grad, options.exec);
            if (!std::isfinite(batch_mse) ||
                !std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); }))
                throw NonFiniteLoss("non-finite training loss at epoch " + std::to_string(epoch) + " (lr " +
                                    std::to_string(cfg.learning_rate) + ")");
            train_sse += batch_mse * static_cast<double>(size);
            adam.step(model.parameters(), grad);
        }
        const double val_mse = model.loss(x_val, y_val, options.exec);
        if (!std::isfinite(val_mse))
            throw NonFiniteLoss("non-finite validation loss at epoch " + std::to_string(epoch));
        result.log.push_back({epoch, train_sse / static_cast<double>(n), val_mse});
        result.epochs_run = epoch;
        const bool stop = stopper.update(val_mse);
        if (stopper.improved()) {
            std::copy(model.parameters().begin(), model.parameters().end(), best.begin());
            result.best_epoch = epoch;
            result.best_val_mse = val_mse;
        }
        if (stop) break;
    }
    if (result.best_epoch > 0) std::copy(best.begin(), best.end(), model.parameters().begin());
    return result;
}

}  // namespace gtdl
