#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "gtdl/core.hpp"
#include "gtdl/model.hpp"
#include "gtdl/splits.hpp"

namespace gtdl {

/// Per-column affine standardization fitted on training rows.
struct Standardizer {
    Vector mean;
    Vector scale;  // population sd, 1 for constant columns

    static Standardizer fit(const Matrix& values);
    Matrix transform(const Matrix& values) const;
    double transform(double value, std::size_t column) const { return (value - mean(column)) / scale(column); }
    double inverse(double value, std::size_t column) const { return value * scale(column) + mean(column); }
};

/// Patience counter on a validation loss. update() returns true once the loss
/// has failed to improve (strictly) for `patience` consecutive epochs.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
    bool update(double loss);
    bool improved() const noexcept { return stale_ == 0; }
    double best() const noexcept { return best_; }
    std::size_t stale_epochs() const noexcept { return stale_; }

private:
    std::size_t patience_;
    std::size_t stale_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

class Adam {
public:
    Adam(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(std::span<double> params, std::span<const double> grad);
    std::size_t steps() const noexcept { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<double> m_, v_;
};

struct TrainOptions {
    std::size_t batch_size = 256;
    std::size_t patience = 10;
    std::size_t max_epochs = 400;
    Exec exec = Exec::Parallel;
};

struct EpochLog {
    std::size_t epoch;
    double train_mse;
    double val_mse;
};

/// A model together with the preprocessing needed to apply it to raw dataset
/// rows. Predictions are returned on the original target scale.
struct TrainedModel {
    Model model;
    Standardizer scaler;  // fitted on all p columns of the training rows
    std::size_t target_index = 0;
    std::vector<std::size_t> input_columns;  // dataset column of each input token

    Matrix inputs(const Dataset& ds, const std::vector<std::size_t>& rows) const;
    Vector targets(const Dataset& ds, const std::vector<std::size_t>& rows) const;  // standardized
    Vector predict(const Dataset& ds, const std::vector<std::size_t>& rows) const;
    AttentionRecord record_attention(const Dataset& ds, const std::vector<std::size_t>& rows) const;
};

struct TrainResult {
    TrainedModel trained;
    std::vector<EpochLog> log;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double best_val_mse = 0.0;
};

/// Builds the model for a dataset: standardizer from the training rows,
/// inputs in token order, attention mask from the configuration.
TrainedModel build_model(const Dataset& ds, const SplitPlan& split, const ModelConfig& cfg);

/// Adam on shuffled minibatches, early stopping on val_earlystop MSE, returns
/// the best-validation checkpoint. Throws NonFiniteLoss on divergence.
TrainResult train(const Dataset& ds, const SplitPlan& split, const ModelConfig& cfg, const TrainOptions& options = {});

}  // namespace gtdl
