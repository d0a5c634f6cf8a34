#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dbn/dataset.hpp"
#include "dbn/dbn_state.hpp"
#include "dbn/model.hpp"
#include "dbn/optimizer.hpp"

namespace dbn {

/// Gaussian clusters with class means spaced on a circle of radius 2 in the
/// first two input dimensions.
struct SyntheticSpec {
    std::size_t classes = 2;
    std::size_t dim = 2;
    std::size_t samples = 400;
    double spread = 0.5;
};

struct IdxSpec {
    std::filesystem::path images;
    std::filesystem::path labels;
    std::size_t limit = 1000;
    double validation_fraction = 0.2;
};

struct Split {
    Dataset train;
    Dataset validation;
    std::size_t classes = 0;
};

/// Deterministic under `seed`; per-class 80/20 train/validation split.
Split generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Reads an IDX image file (magic 0x00000803) and label file (magic
/// 0x00000801). Pixels are scaled to [0, 1]. At most `limit` records.
/// Throws FormatError with the offending byte offset.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t limit);

/// Same as load_idx over in-memory file contents.
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels, std::size_t limit);

enum class OptimizerKind { sgd, adagrad };

struct ExperimentConfig {
    std::variant<SyntheticSpec, IdxSpec> dataset = SyntheticSpec{};
    std::vector<std::size_t> hidden = {16};
    Activation activation = Activation::relu();
    OutputHead head = OutputHead::linear_logits;
    AlphaSchedule alpha = AlphaSchedule::constant(1.0);
    OptimizerKind optimizer = OptimizerKind::adagrad;
    EtaSchedule eta = EtaSchedule::constant(0.01);  // sgd stepsize
    double adagrad_base = 0.01;
    double adagrad_eps = 1e-8;
    TrainMode mode = TrainMode::minibatch;
    std::size_t batch_size = 100;
    std::optional<GradientReduction> reduction;  // default: sum for full gradient, mean for minibatch
    std::size_t epochs = 200;
    std::uint64_t seed = 1;
    HyperParams hp;
    std::optional<bool> track_gradient_norm;  // default: on in full-gradient mode
    bool track_lambda_gap = true;
    std::filesystem::path output;

    GradientReduction effective_reduction() const;
    bool effective_track_gradient_norm() const;
};

/// Parses the JSON configuration document; unknown keys are errors.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct MetricsRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // mean per-record objective
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    std::optional<double> gradient_norm;
    std::optional<double> lambda_gap;
};

struct RunMetrics {
    std::string alpha_label;
    std::vector<MetricsRow> rows;
    std::uint64_t iterations = 0;
    bool diverged = false;
    std::string divergence;

    double best_val_accuracy() const;
};

Split load_split(const ExperimentConfig& config);
NetworkArch make_arch(const ExperimentConfig& config, const Split& split);

/// θ drawn from the seed's init stream, λ at its default, optimizer from
/// the config.
TrainState initial_state(const ExperimentConfig& config, const NetworkArch& arch);

/// Runs epochs × batches DBN iterations. θ is initialized from the seed
/// alone, so runs differing only in α share the same starting point. Writes
/// the CSV atomically when config.output is set.
RunMetrics run_experiment(const ExperimentConfig& config);

/// Versioned metrics CSV, 17 significant digits.
std::string metrics_csv(const RunMetrics& metrics);

struct SweepRow {
    std::string alpha;
    double best_val_accuracy = 0.0;
    double final_train_accuracy = 0.0;
    std::optional<double> final_gradient_norm;
    double initial_train_loss = 0.0;
    bool diverged = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<RunMetrics> runs;
};

/// One run per α with a shared seed. When config.output is set, writes the
/// summary there and each run beside it as <stem>_alpha_<label>.csv.
SweepResult compare_alphas(const ExperimentConfig& config, const std::vector<AlphaSchedule>& alphas);

std::string sweep_csv(const SweepResult& sweep);

/// File name fragment for an α label: "1/m^2" -> "1_m^2".
std::string sanitize_label(const std::string& label);

/// Writes through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& text);
std::string csv_number(double value);

}  // namespace dbn
