#include "dbn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dbn/diagnostics.hpp"
#include "dbn/errors.hpp"

namespace dbn {

namespace {

// Independent sub-streams of one seed.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

using json = nlohmann::json;

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.next_below(i)]);
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const std::string& file) {
    if (offset + 4 > bytes.size()) throw FormatError(file + ": truncated header", bytes.size());
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ParameterError("config: " + where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) throw ParameterError("config: unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!obj.at(key).is_number_unsigned()) {
            throw ParameterError(std::string("config: '") + key + "' must be a nonnegative integer");
        }
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParameterError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

std::string schedule_text(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number()) return csv_number(value.get<double>());
    throw ParameterError("config: schedules must be strings or numbers");
}

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

Evaluation evaluate(const Dataset& data, const Theta& theta, const Lambda& lambda, const NetworkArch& arch,
                    const HyperParams& hp) {
    Evaluation e;
    if (data.empty()) return e;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Activations act = forward(data.input(i), theta, lambda, arch, hp);
        e.loss += loss(act.output, data.targets[i], theta, hp);
        const auto predicted =
            static_cast<std::size_t>(std::ranges::max_element(act.output) - act.output.begin());
        if (predicted == label_of(data, i)) ++correct;
    }
    e.loss /= static_cast<double>(data.size());
    e.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    if (!std::isfinite(e.loss)) throw NumericError("non-finite evaluation loss");
    return e;
}

}  // namespace

Split generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.classes < 2) throw ParameterError("synthetic data needs at least two classes");
    if (spec.samples < spec.classes) throw ParameterError("synthetic data needs at least one sample per class");
    if (spec.dim < 2) throw ParameterError("synthetic data needs at least two dimensions");
    if (!(spec.spread >= 0.0) || !std::isfinite(spec.spread)) throw ParameterError("spread must be nonnegative");

    Rng rng = Rng(seed).split(kDataStream);
    std::vector<Vector> points;
    std::vector<std::size_t> labels;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        const std::size_t count = spec.samples / spec.classes + (c < spec.samples % spec.classes ? 1 : 0);
        const std::size_t val_count = count / 5;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(spec.classes);
        Vector mean(spec.dim, 0.0);
        mean[0] = 2.0 * std::cos(angle);
        if (spec.dim > 1) mean[1] = 2.0 * std::sin(angle);
        for (std::size_t s = 0; s < count; ++s) {
            Vector p = mean;
            if (spec.spread > 0.0) {
                for (double& v : p) v += spec.spread * rng.next_normal();
            }
            (s < count - val_count ? train_idx : val_idx).push_back(points.size());
            points.push_back(std::move(p));
            labels.push_back(c);
        }
    }
    shuffle(train_idx, rng);
    shuffle(val_idx, rng);

    Dataset all{Matrix(points.size(), spec.dim), {}};
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::ranges::copy(points[i], all.inputs.row(i).begin());
        all.targets.emplace_back(labels[i]);
    }
    return {subset(all, train_idx), subset(all, val_idx), spec.classes};
}

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels, std::size_t limit) {
    const std::uint32_t image_magic = read_be32(images, 0, "images");
    if (image_magic != 0x00000803) throw FormatError("images: bad magic number", 0);
    const std::uint32_t count = read_be32(images, 4, "images");
    const std::uint32_t rows = read_be32(images, 8, "images");
    const std::uint32_t cols = read_be32(images, 12, "images");

    const std::uint32_t label_magic = read_be32(labels, 0, "labels");
    if (label_magic != 0x00000801) throw FormatError("labels: bad magic number", 0);
    const std::uint32_t label_count = read_be32(labels, 4, "labels");
    if (label_count != count) throw FormatError("labels: record count differs from the image file", 4);

    const std::size_t pixels = std::size_t{rows} * cols;
    const std::size_t n = std::min<std::size_t>(limit, count);
    const std::size_t image_end = 16 + n * pixels;
    if (images.size() < image_end) throw FormatError("images: truncated pixel data", images.size());
    if (labels.size() < 8 + n) throw FormatError("labels: truncated label data", labels.size());

    Dataset out{Matrix(n, pixels), {}};
    out.targets.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = out.inputs.row(i);
        for (std::size_t p = 0; p < pixels; ++p) row[p] = images[16 + i * pixels + p] / 255.0;
        out.targets.emplace_back(std::size_t{labels[8 + i]});
    }
    return out;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t limit) {
    const auto image_bytes = read_bytes(images);
    const auto label_bytes = read_bytes(labels);
    return parse_idx(image_bytes, label_bytes, limit);
}

GradientReduction ExperimentConfig::effective_reduction() const {
    if (reduction) return *reduction;
    return mode == TrainMode::full_gradient ? GradientReduction::sum : GradientReduction::mean;
}

bool ExperimentConfig::effective_track_gradient_norm() const {
    return track_gradient_norm.value_or(mode == TrainMode::full_gradient);
}

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    check_keys(doc, {"dataset", "arch", "alpha", "optimizer", "training", "hp", "seed", "diagnostics", "output"},
               "top level");
    ExperimentConfig c;

    if (doc.contains("dataset")) {
        const json& d = doc["dataset"];
        const auto kind = get_or<std::string>(d, "kind", "synthetic");
        if (kind == "synthetic") {
            check_keys(d, {"kind", "classes", "dim", "samples", "spread"}, "dataset");
            SyntheticSpec s;
            s.classes = get_or(d, "classes", s.classes);
            s.dim = get_or(d, "dim", s.dim);
            s.samples = get_or(d, "samples", s.samples);
            s.spread = get_or(d, "spread", s.spread);
            c.dataset = s;
        } else if (kind == "idx") {
            check_keys(d, {"kind", "images", "labels", "limit", "validation_fraction"}, "dataset");
            IdxSpec s;
            s.images = get_or<std::string>(d, "images", "");
            s.labels = get_or<std::string>(d, "labels", "");
            s.limit = get_or(d, "limit", s.limit);
            s.validation_fraction = get_or(d, "validation_fraction", s.validation_fraction);
            if (s.images.empty() || s.labels.empty()) throw ParameterError("config: idx dataset needs images and labels");
            if (!(s.validation_fraction >= 0.0 && s.validation_fraction < 1.0)) {
                throw ParameterError("config: validation_fraction must lie in [0, 1)");
            }
            c.dataset = s;
        } else {
            throw ParameterError("config: unknown dataset kind '" + kind + "'");
        }
    }

    if (doc.contains("arch")) {
        const json& a = doc["arch"];
        check_keys(a, {"hidden", "activation", "head"}, "arch");
        if (a.contains("hidden")) {
            const json& h = a.at("hidden");
            if (!h.is_array()) throw ParameterError("config: arch.hidden must be a list");
            for (const json& v : h)
                if (!v.is_number_unsigned()) throw ParameterError("config: hidden layer sizes must be integers");
            c.hidden = h.get<std::vector<std::size_t>>();
        }
        if (c.hidden.empty()) throw ParameterError("config: arch.hidden needs at least one layer");
        for (std::size_t h : c.hidden)
            if (h == 0) throw ParameterError("config: hidden layer sizes must be positive");
        c.activation = parse_activation(get_or<std::string>(a, "activation", "relu"));
        const auto head = get_or<std::string>(a, "head", "linear-logits");
        if (head == "linear-logits") {
            c.head = OutputHead::linear_logits;
        } else if (head == "activated") {
            c.head = OutputHead::activated;
        } else {
            throw ParameterError("config: unknown head '" + head + "'");
        }
    }

    if (doc.contains("alpha")) c.alpha = parse_alpha(schedule_text(doc["alpha"]));

    if (doc.contains("optimizer")) {
        const json& o = doc["optimizer"];
        const auto kind = get_or<std::string>(o, "kind", "adagrad");
        if (kind == "adagrad") {
            check_keys(o, {"kind", "base_eta", "eps"}, "optimizer");
            c.optimizer = OptimizerKind::adagrad;
            c.adagrad_base = get_or(o, "base_eta", c.adagrad_base);
            c.adagrad_eps = get_or(o, "eps", c.adagrad_eps);
        } else if (kind == "sgd") {
            check_keys(o, {"kind", "eta"}, "optimizer");
            c.optimizer = OptimizerKind::sgd;
            if (o.contains("eta")) c.eta = parse_eta(schedule_text(o["eta"]));
        } else {
            throw ParameterError("config: unknown optimizer '" + kind + "'");
        }
    }

    if (doc.contains("training")) {
        const json& t = doc["training"];
        check_keys(t, {"mode", "batch_size", "gradient", "epochs"}, "training");
        const auto mode = get_or<std::string>(t, "mode", "minibatch");
        if (mode == "minibatch") {
            c.mode = TrainMode::minibatch;
        } else if (mode == "full_gradient") {
            c.mode = TrainMode::full_gradient;
        } else {
            throw ParameterError("config: unknown training mode '" + mode + "'");
        }
        c.batch_size = get_or(t, "batch_size", c.batch_size);
        if (c.batch_size == 0) throw ParameterError("config: batch_size must be positive");
        if (t.contains("gradient")) {
            const auto g = get_or<std::string>(t, "gradient", "");
            if (g == "sum") {
                c.reduction = GradientReduction::sum;
            } else if (g == "mean") {
                c.reduction = GradientReduction::mean;
            } else {
                throw ParameterError("config: gradient must be 'sum' or 'mean'");
            }
        }
        c.epochs = get_or(t, "epochs", c.epochs);
    }

    if (doc.contains("hp")) {
        const json& h = doc["hp"];
        check_keys(h, {"eps_b", "l2"}, "hp");
        c.hp.eps_b = get_or(h, "eps_b", c.hp.eps_b);
        c.hp.l2_coeff = get_or(h, "l2", c.hp.l2_coeff);
        if (!(c.hp.eps_b > 0.0)) throw ParameterError("config: eps_b must be positive");
        if (!(c.hp.l2_coeff >= 0.0)) throw ParameterError("config: l2 must be nonnegative");
    }

    c.seed = get_or(doc, "seed", c.seed);

    if (doc.contains("diagnostics")) {
        const json& d = doc["diagnostics"];
        check_keys(d, {"gradient_norm", "lambda_gap"}, "diagnostics");
        if (d.contains("gradient_norm")) c.track_gradient_norm = get_or(d, "gradient_norm", false);
        c.track_lambda_gap = get_or(d, "lambda_gap", c.track_lambda_gap);
    }

    c.output = get_or<std::string>(doc, "output", "");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open config " + path.string());
    std::stringstream text;
    text << in.rdbuf();
    ExperimentConfig c = parse_config(text.str());
    // Relative dataset paths are relative to the config file.
    if (auto* idx = std::get_if<IdxSpec>(&c.dataset)) {
        const auto base = path.parent_path();
        if (idx->images.is_relative()) idx->images = base / idx->images;
        if (idx->labels.is_relative()) idx->labels = base / idx->labels;
        for (const auto& p : {idx->images, idx->labels}) {
            if (!std::filesystem::exists(p)) throw ParameterError("config: dataset file does not exist: " + p.string());
        }
    }
    return c;
}

double RunMetrics::best_val_accuracy() const {
    double best = 0.0;
    for (const auto& r : rows) best = std::max(best, r.val_accuracy);
    return best;
}

Split load_split(const ExperimentConfig& config) {
    if (const auto* s = std::get_if<SyntheticSpec>(&config.dataset)) return generate_synthetic(*s, config.seed);

    const auto& spec = std::get<IdxSpec>(config.dataset);
    for (const auto& p : {spec.images, spec.labels}) {
        if (!std::filesystem::exists(p)) throw ParameterError("dataset file does not exist: " + p.string());
    }
    const Dataset all = load_idx(spec.images, spec.labels, spec.limit);
    if (all.empty()) throw ParameterError("idx dataset is empty");
    std::size_t classes = 0;
    for (std::size_t i = 0; i < all.size(); ++i) classes = std::max(classes, label_of(all, i) + 1);
    const auto val_count =
        static_cast<std::size_t>(std::floor(spec.validation_fraction * static_cast<double>(all.size())));
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    for (std::size_t i = 0; i < all.size(); ++i) (i < all.size() - val_count ? train_idx : val_idx).push_back(i);
    return {subset(all, train_idx), subset(all, val_idx), std::max<std::size_t>(classes, 2)};
}

NetworkArch make_arch(const ExperimentConfig& config, const Split& split) {
    NetworkArch arch;
    arch.layer_sizes.push_back(split.train.dim());
    for (std::size_t h : config.hidden) arch.layer_sizes.push_back(h);
    arch.layer_sizes.push_back(split.classes);
    arch.activation = config.activation;
    arch.head = config.head;
    arch.validate();
    return arch;
}

TrainState initial_state(const ExperimentConfig& config, const NetworkArch& arch) {
    Rng init_rng = Rng(config.seed).split(kInitStream);
    TrainState state;
    state.arch = arch;
    state.theta = init_theta(arch, init_rng);
    state.lambda = init_lambda(arch);
    state.alpha = config.alpha;
    state.mode = config.mode;
    state.reduction = config.effective_reduction();
    if (config.optimizer == OptimizerKind::adagrad) {
        state.optimizer = AdaGradState::for_theta(state.theta, config.adagrad_base, config.adagrad_eps);
    } else {
        state.optimizer = SgdRule{config.eta};
    }
    return state;
}

RunMetrics run_experiment(const ExperimentConfig& config) {
    const Split split = load_split(config);
    if (split.train.empty()) throw ParameterError("training set is empty");
    const NetworkArch arch = make_arch(config, split);
    const std::size_t batch = std::min(config.batch_size, split.train.size());
    Rng shuffle_rng = Rng(config.seed).split(kShuffleStream);
    TrainState state = initial_state(config, arch);

    RunMetrics metrics;
    metrics.alpha_label = config.alpha.label();
    const bool track_grad = config.effective_track_gradient_norm();

    auto record = [&](std::size_t epoch, std::optional<double> gap) {
        const Evaluation train = evaluate(split.train, state.theta, state.lambda, arch, config.hp);
        const Evaluation val = evaluate(split.validation, state.theta, state.lambda, arch, config.hp);
        MetricsRow row{epoch, train.loss, train.accuracy, val.loss, val.accuracy, std::nullopt, gap};
        if (track_grad) row.gradient_norm = gradient_norm(state.theta, state.lambda, split.train, arch, config.hp);
        if (row.gradient_norm && !std::isfinite(*row.gradient_norm)) throw NumericError("non-finite gradient norm");
        metrics.rows.push_back(row);
    };

    std::size_t epoch = 0;
    try {
        record(0, std::nullopt);
        std::vector<std::size_t> order(split.train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        for (epoch = 1; epoch <= config.epochs; ++epoch) {
            LambdaHistory history(1 << 20, 1);
            history.record(state.m, state.lambda);
            const std::uint64_t start_m = state.m;

            if (config.mode == TrainMode::full_gradient) {
                state = train_iteration(state, split.train, config.hp);
                history.record(state.m, state.lambda);
            } else {
                shuffle(order, shuffle_rng);
                for (std::size_t begin = 0; begin < order.size(); begin += batch) {
                    const std::size_t end = std::min(begin + batch, order.size());
                    const Dataset mb = subset(split.train, std::span(order).subspan(begin, end - begin));
                    state = train_iteration(state, mb, config.hp);
                    history.record(state.m, state.lambda);
                }
            }
            record(epoch, config.track_lambda_gap ? std::optional(lambda_gap(history, start_m)) : std::nullopt);
        }
    } catch (const NumericError& e) {
        metrics.diverged = true;
        metrics.divergence = "epoch " + std::to_string(epoch) + ": " + e.what();
    }
    metrics.iterations = state.m - 1;

    if (!config.output.empty()) write_file_atomic(config.output, metrics_csv(metrics));
    return metrics;
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char ch : text) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string csv_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string metrics_csv(const RunMetrics& metrics) {
    std::string out = "# dbn-lab metrics v1\n";
    out += "# alpha=" + metrics.alpha_label + "\n";
    out += "epoch,train_loss,train_accuracy,val_loss,val_accuracy,grad_norm,lambda_gap\n";
    const auto optional_number = [](const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); };
    for (const auto& r : metrics.rows) {
        out += std::to_string(r.epoch) + "," + csv_number(r.train_loss) + "," + csv_number(r.train_accuracy) + "," +
               csv_number(r.val_loss) + "," + csv_number(r.val_accuracy) + "," + optional_number(r.gradient_norm) +
               "," + optional_number(r.lambda_gap) + "\n";
    }
    if (metrics.diverged) out += "# diverged at " + metrics.divergence + "\n";
    return out;
}

std::string sanitize_label(const std::string& label) {
    std::string out = label;
    for (char& ch : out) {
        if (ch == '/' || ch == '\\' || ch == ' ' || ch == ',' || ch == '[' || ch == ']') ch = '_';
    }
    return out;
}

SweepResult compare_alphas(const ExperimentConfig& config, const std::vector<AlphaSchedule>& alphas) {
    if (alphas.empty()) throw ParameterError("compare_alphas: empty alpha list");
    SweepResult sweep;
    for (const auto& alpha : alphas) {
        ExperimentConfig run_config = config;
        run_config.alpha = alpha;
        run_config.output.clear();
        if (!config.output.empty()) {
            const auto& out = config.output;
            run_config.output =
                out.parent_path() / (out.stem().string() + "_alpha_" + sanitize_label(alpha.label()) + ".csv");
        }
        RunMetrics run = run_experiment(run_config);
        SweepRow row;
        row.alpha = alpha.label();
        row.best_val_accuracy = run.best_val_accuracy();
        row.diverged = run.diverged;
        if (!run.rows.empty()) {
            row.final_train_accuracy = run.rows.back().train_accuracy;
            row.final_gradient_norm = run.rows.back().gradient_norm;
            row.initial_train_loss = run.rows.front().train_loss;
        }
        sweep.rows.push_back(row);
        sweep.runs.push_back(std::move(run));
    }
    if (!config.output.empty()) write_file_atomic(config.output, sweep_csv(sweep));
    return sweep;
}

std::string sweep_csv(const SweepResult& sweep) {
    std::string out = "# dbn-lab sweep v1\n";
    out += "alpha,best_val_accuracy,final_train_accuracy,final_grad_norm,initial_train_loss,diverged\n";
    for (const auto& r : sweep.rows) {
        out += csv_field(r.alpha) + "," + csv_number(r.best_val_accuracy) + "," + csv_number(r.final_train_accuracy) +
               "," + (r.final_gradient_norm ? csv_number(*r.final_gradient_norm) : std::string()) + "," +
               csv_number(r.initial_train_loss) + "," + (r.diverged ? "true" : "false") + "\n";
    }
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ParameterError("cannot write " + tmp.string());
        out << contents;
        if (!out.flush()) throw ParameterError("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace dbn
