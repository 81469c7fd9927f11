#include "cascadex/classifier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascadex/error.hpp"
#include "cascadex/rng.hpp"

namespace cascadex {

using ojson = nlohmann::ordered_json;

std::size_t ClassDistribution::predicted_class() const {
    return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double ClassDistribution::confidence() const {
    return probs.empty() ? 0.0 : *std::max_element(probs.begin(), probs.end());
}

double confidence(const ClassDistribution& dist) { return dist.confidence(); }

ClassDistribution softmax(std::span<const double> logits) {
    ClassDistribution out;
    out.probs.resize(logits.size());
    if (logits.empty()) {
        return out;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.probs[i] = std::exp(logits[i] - top);
        sum += out.probs[i];
    }
    for (double& p : out.probs) {
        p /= sum;
    }
    return out;
}

std::string Architecture::to_string() const {
    if (kind == ArchitectureKind::linear) {
        return "linear";
    }
    return "mlp:" + std::to_string(hidden_size);
}

Architecture Architecture::parse(std::string_view text) {
    if (text == "linear") {
        return linear();
    }
    constexpr std::string_view prefix = "mlp:";
    if (text.substr(0, prefix.size()) == prefix) {
        std::size_t hidden = 0;
        const auto digits = text.substr(prefix.size());
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), hidden);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && hidden > 0) {
            return mlp(hidden);
        }
    }
    throw ValidationError("unknown architecture '" + std::string(text) +
                          "' (expected 'linear' or 'mlp:<hidden>')");
}

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw ValidationError("epochs must be at least 1");
    }
    if (batch_size < 1) {
        throw ValidationError("batch_size must be at least 1");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ValidationError("lambda must be a finite value >= 0");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw ValidationError("epsilon must lie in (0, 1)");
    }
    if (learning_rate && !(*learning_rate > 0.0 && std::isfinite(*learning_rate))) {
        throw ValidationError("learning_rate must be positive");
    }
}

double TrainConfig::effective_learning_rate(const Architecture& arch) const {
    if (learning_rate) {
        return *learning_rate;
    }
    return arch.kind == ArchitectureKind::linear ? 0.05 : 0.01;
}

namespace {

std::size_t parameter_count_for(const Architecture& arch, std::size_t d, std::size_t c) {
    if (arch.kind == ArchitectureKind::linear) {
        return c * d + c;
    }
    const std::size_t h = arch.hidden_size;
    return h * d + h + c * h + c;
}

}  // namespace

ClassifierModel::ClassifierModel(Architecture arch, std::size_t feature_dim, std::size_t num_classes,
                                 TrainConfig config)
    : arch_(arch), feature_dim_(feature_dim), num_classes_(num_classes), config_(std::move(config)) {
    if (feature_dim_ == 0 || num_classes_ < 2) {
        throw ValidationError("a classifier needs feature_dim >= 1 and num_classes >= 2");
    }
    if (arch_.kind == ArchitectureKind::mlp && arch_.hidden_size == 0) {
        throw ValidationError("mlp hidden_size must be positive");
    }
    params_.assign(parameter_count_for(arch_, feature_dim_, num_classes_), 0.0);
}

ClassifierModel ClassifierModel::initialized(Architecture arch, std::size_t feature_dim,
                                             std::size_t num_classes, const TrainConfig& config,
                                             Rng& rng) {
    ClassifierModel model(arch, feature_dim, num_classes, config);
    // Glorot uniform: limit sqrt(6 / (fan_in + fan_out)).
    auto fill = [&](std::size_t offset, std::size_t fan_in, std::size_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
            model.params_[offset + i] = rng.uniform(-limit, limit);
        }
    };
    const std::size_t d = feature_dim, c = num_classes;
    if (arch.kind == ArchitectureKind::linear) {
        fill(0, d, c);
    } else {
        const std::size_t h = arch.hidden_size;
        fill(0, d, h);
        fill(h * d + h, h, c);
    }
    return model;
}

void ClassifierModel::check_input(std::span<const double> x) const {
    if (x.size() != feature_dim_) {
        throw ValidationError("input has " + std::to_string(x.size()) + " features, model expects " +
                              std::to_string(feature_dim_));
    }
}

std::vector<double> ClassifierModel::logits(std::span<const double> x) const {
    check_input(x);
    const std::size_t d = feature_dim_, c = num_classes_;
    std::vector<double> z(c, 0.0);
    if (arch_.kind == ArchitectureKind::linear) {
        const double* w = params_.data();
        const double* b = w + c * d;
        for (std::size_t k = 0; k < c; ++k) {
            double acc = b[k];
            for (std::size_t j = 0; j < d; ++j) {
                acc += w[k * d + j] * x[j];
            }
            z[k] = acc;
        }
        return z;
    }

    const std::size_t h = arch_.hidden_size;
    const double* w1 = params_.data();
    const double* b1 = w1 + h * d;
    const double* w2 = b1 + h;
    const double* b2 = w2 + c * h;
    std::vector<double> hidden(h);
    for (std::size_t u = 0; u < h; ++u) {
        double acc = b1[u];
        for (std::size_t j = 0; j < d; ++j) {
            acc += w1[u * d + j] * x[j];
        }
        hidden[u] = std::tanh(acc);
    }
    for (std::size_t k = 0; k < c; ++k) {
        double acc = b2[k];
        for (std::size_t u = 0; u < h; ++u) {
            acc += w2[k * h + u] * hidden[u];
        }
        z[k] = acc;
    }
    return z;
}

ClassDistribution ClassifierModel::predict(std::span<const double> x) const {
    return softmax(logits(x));
}

void ClassifierModel::accumulate_gradient(std::span<const double> x, std::span<const double> dlogits,
                                          std::span<double> grad) const {
    check_input(x);
    const std::size_t d = feature_dim_, c = num_classes_;
    if (arch_.kind == ArchitectureKind::linear) {
        double* gw = grad.data();
        double* gb = gw + c * d;
        for (std::size_t k = 0; k < c; ++k) {
            for (std::size_t j = 0; j < d; ++j) {
                gw[k * d + j] += dlogits[k] * x[j];
            }
            gb[k] += dlogits[k];
        }
        return;
    }

    const std::size_t h = arch_.hidden_size;
    const double* w1 = params_.data();
    const double* b1 = w1 + h * d;
    const double* w2 = b1 + h;
    double* gw1 = grad.data();
    double* gb1 = gw1 + h * d;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + c * h;

    std::vector<double> hidden(h);
    for (std::size_t u = 0; u < h; ++u) {
        double acc = b1[u];
        for (std::size_t j = 0; j < d; ++j) {
            acc += w1[u * d + j] * x[j];
        }
        hidden[u] = std::tanh(acc);
    }
    std::vector<double> dpre(h, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t u = 0; u < h; ++u) {
            gw2[k * h + u] += dlogits[k] * hidden[u];
            dpre[u] += w2[k * h + u] * dlogits[k];
        }
        gb2[k] += dlogits[k];
    }
    for (std::size_t u = 0; u < h; ++u) {
        const double local = dpre[u] * (1.0 - hidden[u] * hidden[u]);
        for (std::size_t j = 0; j < d; ++j) {
            gw1[u * d + j] += local * x[j];
        }
        gb1[u] += local;
    }
}

ClassDistribution predict(const ClassifierModel& model, const Instance& instance) {
    return model.predict(instance.features);
}

double dar_pair_loss(double c_difficult, double c_easy, double epsilon) {
    return std::max(0.0, epsilon - (c_easy - c_difficult));
}

std::vector<DarPair> sample_dar_pairs(std::span<const Instance> batch, std::size_t cap, Rng& rng) {
    std::vector<std::size_t> difficult, easy;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!batch[i].difficulty) {
            throw ValidationError("instance '" + batch[i].id +
                                  "' has no difficulty label (required when lambda > 0)");
        }
        (*batch[i].difficulty == 1 ? difficult : easy).push_back(i);
    }
    std::vector<DarPair> pairs;
    pairs.reserve(difficult.size() * easy.size());
    for (std::size_t dpos : difficult) {
        for (std::size_t epos : easy) {
            pairs.push_back({dpos, epos});
        }
    }
    if (pairs.size() > cap) {
        // Partial Fisher-Yates: the first `cap` slots become a uniform sample.
        for (std::size_t i = 0; i < cap; ++i) {
            std::swap(pairs[i], pairs[i + rng.below(pairs.size() - i)]);
        }
        pairs.resize(cap);
        std::sort(pairs.begin(), pairs.end(), [](const DarPair& a, const DarPair& b) {
            return a.difficult != b.difficult ? a.difficult < b.difficult : a.easy < b.easy;
        });
    }
    return pairs;
}

LossBreakdown compute_loss(const ClassifierModel& model, std::span<const Instance> batch,
                           const TrainConfig& config, std::span<const DarPair> pairs,
                           std::span<double> grad) {
    LossBreakdown out;
    if (batch.empty()) {
        throw ValidationError("compute_loss: empty batch");
    }
    const bool want_grad = !grad.empty();
    if (want_grad) {
        if (grad.size() != model.parameter_count()) {
            throw ValidationError("compute_loss: gradient buffer has wrong size");
        }
        std::fill(grad.begin(), grad.end(), 0.0);
    }

    const std::size_t n = batch.size();
    const std::size_t c = model.num_classes();
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<std::vector<double>> probs(n);
    std::vector<double> conf(n);
    std::vector<std::size_t> top(n);
    double ce = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> z = model.logits(batch[i].features);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) {
            sum += std::exp(v - zmax);
        }
        ce += zmax + std::log(sum) - z[batch[i].label];
        ClassDistribution dist = softmax(z);
        top[i] = dist.predicted_class();
        conf[i] = dist.probs[top[i]];
        probs[i] = std::move(dist.probs);
    }
    out.cross_entropy = ce * inv_n;

    // Per-instance weight on dc/dz from the active hinges.
    std::vector<double> conf_weight(n, 0.0);
    const bool use_dar = config.lambda > 0.0 && !pairs.empty();
    if (use_dar) {
        double hinge = 0.0;
        for (const DarPair& p : pairs) {
            const double slack = config.epsilon - (conf[p.easy] - conf[p.difficult]);
            if (slack > 0.0) {
                hinge += slack;
                ++out.active_pairs;
                conf_weight[p.difficult] += 1.0;
                conf_weight[p.easy] -= 1.0;
            }
        }
        out.pairs = pairs.size();
        out.dar = hinge / static_cast<double>(pairs.size());
    } else {
        out.pairs = pairs.size();
    }
    out.total = out.cross_entropy + config.lambda * out.dar;

    if (want_grad) {
        const double pair_scale = use_dar ? config.lambda / static_cast<double>(pairs.size()) : 0.0;
        std::vector<double> dz(c);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& p = probs[i];
            for (std::size_t k = 0; k < c; ++k) {
                dz[k] = (p[k] - (k == batch[i].label ? 1.0 : 0.0)) * inv_n;
            }
            if (conf_weight[i] != 0.0) {
                const double w = pair_scale * conf_weight[i];
                const std::size_t m = top[i];
                for (std::size_t k = 0; k < c; ++k) {
                    dz[k] += w * p[m] * ((k == m ? 1.0 : 0.0) - p[k]);
                }
            }
            model.accumulate_gradient(batch[i].features, dz, grad);
        }
    }
    return out;
}

double total_loss(const ClassifierModel& model, std::span<const Instance> batch,
                  const TrainConfig& config) {
    std::vector<DarPair> pairs;
    if (config.lambda > 0.0) {
        Rng rng(config.seed);
        pairs = sample_dar_pairs(batch, config.pair_cap, rng);
    }
    return compute_loss(model, batch, config, pairs).total;
}

TrainResult train_with_log(const Dataset& dataset, const Architecture& arch, const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) {
        throw ValidationError("train: empty dataset");
    }
    if (config.lambda > 0.0 && !dataset.has_difficulty()) {
        throw ValidationError("train: lambda > 0 requires difficulty labels on every instance");
    }

    Rng init_rng(mix_seed(config.seed, 1));
    Rng shuffle_rng(mix_seed(config.seed, 2));
    Rng pair_rng(mix_seed(config.seed, 3));

    TrainResult result{
        ClassifierModel::initialized(arch, dataset.feature_dim(), dataset.num_classes(), config, init_rng),
        {}};
    ClassifierModel& model = result.model;
    const double lr = config.effective_learning_rate(arch);

    std::vector<Instance> pool(dataset.instances().begin(), dataset.instances().end());
    std::vector<double> grad(model.parameter_count());
    std::vector<DarPair> pairs;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<Instance>(pool));
        EpochStats stats{epoch + 1, 0.0, 0.0, 0.0};
        std::size_t batches = 0;
        for (std::size_t start = 0; start < pool.size(); start += config.batch_size) {
            const std::size_t stop = std::min(pool.size(), start + config.batch_size);
            std::span<const Instance> batch(pool.data() + start, stop - start);
            pairs.clear();
            if (config.lambda > 0.0) {
                pairs = sample_dar_pairs(batch, config.pair_cap, pair_rng);
            }
            const LossBreakdown loss = compute_loss(model, batch, config, pairs, grad);
            if (!std::isfinite(loss.total)) {
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                   std::to_string(batches + 1));
            }
            auto params = model.parameters();
            for (std::size_t k = 0; k < params.size(); ++k) {
                params[k] -= lr * grad[k];
            }
            stats.loss += loss.total;
            stats.cross_entropy += loss.cross_entropy;
            stats.dar += loss.dar;
            ++batches;
        }
        stats.loss /= static_cast<double>(batches);
        stats.cross_entropy /= static_cast<double>(batches);
        stats.dar /= static_cast<double>(batches);
        result.log.push_back(stats);
    }
    return result;
}

ClassifierModel train(const Dataset& dataset, const Architecture& arch, const TrainConfig& config) {
    return train_with_log(dataset, arch, config).model;
}

GradientCheckReport gradient_check(const ClassifierModel& model, std::span<const Instance> batch,
                                   const TrainConfig& config, double kink_margin) {
    GradientCheckReport report;
    if (batch.empty()) {
        throw ValidationError("gradient_check: empty batch");
    }

    std::vector<DarPair> pairs;
    if (config.lambda > 0.0) {
        Rng rng(config.seed);
        pairs = sample_dar_pairs(batch, config.pair_cap, rng);

        std::vector<double> conf(batch.size()), top_gap(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            ClassDistribution dist = model.predict(batch[i].features);
            std::vector<double> sorted = dist.probs;
            std::sort(sorted.rbegin(), sorted.rend());
            conf[i] = sorted[0];
            top_gap[i] = sorted[0] - sorted[1];
        }
        std::vector<DarPair> kept;
        for (const DarPair& p : pairs) {
            const double slack = config.epsilon - (conf[p.easy] - conf[p.difficult]);
            const bool near_kink = std::abs(slack) < kink_margin || top_gap[p.easy] < kink_margin ||
                                   top_gap[p.difficult] < kink_margin;
            if (near_kink) {
                ++report.pairs_excluded;
            } else {
                kept.push_back(p);
            }
        }
        pairs = std::move(kept);
    }
    report.pairs_checked = pairs.size();

    std::vector<double> analytic(model.parameter_count());
    compute_loss(model, batch, config, pairs, analytic);

    constexpr double step = 1e-5;
    ClassifierModel probe = model;
    auto params = probe.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double saved = params[k];
        params[k] = saved + step;
        const double up = compute_loss(probe, batch, config, pairs).total;
        params[k] = saved - step;
        const double down = compute_loss(probe, batch, config, pairs).total;
        params[k] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double scale = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-6});
        report.max_relative_error = std::max(report.max_relative_error, std::abs(analytic[k] - numeric) / scale);
    }
    report.parameters_checked = params.size();
    return report;
}

namespace {

ojson config_to_json(const TrainConfig& config) {
    ojson j;
    j["epochs"] = config.epochs;
    j["learning_rate"] = config.learning_rate ? ojson(*config.learning_rate) : ojson(nullptr);
    j["batch_size"] = config.batch_size;
    j["lambda"] = config.lambda;
    j["epsilon"] = config.epsilon;
    j["seed"] = config.seed;
    j["pair_cap"] = config.pair_cap;
    return j;
}

TrainConfig config_from_json(const ojson& j) {
    TrainConfig config;
    config.epochs = j.value("epochs", config.epochs);
    if (auto lr = j.find("learning_rate"); lr != j.end() && !lr->is_null()) {
        config.learning_rate = lr->get<double>();
    }
    config.batch_size = j.value("batch_size", config.batch_size);
    config.lambda = j.value("lambda", config.lambda);
    config.epsilon = j.value("epsilon", config.epsilon);
    config.seed = j.value("seed", config.seed);
    config.pair_cap = j.value("pair_cap", config.pair_cap);
    return config;
}

struct TensorSlot {
    const char* name;
    std::size_t size;
};

std::vector<TensorSlot> tensor_layout(const Architecture& arch, std::size_t d, std::size_t c) {
    if (arch.kind == ArchitectureKind::linear) {
        return {{"W", c * d}, {"b", c}};
    }
    const std::size_t h = arch.hidden_size;
    return {{"W1", h * d}, {"b1", h}, {"W2", c * h}, {"b2", c}};
}

}  // namespace

std::string model_to_json(const ClassifierModel& model) {
    ojson j;
    j["format"] = "cascadex-model";
    j["version"] = 1;
    j["architecture"] = model.architecture().to_string();
    j["feature_dim"] = model.feature_dim();
    j["num_classes"] = model.num_classes();
    ojson tensors = ojson::object();
    const auto params = model.parameters();
    std::size_t offset = 0;
    for (const TensorSlot& slot : tensor_layout(model.architecture(), model.feature_dim(), model.num_classes())) {
        tensors[slot.name] = std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(offset),
                                                 params.begin() + static_cast<std::ptrdiff_t>(offset + slot.size));
        offset += slot.size;
    }
    j["tensors"] = std::move(tensors);
    j["train_config"] = config_to_json(model.train_config());
    return j.dump(1) + "\n";
}

ClassifierModel model_from_json(std::string_view text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        throw SchemaError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.value("format", "") != "cascadex-model") {
            throw SchemaError("not a cascadex model document");
        }
        const Architecture arch = Architecture::parse(j.at("architecture").get<std::string>());
        const auto d = j.at("feature_dim").get<std::size_t>();
        const auto c = j.at("num_classes").get<std::size_t>();
        ClassifierModel model(arch, d, c, config_from_json(j.value("train_config", ojson::object())));
        auto params = model.parameters();
        std::size_t offset = 0;
        const ojson& tensors = j.at("tensors");
        for (const TensorSlot& slot : tensor_layout(arch, d, c)) {
            const auto values = tensors.at(slot.name).get<std::vector<double>>();
            if (values.size() != slot.size) {
                throw SchemaError(std::string("tensor '") + slot.name + "' has " + std::to_string(values.size()) +
                                  " values, expected " + std::to_string(slot.size));
            }
            std::copy(values.begin(), values.end(), params.begin() + static_cast<std::ptrdiff_t>(offset));
            offset += slot.size;
        }
        if (tensors.size() != tensor_layout(arch, d, c).size()) {
            throw SchemaError("model has unexpected extra tensors");
        }
        return model;
    } catch (const ojson::exception& e) {
        throw SchemaError(std::string("malformed model document: ") + e.what());
    }
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write model '" + path.string() + "'");
    }
    out << model_to_json(model);
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open model '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return model_from_json(buffer.str());
}

}  // namespace cascadex
