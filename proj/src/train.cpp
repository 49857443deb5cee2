#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lungkit/tinynet.hpp"

namespace lungkit {

using nn::ForwardCache;
using nn::Tensor4f;

namespace {

// derive() tags for the independent random streams of one training run
constexpr std::uint64_t kTagInit = 0, kTagSplit = 1, kTagDropout = 2, kTagEpochBase = 16;

Tensor4f gather_rows(const Tensor4f& src, const std::vector<std::size_t>& order,
                     std::size_t begin, std::size_t end) {
    const std::size_t stride = static_cast<std::size_t>(src.c) * src.h * src.w;
    Tensor4f out(static_cast<int>(end - begin), src.c, src.h, src.w);
    for (std::size_t i = begin; i < end; ++i)
        std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>(order[i] * stride), stride,
                    out.data.begin() + static_cast<std::ptrdiff_t>((i - begin) * stride));
    return out;
}

double mean_loss_infer(nn::Model<float>& model, const Tensor4f& x, const Tensor4f& y) {
    return static_cast<double>(nn::bce_loss(model.forward(x), y));
}

}  // namespace

TrainResult train_model(const nn::NetworkSpec& spec, const Tensor4f& inputs,
                        const Tensor4f& targets, const TrainConfig& cfg) {
    if (inputs.n < 1) throw std::invalid_argument("train: empty data");
    if (targets.n != inputs.n) throw std::invalid_argument("train: input/target count mismatch");
    if (cfg.lr <= 0.0) throw std::invalid_argument("train: lr must be positive");
    if (cfg.val_fraction < 0.0 || cfg.val_fraction >= 1.0)
        throw std::invalid_argument("train: validation fraction must be in [0,1)");
    if (cfg.patience < 0) throw std::invalid_argument("train: patience must be non-negative");
    if (cfg.batch_size < 1 || cfg.max_epochs < 1)
        throw std::invalid_argument("train: batch size and epochs must be positive");

    TrainResult result;
    nn::Model<float>& model = result.bundle.model;
    model = nn::Model<float>(spec);
    model.init_weights(Rng::derive(cfg.seed, kTagInit).next());

    // held-out slice = tail of one seeded shuffle of the sample order
    const std::size_t n_total = static_cast<std::size_t>(inputs.n);
    std::vector<std::size_t> order(n_total);
    std::iota(order.begin(), order.end(), 0);
    Rng::derive(cfg.seed, kTagSplit).shuffle(order);
    const std::size_t n_val = static_cast<std::size_t>(
        std::floor(cfg.val_fraction * static_cast<double>(n_total)));
    const std::size_t n_train = n_total - n_val;
    if (n_train == 0) throw std::invalid_argument("train: validation slice leaves no training data");

    const Tensor4f train_x = gather_rows(inputs, order, 0, n_train);
    const Tensor4f train_y = gather_rows(targets, order, 0, n_train);
    const Tensor4f val_x = gather_rows(inputs, order, n_train, n_total);
    const Tensor4f val_y = gather_rows(targets, order, n_train, n_total);

    Rng dropout_rng = Rng::derive(cfg.seed, kTagDropout);
    std::vector<nn::AdamState<float>> adam(model.trainable_tensors().size());
    long long step = 0;

    std::vector<nn::LayerParams<float>> best_params = model.params;
    double best_monitor = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int wait = 0;
    const int stop_after = std::max(cfg.patience, 1);  // patience 0 stops at the first stall

    std::vector<std::size_t> train_order(n_train);
    std::iota(train_order.begin(), train_order.end(), 0);
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng::derive(cfg.seed, kTagEpochBase + static_cast<std::uint64_t>(epoch))
            .shuffle(train_order);
        double loss_sum = 0.0;
        std::size_t element_count = 0;
        for (std::size_t begin = 0; begin < n_train; begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(begin + static_cast<std::size_t>(cfg.batch_size), n_train);
            const Tensor4f bx = gather_rows(train_x, train_order, begin, end);
            const Tensor4f by = gather_rows(train_y, train_order, begin, end);

            ForwardCache<float> cache;
            const Tensor4f p = model.forward(bx, true, dropout_rng, cache);
            const double batch_loss = static_cast<double>(nn::bce_loss(p, by));
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
            loss_sum += batch_loss * static_cast<double>(p.size());
            element_count += p.size();

            // fused BCE∘sigmoid gradient seeded below the final sigmoid
            std::vector<nn::LayerParams<float>> grads;
            model.backward(cache, nn::bce_sigmoid_grad(p, by), grads,
                           static_cast<int>(spec.layers.size()) - 2);

            ++step;
            auto params = model.trainable_tensors();
            auto grad_list = nn::Model<float>::collect_trainable(grads);
            for (std::size_t t = 0; t < params.size(); ++t)
                nn::adam_update(*params[t], *grad_list[t], adam[t], step, cfg.lr, cfg.beta1,
                                cfg.beta2, cfg.eps);
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(element_count);
        stats.val_loss = n_val > 0 ? mean_loss_infer(model, val_x, val_y)
                                   : mean_loss_infer(model, train_x, train_y);
        if (!std::isfinite(stats.val_loss))
            throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
        result.history.push_back(stats);

        if (stats.val_loss < best_monitor - 1e-6) {
            best_monitor = stats.val_loss;
            best_epoch = epoch;
            best_params = model.params;
            wait = 0;
        } else if (++wait >= stop_after) {
            break;
        }
    }

    model.params = std::move(best_params);
    result.bundle.meta.seed = cfg.seed;
    result.bundle.meta.epochs_run = static_cast<int>(result.history.size());
    result.bundle.meta.best_val_loss =
        best_epoch >= 0 ? best_monitor : result.history.back().val_loss;
    return result;
}

Tensor4f predict(const ModelBundle& bundle, const Tensor4f& inputs) {
    return bundle.model.forward(inputs);
}

std::vector<std::vector<double>> extract_features(const ModelBundle& bundle,
                                                  const Tensor4f& inputs) {
    const auto& layers = bundle.model.spec.layers;
    std::size_t flatten_idx = layers.size();
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == nn::LayerKind::flatten) {
            flatten_idx = i;
            break;
        }
    if (flatten_idx == layers.size())
        throw std::invalid_argument("extract_features: spec has no flatten layer");

    // inference forward does not mutate the model, so the cast is safe
    auto& model = const_cast<nn::Model<float>&>(bundle.model);
    Rng rng(0);
    ForwardCache<float> cache;
    model.forward(inputs, false, rng, cache);
    const Tensor4f& flat = cache.outputs[flatten_idx];
    const std::size_t d = static_cast<std::size_t>(flat.c);
    std::vector<std::vector<double>> features(static_cast<std::size_t>(flat.n));
    for (int in = 0; in < flat.n; ++in) {
        auto& row = features[static_cast<std::size_t>(in)];
        row.resize(d);
        for (std::size_t j = 0; j < d; ++j)
            row[j] = static_cast<double>(flat.data[static_cast<std::size_t>(in) * d + j]);
    }
    return features;
}

}  // namespace lungkit
