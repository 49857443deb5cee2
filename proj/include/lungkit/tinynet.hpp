#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lungkit/nn/network.hpp"

namespace lungkit {

/// Miniature U-Net: `depth` encoder blocks (conv3x3-relu x2, maxpool) with
/// channels doubling from `base_channels`, a bottleneck, a mirrored decoder
/// (tconv upsample, skip concatenation, conv3x3-relu x2), and a 1x1 conv +
/// sigmoid head. Output spatial dims equal input dims.
nn::NetworkSpec build_mini_unet(int depth = 3, int base_channels = 16, int in_h = 128,
                                int in_w = 128);

/// Classifier CNN: [conv3x3-relu, maxpool, dropout 0.3] per width, flatten,
/// dense-relu, dropout 0.5, dense(1)-sigmoid. `with_batchnorm` inserts a
/// batchnorm between each conv and its relu.
nn::NetworkSpec build_mini_cnn(int in_h = 128, int in_w = 128,
                               const std::vector<int>& widths = {16, 32, 64, 128},
                               int dense_units = 64, double conv_dropout = 0.3,
                               double dense_dropout = 0.5, bool with_batchnorm = false);

nlohmann::ordered_json network_spec_to_json(const nn::NetworkSpec& spec);
nn::NetworkSpec network_spec_from_json(const nlohmann::json& j);

struct TrainMeta {
    std::uint64_t seed = 0;
    int epochs_run = 0;
    double best_val_loss = 0.0;
};

struct ModelBundle {
    nn::Model<float> model;
    TrainMeta meta;
};

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 16;
    int max_epochs = 50;
    int patience = 10;
    double val_fraction = 0.1;
    std::uint64_t seed = 42;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;  // training-set loss when the validation slice is empty
};

struct TrainResult {
    ModelBundle bundle;
    std::vector<EpochStats> history;
};

/// Mini-batch Adam training with BCE loss and early stopping. The validation
/// slice is the tail of one seeded shuffle of the sample order; weights from
/// the best-validation epoch are returned. Bit-reproducible per seed.
TrainResult train_model(const nn::NetworkSpec& spec, const nn::Tensor4f& inputs,
                        const nn::Tensor4f& targets, const TrainConfig& cfg);

/// Inference pass (dropout off, batchnorm on running stats).
nn::Tensor4f predict(const ModelBundle& bundle, const nn::Tensor4f& inputs);

/// Activations at the flatten layer, one row per input.
std::vector<std::vector<double>> extract_features(const ModelBundle& bundle,
                                                  const nn::Tensor4f& inputs);

void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

}  // namespace lungkit
