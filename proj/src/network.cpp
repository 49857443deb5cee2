#include <cstring>
#include <stdexcept>

#include "lungkit/lkmb.hpp"
#include "lungkit/tinynet.hpp"

namespace lungkit {

namespace nn {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::tconv: return "tconv";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::dropout: return "dropout";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::flatten: return "flatten";
        case LayerKind::concat_skip: return "concat_skip";
    }
    throw std::logic_error("unreachable layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "conv") return LayerKind::conv;
    if (name == "tconv") return LayerKind::tconv;
    if (name == "maxpool") return LayerKind::maxpool;
    if (name == "dense") return LayerKind::dense;
    if (name == "relu") return LayerKind::relu;
    if (name == "sigmoid") return LayerKind::sigmoid;
    if (name == "dropout") return LayerKind::dropout;
    if (name == "batchnorm") return LayerKind::batchnorm;
    if (name == "flatten") return LayerKind::flatten;
    if (name == "concat_skip") return LayerKind::concat_skip;
    throw std::invalid_argument("unknown layer kind \"" + name + "\"");
}

}  // namespace nn

using nn::LayerKind;
using nn::LayerSpec;
using nn::NetworkSpec;
using nn::Padding;

nn::NetworkSpec build_mini_unet(int depth, int base_channels, int in_h, int in_w) {
    if (depth < 1 || base_channels < 1)
        throw std::invalid_argument("mini unet: depth and base channels must be positive");
    const int factor = 1 << depth;
    if (in_h % factor != 0 || in_w % factor != 0)
        throw std::invalid_argument("mini unet: input dims not divisible by 2^depth");

    NetworkSpec spec;
    spec.task = nn::Task::segmentation;
    spec.in_channels = 1;
    spec.in_h = in_h;
    spec.in_w = in_w;
    auto& L = spec.layers;
    auto conv_block = [&](int channels) {
        L.push_back(LayerSpec::make_conv(channels, 3, Padding::same));
        L.push_back(LayerSpec::make(LayerKind::relu));
        L.push_back(LayerSpec::make_conv(channels, 3, Padding::same));
        L.push_back(LayerSpec::make(LayerKind::relu));
    };

    std::vector<int> skips;
    for (int d = 0; d < depth; ++d) {
        conv_block(base_channels << d);
        skips.push_back(static_cast<int>(L.size()) - 1);  // second relu of the block
        L.push_back(LayerSpec::make(LayerKind::maxpool));
    }
    conv_block(base_channels << depth);  // bottleneck
    for (int d = depth - 1; d >= 0; --d) {
        L.push_back(LayerSpec::make_tconv(base_channels << d));
        L.push_back(LayerSpec::make_concat(skips[static_cast<std::size_t>(d)]));
        conv_block(base_channels << d);
    }
    L.push_back(LayerSpec::make_conv(1, 1, Padding::same));
    L.push_back(LayerSpec::make(LayerKind::sigmoid));
    return spec;
}

nn::NetworkSpec build_mini_cnn(int in_h, int in_w, const std::vector<int>& widths,
                               int dense_units, double conv_dropout, double dense_dropout,
                               bool with_batchnorm) {
    if (widths.empty() || dense_units < 1)
        throw std::invalid_argument("mini cnn: widths and dense units must be positive");
    const int factor = 1 << static_cast<int>(widths.size());
    if (in_h % factor != 0 || in_w % factor != 0)
        throw std::invalid_argument("mini cnn: input dims not divisible by 2^blocks");

    NetworkSpec spec;
    spec.task = nn::Task::classification;
    spec.in_channels = 1;
    spec.in_h = in_h;
    spec.in_w = in_w;
    auto& L = spec.layers;
    for (int w : widths) {
        L.push_back(LayerSpec::make_conv(w, 3, Padding::same));
        if (with_batchnorm) L.push_back(LayerSpec::make(LayerKind::batchnorm));
        L.push_back(LayerSpec::make(LayerKind::relu));
        L.push_back(LayerSpec::make(LayerKind::maxpool));
        L.push_back(LayerSpec::make_dropout(conv_dropout));
    }
    L.push_back(LayerSpec::make(LayerKind::flatten));
    L.push_back(LayerSpec::make_dense(dense_units));
    L.push_back(LayerSpec::make(LayerKind::relu));
    L.push_back(LayerSpec::make_dropout(dense_dropout));
    L.push_back(LayerSpec::make_dense(1));
    L.push_back(LayerSpec::make(LayerKind::sigmoid));
    return spec;
}

nlohmann::ordered_json network_spec_to_json(const NetworkSpec& spec) {
    nlohmann::ordered_json j;
    j["task"] = spec.task == nn::Task::segmentation ? "segmentation" : "classification";
    j["input"] = {spec.in_channels, spec.in_h, spec.in_w};
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (const LayerSpec& l : spec.layers) {
        nlohmann::ordered_json rec;
        rec["kind"] = nn::layer_kind_name(l.kind);
        switch (l.kind) {
            case LayerKind::conv:
                rec["filters"] = l.filters;
                rec["kernel"] = l.kernel;
                rec["stride"] = l.stride;
                rec["padding"] = l.padding == Padding::same ? "same" : "valid";
                break;
            case LayerKind::tconv:
                rec["filters"] = l.filters;
                break;
            case LayerKind::dense:
                rec["units"] = l.filters;
                break;
            case LayerKind::dropout:
                rec["rate"] = l.rate;
                break;
            case LayerKind::concat_skip:
                rec["source"] = l.skip_source;
                break;
            default:
                break;
        }
        layers.push_back(std::move(rec));
    }
    j["layers"] = std::move(layers);
    return j;
}

nn::NetworkSpec network_spec_from_json(const nlohmann::json& j) {
    NetworkSpec spec;
    const std::string task = j.at("task").get<std::string>();
    if (task == "segmentation")
        spec.task = nn::Task::segmentation;
    else if (task == "classification")
        spec.task = nn::Task::classification;
    else
        throw std::invalid_argument("unknown task \"" + task + "\"");
    const auto input = j.at("input").get<std::vector<int>>();
    if (input.size() != 3) throw std::invalid_argument("input shape must have 3 entries");
    spec.in_channels = input[0];
    spec.in_h = input[1];
    spec.in_w = input[2];
    for (const auto& rec : j.at("layers")) {
        LayerSpec l;
        l.kind = nn::layer_kind_from_name(rec.at("kind").get<std::string>());
        switch (l.kind) {
            case LayerKind::conv: {
                l.filters = rec.at("filters").get<int>();
                l.kernel = rec.at("kernel").get<int>();
                l.stride = rec.at("stride").get<int>();
                const std::string pad = rec.at("padding").get<std::string>();
                if (pad == "same")
                    l.padding = Padding::same;
                else if (pad == "valid")
                    l.padding = Padding::valid;
                else
                    throw std::invalid_argument("unknown padding \"" + pad + "\"");
                break;
            }
            case LayerKind::tconv:
                l.filters = rec.at("filters").get<int>();
                l.kernel = 2;
                l.stride = 2;
                break;
            case LayerKind::dense:
                l.filters = rec.at("units").get<int>();
                break;
            case LayerKind::dropout:
                l.rate = rec.at("rate").get<double>();
                break;
            case LayerKind::concat_skip:
                l.skip_source = rec.at("source").get<int>();
                break;
            default:
                break;
        }
        spec.layers.push_back(l);
    }
    nn::infer_shapes(spec);  // reject inconsistent files early
    return spec;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
    LkmbWriter w;
    w.meta["model"] = "network";
    w.meta["spec"] = network_spec_to_json(bundle.model.spec);
    nlohmann::ordered_json training;
    training["seed"] = bundle.meta.seed;
    training["epochs_run"] = bundle.meta.epochs_run;
    training["best_val_loss"] = bundle.meta.best_val_loss;
    w.meta["training"] = std::move(training);
    auto& model = const_cast<nn::Model<float>&>(bundle.model);  // named_tensors is logically const
    for (const auto& [name, tensor] : model.named_tensors())
        w.add_blob(name, "f32", {tensor->n, tensor->c, tensor->h, tensor->w}, tensor->data.data(),
                   tensor->data.size() * sizeof(float));
    w.write(path);
}

ModelBundle load_bundle(const std::string& path) {
    const LkmbBundle file = read_lkmb(path);
    if (file.header.at("model").get<std::string>() != "network")
        throw std::runtime_error("bundle: not a network bundle");
    ModelBundle bundle;
    bundle.model = nn::Model<float>(network_spec_from_json(file.header.at("spec")));
    const auto& training = file.header.at("training");
    bundle.meta.seed = training.at("seed").get<std::uint64_t>();
    bundle.meta.epochs_run = training.at("epochs_run").get<int>();
    bundle.meta.best_val_loss = training.at("best_val_loss").get<double>();
    for (const auto& [name, tensor] : bundle.model.named_tensors()) {
        const LkmbBlobView v = file.blob(name);
        if (v.shape != std::vector<int>{tensor->n, tensor->c, tensor->h, tensor->w})
            throw std::runtime_error("bundle: tensor \"" + name + "\" has the wrong shape");
        std::memcpy(tensor->data.data(), v.data, v.bytes);
    }
    return bundle;
}

}  // namespace lungkit
