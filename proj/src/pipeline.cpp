#include "esvt/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "esvt/version.hpp"

namespace esvt {

void ModelSpec::validate() const {
    if (kind != "vit" && kind != "cnn1d") throw ValueError("model kind must be 'vit' or 'cnn1d'");
    stft.validate();
    render.validate();
    if (kind == "vit")
        vit.validate();
    else
        cnn.validate();
}

Tensor<float> VitClassifier::logits(const Example& ex) {
    return vit_logits(example_image(ex), params, cfg);
}

Tensor<float> CnnClassifier::logits(const Example& ex) {
    return cnn_forward(detail::example_input<float>(ex), params, cfg);
}

SpectrogramImage example_image(const Example& ex) {
    if (ex.input_shape.size() != 3)
        throw ShapeError("example '" + ex.id + "' does not hold an image");
    SpectrogramImage img;
    img.h = static_cast<int>(ex.input_shape[0]);
    img.w = static_cast<int>(ex.input_shape[1]);
    img.c = static_cast<int>(ex.input_shape[2]);
    img.pixels = ex.input;
    img.segment_id = ex.id;
    return img;
}

// The CNN consumes whatever snippet length the dataset's window produces.
static Cnn1dConfig cnn_for_dataset(const Dataset& dataset, Cnn1dConfig cfg) {
    if (!dataset.segments.empty())
        cfg.input_len = static_cast<int>(dataset.segments.front().samples.size());
    cfg.validate();
    return cfg;
}

std::vector<Example> make_examples(const Dataset& dataset, const ModelSpec& spec) {
    spec.validate();
    std::vector<Example> out;
    out.reserve(dataset.segments.size());
    for (const auto& seg : dataset.segments) {
        Example ex;
        ex.label = seg.label;
        ex.subject = seg.subject_id;
        ex.id = seg.id;
        if (spec.kind == "vit") {
            auto img = segment_to_image(seg, spec.stft, spec.render);
            ex.input_shape = {img.h, img.w, img.c};
            ex.input = std::move(img.pixels);
        } else {
            if (static_cast<int>(seg.samples.size()) != spec.cnn.input_len)
                throw ShapeError("segment '" + seg.id + "' has " + std::to_string(seg.samples.size()) +
                                 " samples; cnn1d expects " + std::to_string(spec.cnn.input_len));
            ex.input_shape = {1, static_cast<int64_t>(seg.samples.size())};
            ex.input = seg.samples;
        }
        out.push_back(std::move(ex));
    }
    return out;
}

namespace {

int dataset_classes(const Dataset& dataset) {
    return dataset.scheme.num_classes();
}

}  // namespace

LosocvOutput run_losocv_pipeline(const Dataset& dataset, const ModelSpec& in_spec, const TrainConfig& train,
                                 Averaging averaging, const std::string& out_dir, int max_threads) {
    ModelSpec spec = in_spec;
    if (spec.kind == "cnn1d") spec.cnn = cnn_for_dataset(dataset, spec.cnn);
    spec.validate();
    auto folds = losocv_folds(dataset.segments);
    auto examples = make_examples(dataset, spec);
    const int classes = dataset_classes(dataset);

    LosocvOutput out;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        out.checkpoint_paths.resize(folds.size());
    }

    auto save_fold = [&](size_t fi, auto& model) {
        if (out_dir.empty()) return;
        const std::string path =
            (std::filesystem::path(out_dir) / ("fold_" + folds[fi].held_out_subject + ".esvt")).string();
        ModelSpec saved = spec;
        saved.class_names = dataset.scheme.class_names;
        if constexpr (std::is_same_v<std::decay_t<decltype(model)>, VitClassifier>) {
            save_vit_params(path, model.params);
            saved.vit = model.cfg;
        } else {
            save_cnn_params(path, model.params);
            saved.cnn = model.cfg;
        }
        std::ofstream js(path + ".json");
        js << model_spec_to_json(saved);
        out.checkpoint_paths[fi] = path;
    };

    if (spec.kind == "vit") {
        VitConfig mc = spec.vit;
        mc.num_classes = classes;
        out.report = run_losocv(
            examples, folds, classes, train,
            [&mc](uint64_t fold_seed) { return VitClassifier{mc, init_vit_params<float>(mc, fold_seed)}; },
            averaging, max_threads, save_fold);
    } else {
        Cnn1dConfig mc = spec.cnn;
        mc.num_classes = classes;
        out.report = run_losocv(
            examples, folds, classes, train,
            [&mc](uint64_t fold_seed) { return CnnClassifier{mc, init_cnn_params<float>(mc, fold_seed)}; },
            averaging, max_threads, save_fold);
    }
    out.report.model_kind = spec.kind;
    out.report.version = std::string(kVersion);
    out.report.class_names = dataset.scheme.class_names;
    return out;
}

std::vector<double> train_full_and_save(const Dataset& dataset, const ModelSpec& in_spec, const TrainConfig& train,
                                        const std::string& checkpoint_path) {
    ModelSpec spec = in_spec;
    if (spec.kind == "cnn1d") spec.cnn = cnn_for_dataset(dataset, spec.cnn);
    spec.validate();
    if (dataset.segments.empty()) throw ProtocolError("no segments to train on");
    auto examples = make_examples(dataset, spec);
    const int classes = dataset_classes(dataset);
    std::vector<double> curve;

    ModelSpec saved = spec;
    saved.class_names = dataset.scheme.class_names;
    if (spec.kind == "vit") {
        VitConfig mc = spec.vit;
        mc.num_classes = classes;
        VitClassifier model{mc, init_vit_params<float>(mc, train.seed)};
        curve = train_fold(model, examples, train);
        save_vit_params(checkpoint_path, model.params);
        saved.vit = mc;
    } else {
        Cnn1dConfig mc = spec.cnn;
        mc.num_classes = classes;
        CnnClassifier model{mc, init_cnn_params<float>(mc, train.seed)};
        curve = train_fold(model, examples, train);
        save_cnn_params(checkpoint_path, model.params);
        saved.cnn = mc;
    }
    std::ofstream js(checkpoint_path + ".json");
    js << model_spec_to_json(saved);
    if (!js) throw Error("cannot write '" + checkpoint_path + ".json'");
    return curve;
}

namespace {

nlohmann::json stft_to_json(const StftConfig& c) {
    return {{"win_len", c.win_len},
            {"hop", c.hop},
            {"window", c.window == WindowFn::hann ? "hann" : "rectangular"},
            {"fft_len", c.fft_len}};
}

StftConfig stft_from_json(const nlohmann::json& j) {
    StftConfig c;
    c.win_len = j.value("win_len", c.win_len);
    c.hop = j.value("hop", c.hop);
    c.fft_len = j.value("fft_len", c.fft_len);
    const std::string w = j.value("window", std::string("hann"));
    if (w == "hann")
        c.window = WindowFn::hann;
    else if (w == "rectangular")
        c.window = WindowFn::rectangular;
    else
        throw IngestionError("unknown stft window '" + w + "'");
    return c;
}

nlohmann::json render_to_json(const RenderConfig& c) {
    return {{"out_h", c.out_h},
            {"out_w", c.out_w},
            {"log_compress", c.log_compress},
            {"colormap", c.colormap == Colormap::replicate ? "replicate" : "viridis_lut"}};
}

RenderConfig render_from_json(const nlohmann::json& j) {
    RenderConfig c;
    c.out_h = j.value("out_h", c.out_h);
    c.out_w = j.value("out_w", c.out_w);
    c.log_compress = j.value("log_compress", c.log_compress);
    const std::string m = j.value("colormap", std::string("replicate"));
    if (m == "replicate")
        c.colormap = Colormap::replicate;
    else if (m == "viridis_lut")
        c.colormap = Colormap::viridis_lut;
    else
        throw IngestionError("unknown colormap '" + m + "'");
    return c;
}

nlohmann::json vit_to_json(const VitConfig& c) {
    return {{"image_h", c.image_h}, {"image_w", c.image_w},     {"channels", c.channels},
            {"patch", c.patch},     {"embed_dim", c.embed_dim}, {"depth", c.depth},
            {"heads", c.heads},     {"mlp_ratio", c.mlp_ratio}, {"num_classes", c.num_classes},
            {"dropout_rate", c.dropout_rate}, {"gelu_tanh_approx", c.gelu_tanh_approx}};
}

VitConfig vit_from_json(const nlohmann::json& j) {
    VitConfig c;
    c.image_h = j.value("image_h", c.image_h);
    c.image_w = j.value("image_w", c.image_w);
    c.channels = j.value("channels", c.channels);
    c.patch = j.value("patch", c.patch);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.depth = j.value("depth", c.depth);
    c.heads = j.value("heads", c.heads);
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.gelu_tanh_approx = j.value("gelu_tanh_approx", c.gelu_tanh_approx);
    return c;
}

nlohmann::json cnn_to_json(const Cnn1dConfig& c) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& st : c.stages) stages.push_back({{"out_channels", st.out_channels}, {"kernel", st.kernel}});
    return {{"input_len", c.input_len}, {"stages", stages},           {"pool", c.pool},
            {"fc_width", c.fc_width},   {"num_classes", c.num_classes}};
}

Cnn1dConfig cnn_from_json(const nlohmann::json& j) {
    Cnn1dConfig c;
    c.input_len = j.value("input_len", c.input_len);
    c.pool = j.value("pool", c.pool);
    c.fc_width = j.value("fc_width", c.fc_width);
    c.num_classes = j.value("num_classes", c.num_classes);
    if (j.contains("stages")) {
        c.stages.clear();
        for (const auto& st : j["stages"])
            c.stages.push_back({st.at("out_channels").get<int>(), st.at("kernel").get<int>()});
    }
    return c;
}

}  // namespace

std::string model_spec_to_json(const ModelSpec& spec) {
    nlohmann::json j;
    j["kind"] = spec.kind;
    j["stft"] = stft_to_json(spec.stft);
    j["render"] = render_to_json(spec.render);
    if (spec.kind == "vit")
        j["vit"] = vit_to_json(spec.vit);
    else
        j["cnn1d"] = cnn_to_json(spec.cnn);
    j["classes"] = spec.class_names;
    j["version"] = std::string(kVersion);
    return j.dump(2) + "\n";
}

ModelSpec model_spec_from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw CheckpointError("cannot open model sidecar '" + path + "'");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("'" + path + "': " + e.what());
    }
    ModelSpec spec;
    try {
        spec.kind = j.at("kind").get<std::string>();
        if (j.contains("stft")) spec.stft = stft_from_json(j["stft"]);
        if (j.contains("render")) spec.render = render_from_json(j["render"]);
        if (j.contains("vit")) spec.vit = vit_from_json(j["vit"]);
        if (j.contains("cnn1d")) spec.cnn = cnn_from_json(j["cnn1d"]);
        if (j.contains("classes"))
            for (const auto& c : j["classes"]) spec.class_names.push_back(c.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("'" + path + "': " + e.what());
    }
    spec.validate();
    return spec;
}

std::string train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json j{{"lr", cfg.lr},
                     {"momentum", cfg.momentum},
                     {"weight_decay", cfg.weight_decay},
                     {"batch_size", cfg.batch_size},
                     {"epochs", cfg.epochs},
                     {"seed", cfg.seed},
                     {"shuffle", cfg.shuffle},
                     {"patience", cfg.patience}};
    return j.dump();
}

}  // namespace esvt
