// esvt command line: raw ECG -> spectrograms -> ViT / 1D CNN training under
// leave-one-subject-out cross-validation, plus attention-map and feature
// export. Exit codes: 0 ok, 1 runtime/training failure, 2 input/config error.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "esvt/image.hpp"
#include "esvt/pipeline.hpp"
#include "esvt/report.hpp"
#include "esvt/version.hpp"

namespace fs = std::filesystem;
using esvt::Example;

namespace {

struct CliOptions {
    std::string manifest;
    std::string out_dir = "esvt-out";
    uint64_t seed = 0;
    std::string model = "vit";
    std::string labels;  // empty = manifest default
    std::string averaging = "macro";
    int threads = 0;  // 0 = one per fold up to hardware
    esvt::TrainConfig train;
    esvt::ModelSpec spec;
    std::vector<int> layers{1};
    std::string checkpoint;
    std::string image_path;
    int image_size = 224;
};

int next_pow2(int v) {
    int p = 1;
    while (p < v) p <<= 1;
    return p;
}

std::string iso_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void add_data_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--manifest", opt.manifest, "dataset manifest JSON")->required();
    cmd->add_option("--labels", opt.labels, "label scheme key (three|binary)");
}

void add_stft_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--stft-win", opt.spec.stft.win_len, "STFT window length, samples");
    cmd->add_option("--stft-hop", opt.spec.stft.hop, "STFT hop, samples");
    cmd->add_option("--image-size", opt.image_size, "rendered spectrogram height/width");
}

void add_train_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--seed", opt.seed, "run seed");
    cmd->add_option("--model", opt.model, "model kind")->check(CLI::IsMember({"vit", "cnn1d"}));
    cmd->add_option("--epochs", opt.train.epochs, "training epochs");
    cmd->add_option("--batch-size", opt.train.batch_size, "minibatch size");
    cmd->add_option("--lr", opt.train.lr, "learning rate");
    cmd->add_option("--momentum", opt.train.momentum, "SGD momentum");
    cmd->add_option("--weight-decay", opt.train.weight_decay, "L2 weight decay");
    cmd->add_option("--patience", opt.train.patience, "early-stop patience on train loss, 0 disables");
    cmd->add_option("--averaging", opt.averaging, "metric averaging")
        ->check(CLI::IsMember({"macro", "weighted"}));
    cmd->add_option("--threads", opt.threads, "parallel folds, 0 = auto");
    cmd->add_option("--image-size", opt.image_size, "rendered spectrogram height/width");
    cmd->add_option("--patch", opt.spec.vit.patch, "ViT patch size");
    cmd->add_option("--embed-dim", opt.spec.vit.embed_dim, "ViT embedding width");
    cmd->add_option("--depth", opt.spec.vit.depth, "ViT encoder depth");
    cmd->add_option("--heads", opt.spec.vit.heads, "ViT attention heads");
    cmd->add_option("--mlp-ratio", opt.spec.vit.mlp_ratio, "ViT MLP expansion ratio");
    cmd->add_option("--stft-win", opt.spec.stft.win_len, "STFT window length, samples");
    cmd->add_option("--stft-hop", opt.spec.stft.hop, "STFT hop, samples");
}

void finalize_spec(CliOptions& opt, bool model_needed = true) {
    opt.spec.kind = opt.model;
    opt.spec.stft.fft_len = std::max(opt.spec.stft.fft_len, next_pow2(opt.spec.stft.win_len));
    opt.spec.render.out_h = opt.image_size;
    opt.spec.render.out_w = opt.image_size;
    opt.spec.vit.image_h = opt.image_size;
    opt.spec.vit.image_w = opt.image_size;
    opt.train.seed = opt.seed;
    if (model_needed) {
        opt.spec.validate();
    } else {
        opt.spec.stft.validate();
        opt.spec.render.validate();
    }
    opt.train.validate();
}

nlohmann::json config_snapshot(const CliOptions& opt, const esvt::Dataset& ds) {
    nlohmann::json j;
    j["model"] = nlohmann::json::parse(esvt::model_spec_to_json(opt.spec));
    j["train"] = nlohmann::json::parse(esvt::train_config_to_json(opt.train));
    j["labels"] = opt.labels.empty() ? "(manifest default)" : opt.labels;
    j["classes"] = ds.scheme.class_names;
    j["window_s"] = ds.window_s;
    j["hop_s"] = ds.hop_s;
    j["averaging"] = opt.averaging;
    return j;
}

int fold_threads(const CliOptions& opt, size_t folds) {
    if (opt.threads > 0) return opt.threads;
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<int>(std::min<size_t>(hw, folds));
}

int cmd_spectrogram(CliOptions& opt) {
    finalize_spec(opt, /*model_needed=*/false);
    auto manifest = esvt::load_manifest(opt.manifest);
    if (manifest.records.empty())
        throw esvt::IngestionError("manifest '" + opt.manifest + "' lists no records");
    auto ds = esvt::load_dataset(manifest, opt.labels);
    fs::create_directories(opt.out_dir);
    nlohmann::json index;
    index["segments"] = nlohmann::json::array();
    for (const auto& seg : ds.segments) {
        auto img = esvt::segment_to_image(seg, opt.spec.stft, opt.spec.render);
        const std::string file = seg.id + ".f32";
        esvt::write_raw_image((fs::path(opt.out_dir) / file).string(), img);
        index["segments"].push_back({{"id", seg.id},
                                     {"file", file},
                                     {"label", ds.scheme.class_names[static_cast<size_t>(seg.label)]},
                                     {"subject", seg.subject_id}});
    }
    esvt::write_text_file((fs::path(opt.out_dir) / "index.json").string(), index.dump(2) + "\n");
    std::cout << "wrote " << ds.segments.size() << " spectrograms to " << opt.out_dir << "\n";
    return 0;
}

int cmd_losocv(CliOptions& opt) {
    finalize_spec(opt);
    auto manifest = esvt::load_manifest(opt.manifest);
    auto ds = esvt::load_dataset(manifest, opt.labels);
    const auto averaging = opt.averaging == "weighted" ? esvt::Averaging::weighted : esvt::Averaging::macro;
    auto folds = esvt::losocv_folds(ds.segments);  // early protocol validation
    auto out = esvt::run_losocv_pipeline(ds, opt.spec, opt.train, averaging, opt.out_dir,
                                         fold_threads(opt, folds.size()));

    auto snapshot = config_snapshot(opt, ds);
    esvt::write_text_file((fs::path(opt.out_dir) / "report.json").string(),
                          esvt::report_to_json(out.report, snapshot.dump()));
    esvt::write_text_file((fs::path(opt.out_dir) / "report.txt").string(), esvt::report_to_table(out.report));
    snapshot["timestamp"] = iso_now();
    esvt::write_text_file((fs::path(opt.out_dir) / "config_snapshot.json").string(), snapshot.dump(2) + "\n");

    std::cout << esvt::report_to_table(out.report);
    return 0;
}

int cmd_train(CliOptions& opt) {
    finalize_spec(opt);
    auto manifest = esvt::load_manifest(opt.manifest);
    auto ds = esvt::load_dataset(manifest, opt.labels);
    fs::create_directories(opt.out_dir);
    const std::string ckpt = (fs::path(opt.out_dir) / "model.esvt").string();
    auto curve = esvt::train_full_and_save(ds, opt.spec, opt.train, ckpt);

    nlohmann::json j;
    j["curve"] = curve;
    j["checkpoint"] = ckpt;
    esvt::write_text_file((fs::path(opt.out_dir) / "curve.json").string(), j.dump(2) + "\n");
    auto snapshot = config_snapshot(opt, ds);
    snapshot["timestamp"] = iso_now();
    esvt::write_text_file((fs::path(opt.out_dir) / "config_snapshot.json").string(), snapshot.dump(2) + "\n");
    std::cout << "trained on " << ds.segments.size() << " segments; checkpoint at " << ckpt << "\n";
    return 0;
}

int cmd_attn(CliOptions& opt) {
    auto spec = esvt::model_spec_from_json_file(opt.checkpoint + ".json");
    if (spec.kind != "vit") throw esvt::ValueError("attention maps require a vit checkpoint");
    for (int l : opt.layers)
        if (l < 1 || l > spec.vit.depth)
            throw esvt::ValueError("attention layer " + std::to_string(l) + " out of range; model depth is " +
                                   std::to_string(spec.vit.depth));
    auto params = esvt::load_vit_params<float>(opt.checkpoint, spec.vit);
    auto image = esvt::read_raw_image(opt.image_path);
    if (image.h != spec.vit.image_h || image.w != spec.vit.image_w || image.c != spec.vit.channels)
        throw esvt::CheckpointError("image is " + std::to_string(image.h) + "x" + std::to_string(image.w) + "x" +
                                    std::to_string(image.c) + " but the checkpoint expects " +
                                    std::to_string(spec.vit.image_h) + "x" + std::to_string(spec.vit.image_w) +
                                    "x" + std::to_string(spec.vit.channels));

    esvt::AttentionStack<float> stack;
    esvt::vit_logits(image, params, spec.vit, &stack);
    fs::create_directories(opt.out_dir);
    for (int l : opt.layers) {
        const auto patch_weights = esvt::attention_patch_map(stack, l);  // sums to 1
        const int gh = spec.vit.grid_h(), gw = spec.vit.grid_w();
        auto up = esvt::resize_bilinear(patch_weights, gh, gw, image.h, image.w);
        const auto [mn, mx] = std::minmax_element(up.begin(), up.end());
        esvt::SpectrogramImage map;
        map.h = image.h;
        map.w = image.w;
        map.c = 1;
        map.pixels.resize(up.size());
        for (size_t i = 0; i < up.size(); ++i)
            map.pixels[i] = *mx > *mn ? static_cast<float>((up[i] - *mn) / (*mx - *mn)) : 0.0f;
        const std::string base = (fs::path(opt.out_dir) / ("attn_layer" + std::to_string(l))).string();
        esvt::write_pgm(base + ".pgm", map.pixels, map.h, map.w);
        esvt::write_raw_image(base + ".f32", map);
        std::cout << "layer " << l << " -> " << base << ".pgm\n";
    }
    return 0;
}

int cmd_features(CliOptions& opt) {
    auto spec = esvt::model_spec_from_json_file(opt.checkpoint + ".json");
    if (spec.kind != "vit") throw esvt::ValueError("feature export requires a vit checkpoint");
    auto params = esvt::load_vit_params<float>(opt.checkpoint, spec.vit);
    auto manifest = esvt::load_manifest(opt.manifest);
    auto ds = esvt::load_dataset(manifest, opt.labels);

    fs::create_directories(opt.out_dir);
    const std::string path = (fs::path(opt.out_dir) / "features.csv").string();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw esvt::Error("cannot open '" + path + "'");
    os << "id,subject,label";
    for (int d = 0; d < spec.vit.embed_dim; ++d) os << ",f" << d;
    os << "\n";
    char buf[48];
    for (const auto& seg : ds.segments) {
        auto img = esvt::segment_to_image(seg, spec.stft, spec.render);
        if (img.h != spec.vit.image_h || img.w != spec.vit.image_w)
            throw esvt::CheckpointError("rendered image does not match the checkpoint's input size");
        auto feat = esvt::vit_features(img, params, spec.vit);
        os << seg.id << "," << seg.subject_id << "," << ds.scheme.class_names[static_cast<size_t>(seg.label)];
        for (float f : feat) {
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(f));
            os << "," << buf;
        }
        os << "\n";
    }
    std::cout << "wrote features for " << ds.segments.size() << " segments to " << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ECG stress classification with spectrograms and a vision transformer"};
    app.set_version_flag("--version", std::string(esvt::kVersion));
    app.require_subcommand(1);
    CliOptions opt;

    auto* sc_spec = app.add_subcommand("spectrogram", "render per-segment spectrogram images");
    add_data_flags(sc_spec, opt);
    add_stft_flags(sc_spec, opt);
    sc_spec->add_option("--out", opt.out_dir, "output directory");

    auto* sc_losocv = app.add_subcommand("losocv", "leave-one-subject-out cross-validation");
    add_data_flags(sc_losocv, opt);
    add_train_flags(sc_losocv, opt);
    sc_losocv->add_option("--out", opt.out_dir, "output directory");

    auto* sc_train = app.add_subcommand("train", "train one model on every segment");
    add_data_flags(sc_train, opt);
    add_train_flags(sc_train, opt);
    sc_train->add_option("--out", opt.out_dir, "output directory");

    auto* sc_attn = app.add_subcommand("attn", "export per-layer CLS attention maps for one image");
    sc_attn->add_option("checkpoint", opt.checkpoint, "trained vit checkpoint (.esvt)")->required();
    sc_attn->add_option("image", opt.image_path, "raw-f32 spectrogram image")->required();
    sc_attn->add_option("--layers", opt.layers, "1-based encoder layers")->delimiter(',');
    sc_attn->add_option("--out", opt.out_dir, "output directory");

    auto* sc_feat = app.add_subcommand("features", "export CLS feature vectors per segment");
    sc_feat->add_option("checkpoint", opt.checkpoint, "trained vit checkpoint (.esvt)")->required();
    add_data_flags(sc_feat, opt);
    sc_feat->add_option("--out", opt.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sc_spec->parsed()) return cmd_spectrogram(opt);
        if (sc_losocv->parsed()) return cmd_losocv(opt);
        if (sc_train->parsed()) return cmd_train(opt);
        if (sc_attn->parsed()) return cmd_attn(opt);
        if (sc_feat->parsed()) return cmd_features(opt);
    } catch (const esvt::IngestionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const esvt::ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const esvt::ProtocolError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const esvt::CheckpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const esvt::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const esvt::TrainingError& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
