#pragma once

#include <string>
#include <vector>

#include "esvt/cnn1d.hpp"
#include "esvt/image.hpp"
#include "esvt/manifest.hpp"
#include "esvt/train.hpp"
#include "esvt/vit.hpp"

namespace esvt {

// Everything needed to reproduce a model: kind plus the configs that shape
// its inputs. Saved as the "<checkpoint>.json" sidecar.
struct ModelSpec {
    std::string kind = "vit";  // "vit" | "cnn1d"
    VitConfig vit;
    Cnn1dConfig cnn;
    StftConfig stft;
    RenderConfig render;
    std::vector<std::string> class_names;

    void validate() const;
};

struct VitClassifier {
    using scalar_type = float;
    VitConfig cfg;
    VitParams<float> params;

    Tensor<float> logits(const Example& ex);
    std::vector<std::pair<std::string, Tensor<float>>> parameters() { return params.named(); }
};

struct CnnClassifier {
    using scalar_type = float;
    Cnn1dConfig cfg;
    CnnParams<float> params;

    Tensor<float> logits(const Example& ex);
    std::vector<std::pair<std::string, Tensor<float>>> parameters() { return params.named(); }
};

SpectrogramImage example_image(const Example& ex);

// ViT inputs are rendered spectrograms; CNN inputs are the raw snippets.
std::vector<Example> make_examples(const Dataset& dataset, const ModelSpec& spec);

struct LosocvOutput {
    RunReport report;
    // per-fold checkpoints, aligned with report.folds; empty when not saved
    std::vector<std::string> checkpoint_paths;
};

// Full protocol: fold construction, per-fold training, metrics, average row.
// When out_dir is non-empty, per-fold checkpoints are written there.
LosocvOutput run_losocv_pipeline(const Dataset& dataset, const ModelSpec& spec, const TrainConfig& train,
                                 Averaging averaging = Averaging::macro, const std::string& out_dir = "",
                                 int max_threads = 1);

// Trains one model on every segment and writes "<path>" + "<path>.json".
std::vector<double> train_full_and_save(const Dataset& dataset, const ModelSpec& spec, const TrainConfig& train,
                                        const std::string& checkpoint_path);

std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json_file(const std::string& path);
std::string train_config_to_json(const TrainConfig& cfg);

}  // namespace esvt
