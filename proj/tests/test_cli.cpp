#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <set>

#include "esvt/image.hpp"
#include "esvt/pipeline.hpp"
#include "esvt/synth.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using testutil::TempDir;

namespace {

int run_cli(const std::string& args, std::string* output = nullptr) {
    static int counter = 0;
    const std::string log = (fs::temp_directory_path() / ("esvt_cli_log_" + std::to_string(counter++))).string();
    const std::string cmd = std::string(ESVT_CLI_PATH) + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = testutil::read_file(log);
    fs::remove(log);
    if (status < 0) return -1;
    return WEXITSTATUS(status);
}

esvt::SynthConfig small_synth(int subjects, double seconds_per_class = 6.0) {
    esvt::SynthConfig cfg;
    cfg.subjects = subjects;
    cfg.seconds_per_class = seconds_per_class;
    cfg.block_s = 3.0;
    cfg.seed = 99;
    return cfg;
}

std::string hash_dir(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) names.push_back(e.path().string());
    std::sort(names.begin(), names.end());
    std::string acc;
    for (const auto& n : names) {
        acc += fs::path(n).filename().string();
        acc += std::to_string(esvt::fnv1a64(testutil::read_file(n)));
    }
    return std::to_string(esvt::fnv1a64(acc));
}

const std::string kSmallStft = " --stft-win 32 --stft-hop 16 --image-size 32 ";

}  // namespace

TEST_CASE("spectrogram: one image per segment, indexed, byte-stable on rerun") {
    TempDir data("cli_spec_data");
    const std::string manifest = esvt::write_synth_dataset(data.file("ds"), small_synth(2));

    TempDir out1("cli_spec_out1");
    std::string log;
    const int rc = run_cli("spectrogram --manifest " + manifest + " --out " + out1.file("x") + kSmallStft, &log);
    INFO(log);
    REQUIRE(rc == 0);

    auto index = nlohmann::json::parse(testutil::read_file(out1.file("x") + "/index.json"));
    const size_t n = index["segments"].size();
    CHECK(n > 0);
    size_t f32_files = 0;
    for (const auto& e : fs::directory_iterator(out1.file("x")))
        if (e.path().extension() == ".f32") ++f32_files;
    CHECK(f32_files == n);
    for (const auto& seg : index["segments"]) {
        CHECK(fs::exists(fs::path(out1.file("x")) / seg["file"].get<std::string>()));
        CHECK(seg.contains("label"));
        CHECK(seg.contains("subject"));
    }

    TempDir out2("cli_spec_out2");
    REQUIRE(run_cli("spectrogram --manifest " + manifest + " --out " + out2.file("x") + kSmallStft) == 0);
    CHECK(hash_dir(out1.file("x")) == hash_dir(out2.file("x")));
}

TEST_CASE("spectrogram: empty manifest exits with code 2") {
    TempDir dir("cli_empty");
    testutil::write_file(dir.file("m.json"),
                         R"({"label_schemes":{"three":{"classes":["a","b"],"map":{"a":"a","b":"b"}}},"records":[]})");
    std::string log;
    CHECK(run_cli("spectrogram --manifest " + dir.file("m.json") + " --out " + dir.file("out"), &log) == 2);
    CHECK(run_cli("spectrogram --manifest " + dir.file("missing.json") + " --out " + dir.file("out")) == 2);
}

TEST_CASE("losocv: cnn on two subjects writes table, json, and fold checkpoints") {
    TempDir data("cli_losocv");
    const std::string manifest = esvt::write_synth_dataset(data.file("ds"), small_synth(2));
    std::string log;
    const int rc = run_cli("losocv --manifest " + manifest + " --out " + data.file("out") +
                               " --model cnn1d --epochs 2 --seed 5 --threads 1",
                           &log);
    INFO(log);
    REQUIRE(rc == 0);

    const std::string table = testutil::read_file(data.file("out") + "/report.txt");
    CHECK(table.find("Testing Sub") != std::string::npos);
    CHECK(table.find("s01") != std::string::npos);
    CHECK(table.find("s02") != std::string::npos);
    CHECK(table.find("Average") != std::string::npos);

    auto report = nlohmann::json::parse(testutil::read_file(data.file("out") + "/report.json"));
    CHECK(report["folds"].size() == 2);
    CHECK(report["model"] == "cnn1d");
    CHECK(fs::exists(data.file("out") + "/fold_s01.esvt"));
    CHECK(fs::exists(data.file("out") + "/fold_s02.esvt"));
    CHECK(fs::exists(data.file("out") + "/config_snapshot.json"));
}

TEST_CASE("losocv: single subject exits with code 2") {
    TempDir data("cli_one_subj");
    const std::string manifest = esvt::write_synth_dataset(data.file("ds"), small_synth(1));
    std::string log;
    CHECK(run_cli("losocv --manifest " + manifest + " --out " + data.file("out") + " --model cnn1d", &log) == 2);
}

TEST_CASE("train then attn: maps per layer, range errors, uniform fixture") {
    TempDir data("cli_attn");
    const std::string manifest = esvt::write_synth_dataset(data.file("ds"), small_synth(2));
    std::string log;
    int rc = run_cli("train --manifest " + manifest + " --out " + data.file("run") +
                         " --model vit --epochs 1 --seed 3 --patch 8 --embed-dim 16 --depth 2 --heads 2" +
                         kSmallStft,
                     &log);
    INFO(log);
    REQUIRE(rc == 0);
    REQUIRE(run_cli("spectrogram --manifest " + manifest + " --out " + data.file("imgs") + kSmallStft) == 0);

    auto index = nlohmann::json::parse(testutil::read_file(data.file("imgs") + "/index.json"));
    const std::string image =
        (fs::path(data.file("imgs")) / index["segments"][0]["file"].get<std::string>()).string();
    const std::string ckpt = data.file("run") + "/model.esvt";

    rc = run_cli("attn " + ckpt + " " + image + " --layers 1,2 --out " + data.file("maps"), &log);
    INFO(log);
    REQUIRE(rc == 0);
    for (int l : {1, 2}) {
        const std::string base = data.file("maps") + "/attn_layer" + std::to_string(l);
        CHECK(fs::exists(base + ".pgm"));
        auto raw = esvt::read_raw_image(base + ".f32");
        CHECK(raw.h == 32);
        CHECK(raw.w == 32);
        CHECK(raw.c == 1);
    }

    SUBCASE("layer beyond the model depth exits 2 and names the depth") {
        CHECK(run_cli("attn " + ckpt + " " + image + " --layers 10 --out " + data.file("maps2"), &log) == 2);
        CHECK(log.find("depth is 2") != std::string::npos);
    }

    SUBCASE("uniform-attention fixture produces a flat map") {
        // zero Q/K weights -> uniform attention rows
        auto spec = esvt::model_spec_from_json_file(ckpt + ".json");
        auto params = esvt::load_vit_params<float>(ckpt, spec.vit);
        for (auto& blk : params.blocks) {
            std::fill(blk.wq.values().begin(), blk.wq.values().end(), 0.0f);
            std::fill(blk.wk.values().begin(), blk.wk.values().end(), 0.0f);
        }
        const std::string flat_ckpt = data.file("run") + "/uniform.esvt";
        esvt::save_vit_params(flat_ckpt, params);
        testutil::write_file(flat_ckpt + ".json", testutil::read_file(ckpt + ".json"));
        REQUIRE(run_cli("attn " + flat_ckpt + " " + image + " --layers 1 --out " + data.file("flat")) == 0);
        auto raw = esvt::read_raw_image(data.file("flat") + "/attn_layer1.f32");
        for (float v : raw.pixels) CHECK(v == raw.pixels[0]);
    }
}

TEST_CASE("features: one row per segment, stable for identical inputs") {
    TempDir data("cli_feat");
    const std::string manifest = esvt::write_synth_dataset(data.file("ds"), small_synth(2));
    std::string log;
    int rc = run_cli("train --manifest " + manifest + " --out " + data.file("run") +
                         " --model vit --epochs 0 --seed 4 --patch 8 --embed-dim 16 --depth 1 --heads 2" +
                         kSmallStft,
                     &log);
    INFO(log);
    REQUIRE(rc == 0);
    const std::string ckpt = data.file("run") + "/model.esvt";

    rc = run_cli("features " + ckpt + " --manifest " + manifest + " --out " + data.file("feats"), &log);
    INFO(log);
    REQUIRE(rc == 0);
    const std::string csv = testutil::read_file(data.file("feats") + "/features.csv");
    std::vector<std::string> lines;
    for (size_t at = 0; at < csv.size();) {
        const size_t nl = csv.find('\n', at);
        lines.push_back(csv.substr(at, nl - at));
        at = nl + 1;
    }
    auto index_cols = [](const std::string& line) {
        return static_cast<size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    };
    REQUIRE(lines.size() >= 2);
    CHECK(lines[0].rfind("id,subject,label,f0", 0) == 0);
    CHECK(index_cols(lines[0]) == 3 + 16);
    for (size_t i = 1; i < lines.size(); ++i) CHECK(index_cols(lines[i]) == 3 + 16);

    SUBCASE("empty manifest yields a header-only csv") {
        testutil::write_file(
            data.file("empty.json"),
            R"({"label_schemes":{"three":{"classes":["a","b"],"map":{"a":"a","b":"b"}}},"records":[]})");
        REQUIRE(run_cli("features " + ckpt + " --manifest " + data.file("empty.json") + " --out " +
                        data.file("feats2")) == 0);
        const std::string csv2 = testutil::read_file(data.file("feats2") + "/features.csv");
        CHECK(csv2.rfind("id,subject,label,f0", 0) == 0);
        CHECK(std::count(csv2.begin(), csv2.end(), '\n') == 1);
    }

    SUBCASE("identical segments produce identical feature rows") {
        // same subject file listed twice -> identical segment contents
        auto manifest_json = nlohmann::json::parse(testutil::read_file(manifest));
        auto rec = manifest_json["records"][0];
        manifest_json["records"] = nlohmann::json::array({rec, rec});
        const std::string dup = (fs::path(manifest).parent_path() / "dup.json").string();
        testutil::write_file(dup, manifest_json.dump());
        REQUIRE(run_cli("features " + ckpt + " --manifest " + dup + " --out " + data.file("feats3")) == 0);
        const std::string csv3 = testutil::read_file(data.file("feats3") + "/features.csv");
        std::vector<std::string> rows;
        for (size_t at = 0; at < csv3.size();) {
            const size_t nl = csv3.find('\n', at);
            rows.push_back(csv3.substr(at, nl - at));
            at = nl + 1;
        }
        const size_t per = (rows.size() - 1) / 2;
        for (size_t i = 0; i < per; ++i) {
            const auto tail = [](const std::string& row) { return row.substr(row.find(',')); };
            // same features, only the record-qualified id differs
            CHECK(tail(rows[1 + i]) == tail(rows[1 + per + i]));
        }
    }
}

TEST_CASE("pipeline: cnn input length follows the dataset window") {
    esvt::SynthConfig synth = small_synth(2);
    auto dataset = esvt::synth_dataset(synth, 0.5, 0.5);  // 128-sample snippets
    REQUIRE(!dataset.segments.empty());
    CHECK(dataset.segments.front().samples.size() == 128);
    esvt::ModelSpec spec;
    spec.kind = "cnn1d";
    esvt::TrainConfig train;
    train.epochs = 1;
    auto out = esvt::run_losocv_pipeline(dataset, spec, train);
    CHECK(out.report.folds.size() == 2);
}

TEST_CASE("spectrogram: binary label scheme relabels segments to two classes") {
    TempDir data("cli_binary");
    const std::string manifest = esvt::write_synth_dataset(data.file("ds"), small_synth(2));
    std::string log;
    REQUIRE(run_cli("spectrogram --manifest " + manifest + " --out " + data.file("out") +
                        " --labels binary" + kSmallStft,
                    &log) == 0);
    auto index = nlohmann::json::parse(testutil::read_file(data.file("out") + "/index.json"));
    std::set<std::string> labels;
    for (const auto& seg : index["segments"]) labels.insert(seg["label"].get<std::string>());
    CHECK(labels == std::set<std::string>{"no_stress", "stress"});
}

TEST_CASE("cli: losocv rerun with the same seed is byte-identical") {
    TempDir data("cli_det");
    const std::string manifest = esvt::write_synth_dataset(data.file("ds"), small_synth(2, 4.0));
    const std::string args = "losocv --manifest " + manifest +
                             " --model cnn1d --epochs 2 --seed 21 --threads 1 --out ";
    std::string log;
    REQUIRE(run_cli(args + data.file("a"), &log) == 0);
    REQUIRE(run_cli(args + data.file("b"), &log) == 0);
    CHECK(testutil::read_file(data.file("a") + "/report.json") ==
          testutil::read_file(data.file("b") + "/report.json"));
    CHECK(testutil::read_file(data.file("a") + "/fold_s01.esvt") ==
          testutil::read_file(data.file("b") + "/fold_s01.esvt"));
}
