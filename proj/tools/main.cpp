#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lesionnet/config.hpp"
#include "lesionnet/dataset.hpp"
#include "lesionnet/errors.hpp"
#include "lesionnet/infer.hpp"
#include "lesionnet/metrics.hpp"
#include "lesionnet/model.hpp"
#include "lesionnet/synth.hpp"
#include "lesionnet/train.hpp"

namespace {

using namespace lesionnet;

// "k/i" -> (k, fold_index)
std::pair<int, int> parse_fold(const std::string& text) {
    const std::size_t slash = text.find('/');
    require(slash != std::string::npos && slash > 0 && slash + 1 < text.size(),
            "cli: --fold expects K/INDEX, got '" + text + "'");
    int k = 0, idx = 0;
    try {
        k = std::stoi(text.substr(0, slash));
        idx = std::stoi(text.substr(slash + 1));
    } catch (const std::exception&) {
        fail("cli: --fold expects K/INDEX, got '" + text + "'");
    }
    return {k, idx};
}

int run_synth(const std::string& out_dir, int n_train, int n_test, std::uint64_t seed) {
    synth_dataset(out_dir, n_train, n_test, seed);
    std::printf("train images: %d\n", 3 * n_train);
    std::printf("test images: %d\n", 3 * n_test);
    std::printf("manifests: %s %s\n", (std::filesystem::path(out_dir) / "train.csv").c_str(),
                (std::filesystem::path(out_dir) / "test.csv").c_str());
    return 0;
}

int run_train(const std::string& config_path, const std::string& data_path, const std::string& out_path,
              const std::string& fold) {
    const RunConfig cfg = parse_config_file(config_path);
    validate_run_config(cfg);
    Manifest manifest = load_manifest(data_path);

    Rng rng(cfg.seed);
    if (!fold.empty()) {
        const auto [k, idx] = parse_fold(fold);
        manifest = kfold_split(manifest, k, idx, rng).first;
    }
    std::printf("train entries: %zu\n", manifest.size());

    ModelParams model = build_model(to_model_config(cfg), rng);
    ImageStore store;
    const TrainLog log = two_stage_train(model, manifest, to_schedule(cfg), rng, store);
    save_weights(model, out_path);
    write_train_log(log, out_path + ".log.csv");
    if (!log.records.empty()) std::printf("final loss: %.9g\n", log.records.back().loss);
    std::printf("saved weights: %s\n", out_path.c_str());
    return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path, const std::string& out_path,
                bool no_tta) {
    const ModelParams model = load_weights(model_path);
    const Manifest manifest = load_manifest(data_path);
    ImageStore store;
    reset_forward_pass_count();
    const std::vector<PredictionRecord> records = predict_manifest(model, manifest, store, !no_tta);
    write_predictions(records, out_path);
    std::printf("predictions: %zu rows\n", records.size());
    std::printf("forward passes: %lld\n", static_cast<long long>(forward_pass_count()));
    return 0;
}

int run_ensemble(const std::string& out_path, const std::vector<std::string>& inputs) {
    std::vector<std::vector<PredictionRecord>> sets;
    sets.reserve(inputs.size());
    for (const std::string& path : inputs) sets.push_back(read_predictions(path));
    const std::vector<PredictionRecord> merged = ensemble_geometric(sets);
    write_predictions(merged, out_path);
    std::printf("ensembled %zu inputs, %zu rows\n", sets.size(), merged.size());
    return 0;
}

int run_evaluate(const std::string& preds_path, const std::string& labels_path, bool csv) {
    const std::vector<PredictionRecord> preds = read_predictions(preds_path);
    const Manifest manifest = load_manifest(labels_path);
    const EvalReport report = evaluate(preds, manifest);
    std::printf("%s", format_report(report).c_str());
    if (csv) std::printf("%s", format_report_csv(report).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-scale skin lesion classifier"};
    app.require_subcommand(1);

    std::string synth_out;
    int synth_train = 200, synth_test = 100;
    std::uint64_t synth_seed = 0;
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic lesion dataset");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--train", synth_train, "Training images per class");
    synth->add_option("--test", synth_test, "Test images per class");
    synth->add_option("--seed", synth_seed, "Generator seed");

    std::string train_config, train_data, train_out, train_fold;
    CLI::App* train = app.add_subcommand("train", "Run the two-stage training schedule");
    train->add_option("--config", train_config, "Run config file")->required();
    train->add_option("--data", train_data, "Training manifest CSV")->required();
    train->add_option("--out", train_out, "Output weight file")->required();
    train->add_option("--fold", train_fold, "K/INDEX: train on all but the INDEX-th of K folds");

    std::string pred_model, pred_data, pred_out;
    bool pred_no_tta = false;
    CLI::App* predict = app.add_subcommand("predict", "Write predictions for a manifest");
    predict->add_option("--model", pred_model, "Weight file")->required();
    predict->add_option("--data", pred_data, "Manifest CSV")->required();
    predict->add_option("--out", pred_out, "Output prediction CSV")->required();
    predict->add_flag("--no-tta", pred_no_tta, "Single forward pass per image (skip the 8-way dihedral average)");

    std::string ens_out;
    std::vector<std::string> ens_inputs;
    CLI::App* ensemble = app.add_subcommand("ensemble", "Geometric-mean merge of prediction files");
    ensemble->add_option("--out", ens_out, "Output prediction CSV")->required();
    ensemble->add_option("inputs", ens_inputs, "Prediction CSV files")->required()->expected(-1);

    std::string eval_preds, eval_labels;
    bool eval_csv = false;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Accuracy and ROC-AUC for both binary tasks");
    evaluate->add_option("--preds", eval_preds, "Prediction CSV")->required();
    evaluate->add_option("--labels", eval_labels, "Manifest CSV with true labels")->required();
    evaluate->add_flag("--csv", eval_csv, "Also print the report as a CSV row");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }

    try {
        if (synth->parsed()) return run_synth(synth_out, synth_train, synth_test, synth_seed);
        if (train->parsed()) return run_train(train_config, train_data, train_out, train_fold);
        if (predict->parsed()) return run_predict(pred_model, pred_data, pred_out, pred_no_tta);
        if (ensemble->parsed()) return run_ensemble(ens_out, ens_inputs);
        if (evaluate->parsed()) return run_evaluate(eval_preds, eval_labels, eval_csv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
