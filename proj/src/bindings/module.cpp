#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <string>
#include <vector>

#include "lesionnet/config.hpp"
#include "lesionnet/dataset.hpp"
#include "lesionnet/image.hpp"
#include "lesionnet/infer.hpp"
#include "lesionnet/metrics.hpp"
#include "lesionnet/model.hpp"
#include "lesionnet/ops.hpp"
#include "lesionnet/synth.hpp"
#include "lesionnet/train.hpp"

namespace py = pybind11;
using namespace lesionnet;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const DoubleArray& arr) {
    std::vector<int> shape(static_cast<std::size_t>(arr.ndim()));
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[static_cast<std::size_t>(i)] = static_cast<int>(arr.shape(i));
    Tensor t(shape);
    std::copy(arr.data(), arr.data() + arr.size(), t.data.begin());
    return t;
}

py::array_t<double> to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<double> arr(shape);
    std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
    return arr;
}

Dihedral to_dihedral(int g) {
    require(g >= 0 && g < 8, "dihedral: element index must be in [0, 8), got " + std::to_string(g));
    return static_cast<Dihedral>(g);
}

py::dict task_dict(const TaskMetrics& m) {
    py::dict d;
    d["accuracy"] = m.accuracy;
    d["auc"] = m.auc;
    return d;
}

py::dict run_train(const std::filesystem::path& config_path, const std::filesystem::path& data_path,
                   const std::filesystem::path& out_path, int fold_k, int fold_index) {
    std::size_t entries = 0;
    TrainLog log;
    {
        py::gil_scoped_release release;
        const RunConfig cfg = parse_config_file(config_path);
        validate_run_config(cfg);
        Manifest manifest = load_manifest(data_path);

        Rng rng(cfg.seed);
        if (fold_k > 0) manifest = kfold_split(manifest, fold_k, fold_index, rng).first;
        entries = manifest.size();

        ModelParams model = build_model(to_model_config(cfg), rng);
        ImageStore store;
        log = two_stage_train(model, manifest, to_schedule(cfg), rng, store);
        save_weights(model, out_path);
        write_train_log(log, out_path.string() + ".log.csv");
    }

    py::dict out;
    out["entries"] = entries;
    out["updates"] = log.records.size();
    out["final_loss"] = log.records.empty() ? 0.0 : log.records.back().loss;
    return out;
}

std::size_t run_predict(const std::filesystem::path& model_path, const std::filesystem::path& data_path,
                        const std::filesystem::path& out_path, bool tta) {
    const ModelParams model = load_weights(model_path);
    const Manifest manifest = load_manifest(data_path);
    ImageStore store;
    const std::vector<PredictionRecord> records = predict_manifest(model, manifest, store, tta);
    write_predictions(records, out_path);
    return records.size();
}

py::array_t<double> run_predict_image(const std::filesystem::path& model_path,
                                      const std::filesystem::path& image_path, bool tta) {
    const ModelParams model = load_weights(model_path);
    return to_array(tta_predict(model, load_ppm(image_path), tta));
}

std::size_t run_ensemble(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_path) {
    std::vector<std::vector<PredictionRecord>> sets;
    sets.reserve(inputs.size());
    for (const auto& path : inputs) sets.push_back(read_predictions(path));
    const std::vector<PredictionRecord> merged = ensemble_geometric(sets);
    write_predictions(merged, out_path);
    return merged.size();
}

py::dict run_evaluate(const std::filesystem::path& preds_path, const std::filesystem::path& labels_path) {
    const EvalReport report = evaluate(read_predictions(preds_path), load_manifest(labels_path));
    py::dict out;
    out["melanoma"] = task_dict(report.melanoma);
    out["seborrheic_keratosis"] = task_dict(report.sk);
    out["average"] = task_dict(report.average);
    return out;
}

py::array_t<std::uint8_t> run_synth_image(const std::string& label, std::uint64_t seed, int native_size) {
    Rng rng(seed);
    const ImageBuffer img = synth_generate(parse_class_label(label), rng, native_size);
    py::array_t<std::uint8_t> arr({img.height, img.width, 3});
    std::copy(img.pixels.begin(), img.pixels.end(), arr.mutable_data());
    return arr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-scale skin lesion classifier: tensor ops, dihedral transforms, metrics, and the "
              "synth/train/predict/ensemble/evaluate pipeline.";

    // --- tensor ops ---
    m.def(
        "conv2d", [](const DoubleArray& x, const DoubleArray& k, const DoubleArray& b) {
            return to_array(ops::conv2d(to_tensor(x), to_tensor(k), to_tensor(b)));
        },
        py::arg("input"), py::arg("kernel"), py::arg("bias"),
        "3x3 zero-padded convolution: [C_in,H,W] x [C_out,C_in,3,3] + [C_out] -> [C_out,H,W].");
    m.def(
        "maxpool2", [](const DoubleArray& x) { return to_array(ops::maxpool2(to_tensor(x))); }, py::arg("input"),
        "2x2 non-overlapping max pooling; spatial dims must be even.");
    m.def(
        "global_avg_pool", [](const DoubleArray& x) { return to_array(ops::global_avg_pool(to_tensor(x))); },
        py::arg("input"), "Spatial mean per channel: [C,H,W] -> [C].");
    m.def(
        "dense", [](const DoubleArray& x, const DoubleArray& w, const DoubleArray& b) {
            return to_array(ops::dense(to_tensor(x), to_tensor(w), to_tensor(b)));
        },
        py::arg("input"), py::arg("weight"), py::arg("bias"), "weight [M,N] @ input [N] + bias [M].");
    m.def(
        "relu", [](const DoubleArray& x) { return to_array(ops::relu(to_tensor(x))); }, py::arg("input"));
    m.def(
        "softmax", [](const DoubleArray& x) { return to_array(ops::softmax(to_tensor(x))); }, py::arg("logits"),
        "Max-shifted softmax over a vector of logits.");
    m.def(
        "cross_entropy", [](const DoubleArray& p, int c) { return ops::cross_entropy(to_tensor(p), c); },
        py::arg("probs"), py::arg("true_class"), "-ln(probs[true_class]), clamped below at 1e-12.");

    // --- metrics ---
    m.def("roc_auc", &roc_auc, py::arg("scores"), py::arg("labels"),
          "Tie-aware Mann-Whitney ROC-AUC (0.5 credit per tied pair).");
    m.def("accuracy", &accuracy, py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5,
          "Fraction of (score >= threshold) == label.");

    // --- image geometry and the dihedral group ---
    m.def(
        "resize_bilinear", [](const DoubleArray& img, int out_w, int out_h) {
            return to_array(resize_bilinear(to_tensor(img), out_w, out_h));
        },
        py::arg("image"), py::arg("out_w"), py::arg("out_h"),
        "Bilinear resampling of a [C,H,W] image with half-pixel centers.");
    m.def(
        "center_crop", [](const DoubleArray& img, int size) { return to_array(center_crop(to_tensor(img), size)); },
        py::arg("image"), py::arg("size"));
    m.def(
        "apply_dihedral", [](int g, const DoubleArray& img) {
            return to_array(apply_dihedral(to_dihedral(g), to_tensor(img)));
        },
        py::arg("element"), py::arg("image"),
        "Apply square-symmetry element 0..7 (r + 4*flip) to a [C,H,W] image; exact pixel permutation.");
    m.def(
        "dihedral_compose", [](int g2, int g1) {
            return static_cast<int>(dihedral_compose(to_dihedral(g2), to_dihedral(g1)));
        },
        py::arg("second"), py::arg("first"), "Element equivalent to applying `first`, then `second`.");
    m.def(
        "dihedral_inverse", [](int g) { return static_cast<int>(dihedral_inverse(to_dihedral(g))); },
        py::arg("element"));
    m.def(
        "dihedral_name", [](int g) { return std::string(dihedral_name(to_dihedral(g))); }, py::arg("element"));

    // --- pipeline ---
    m.def("synth_dataset", &synth_dataset, py::arg("out_dir"), py::arg("n_train_per_class"),
          py::arg("n_test_per_class"), py::arg("seed"), py::call_guard<py::gil_scoped_release>(),
          "Write a synthetic lesion corpus: images/ plus train.csv and test.csv.");
    m.def("synth_image", &run_synth_image, py::arg("label"), py::arg("seed"), py::arg("native_size") = 256,
          "One synthetic lesion image as an HxWx3 uint8 array.");
    m.def("default_config", [] { return dump_config(RunConfig{}); },
          "Canonical `key = value` text of the default run configuration.");
    m.def("train", &run_train, py::arg("config_path"), py::arg("data_path"), py::arg("out_path"),
          py::arg("fold_k") = 0, py::arg("fold_index") = 0,
          "Two-stage training run; writes the weight file plus <out>.log.csv and returns "
          "{entries, updates, final_loss}. fold_k > 0 holds out one stratified fold.");
    m.def("predict", &run_predict, py::arg("model_path"), py::arg("data_path"), py::arg("out_path"),
          py::arg("tta") = true, py::call_guard<py::gil_scoped_release>(),
          "Write a prediction CSV for every manifest entry; returns the row count.");
    m.def("predict_image", &run_predict_image, py::arg("model_path"), py::arg("image_path"), py::arg("tta") = true,
          "Class probabilities (melanoma, seborrheic_keratosis, nevus) for one PPM image.");
    m.def("ensemble", &run_ensemble, py::arg("inputs"), py::arg("out_path"),
          py::call_guard<py::gil_scoped_release>(),
          "Geometric-mean merge of prediction CSVs onto out_path; returns the row count.");
    m.def("evaluate", &run_evaluate, py::arg("preds_path"), py::arg("labels_path"),
          "Accuracy and ROC-AUC per one-vs-rest task, as nested dicts.");

    m.attr("class_names") = std::vector<std::string>{"melanoma", "seborrheic_keratosis", "nevus"};
    m.attr("dihedral_names") = [] {
        std::vector<std::string> names;
        for (Dihedral g : kDihedralAll) names.emplace_back(dihedral_name(g));
        return names;
    }();
    m.attr("__version__") = "0.1.0";
}
