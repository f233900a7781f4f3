#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "lesionnet/infer.hpp"
#include "lesionnet/synth.hpp"
#include "oracles.hpp"

using namespace lesionnet;
using test_support::TempDir;

namespace {

ModelConfig tiny_config(ModelMode mode = ModelMode::multi_scale) {
    ModelConfig cfg;
    cfg.channels = {4, 8, 16};
    cfg.input_side = 16;
    cfg.hidden_units = 8;
    cfg.fine_resize = 32;
    cfg.mode = mode;
    return cfg;
}

ModelParams tiny_model(std::uint64_t seed, ModelMode mode = ModelMode::multi_scale) {
    Rng rng(seed);
    return build_model(tiny_config(mode), rng);
}

ImageBuffer sample_image(std::uint64_t seed, ClassLabel cls = ClassLabel::melanoma) {
    Rng rng(seed);
    return synth_generate(cls, rng, 128);
}

PredictionRecord make_record(const std::string& id, double mel, double sk, double nev) {
    PredictionRecord rec;
    rec.image_id = id;
    rec.probs = {mel, sk, nev};
    rec.melanoma_score = mel;
    rec.sk_score = sk;
    return rec;
}

double max_prob_diff(const PredictionRecord& a, const PredictionRecord& b) {
    double m = 0.0;
    for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(a.probs[static_cast<std::size_t>(c)] - b.probs[static_cast<std::size_t>(c)]));
    return m;
}

}  // namespace

TEST_CASE("tta output is a probability distribution") {
    const ModelParams model = tiny_model(1);
    const ImageBuffer img = sample_image(50);
    for (bool tta : {false, true}) {
        const Tensor p = tta_predict(model, img, tta);
        REQUIRE(p.shape == std::vector<int>{3});
        double sum = 0.0;
        for (double v : p.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("tta averages the dihedral orbit in canonical order") {
    const ModelParams model = tiny_model(2);
    const ImageBuffer img = sample_image(51, ClassLabel::seborrheic_keratosis);

    const PreprocessPlan plan = model_preprocess(model.config);
    const ScalePair pair = preprocess_pair(img, plan);
    Tensor manual = Tensor::zeros({3});
    for (Dihedral g : kDihedralAll) {
        const Tensor p = multiscale_forward(model, apply_dihedral(g, pair.coarse), apply_dihedral(g, pair.fine));
        for (int i = 0; i < 3; ++i) manual.data[static_cast<std::size_t>(i)] += p.data[static_cast<std::size_t>(i)];
    }
    for (double& v : manual.data) v *= 1.0 / 8.0;

    CHECK(tta_predict(model, img, true).data == manual.data);
}

TEST_CASE("tta of a constant image equals the plain forward pass") {
    const ModelParams model = tiny_model(3);
    ImageBuffer img(96, 96);
    for (std::uint8_t& p : img.pixels) p = 120;  // every dihedral view is identical
    const Tensor avg = tta_predict(model, img, true);
    const Tensor single = tta_predict(model, img, false);
    for (int i = 0; i < 3; ++i) {
        // Mean of eight equal terms; only summation rounding separates them.
        CHECK(std::abs(avg.data[static_cast<std::size_t>(i)] - single.data[static_cast<std::size_t>(i)]) <= 1e-14);
    }
}

TEST_CASE("tta predictions are invariant over the input orbit") {
    const ModelParams model = tiny_model(4);
    for (std::uint64_t seed : {60, 61, 62}) {
        const ImageBuffer img = sample_image(seed, static_cast<ClassLabel>(seed % 3));
        const Tensor base = tta_predict(model, img, true);
        for (Dihedral g : kDihedralAll) {
            const Tensor moved = tta_predict(model, apply_dihedral(g, img), true);
            for (int i = 0; i < 3; ++i) {
                CHECK(std::abs(moved.data[static_cast<std::size_t>(i)] - base.data[static_cast<std::size_t>(i)]) <= 1e-12);
            }
        }
    }
}

TEST_CASE("plain predictions are not orbit invariant") {
    // Sanity check that the invariance above is earned by averaging.
    const ModelParams model = tiny_model(5);
    const ImageBuffer img = sample_image(63);
    const Tensor base = tta_predict(model, img, false);
    double max_diff = 0.0;
    for (Dihedral g : kDihedralAll) {
        const Tensor moved = tta_predict(model, apply_dihedral(g, img), false);
        for (int i = 0; i < 3; ++i) {
            max_diff = std::max(max_diff, std::abs(moved.data[static_cast<std::size_t>(i)] - base.data[static_cast<std::size_t>(i)]));
        }
    }
    CHECK(max_diff > 1e-9);
}

TEST_CASE("forward pass counter distinguishes tta from plain inference") {
    const ModelParams model = tiny_model(6);
    const ImageBuffer img = sample_image(64);
    reset_forward_pass_count();
    tta_predict(model, img, false);
    CHECK(forward_pass_count() == 1);
    tta_predict(model, img, true);
    CHECK(forward_pass_count() == 9);
    reset_forward_pass_count();
    CHECK(forward_pass_count() == 0);
}

TEST_CASE("single_scale models run tta on the coarse input alone") {
    const ModelParams model = tiny_model(7, ModelMode::single_scale);
    const ImageBuffer img = sample_image(65);
    reset_forward_pass_count();
    const Tensor p = tta_predict(model, img, true);
    CHECK(forward_pass_count() == 8);
    double sum = 0.0;
    for (double v : p.data) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("to_binary_tasks extracts the two clinical scores") {
    const Tensor probs({3}, {0.5, 0.3, 0.2});
    const auto [mel, sk] = to_binary_tasks(probs);
    CHECK(mel == 0.5);
    CHECK(sk == 0.3);
    CHECK_THROWS_WITH_AS(to_binary_tasks(Tensor::zeros({4})), doctest::Contains("3-class probability vector"), Error);
}

TEST_CASE("predict_manifest sorts records by image_id") {
    TempDir td("pred_sort");
    const ImageBuffer img = sample_image(66);
    const auto file = td.path / "img.ppm";
    save_ppm(img, file);
    Manifest manifest;
    for (const char* id : {"zebra", "apple", "mango"}) {
        ManifestEntry e;
        e.image_id = id;
        e.path = file;
        e.label = ClassLabel::nevus;
        manifest.push_back(e);
    }
    ImageStore store;
    const ModelParams model = tiny_model(8);
    const auto records = predict_manifest(model, manifest, store, false);
    REQUIRE(records.size() == 3);
    CHECK(records[0].image_id == "apple");
    CHECK(records[1].image_id == "mango");
    CHECK(records[2].image_id == "zebra");
    // Same image -> same probabilities, and scores mirror the class probs.
    CHECK(records[0].probs == records[2].probs);
    CHECK(records[0].melanoma_score == records[0].probs[0]);
    CHECK(records[0].sk_score == records[0].probs[1]);
}

TEST_CASE("geometric ensembling of one member is the identity") {
    const std::vector<PredictionRecord> input = {make_record("a", 0.7, 0.2, 0.1), make_record("b", 0.05, 0.05, 0.9)};
    const auto out = ensemble_geometric({input});
    REQUIRE(out.size() == 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].image_id == input[i].image_id);
        CHECK(max_prob_diff(out[i], input[i]) <= 1e-12);
    }
}

TEST_CASE("geometric ensembling matches the closed-form two-member case") {
    const auto out = ensemble_geometric({{make_record("x", 0.8, 0.1, 0.1)}, {make_record("x", 0.2, 0.4, 0.4)}});
    REQUIRE(out.size() == 1);
    // Per class sqrt(p1*p2): 0.4, 0.2, 0.2 -> renormalized (0.5, 0.25, 0.25).
    CHECK(out[0].probs[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out[0].probs[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out[0].probs[2] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out[0].melanoma_score == out[0].probs[0]);
    CHECK(out[0].sk_score == out[0].probs[1]);
}

TEST_CASE("geometric ensembling is order invariant") {
    std::vector<std::vector<PredictionRecord>> inputs = {
        {make_record("a", 0.6, 0.3, 0.1), make_record("b", 0.2, 0.2, 0.6)},
        {make_record("a", 0.1, 0.8, 0.1), make_record("b", 0.3, 0.3, 0.4)},
        {make_record("a", 0.3, 0.3, 0.4), make_record("b", 0.9, 0.05, 0.05)},
    };
    const auto forward = ensemble_geometric(inputs);
    std::reverse(inputs.begin(), inputs.end());
    const auto backward = ensemble_geometric(inputs);
    REQUIRE(forward.size() == backward.size());
    for (std::size_t i = 0; i < forward.size(); ++i) CHECK(max_prob_diff(forward[i], backward[i]) <= 1e-12);

    // Row order within a member is irrelevant: alignment is by image_id.
    std::swap(inputs[0][0], inputs[0][1]);
    const auto shuffled = ensemble_geometric(inputs);
    for (std::size_t i = 0; i < forward.size(); ++i) CHECK(max_prob_diff(shuffled[i], backward[i]) <= 1e-12);
}

TEST_CASE("geometric ensembling clamps zero probabilities") {
    const auto out = ensemble_geometric({{make_record("z", 0.0, 0.5, 0.5)}, {make_record("z", 0.5, 0.25, 0.25)}});
    REQUIRE(out.size() == 1);
    CHECK(out[0].probs[0] > 0.0);  // the floor keeps the geometric mean finite
    CHECK(out[0].probs[0] < 1e-3);
    CHECK(std::isfinite(out[0].probs[0]));
    const double sum = out[0].probs[0] + out[0].probs[1] + out[0].probs[2];
    CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("geometric ensembling rejects mismatched id sets") {
    CHECK_THROWS_WITH_AS(ensemble_geometric({}), doctest::Contains("at least one prediction set"), Error);
    CHECK_THROWS_WITH_AS(
        ensemble_geometric({{make_record("a", 1, 0, 0)}, {make_record("b", 1, 0, 0)}}),
        doctest::Contains("image_id sets differ"), Error);
    try {
        ensemble_geometric({{make_record("a", 1, 0, 0)}, {make_record("b", 1, 0, 0)}});
        FAIL("expected an error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("missing: a") != std::string::npos);
        CHECK(msg.find("unexpected: b") != std::string::npos);
    }
    CHECK_THROWS_WITH_AS(
        ensemble_geometric({{make_record("a", 1, 0, 0), make_record("a", 1, 0, 0)}}),
        doctest::Contains("duplicate image_id 'a' in input 1"), Error);
}

TEST_CASE("prediction csv round trips to within print precision") {
    TempDir td("pred_rt");
    std::vector<PredictionRecord> records = {
        make_record("id_b", 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
        make_record("id_a", 0.123456789, 0.2, 0.676543211),
    };
    const auto file = td.path / "preds.csv";
    write_predictions(records, file);
    const auto back = read_predictions(file);
    REQUIRE(back.size() == 2);
    CHECK(back[0].image_id == "id_a");  // file is sorted regardless of input order
    CHECK(back[1].image_id == "id_b");
    CHECK(std::abs(back[0].probs[0] - 0.123456789) <= 1e-9);
    CHECK(std::abs(back[1].probs[2] - 1.0 / 3.0) <= 1e-9);
    CHECK(std::abs(back[0].melanoma_score - back[0].probs[0]) <= 1e-9);
}

TEST_CASE("prediction csv uses the documented header and 9 digits") {
    TempDir td("pred_fmt");
    const auto file = td.path / "preds.csv";
    write_predictions({make_record("only", 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)}, file);
    std::ifstream in(file, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text ==
          "image_id,melanoma,seborrheic_keratosis,nevus,melanoma_score,sk_score\n"
          "only,0.333333333,0.333333333,0.333333333,0.333333333,0.333333333\n");
}

TEST_CASE("prediction csv accepts CRLF") {
    TempDir td("pred_crlf");
    const auto file = td.path / "preds.csv";
    std::ofstream out(file, std::ios::binary);
    out << "image_id,melanoma,seborrheic_keratosis,nevus,melanoma_score,sk_score\r\n"
        << "a,0.5,0.25,0.25,0.5,0.25\r\n";
    out.close();
    const auto back = read_predictions(file);
    REQUIRE(back.size() == 1);
    CHECK(back[0].probs[1] == 0.25);
}

TEST_CASE("prediction csv parse errors are line numbered") {
    TempDir td("pred_bad");
    const auto file = td.path / "preds.csv";
    const auto write = [&](const std::string& text) {
        std::ofstream out(file, std::ios::binary);
        out << text;
    };
    const std::string header = "image_id,melanoma,seborrheic_keratosis,nevus,melanoma_score,sk_score\n";

    write("image_id,foo\na,0.5,0.25,0.25,0.5,0.25\n");
    CHECK_THROWS_WITH_AS(read_predictions(file), doctest::Contains("bad header"), Error);

    write(header + "a,0.5,0.25,0.25,0.5\n");
    CHECK_THROWS_WITH_AS(read_predictions(file), doctest::Contains("line 2: expected 6 fields, got 5"), Error);

    write(header + "a,zebra,0.25,0.25,0.5,0.25\n");
    CHECK_THROWS_WITH_AS(read_predictions(file), doctest::Contains("line 2: bad number 'zebra'"), Error);

    write(header + "a,1.5,0.25,0.25,0.5,0.25\n");
    CHECK_THROWS_WITH_AS(read_predictions(file), doctest::Contains("outside [0,1]"), Error);

    write(header + "a,0.5,0.25,0.25,0.5,0.25\na,0.5,0.25,0.25,0.5,0.25\n");
    CHECK_THROWS_WITH_AS(read_predictions(file), doctest::Contains("line 3: duplicate image_id 'a'"), Error);

    write(header + "a,0.5,0.25,0.15,0.5,0.25\n");
    CHECK_THROWS_WITH_AS(read_predictions(file), doctest::Contains("probabilities sum to"), Error);

    write(header + ",0.5,0.25,0.25,0.5,0.25\n");
    CHECK_THROWS_WITH_AS(read_predictions(file), doctest::Contains("empty image_id"), Error);

    write("");
    CHECK_THROWS_WITH_AS(read_predictions(file), doctest::Contains("missing header"), Error);

    CHECK_THROWS_WITH_AS(read_predictions(td.path / "absent.csv"), doctest::Contains("cannot open"), Error);
}
