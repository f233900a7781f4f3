#include "lesionnet/infer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "lesionnet/errors.hpp"

namespace lesionnet {

namespace {

std::atomic<std::int64_t> g_forward_passes{0};

Tensor forward_once(const ModelParams& model, const NormalizedImage& coarse, const NormalizedImage& fine) {
    ++g_forward_passes;
    if (model.config.mode == ModelMode::multi_scale) return multiscale_forward(model, coarse, fine);
    return single_scale_forward(model, coarse);
}

}  // namespace

std::int64_t forward_pass_count() { return g_forward_passes.load(); }
void reset_forward_pass_count() { g_forward_passes.store(0); }

Tensor tta_predict(const ModelParams& model, const ImageBuffer& img, bool tta) {
    const PreprocessPlan plan = model_preprocess(model.config);
    NormalizedImage coarse, fine;
    if (model.config.mode == ModelMode::multi_scale) {
        ScalePair pair = preprocess_pair(img, plan);
        coarse = std::move(pair.coarse);
        fine = std::move(pair.fine);
    } else {
        coarse = resize_bilinear(rescale_to_unit(img), plan.coarse_size, plan.coarse_size);
    }
    if (!tta) return forward_once(model, coarse, fine);

    Tensor sum = Tensor::zeros({3});
    for (Dihedral g : kDihedralAll) {
        const Tensor p = (model.config.mode == ModelMode::multi_scale)
                             ? forward_once(model, apply_dihedral(g, coarse), apply_dihedral(g, fine))
                             : forward_once(model, apply_dihedral(g, coarse), fine);
        for (int i = 0; i < 3; ++i) sum.data[i] += p.data[i];
    }
    for (double& v : sum.data) v *= 1.0 / 8.0;
    return sum;
}

std::pair<double, double> to_binary_tasks(const Tensor& probs) {
    require(probs.ndim() == 1 && probs.dim(0) == 3, "infer: expected a 3-class probability vector");
    return {probs.data[static_cast<int>(ClassLabel::melanoma)],
            probs.data[static_cast<int>(ClassLabel::seborrheic_keratosis)]};
}

std::vector<PredictionRecord> predict_manifest(const ModelParams& model, const Manifest& manifest, ImageStore& store,
                                               bool tta) {
    std::vector<PredictionRecord> records;
    records.reserve(manifest.size());
    for (const ManifestEntry& entry : manifest) {
        const Tensor probs = tta_predict(model, store.get(entry.path), tta);
        PredictionRecord rec;
        rec.image_id = entry.image_id;
        for (int i = 0; i < 3; ++i) rec.probs[static_cast<std::size_t>(i)] = probs.data[i];
        std::tie(rec.melanoma_score, rec.sk_score) = to_binary_tasks(probs);
        records.push_back(std::move(rec));
    }
    std::sort(records.begin(), records.end(),
              [](const PredictionRecord& a, const PredictionRecord& b) { return a.image_id < b.image_id; });
    return records;
}

namespace {

constexpr double kEnsembleFloor = 1e-7;

std::vector<PredictionRecord> sorted_by_id(std::vector<PredictionRecord> v) {
    std::sort(v.begin(), v.end(),
              [](const PredictionRecord& a, const PredictionRecord& b) { return a.image_id < b.image_id; });
    return v;
}

std::string id_diff(const std::set<std::string>& want, const std::set<std::string>& got) {
    std::string missing, extra;
    int shown = 0;
    for (const std::string& id : want) {
        if (!got.count(id) && shown++ < 5) missing += (missing.empty() ? "" : ", ") + id;
    }
    shown = 0;
    for (const std::string& id : got) {
        if (!want.count(id) && shown++ < 5) extra += (extra.empty() ? "" : ", ") + id;
    }
    std::string out;
    if (!missing.empty()) out += " missing: " + missing;
    if (!extra.empty()) out += " unexpected: " + extra;
    return out;
}

}  // namespace

std::vector<PredictionRecord> ensemble_geometric(const std::vector<std::vector<PredictionRecord>>& inputs) {
    require(!inputs.empty(), "ensemble: need at least one prediction set");
    const std::size_t k = inputs.size();
    std::vector<std::vector<PredictionRecord>> aligned;
    aligned.reserve(k);
    for (const auto& in : inputs) aligned.push_back(sorted_by_id(in));

    std::set<std::string> ref_ids;
    for (const PredictionRecord& r : aligned[0]) {
        require(ref_ids.insert(r.image_id).second, "ensemble: duplicate image_id '" + r.image_id + "' in input 1");
    }
    for (std::size_t m = 1; m < k; ++m) {
        std::set<std::string> ids;
        for (const PredictionRecord& r : aligned[m]) ids.insert(r.image_id);
        require(ids == ref_ids, "ensemble: image_id sets differ between input 1 and input " + std::to_string(m + 1) +
                                    ":" + id_diff(ref_ids, ids));
    }

    std::vector<PredictionRecord> out;
    out.reserve(aligned[0].size());
    for (std::size_t i = 0; i < aligned[0].size(); ++i) {
        PredictionRecord rec;
        rec.image_id = aligned[0][i].image_id;
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
            double log_sum = 0.0;
            for (std::size_t m = 0; m < k; ++m) {
                const double p = std::clamp(aligned[m][i].probs[static_cast<std::size_t>(c)], kEnsembleFloor, 1.0);
                log_sum += std::log(p);
            }
            rec.probs[static_cast<std::size_t>(c)] = std::exp(log_sum / static_cast<double>(k));
            sum += rec.probs[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < 3; ++c) rec.probs[static_cast<std::size_t>(c)] /= sum;
        rec.melanoma_score = rec.probs[static_cast<std::size_t>(ClassLabel::melanoma)];
        rec.sk_score = rec.probs[static_cast<std::size_t>(ClassLabel::seborrheic_keratosis)];
        out.push_back(std::move(rec));
    }
    return out;
}

namespace {

constexpr const char* kPredHeader = "image_id,melanoma,seborrheic_keratosis,nevus,melanoma_score,sk_score";

double parse_prob(const std::string& text, int line_no) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        fail("predictions: line " + std::to_string(line_no) + ": bad number '" + text + "'");
    }
    require(used == text.size(), "predictions: line " + std::to_string(line_no) + ": bad number '" + text + "'");
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0,
            "predictions: line " + std::to_string(line_no) + ": value " + text + " outside [0,1]");
    return v;
}

}  // namespace

void write_predictions(const std::vector<PredictionRecord>& records, const std::filesystem::path& path) {
    std::vector<PredictionRecord> rows = sorted_by_id(records);
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "predictions: cannot write " + path.string());
    out << kPredHeader << "\n";
    char buf[256];
    for (const PredictionRecord& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.image_id.c_str(), r.probs[0], r.probs[1],
                      r.probs[2], r.melanoma_score, r.sk_score);
        out << buf;
    }
    require(static_cast<bool>(out), "predictions: write failed for " + path.string());
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "predictions: cannot open " + path.string());
    std::vector<PredictionRecord> records;
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            require(line == kPredHeader, "predictions: line " + std::to_string(line_no) + ": bad header (expected " +
                                             std::string(kPredHeader) + ")");
            saw_header = true;
            continue;
        }
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        fields.push_back(cur);
        require(fields.size() == 6, "predictions: line " + std::to_string(line_no) + ": expected 6 fields, got " +
                                        std::to_string(fields.size()));
        PredictionRecord rec;
        rec.image_id = fields[0];
        require(!rec.image_id.empty(), "predictions: line " + std::to_string(line_no) + ": empty image_id");
        require(seen.insert(rec.image_id).second,
                "predictions: line " + std::to_string(line_no) + ": duplicate image_id '" + rec.image_id + "'");
        for (int c = 0; c < 3; ++c) rec.probs[static_cast<std::size_t>(c)] = parse_prob(fields[static_cast<std::size_t>(c) + 1], line_no);
        rec.melanoma_score = parse_prob(fields[4], line_no);
        rec.sk_score = parse_prob(fields[5], line_no);
        const double sum = rec.probs[0] + rec.probs[1] + rec.probs[2];
        require(std::abs(sum - 1.0) <= 1e-6,
                "predictions: line " + std::to_string(line_no) + ": probabilities sum to " + std::to_string(sum));
        records.push_back(std::move(rec));
    }
    require(saw_header, "predictions: missing header row in " + path.string());
    return records;
}

}  // namespace lesionnet
