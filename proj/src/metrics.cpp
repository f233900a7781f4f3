#include "lesionnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "lesionnet/errors.hpp"

namespace lesionnet {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    require(scores.size() == labels.size(), "metrics: scores and labels must align");
    require(!scores.empty(), "metrics: empty input");
    long p_count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] == 0 || labels[i] == 1, "metrics: labels must be 0 or 1");
        require(std::isfinite(scores[i]), "metrics: non-finite score");
        p_count += labels[i];
    }
    const long n_count = static_cast<long>(labels.size()) - p_count;
    require(p_count > 0 && n_count > 0, "metrics: AUC undefined (need at least one positive and one negative)");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks: a tie group spanning sorted positions [i, j] (1-based ranks
    // i+1..j+1) all receive rank (i+j+2)/2. Rank sums stay dyadic, so the
    // pair-count identity below is exact in doubles.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = static_cast<double>(i + j + 2) / 2.0;
        for (std::size_t t = i; t <= j; ++t) {
            if (labels[order[t]] == 1) rank_sum_pos += midrank;
        }
        i = j + 1;
    }
    const double numerator = rank_sum_pos - static_cast<double>(p_count) * (static_cast<double>(p_count) + 1.0) / 2.0;
    return numerator / (static_cast<double>(p_count) * static_cast<double>(n_count));
}

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
    require(scores.size() == labels.size(), "metrics: scores and labels must align");
    require(!scores.empty(), "metrics: empty input");
    long correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int predicted = scores[i] >= threshold ? 1 : 0;
        if (predicted == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

EvalReport evaluate(const std::vector<PredictionRecord>& predictions, const Manifest& manifest) {
    std::map<std::string, ClassLabel> truth;
    for (const ManifestEntry& e : manifest) truth.emplace(e.image_id, e.label);

    std::set<std::string> pred_ids;
    for (const PredictionRecord& r : predictions) pred_ids.insert(r.image_id);
    std::string missing;
    int shown = 0;
    for (const auto& [id, label] : truth) {
        (void)label;
        if (!pred_ids.count(id) && shown++ < 5) missing += (missing.empty() ? "" : ", ") + id;
    }
    require(missing.empty(), "metrics: manifest ids missing from predictions: " + missing);
    for (const PredictionRecord& r : predictions) {
        require(truth.count(r.image_id) > 0, "metrics: prediction id '" + r.image_id + "' not in manifest");
    }

    std::vector<double> mel_scores, sk_scores;
    std::vector<int> mel_labels, sk_labels;
    for (const PredictionRecord& r : predictions) {
        const ClassLabel label = truth.at(r.image_id);
        mel_scores.push_back(r.melanoma_score);
        mel_labels.push_back(label == ClassLabel::melanoma ? 1 : 0);
        sk_scores.push_back(r.sk_score);
        sk_labels.push_back(label == ClassLabel::seborrheic_keratosis ? 1 : 0);
    }

    EvalReport report;
    report.melanoma = {accuracy(mel_scores, mel_labels), roc_auc(mel_scores, mel_labels)};
    report.sk = {accuracy(sk_scores, sk_labels), roc_auc(sk_scores, sk_labels)};
    report.average = {(report.melanoma.accuracy + report.sk.accuracy) / 2.0,
                      (report.melanoma.auc + report.sk.auc) / 2.0};
    return report;
}

std::string format_report(const EvalReport& report) {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-22s %9s %9s\n", "task", "accuracy", "auc");
    out += buf;
    const std::pair<const char*, const TaskMetrics*> rows[3] = {
        {"melanoma", &report.melanoma}, {"seborrheic_keratosis", &report.sk}, {"average", &report.average}};
    for (const auto& [name, m] : rows) {
        std::snprintf(buf, sizeof(buf), "%-22s %9.4f %9.4f\n", name, m->accuracy, m->auc);
        out += buf;
    }
    return out;
}

std::string format_report_csv(const EvalReport& report) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "melanoma_accuracy,melanoma_auc,sk_accuracy,sk_auc,average_accuracy,average_auc\n"
                  "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  report.melanoma.accuracy, report.melanoma.auc, report.sk.accuracy, report.sk.auc,
                  report.average.accuracy, report.average.auc);
    return buf;
}

}  // namespace lesionnet
