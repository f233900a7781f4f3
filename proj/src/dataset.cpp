#include "lesionnet/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace lesionnet {

namespace {

std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_csv_row(const std::string& line) {
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
    return fields;
}

}  // namespace

const char* class_name(ClassLabel label) {
    switch (label) {
        case ClassLabel::melanoma: return "melanoma";
        case ClassLabel::seborrheic_keratosis: return "seborrheic_keratosis";
        case ClassLabel::nevus: return "nevus";
    }
    fail("label: invalid ClassLabel value");
}

ClassLabel parse_class_label(const std::string& text) {
    const std::string t = lowercase(text);
    if (t == "melanoma") return ClassLabel::melanoma;
    if (t == "seborrheic_keratosis") return ClassLabel::seborrheic_keratosis;
    if (t == "nevus") return ClassLabel::nevus;
    fail("label: unknown class '" + text + "' (expected melanoma, seborrheic_keratosis, or nevus)");
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "manifest: cannot open " + path.string());
    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    Manifest manifest;
    std::set<std::string> seen_ids;
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            require(line == "image_id,path,label",
                    "manifest: line " + std::to_string(line_no) + ": bad header '" + line +
                        "' (expected image_id,path,label)");
            saw_header = true;
            continue;
        }
        const std::vector<std::string> fields = split_csv_row(line);
        require(fields.size() == 3, "manifest: line " + std::to_string(line_no) + ": expected 3 fields, got " +
                                        std::to_string(fields.size()));
        const std::string& id = fields[0];
        require(!id.empty(), "manifest: line " + std::to_string(line_no) + ": empty image_id");
        require(seen_ids.insert(id).second,
                "manifest: line " + std::to_string(line_no) + ": duplicate image_id '" + id + "'");

        ManifestEntry entry;
        entry.image_id = id;
        std::filesystem::path p(fields[1]);
        entry.path = p.is_absolute() ? p : base / p;
        require(std::filesystem::exists(entry.path), "manifest: line " + std::to_string(line_no) +
                                                         ": missing file " + entry.path.string());
        try {
            entry.label = parse_class_label(fields[2]);
        } catch (const Error&) {
            fail("manifest: line " + std::to_string(line_no) + ": unknown label '" + fields[2] + "'");
        }
        manifest.push_back(std::move(entry));
    }
    require(saw_header, "manifest: missing header row in " + path.string());
    return manifest;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "manifest: cannot write " + path.string());
    out << "image_id,path,label\n";
    for (const ManifestEntry& e : manifest) {
        out << e.image_id << "," << e.path.string() << "," << class_name(e.label) << "\n";
    }
    require(static_cast<bool>(out), "manifest: write failed for " + path.string());
}

BatchPlan balanced_batch(Rng& rng, const Manifest& manifest, int batch_size) {
    require(batch_size >= 3, "data: batch_size must be at least 3, got " + std::to_string(batch_size));
    std::array<std::vector<int>, kNumClasses> pools;
    for (int i = 0; i < static_cast<int>(manifest.size()); ++i) {
        pools[static_cast<int>(manifest[i].label)].push_back(i);
    }
    for (int c = 0; c < kNumClasses; ++c) {
        require(!pools[c].empty(),
                std::string("data: class ") + class_name(static_cast<ClassLabel>(c)) + " has no examples");
    }

    BatchPlan plan;
    const int base = batch_size / kNumClasses;
    const int rem = batch_size % kNumClasses;
    for (int c = 0; c < kNumClasses; ++c) plan.counts[c] = base;
    if (rem > 0) {
        std::vector<int> order = {0, 1, 2};
        rng.shuffle(order);
        for (int i = 0; i < rem; ++i) ++plan.counts[order[i]];
    }
    plan.indices.reserve(static_cast<std::size_t>(batch_size));
    for (int c = 0; c < kNumClasses; ++c) {
        const std::vector<int>& pool = pools[c];
        for (int j = 0; j < plan.counts[c]; ++j) {
            plan.indices.push_back(pool[rng.uniform_int(static_cast<int>(pool.size()))]);
        }
    }
    return plan;
}

std::pair<Manifest, Manifest> kfold_split(const Manifest& manifest, int k, int fold_index, Rng& rng) {
    require(k >= 2, "data: kfold requires k >= 2, got " + std::to_string(k));
    require(fold_index >= 0 && fold_index < k,
            "data: fold_index " + std::to_string(fold_index) + " out of range for k=" + std::to_string(k));
    require(static_cast<std::size_t>(k) <= manifest.size(), "data: kfold k exceeds manifest size");

    // fold id per manifest index; assignment is independent of fold_index.
    std::vector<int> fold_of(manifest.size(), 0);
    for (int c = 0; c < kNumClasses; ++c) {
        std::vector<int> pool;
        for (int i = 0; i < static_cast<int>(manifest.size()); ++i) {
            if (static_cast<int>(manifest[i].label) == c) pool.push_back(i);
        }
        rng.shuffle(pool);
        for (int j = 0; j < static_cast<int>(pool.size()); ++j) fold_of[pool[j]] = j % k;
    }

    std::pair<Manifest, Manifest> out;
    for (int i = 0; i < static_cast<int>(manifest.size()); ++i) {
        (fold_of[i] == fold_index ? out.second : out.first).push_back(manifest[i]);
    }
    return out;
}

const ImageBuffer& ImageStore::get(const std::filesystem::path& path) {
    const std::string key = path.string();
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, load_ppm(path)).first;
    return it->second;
}

}  // namespace lesionnet
