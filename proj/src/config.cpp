#include "lesionnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "lesionnet/errors.hpp"

namespace lesionnet {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void bad_line(int line_no, const std::string& msg) {
    fail("config: line " + std::to_string(line_no) + ": " + msg);
}

long long parse_int(const std::string& v, int line_no, const std::string& key) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        bad_line(line_no, "bad integer '" + v + "' for " + key);
    }
    if (used != v.size()) bad_line(line_no, "bad integer '" + v + "' for " + key);
    return out;
}

double parse_double(const std::string& v, int line_no, const std::string& key) {
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        bad_line(line_no, "bad number '" + v + "' for " + key);
    }
    if (used != v.size()) bad_line(line_no, "bad number '" + v + "' for " + key);
    return out;
}

bool parse_bool(const std::string& v, int line_no, const std::string& key) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad_line(line_no, "bad boolean '" + v + "' for " + key + " (expected true or false)");
}

std::vector<int> parse_int_list(const std::string& v, int line_no, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<int>(parse_int(trim(item), line_no, key)));
    }
    if (out.empty()) bad_line(line_no, "empty list for " + key);
    return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) bad_line(line_no, "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) bad_line(line_no, "empty key");
        if (value.empty()) bad_line(line_no, "empty value for " + key);
        if (!seen.insert(key).second) bad_line(line_no, "duplicate key '" + key + "'");

        if (key == "seed") {
            const long long v = parse_int(value, line_no, key);
            if (v < 0) bad_line(line_no, "seed must be non-negative");
            cfg.seed = static_cast<std::uint64_t>(v);
        } else if (key == "coarse_size") {
            cfg.coarse_size = static_cast<int>(parse_int(value, line_no, key));
        } else if (key == "fine_resize") {
            cfg.fine_resize = static_cast<int>(parse_int(value, line_no, key));
        } else if (key == "crop_size") {
            cfg.crop_size = static_cast<int>(parse_int(value, line_no, key));
        } else if (key == "hidden_units") {
            cfg.hidden_units = static_cast<int>(parse_int(value, line_no, key));
        } else if (key == "blocks") {
            cfg.blocks = parse_int_list(value, line_no, key);
        } else if (key == "batch_size") {
            cfg.batch_size = static_cast<int>(parse_int(value, line_no, key));
        } else if (key == "stage1_updates") {
            cfg.stage1_updates = static_cast<int>(parse_int(value, line_no, key));
        } else if (key == "stage1_lr") {
            cfg.stage1_lr = parse_double(value, line_no, key);
        } else if (key == "stage2_updates") {
            cfg.stage2_updates = static_cast<int>(parse_int(value, line_no, key));
        } else if (key == "stage2_lr") {
            cfg.stage2_lr = parse_double(value, line_no, key);
        } else if (key == "unfreeze_blocks") {
            cfg.unfreeze_blocks = static_cast<int>(parse_int(value, line_no, key));
        } else if (key == "single_scale") {
            cfg.single_scale = parse_bool(value, line_no, key);
        } else if (key == "augment") {
            cfg.augment = parse_bool(value, line_no, key);
        } else if (key == "tta") {
            cfg.tta = parse_bool(value, line_no, key);
        } else {
            bad_line(line_no, "unknown key '" + key + "'");
        }
    }
    return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void validate_run_config(const RunConfig& cfg) {
    require(cfg.coarse_size > 0 && cfg.fine_resize > 0 && cfg.crop_size > 0 && cfg.hidden_units > 0,
            "config: sizes must be positive");
    require(cfg.crop_size <= cfg.fine_resize, "config: crop_size " + std::to_string(cfg.crop_size) +
                                                  " exceeds fine_resize " + std::to_string(cfg.fine_resize));
    require(static_cast<int>(cfg.blocks.size()) >= 3, "config: need at least 3 blocks");
    for (int b : cfg.blocks) require(b > 0, "config: block widths must be positive");
    require(cfg.unfreeze_blocks >= 1 && cfg.unfreeze_blocks < static_cast<int>(cfg.blocks.size()),
            "config: unfreeze_blocks must be in [1, blocks)");
    require(cfg.batch_size >= 3, "config: batch_size must be at least 3");
    require(cfg.stage1_updates >= 0 && cfg.stage2_updates >= 0, "config: update counts must be non-negative");
    require(cfg.stage1_lr > 0.0 && cfg.stage2_lr > 0.0, "config: learning rates must be positive");
    if (!cfg.single_scale) {
        require(cfg.crop_size == cfg.coarse_size,
                "config: multi-scale models need crop_size == coarse_size (one shared backbone input side), got " +
                    std::to_string(cfg.crop_size) + " vs " + std::to_string(cfg.coarse_size));
    }
    // The side actually fed to the backbone must survive the pool halvings.
    validate_model_config(to_model_config(cfg));
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "seed = " << cfg.seed << "\n";
    out << "coarse_size = " << cfg.coarse_size << "\n";
    out << "fine_resize = " << cfg.fine_resize << "\n";
    out << "crop_size = " << cfg.crop_size << "\n";
    out << "hidden_units = " << cfg.hidden_units << "\n";
    out << "blocks = ";
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i) out << (i ? "," : "") << cfg.blocks[i];
    out << "\n";
    out << "batch_size = " << cfg.batch_size << "\n";
    out << "stage1_updates = " << cfg.stage1_updates << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", cfg.stage1_lr);
    out << "stage1_lr = " << buf << "\n";
    out << "stage2_updates = " << cfg.stage2_updates << "\n";
    std::snprintf(buf, sizeof(buf), "%.9g", cfg.stage2_lr);
    out << "stage2_lr = " << buf << "\n";
    out << "unfreeze_blocks = " << cfg.unfreeze_blocks << "\n";
    out << "single_scale = " << (cfg.single_scale ? "true" : "false") << "\n";
    out << "augment = " << (cfg.augment ? "true" : "false") << "\n";
    out << "tta = " << (cfg.tta ? "true" : "false") << "\n";
    return out.str();
}

ModelConfig to_model_config(const RunConfig& cfg) {
    ModelConfig mc;
    mc.channels = cfg.blocks;
    mc.hidden_units = cfg.hidden_units;
    if (cfg.single_scale) {
        mc.mode = ModelMode::single_scale;
        mc.input_side = cfg.coarse_size;
        mc.fine_resize = cfg.fine_resize;
    } else {
        mc.mode = ModelMode::multi_scale;
        mc.input_side = cfg.crop_size;  // == coarse_size, enforced by validation
        mc.fine_resize = cfg.fine_resize;
    }
    return mc;
}

TwoStageSchedule to_schedule(const RunConfig& cfg) {
    TwoStageSchedule s;
    s.stage1 = {FreezeStage::stage1, cfg.stage1_lr, cfg.stage1_updates, cfg.batch_size, cfg.augment,
                cfg.unfreeze_blocks};
    s.stage2 = {FreezeStage::stage2, cfg.stage2_lr, cfg.stage2_updates, cfg.batch_size, cfg.augment,
                cfg.unfreeze_blocks};
    return s;
}

}  // namespace lesionnet
