#include "lesionnet/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lesionnet/errors.hpp"
#include "lesionnet/ops.hpp"

namespace lesionnet {

void validate_model_config(const ModelConfig& cfg) {
    require(cfg.num_blocks() >= 3,
            "model: need at least 3 conv blocks, got " + std::to_string(cfg.num_blocks()));
    for (int c : cfg.channels) require(c > 0, "model: block widths must be positive");
    require(cfg.input_side > 0, "model: input_side must be positive");
    require(cfg.hidden_units > 0, "model: hidden_units must be positive");
    int side = cfg.input_side;
    for (int b = 0; b < cfg.num_blocks(); ++b) {
        require(side % 2 == 0, "model: input_side " + std::to_string(cfg.input_side) + " is not divisible by 2^" +
                                   std::to_string(cfg.num_blocks()) + " (blocks)");
        side /= 2;
    }
    if (cfg.mode == ModelMode::multi_scale) {
        require(cfg.fine_resize >= cfg.input_side, "model: fine_resize must be at least input_side");
    }
}

PreprocessPlan model_preprocess(const ModelConfig& cfg) {
    PreprocessPlan plan;
    plan.coarse_size = cfg.input_side;
    plan.fine_resize = cfg.fine_resize;
    plan.crop_size = cfg.input_side;
    return plan;
}

namespace {

void glorot_fill(Tensor& t, int fan_in, int fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-a, a);
}

}  // namespace

ModelParams build_model(const ModelConfig& cfg, Rng& rng) {
    validate_model_config(cfg);
    ModelParams model;
    model.config = cfg;
    int in_ch = 3;
    for (int b = 0; b < cfg.num_blocks(); ++b) {
        const int out_ch = cfg.channels[b];
        const std::string prefix = "block" + std::to_string(b + 1);
        Tensor kernel = Tensor::zeros({out_ch, in_ch, 3, 3});
        glorot_fill(kernel, in_ch * 9, out_ch * 9, rng);
        model.params.add(prefix + ".kernel", std::move(kernel));
        model.params.add(prefix + ".bias", Tensor::zeros({out_ch}));
        in_ch = out_ch;
    }
    const int head_in = cfg.head_input_width();
    Tensor head_w = Tensor::zeros({cfg.hidden_units, head_in});
    glorot_fill(head_w, head_in, cfg.hidden_units, rng);
    model.params.add("head.weight", std::move(head_w));
    model.params.add("head.bias", Tensor::zeros({cfg.hidden_units}));
    Tensor out_w = Tensor::zeros({3, cfg.hidden_units});
    glorot_fill(out_w, cfg.hidden_units, 3, rng);
    model.params.add("out.weight", std::move(out_w));
    model.params.add("out.bias", Tensor::zeros({3}));
    return model;
}

Tensor backbone_forward(const ModelParams& model, const Tensor& img) {
    const ModelConfig& cfg = model.config;
    require(img.ndim() == 3 && img.dim(0) == 3 && img.dim(1) == cfg.input_side && img.dim(2) == cfg.input_side,
            "model: backbone expects a 3x" + std::to_string(cfg.input_side) + "x" + std::to_string(cfg.input_side) +
                " input, got " + shape_str(img.shape));
    Tensor x = img;
    for (int b = 0; b < cfg.num_blocks(); ++b) {
        const std::string prefix = "block" + std::to_string(b + 1);
        x = ops::conv2d(x, model.params.get(prefix + ".kernel").value, model.params.get(prefix + ".bias").value);
        x = ops::relu(x);
        x = ops::maxpool2(x);
    }
    return ops::global_avg_pool(x);
}

namespace {

Tensor head_probs(const ModelParams& model, const Tensor& features) {
    Tensor h = ops::dense(features, model.params.get("head.weight").value, model.params.get("head.bias").value);
    h = ops::relu(h);
    Tensor logits = ops::dense(h, model.params.get("out.weight").value, model.params.get("out.bias").value);
    return ops::softmax(logits);
}

}  // namespace

Tensor multiscale_forward(const ModelParams& model, const Tensor& coarse, const Tensor& fine) {
    require(model.config.mode == ModelMode::multi_scale,
            "model: mode mismatch: multiscale_forward on a single_scale model");
    const Tensor fc = backbone_forward(model, coarse);
    const Tensor ff = backbone_forward(model, fine);
    Tensor cat = Tensor::zeros({static_cast<int>(fc.size() + ff.size())});
    std::copy(fc.data.begin(), fc.data.end(), cat.data.begin());
    std::copy(ff.data.begin(), ff.data.end(), cat.data.begin() + static_cast<std::ptrdiff_t>(fc.size()));
    return head_probs(model, cat);
}

Tensor single_scale_forward(const ModelParams& model, const Tensor& img) {
    require(model.config.mode == ModelMode::single_scale,
            "model: mode mismatch: single_scale_forward on a multi_scale model");
    return head_probs(model, backbone_forward(model, img));
}

NodeId ModelNodes::at(const std::string& name) const {
    auto it = param.find(name);
    require(it != param.end(), "model: no bound parameter named '" + name + "'");
    return it->second;
}

ModelNodes bind_model(Graph& g, const ModelParams& model) {
    ModelNodes nodes;
    for (const Parameter& p : model.params.items()) {
        nodes.param[p.name] = g.parameter(p.value, p.trainable);
    }
    return nodes;
}

NodeId backbone_features(Graph& g, const ModelNodes& nodes, const ModelConfig& cfg, NodeId input) {
    NodeId x = input;
    for (int b = 0; b < cfg.num_blocks(); ++b) {
        const std::string prefix = "block" + std::to_string(b + 1);
        x = g.conv2d(x, nodes.at(prefix + ".kernel"), nodes.at(prefix + ".bias"));
        x = g.relu(x);
        x = g.maxpool2(x);
    }
    return g.global_avg_pool(x);
}

namespace {

NodeId head_probs_graph(Graph& g, const ModelNodes& nodes, NodeId features) {
    NodeId h = g.dense(features, nodes.at("head.weight"), nodes.at("head.bias"));
    h = g.relu(h);
    NodeId logits = g.dense(h, nodes.at("out.weight"), nodes.at("out.bias"));
    return g.softmax(logits);
}

}  // namespace

NodeId model_probs(Graph& g, const ModelNodes& nodes, const ModelParams& model, NodeId coarse, NodeId fine) {
    require(model.config.mode == ModelMode::multi_scale, "model: mode mismatch: model_probs on a single_scale model");
    const NodeId fc = backbone_features(g, nodes, model.config, coarse);
    const NodeId ff = backbone_features(g, nodes, model.config, fine);
    return head_probs_graph(g, nodes, g.concat(fc, ff));
}

NodeId model_probs_single(Graph& g, const ModelNodes& nodes, const ModelParams& model, NodeId input) {
    require(model.config.mode == ModelMode::single_scale,
            "model: mode mismatch: model_probs_single on a multi_scale model");
    return head_probs_graph(g, nodes, backbone_features(g, nodes, model.config, input));
}

void set_freeze(ModelParams& model, FreezeStage stage, int unfreeze_blocks) {
    const int n = model.config.num_blocks();
    require(unfreeze_blocks >= 1 && unfreeze_blocks < n,
            "model: unfreeze_blocks must be in [1, blocks), got " + std::to_string(unfreeze_blocks));
    const int first_unfrozen = (stage == FreezeStage::stage2) ? n - unfreeze_blocks : n;
    for (Parameter& p : model.params.items()) {
        if (p.name.rfind("block", 0) == 0) {
            const int idx = std::stoi(p.name.substr(5, p.name.find('.') - 5)) - 1;
            p.trainable = idx >= first_unfrozen;
        } else {
            p.trainable = true;  // head.* and out.*
        }
    }
}

// --- Serialization ---

namespace {

constexpr char kMagic[4] = {'M', 'S', 'C', 'W'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32_update(std::uint32_t crc, const std::uint8_t* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc;
}

std::uint32_t crc32_final(std::uint32_t crc) { return crc ^ 0xFFFFFFFFu; }
constexpr std::uint32_t kCrcInit = 0xFFFFFFFFu;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

struct ByteReader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        require(bytes.size() - pos >= n, "weights: truncated file (need " + std::to_string(n) + " more bytes at offset " +
                                             std::to_string(pos) + ")");
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(bits);
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return s;
    }
};

}  // namespace

void save_weights(const ModelParams& model, const std::filesystem::path& path) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(model.params.size()));
    std::uint32_t crc = kCrcInit;
    for (const Parameter& p : model.params.items()) {
        require(p.name.size() <= 0xFFFF, "weights: parameter name too long");
        put_u16(out, static_cast<std::uint16_t>(p.name.size()));
        out.insert(out.end(), p.name.begin(), p.name.end());
        out.push_back(static_cast<std::uint8_t>(p.value.ndim()));
        for (int d : p.value.shape) put_u32(out, static_cast<std::uint32_t>(d));
        const std::size_t payload_start = out.size();
        for (double v : p.value.data) put_f64(out, v);
        crc = crc32_update(crc, out.data() + payload_start, out.size() - payload_start);
    }
    put_u32(out, crc32_final(crc));
    out.push_back(static_cast<std::uint8_t>(model.config.mode));
    out.push_back(static_cast<std::uint8_t>(model.config.num_blocks()));
    for (int c : model.config.channels) put_u32(out, static_cast<std::uint32_t>(c));
    put_u32(out, static_cast<std::uint32_t>(model.config.input_side));
    put_u32(out, static_cast<std::uint32_t>(model.config.hidden_units));
    put_u32(out, static_cast<std::uint32_t>(model.config.mode == ModelMode::multi_scale ? model.config.fine_resize : 0));

    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), "weights: cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    require(static_cast<bool>(f), "weights: write failed for " + path.string());
}

ModelParams load_weights(const std::filesystem::path& path, std::optional<ModelMode> expected_mode) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), "weights: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    ByteReader r{bytes};

    const std::string magic = r.str(4);
    require(std::memcmp(magic.data(), kMagic, 4) == 0, "weights: bad magic: not a weight file");
    const std::uint32_t version = r.u32();
    require(version == kVersion,
            "weights: unsupported version " + std::to_string(version) + " (expected " + std::to_string(kVersion) + ")");
    const std::uint32_t count = r.u32();

    std::vector<Parameter> entries;
    std::uint32_t crc = kCrcInit;
    for (std::uint32_t e = 0; e < count; ++e) {
        Parameter p;
        p.name = r.str(r.u16());
        const int ndim = r.u8();
        std::vector<int> shape(static_cast<std::size_t>(ndim));
        for (int& d : shape) {
            const std::uint32_t v = r.u32();
            require(v > 0 && v <= 0x7FFFFFFFu, "weights: bad dimension in entry '" + p.name + "'");
            d = static_cast<int>(v);
        }
        const std::size_t numel = shape.empty() ? 1 : shape_numel(shape);
        r.need(numel * 8);
        crc = crc32_update(crc, bytes.data() + r.pos, numel * 8);
        Tensor t = Tensor::zeros(shape);
        for (double& v : t.data) v = r.f64();
        p.value = std::move(t);
        entries.push_back(std::move(p));
    }
    const std::uint32_t stored_crc = r.u32();
    const std::uint32_t computed_crc = crc32_final(crc);
    require(stored_crc == computed_crc, "weights: CRC mismatch (stored " + std::to_string(stored_crc) + ", computed " +
                                            std::to_string(computed_crc) + ")");

    const std::uint8_t mode_byte = r.u8();
    require(mode_byte <= 1, "weights: bad mode byte " + std::to_string(mode_byte));
    ModelConfig cfg;
    cfg.mode = static_cast<ModelMode>(mode_byte);
    const int nblocks = r.u8();
    cfg.channels.assign(static_cast<std::size_t>(nblocks), 0);
    for (int& c : cfg.channels) c = static_cast<int>(r.u32());
    cfg.input_side = static_cast<int>(r.u32());
    cfg.hidden_units = static_cast<int>(r.u32());
    cfg.fine_resize = static_cast<int>(r.u32());
    if (cfg.mode == ModelMode::single_scale) cfg.fine_resize = 2 * cfg.input_side;  // no fine branch; keep validation happy
    require(r.pos == bytes.size(), "weights: trailing bytes after config block");
    validate_model_config(cfg);

    if (expected_mode && cfg.mode != *expected_mode) {
        fail(std::string("weights: mode mismatch: file is ") +
             (cfg.mode == ModelMode::multi_scale ? "multi_scale" : "single_scale") + " but " +
             (*expected_mode == ModelMode::multi_scale ? "multi_scale" : "single_scale") + " was requested");
    }

    // Rebuild via the schema so names, order, and shapes are all enforced.
    Rng dummy(0);
    ModelParams model = build_model(cfg, dummy);
    require(entries.size() == model.params.size(), "weights: schema mismatch: entry count " +
                                                       std::to_string(entries.size()) + " (expected " +
                                                       std::to_string(model.params.size()) + ")");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Parameter& dst = model.params.items()[i];
        Parameter& src = entries[i];
        require(src.name == dst.name, "weights: schema mismatch: entry '" + src.name + "' (expected '" + dst.name + "')");
        require(src.value.shape == dst.value.shape,
                "weights: schema mismatch: shape " + shape_str(src.value.shape) + " for '" + src.name + "' (expected " +
                    shape_str(dst.value.shape) + ")");
        dst.value = std::move(src.value);
        dst.trainable = true;
    }
    return model;
}

}  // namespace lesionnet
