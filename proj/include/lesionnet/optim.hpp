#pragma once

#include <map>
#include <string>
#include <vector>

#include "lesionnet/tensor.hpp"

namespace lesionnet {

/// Named weight tensor with a freeze flag. Frozen parameters are left
/// bit-identical by the optimizer.
struct Parameter {
    std::string name;
    Tensor value;
    bool trainable = true;
};

/// Ordered collection of parameters with unique names.
class ParamSet {
public:
    Parameter& add(std::string name, Tensor value, bool trainable = true);

    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool has(const std::string& name) const;

    std::vector<Parameter>& items() { return items_; }
    const std::vector<Parameter>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

private:
    std::vector<Parameter> items_;
    std::map<std::string, std::size_t> index_;
};

/// Gradients keyed by parameter name.
using GradMap = std::map<std::string, Tensor>;

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment estimates per parameter plus the shared step counter.
/// Moments start at zero and are created on first use.
class AdamState {
public:
    explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    int step_count() const { return t_; }

    friend void adam_step(ParamSet& params, const GradMap& grads, AdamState& state, double lr);

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };
    AdamConfig cfg_;
    int t_ = 0;
    std::map<std::string, Moments> moments_;
};

/// One bias-corrected Adam update over the trainable parameters. Every
/// trainable parameter must have a gradient of matching shape; frozen
/// parameters are skipped even if a gradient is supplied.
void adam_step(ParamSet& params, const GradMap& grads, AdamState& state, double lr);

}  // namespace lesionnet
