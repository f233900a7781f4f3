#include "lesionnet/optim.hpp"

#include <cmath>

namespace lesionnet {

Parameter& ParamSet::add(std::string name, Tensor value, bool trainable) {
    require(index_.find(name) == index_.end(), "params: duplicate parameter name '" + name + "'");
    index_[name] = items_.size();
    items_.push_back(Parameter{std::move(name), std::move(value), trainable});
    return items_.back();
}

Parameter& ParamSet::get(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "params: unknown parameter '" + name + "'");
    return items_[it->second];
}

const Parameter& ParamSet::get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "params: unknown parameter '" + name + "'");
    return items_[it->second];
}

bool ParamSet::has(const std::string& name) const { return index_.find(name) != index_.end(); }

void adam_step(ParamSet& params, const GradMap& grads, AdamState& state, double lr) {
    require(lr > 0.0, "adam: learning rate must be positive");
    const AdamConfig& cfg = state.cfg_;
    state.t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, state.t_);
    const double bc2 = 1.0 - std::pow(cfg.beta2, state.t_);

    for (Parameter& p : params.items()) {
        if (!p.trainable) {
            continue;
        }
        auto git = grads.find(p.name);
        require(git != grads.end(), "adam: missing gradient for trainable parameter '" + p.name + "'");
        const Tensor& g = git->second;
        require(g.same_shape(p.value), "adam: gradient shape " + shape_str(g.shape) +
                                           " does not match parameter '" + p.name + "' " +
                                           shape_str(p.value.shape));

        auto& mom = state.moments_[p.name];
        if (mom.m.data.empty()) {
            mom.m = Tensor::zeros(p.value.shape);
            mom.v = Tensor::zeros(p.value.shape);
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double gv = g.data[i];
            mom.m.data[i] = cfg.beta1 * mom.m.data[i] + (1.0 - cfg.beta1) * gv;
            mom.v.data[i] = cfg.beta2 * mom.v.data[i] + (1.0 - cfg.beta2) * gv * gv;
            const double m_hat = mom.m.data[i] / bc1;
            const double v_hat = mom.v.data[i] / bc2;
            p.value.data[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

}  // namespace lesionnet
