#include "lesionnet/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "lesionnet/ops.hpp"

namespace lesionnet {

Graph::Node& Graph::at(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }

const Tensor& Graph::in_value(const Node& n, int slot) const {
    return nodes_[static_cast<std::size_t>(n.in[slot])].value;
}

Graph::NodeId Graph::push(Node n) {
    require(!backward_done_, "graph: cannot extend a graph after backward");
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Tensor& Graph::value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }

double Graph::scalar_value(NodeId id) const { return value(id).item(); }

bool Graph::requires_grad(NodeId id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
}

const Tensor& Graph::grad(NodeId id) const {
    require(backward_done_, "graph: gradients are only available after backward");
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    require(n.requires_grad, "graph: node does not require gradients");
    return n.grad;
}

Tensor& Graph::ensure_grad(NodeId id) {
    Node& n = at(id);
    if (n.grad.data.empty() || !n.grad.same_shape(n.value)) {
        n.grad = Tensor::zeros(n.value.shape);
    }
    return n.grad;
}

Graph::NodeId Graph::input(Tensor value) {
    Node n;
    n.op = Op::kInput;
    n.value = std::move(value);
    return push(std::move(n));
}

Graph::NodeId Graph::parameter(Tensor value, bool trainable) {
    Node n;
    n.op = Op::kParameter;
    n.value = std::move(value);
    n.requires_grad = trainable;
    return push(std::move(n));
}

Graph::NodeId Graph::conv2d(NodeId input, NodeId kernel, NodeId bias) {
    Node n;
    n.op = Op::kConv2d;
    n.in[0] = input;
    n.in[1] = kernel;
    n.in[2] = bias;
    n.requires_grad = requires_grad(input) || requires_grad(kernel) || requires_grad(bias);
    n.value = ops::conv2d(value(input), value(kernel), value(bias));
    return push(std::move(n));
}

Graph::NodeId Graph::maxpool2(NodeId input) {
    Node n;
    n.op = Op::kMaxpool2;
    n.in[0] = input;
    n.requires_grad = requires_grad(input);
    n.value = ops::maxpool2(value(input), n.requires_grad ? &n.aux_idx : nullptr);
    return push(std::move(n));
}

Graph::NodeId Graph::global_avg_pool(NodeId input) {
    Node n;
    n.op = Op::kGlobalAvgPool;
    n.in[0] = input;
    n.requires_grad = requires_grad(input);
    n.value = ops::global_avg_pool(value(input));
    return push(std::move(n));
}

Graph::NodeId Graph::dense(NodeId input, NodeId weight, NodeId bias) {
    Node n;
    n.op = Op::kDense;
    n.in[0] = input;
    n.in[1] = weight;
    n.in[2] = bias;
    n.requires_grad = requires_grad(input) || requires_grad(weight) || requires_grad(bias);
    n.value = ops::dense(value(input), value(weight), value(bias));
    return push(std::move(n));
}

Graph::NodeId Graph::relu(NodeId input) {
    Node n;
    n.op = Op::kRelu;
    n.in[0] = input;
    n.requires_grad = requires_grad(input);
    n.value = ops::relu(value(input));
    return push(std::move(n));
}

Graph::NodeId Graph::softmax(NodeId logits) {
    Node n;
    n.op = Op::kSoftmax;
    n.in[0] = logits;
    n.requires_grad = requires_grad(logits);
    n.value = ops::softmax(value(logits));
    return push(std::move(n));
}

Graph::NodeId Graph::cross_entropy(NodeId probs, int true_class) {
    Node n;
    n.op = Op::kCrossEntropy;
    n.in[0] = probs;
    n.aux_int = true_class;
    n.requires_grad = requires_grad(probs);
    n.value = Tensor::scalar(ops::cross_entropy(value(probs), true_class));
    return push(std::move(n));
}

Graph::NodeId Graph::concat(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.ndim() == 1 && tb.ndim() == 1,
            "concat: expects vectors, got " + shape_str(ta.shape) + " and " + shape_str(tb.shape));
    Node n;
    n.op = Op::kConcat;
    n.in[0] = a;
    n.in[1] = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    Tensor out({ta.dim(0) + tb.dim(0)});
    std::copy(ta.data.begin(), ta.data.end(), out.data.begin());
    std::copy(tb.data.begin(), tb.data.end(), out.data.begin() + ta.dim(0));
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.same_shape(tb),
            "add: shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    Node n;
    n.op = Op::kAdd;
    n.in[0] = a;
    n.in[1] = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] += tb.data[i];
    }
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::NodeId Graph::scale(NodeId a, double factor) {
    Node n;
    n.op = Op::kScale;
    n.in[0] = a;
    n.aux_scalar = factor;
    n.requires_grad = requires_grad(a);
    Tensor out = value(a);
    for (auto& v : out.data) {
        v *= factor;
    }
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::NodeId Graph::sum(NodeId a) {
    Node n;
    n.op = Op::kSum;
    n.in[0] = a;
    n.requires_grad = requires_grad(a);
    double s = 0.0;
    for (double v : value(a).data) {
        s += v;
    }
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

void Graph::backward(NodeId loss) {
    require(!backward_done_, "graph: backward may run only once");
    Node& l = at(loss);
    require(l.value.size() == 1, "backward: loss must be scalar, got " + shape_str(l.value.shape));
    backward_done_ = true;
    if (!l.requires_grad) {
        return;  // nothing trainable reachable
    }
    ensure_grad(loss).data[0] = 1.0;
    for (std::size_t i = static_cast<std::size_t>(loss) + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.data.empty()) {
            continue;
        }
        backprop_node(n);
    }
    // Trainable leaves with no path to the loss still report a (zero) gradient.
    for (Node& n : nodes_) {
        if (n.op == Op::kParameter && n.requires_grad && n.grad.data.empty()) {
            n.grad = Tensor::zeros(n.value.shape);
        }
    }
}

void Graph::backprop_node(Node& n) {
    switch (n.op) {
        case Op::kInput:
        case Op::kParameter:
            break;

        case Op::kConv2d: {
            const Tensor& x = in_value(n, 0);
            const Tensor& k = in_value(n, 1);
            const Tensor& g = n.grad;
            const int c_in = x.dim(0);
            const int h = x.dim(1);
            const int w = x.dim(2);
            const int c_out = k.dim(0);

            if (requires_grad(n.in[0])) {
                Tensor& dx = ensure_grad(n.in[0]);
                for (int o = 0; o < c_out; ++o) {
                    for (int c = 0; c < c_in; ++c) {
                        for (int dy = 0; dy < 3; ++dy) {
                            for (int dxk = 0; dxk < 3; ++dxk) {
                                const double kv =
                                    k.data[((static_cast<std::size_t>(o) * static_cast<std::size_t>(c_in) +
                                             static_cast<std::size_t>(c)) *
                                                3 +
                                            static_cast<std::size_t>(dy)) *
                                               3 +
                                           static_cast<std::size_t>(dxk)];
                                if (kv == 0.0) {
                                    continue;
                                }
                                const int x_lo = std::max(0, 1 - dxk);
                                const int x_hi = std::min(w, w + 1 - dxk);
                                for (int y = 0; y < h; ++y) {
                                    const int iy = y + dy - 1;
                                    if (iy < 0 || iy >= h) {
                                        continue;
                                    }
                                    const double* grow = g.data.data() + g.idx3(o, y, 0);
                                    double* xrow = dx.data.data() + dx.idx3(c, iy, 0);
                                    for (int xx = x_lo; xx < x_hi; ++xx) {
                                        xrow[xx + dxk - 1] += kv * grow[xx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if (requires_grad(n.in[1])) {
                Tensor& dk = ensure_grad(n.in[1]);
                std::size_t ki = 0;
                for (int o = 0; o < c_out; ++o) {
                    for (int c = 0; c < c_in; ++c) {
                        for (int dy = 0; dy < 3; ++dy) {
                            for (int dxk = 0; dxk < 3; ++dxk, ++ki) {
                                const int x_lo = std::max(0, 1 - dxk);
                                const int x_hi = std::min(w, w + 1 - dxk);
                                double acc = 0.0;
                                for (int y = 0; y < h; ++y) {
                                    const int iy = y + dy - 1;
                                    if (iy < 0 || iy >= h) {
                                        continue;
                                    }
                                    const double* grow = g.data.data() + g.idx3(o, y, 0);
                                    const double* xrow = x.data.data() + x.idx3(c, iy, 0);
                                    for (int xx = x_lo; xx < x_hi; ++xx) {
                                        acc += grow[xx] * xrow[xx + dxk - 1];
                                    }
                                }
                                dk.data[ki] += acc;
                            }
                        }
                    }
                }
            }
            if (requires_grad(n.in[2])) {
                Tensor& db = ensure_grad(n.in[2]);
                const std::size_t hw = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
                for (int o = 0; o < c_out; ++o) {
                    const double* grow = g.data.data() + g.idx3(o, 0, 0);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < hw; ++i) {
                        acc += grow[i];
                    }
                    db.data[static_cast<std::size_t>(o)] += acc;
                }
            }
            break;
        }

        case Op::kMaxpool2: {
            if (requires_grad(n.in[0])) {
                Tensor& dx = ensure_grad(n.in[0]);
                for (std::size_t i = 0; i < n.value.size(); ++i) {
                    dx.data[static_cast<std::size_t>(n.aux_idx[i])] += n.grad.data[i];
                }
            }
            break;
        }

        case Op::kGlobalAvgPool: {
            if (requires_grad(n.in[0])) {
                const Tensor& x = in_value(n, 0);
                Tensor& dx = ensure_grad(n.in[0]);
                const std::size_t hw =
                    static_cast<std::size_t>(x.dim(1)) * static_cast<std::size_t>(x.dim(2));
                const double inv = 1.0 / static_cast<double>(hw);
                for (int c = 0; c < x.dim(0); ++c) {
                    const double gv = n.grad.data[static_cast<std::size_t>(c)] * inv;
                    double* p = dx.data.data() + dx.idx3(c, 0, 0);
                    for (std::size_t i = 0; i < hw; ++i) {
                        p[i] += gv;
                    }
                }
            }
            break;
        }

        case Op::kDense: {
            const Tensor& x = in_value(n, 0);
            const Tensor& wgt = in_value(n, 1);
            const int n_out = wgt.dim(0);
            const int n_in = wgt.dim(1);
            if (requires_grad(n.in[0])) {
                Tensor& dx = ensure_grad(n.in[0]);
                for (int o = 0; o < n_out; ++o) {
                    const double gv = n.grad.data[static_cast<std::size_t>(o)];
                    const double* wr =
                        wgt.data.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(n_in);
                    for (int i = 0; i < n_in; ++i) {
                        dx.data[static_cast<std::size_t>(i)] += gv * wr[i];
                    }
                }
            }
            if (requires_grad(n.in[1])) {
                Tensor& dw = ensure_grad(n.in[1]);
                for (int o = 0; o < n_out; ++o) {
                    const double gv = n.grad.data[static_cast<std::size_t>(o)];
                    double* wr =
                        dw.data.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(n_in);
                    for (int i = 0; i < n_in; ++i) {
                        wr[i] += gv * x.data[static_cast<std::size_t>(i)];
                    }
                }
            }
            if (requires_grad(n.in[2])) {
                Tensor& db = ensure_grad(n.in[2]);
                for (int o = 0; o < n_out; ++o) {
                    db.data[static_cast<std::size_t>(o)] += n.grad.data[static_cast<std::size_t>(o)];
                }
            }
            break;
        }

        case Op::kRelu: {
            if (requires_grad(n.in[0])) {
                const Tensor& x = in_value(n, 0);
                Tensor& dx = ensure_grad(n.in[0]);
                // Subgradient at exactly 0 is 0.
                for (std::size_t i = 0; i < x.size(); ++i) {
                    if (x.data[i] > 0.0) {
                        dx.data[i] += n.grad.data[i];
                    }
                }
            }
            break;
        }

        case Op::kSoftmax: {
            if (requires_grad(n.in[0])) {
                Tensor& dz = ensure_grad(n.in[0]);
                const Tensor& p = n.value;
                double dot = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) {
                    dot += n.grad.data[i] * p.data[i];
                }
                for (std::size_t i = 0; i < p.size(); ++i) {
                    dz.data[i] += p.data[i] * (n.grad.data[i] - dot);
                }
            }
            break;
        }

        case Op::kCrossEntropy: {
            if (requires_grad(n.in[0])) {
                const Tensor& p = in_value(n, 0);
                Tensor& dp = ensure_grad(n.in[0]);
                const std::size_t t = static_cast<std::size_t>(n.aux_int);
                // Below the clamp the loss is constant in p.
                if (p.data[t] > ops::kProbClamp) {
                    dp.data[t] += -n.grad.data[0] / p.data[t];
                }
            }
            break;
        }

        case Op::kConcat: {
            const Tensor& a = in_value(n, 0);
            const std::size_t na = a.size();
            if (requires_grad(n.in[0])) {
                Tensor& da = ensure_grad(n.in[0]);
                for (std::size_t i = 0; i < na; ++i) {
                    da.data[i] += n.grad.data[i];
                }
            }
            if (requires_grad(n.in[1])) {
                Tensor& db = ensure_grad(n.in[1]);
                for (std::size_t i = 0; i < db.size(); ++i) {
                    db.data[i] += n.grad.data[na + i];
                }
            }
            break;
        }

        case Op::kAdd: {
            for (int s = 0; s < 2; ++s) {
                if (requires_grad(n.in[s])) {
                    Tensor& d = ensure_grad(n.in[s]);
                    for (std::size_t i = 0; i < d.size(); ++i) {
                        d.data[i] += n.grad.data[i];
                    }
                }
            }
            break;
        }

        case Op::kScale: {
            if (requires_grad(n.in[0])) {
                Tensor& d = ensure_grad(n.in[0]);
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d.data[i] += n.aux_scalar * n.grad.data[i];
                }
            }
            break;
        }

        case Op::kSum: {
            if (requires_grad(n.in[0])) {
                Tensor& d = ensure_grad(n.in[0]);
                const double gv = n.grad.data[0];
                for (auto& v : d.data) {
                    v += gv;
                }
            }
            break;
        }
    }
}

}  // namespace lesionnet
