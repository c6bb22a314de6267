#include "taskaff/taskmodels.hpp"

#include <cmath>

namespace taskaff {

std::string to_string(Activation a) {
    return a == Activation::tanh_fn ? "tanh" : "relu";
}

std::string to_string(LossKind k) {
    return k == LossKind::mse ? "mse" : "bce";
}

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh_fn;
    if (s == "relu") return Activation::relu;
    throw std::invalid_argument("unknown activation: " + s);
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "mse") return LossKind::mse;
    if (s == "bce") return LossKind::bce;
    throw std::invalid_argument("unknown loss kind: " + s);
}

void ModelArch::validate() const {
    require(input_dim > 0, "arch: input_dim must be positive");
    require(!trunk_layers.empty(), "arch: at least one trunk layer required");
    for (int s : trunk_layers) require(s > 0, "arch: trunk layer size must be positive");
    for (int s : head_hidden) require(s > 0, "arch: head layer size must be positive");
    require(!task_losses.empty(), "arch: at least one task required");
}

namespace {

void push_tensor(ParamLayout& layout, const std::string& name, int rows, int cols) {
    TensorSpec spec;
    spec.name = name;
    spec.rows = rows;
    spec.cols = cols;
    spec.offset = layout.total;
    layout.total += spec.size();
    layout.tensors.push_back(spec);
}

double activate(double pre, Activation a) {
    if (a == Activation::tanh_fn) return std::tanh(pre);
    return pre > 0.0 ? pre : 0.0;  // relu, subgradient 0 at 0
}

double activate_deriv(double pre, double act, Activation a) {
    if (a == Activation::tanh_fn) return 1.0 - act * act;
    return pre > 0.0 ? 1.0 : 0.0;
}

// y = W x + b where W is rows x cols
void affine(const double* W, const double* b, const Vec& x, Vec& y, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        double acc = b[i];
        const double* wi = W + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) acc += wi[j] * x[j];
        y[i] = acc;
    }
}

void init_tensor(double* dst, const TensorSpec& spec, int fan_in, SeededRng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (size_t k = 0; k < spec.size(); ++k) dst[k] = rng.uniform(-bound, bound);
}

struct TrunkDims {
    std::vector<int> in;   // input width of each layer
    std::vector<int> out;  // output width of each layer
};

TrunkDims trunk_dims(const ModelArch& arch) {
    TrunkDims d;
    int prev = arch.input_dim;
    for (int s : arch.trunk_layers) {
        d.in.push_back(prev);
        d.out.push_back(s);
        prev = s;
    }
    return d;
}

TrunkDims head_dims(const ModelArch& arch) {
    TrunkDims d;
    int prev = arch.trunk_layers.back();
    for (int s : arch.head_hidden) {
        d.in.push_back(prev);
        d.out.push_back(s);
        prev = s;
    }
    d.in.push_back(prev);  // scalar output layer
    d.out.push_back(1);
    return d;
}

}  // namespace

std::shared_ptr<const ParamLayout> trunk_layout(const ModelArch& arch) {
    auto layout = std::make_shared<ParamLayout>();
    TrunkDims d = trunk_dims(arch);
    for (size_t l = 0; l < d.in.size(); ++l) {
        push_tensor(*layout, "trunk.W" + std::to_string(l), d.out[l], d.in[l]);
        push_tensor(*layout, "trunk.b" + std::to_string(l), d.out[l], 1);
    }
    return layout;
}

std::shared_ptr<const ParamLayout> head_layout(const ModelArch& arch) {
    auto layout = std::make_shared<ParamLayout>();
    TrunkDims d = head_dims(arch);
    for (size_t l = 0; l < d.in.size(); ++l) {
        std::string tag = (l + 1 == d.in.size()) ? "out" : std::to_string(l);
        push_tensor(*layout, "head.W" + tag, d.out[l], d.in[l]);
        push_tensor(*layout, "head.b" + tag, d.out[l], 1);
    }
    return layout;
}

MultiTaskModel init_shared(const ModelArch& arch, SeededRng& rng) {
    arch.validate();
    MultiTaskModel model;
    model.arch = arch;

    auto tl = trunk_layout(arch);
    model.shared.layout = tl;
    model.shared.values.assign(tl->total, 0.0);
    TrunkDims td = trunk_dims(arch);
    for (size_t i = 0; i < tl->tensors.size(); ++i) {
        init_tensor(model.shared.tensor(static_cast<int>(i)), tl->tensors[i], td.in[i / 2], rng);
    }

    auto hl = head_layout(arch);
    ParamVector head;
    head.layout = hl;
    head.values.assign(hl->total, 0.0);
    TrunkDims hd = head_dims(arch);
    for (size_t i = 0; i < hl->tensors.size(); ++i) {
        init_tensor(head.tensor(static_cast<int>(i)), hl->tensors[i], hd.in[i / 2], rng);
    }
    model.heads.assign(arch.task_count(), head);
    return model;
}

double forward(const MultiTaskModel& model, int t, const Vec& x, ForwardCache* cache) {
    const ModelArch& arch = model.arch;
    require(t >= 0 && t < arch.task_count(), "forward: task index out of range");
    require(static_cast<int>(x.size()) == arch.input_dim, "forward: input size mismatch");

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.trunk_pre.clear();
    c.trunk_act.clear();
    c.head_pre.clear();
    c.head_act.clear();

    const ParamVector& trunk = model.shared;
    TrunkDims td = trunk_dims(arch);
    const Vec* in = &x;
    for (size_t l = 0; l < td.in.size(); ++l) {
        Vec pre(td.out[l]);
        affine(trunk.tensor(static_cast<int>(2 * l)), trunk.tensor(static_cast<int>(2 * l + 1)),
               *in, pre, td.out[l], td.in[l]);
        Vec act(td.out[l]);
        for (int i = 0; i < td.out[l]; ++i) act[i] = activate(pre[i], arch.activation);
        c.trunk_pre.push_back(std::move(pre));
        c.trunk_act.push_back(std::move(act));
        in = &c.trunk_act.back();
    }

    const ParamVector& head = model.heads[t];
    TrunkDims hd = head_dims(arch);
    for (size_t l = 0; l < hd.in.size(); ++l) {
        Vec pre(hd.out[l]);
        affine(head.tensor(static_cast<int>(2 * l)), head.tensor(static_cast<int>(2 * l + 1)),
               *in, pre, hd.out[l], hd.in[l]);
        bool is_output = (l + 1 == hd.in.size());
        Vec act(hd.out[l]);
        for (int i = 0; i < hd.out[l]; ++i) {
            act[i] = is_output ? pre[i] : activate(pre[i], arch.activation);
        }
        c.head_pre.push_back(std::move(pre));
        c.head_act.push_back(std::move(act));
        in = &c.head_act.back();
    }
    c.output = c.head_act.back()[0];
    return c.output;
}

double task_loss(double p, double y, LossKind kind) {
    if (kind == LossKind::mse) {
        double r = p - y;
        return 0.5 * r * r;
    }
    require(y == 0.0 || y == 1.0, "bce: label must be 0 or 1");
    // stable log(1 + exp(-|p|)) form of -[y log sigma(p) + (1-y) log(1-sigma(p))]
    double z = p * (y > 0.5 ? 1.0 : -1.0);
    if (z >= 0.0) return std::log1p(std::exp(-z));
    return -z + std::log1p(std::exp(z));
}

double loss_grad_output(double p, double y, LossKind kind) {
    if (kind == LossKind::mse) return p - y;
    require(y == 0.0 || y == 1.0, "bce: label must be 0 or 1");
    double s = p >= 0.0 ? 1.0 / (1.0 + std::exp(-p)) : std::exp(p) / (1.0 + std::exp(p));
    return s - y;
}

namespace {

// Backprop through one task's head from dL/dp. Writes head-parameter grads
// (if head_out != nullptr) and returns dL/d(trunk output).
Vec head_backward(const MultiTaskModel& model, int t, const ForwardCache& c, double dLdp,
                  Vec* head_out) {
    const ModelArch& arch = model.arch;
    const ParamVector& head = model.heads[t];
    TrunkDims hd = head_dims(arch);
    int n_layers = static_cast<int>(hd.in.size());

    Vec d_act = {dLdp};  // gradient w.r.t. the current layer's activation
    for (int l = n_layers - 1; l >= 0; --l) {
        bool is_output = (l + 1 == n_layers);
        Vec d_pre(hd.out[l]);
        for (int i = 0; i < hd.out[l]; ++i) {
            d_pre[i] = is_output ? d_act[i]
                                 : d_act[i] * activate_deriv(c.head_pre[l][i], c.head_act[l][i],
                                                             arch.activation);
        }
        const Vec& input = (l == 0) ? c.trunk_act.back() : c.head_act[l - 1];
        if (head_out) {
            const TensorSpec& wspec = head.layout->tensors[2 * l];
            double* dW = head_out->data() + wspec.offset;
            double* db = head_out->data() + head.layout->tensors[2 * l + 1].offset;
            for (int i = 0; i < hd.out[l]; ++i) {
                for (int j = 0; j < hd.in[l]; ++j) {
                    dW[static_cast<size_t>(i) * hd.in[l] + j] += d_pre[i] * input[j];
                }
                db[i] += d_pre[i];
            }
        }
        Vec d_in(hd.in[l], 0.0);
        const double* W = head.tensor(2 * l);
        for (int i = 0; i < hd.out[l]; ++i) {
            for (int j = 0; j < hd.in[l]; ++j) {
                d_in[j] += W[static_cast<size_t>(i) * hd.in[l] + j] * d_pre[i];
            }
        }
        d_act = std::move(d_in);
    }
    return d_act;  // dL/d(trunk output)
}

// Backprop the trunk from dL/d(trunk output), accumulating into grad.
void trunk_backward(const MultiTaskModel& model, const Vec& x, const ForwardCache& c,
                    Vec d_trunk_out, Vec* grad) {
    const ModelArch& arch = model.arch;
    const ParamVector& trunk = model.shared;
    TrunkDims td = trunk_dims(arch);
    int n_layers = static_cast<int>(td.in.size());

    Vec d_act = std::move(d_trunk_out);
    for (int l = n_layers - 1; l >= 0; --l) {
        Vec d_pre(td.out[l]);
        for (int i = 0; i < td.out[l]; ++i) {
            d_pre[i] =
                d_act[i] * activate_deriv(c.trunk_pre[l][i], c.trunk_act[l][i], arch.activation);
        }
        const Vec& input = (l == 0) ? x : c.trunk_act[l - 1];
        const TensorSpec& wspec = trunk.layout->tensors[2 * l];
        double* dW = grad->data() + wspec.offset;
        double* db = grad->data() + trunk.layout->tensors[2 * l + 1].offset;
        for (int i = 0; i < td.out[l]; ++i) {
            for (int j = 0; j < td.in[l]; ++j) {
                dW[static_cast<size_t>(i) * td.in[l] + j] += d_pre[i] * input[j];
            }
            db[i] += d_pre[i];
        }
        Vec d_in(td.in[l], 0.0);
        const double* W = trunk.tensor(2 * l);
        for (int i = 0; i < td.out[l]; ++i) {
            for (int j = 0; j < td.in[l]; ++j) {
                d_in[j] += W[static_cast<size_t>(i) * td.in[l] + j] * d_pre[i];
            }
        }
        d_act = std::move(d_in);
    }
}

}  // namespace

Vec shared_grad(const MultiTaskModel& model, int t, const MtlSample& sample) {
    require(sample.has_label(t), "shared_grad: missing label for task");
    ForwardCache c;
    double p = forward(model, t, sample.x, &c);
    double dLdp = loss_grad_output(p, sample.labels[t], model.arch.task_losses[t]);
    Vec d_trunk_out = head_backward(model, t, c, dLdp, nullptr);
    Vec grad(model.shared.layout->total, 0.0);
    trunk_backward(model, sample.x, c, std::move(d_trunk_out), &grad);
    return grad;
}

Vec head_grad(const MultiTaskModel& model, int t, const MtlSample& sample) {
    require(sample.has_label(t), "head_grad: missing label for task");
    ForwardCache c;
    double p = forward(model, t, sample.x, &c);
    double dLdp = loss_grad_output(p, sample.labels[t], model.arch.task_losses[t]);
    Vec grad(model.heads[t].layout->total, 0.0);
    head_backward(model, t, c, dLdp, &grad);
    return grad;
}

Vec averaged_shared_grad(const MultiTaskModel& model, const MtlSample& sample) {
    int T = model.arch.task_count();
    Vec d_trunk_out;
    ForwardCache c;
    for (int t = 0; t < T; ++t) {
        require(sample.has_label(t), "averaged_shared_grad: missing label for task");
        double p = forward(model, t, sample.x, &c);
        double dLdp = loss_grad_output(p, sample.labels[t], model.arch.task_losses[t]) /
                      static_cast<double>(T);
        Vec d = head_backward(model, t, c, dLdp, nullptr);
        if (d_trunk_out.empty()) {
            d_trunk_out = std::move(d);
        } else {
            for (size_t k = 0; k < d.size(); ++k) d_trunk_out[k] += d[k];
        }
    }
    // trunk activations are task-independent; the last cache is reusable
    Vec grad(model.shared.layout->total, 0.0);
    trunk_backward(model, sample.x, c, std::move(d_trunk_out), &grad);
    return grad;
}

double average_multitask_loss(const MultiTaskModel& model, const MtlSample& sample) {
    int T = model.arch.task_count();
    double acc = 0.0;
    for (int t = 0; t < T; ++t) {
        require(sample.has_label(t), "average_multitask_loss: missing label for task");
        double p = forward(model, t, sample.x);
        acc += task_loss(p, sample.labels[t], model.arch.task_losses[t]);
    }
    return acc / static_cast<double>(T);
}

ParamVector flatten(const MultiTaskModel& model) {
    auto layout = std::make_shared<ParamLayout>();
    ParamVector flat;
    for (const TensorSpec& t : model.shared.layout->tensors) {
        push_tensor(*layout, "shared." + t.name, t.rows, t.cols);
    }
    for (size_t h = 0; h < model.heads.size(); ++h) {
        for (const TensorSpec& t : model.heads[h].layout->tensors) {
            push_tensor(*layout, "task" + std::to_string(h) + "." + t.name, t.rows, t.cols);
        }
    }
    flat.layout = layout;
    flat.values.reserve(layout->total);
    flat.values.insert(flat.values.end(), model.shared.values.begin(), model.shared.values.end());
    for (const ParamVector& h : model.heads) {
        flat.values.insert(flat.values.end(), h.values.begin(), h.values.end());
    }
    return flat;
}

MultiTaskModel unflatten(const Vec& flat, const ModelArch& arch) {
    arch.validate();
    MultiTaskModel model;
    model.arch = arch;
    auto tl = trunk_layout(arch);
    auto hl = head_layout(arch);
    size_t expected = tl->total + hl->total * arch.task_count();
    require(flat.size() == expected, "unflatten: flat length does not match arch layout");

    size_t off = 0;
    model.shared.layout = tl;
    model.shared.values.assign(flat.begin(), flat.begin() + tl->total);
    off += tl->total;
    for (int t = 0; t < arch.task_count(); ++t) {
        ParamVector head;
        head.layout = hl;
        head.values.assign(flat.begin() + off, flat.begin() + off + hl->total);
        off += hl->total;
        model.heads.push_back(std::move(head));
    }
    return model;
}

size_t param_count(const ModelArch& arch) {
    return trunk_layout(arch)->total + head_layout(arch)->total * arch.task_count();
}

}  // namespace taskaff
