#pragma once

#include <memory>
#include <string>
#include <vector>

#include "taskaff/numcore.hpp"

namespace taskaff {

enum class Activation { tanh_fn, relu };
enum class LossKind { mse, bce };

std::string to_string(Activation a);
std::string to_string(LossKind k);
Activation activation_from_string(const std::string& s);
LossKind loss_kind_from_string(const std::string& s);

// Hard parameter sharing: a shared trunk followed by one scalar-output head
// per task. All heads share the same layer shape; loss kind varies per task.
struct ModelArch {
    int input_dim = 0;
    std::vector<int> trunk_layers;  // at least one
    Activation activation = Activation::tanh_fn;
    std::vector<int> head_hidden;  // may be empty (linear head)
    std::vector<LossKind> task_losses;

    int task_count() const { return static_cast<int>(task_losses.size()); }
    void validate() const;
};

struct TensorSpec {
    std::string name;
    int rows = 0;
    int cols = 0;
    size_t offset = 0;

    size_t size() const { return static_cast<size_t>(rows) * cols; }
};

struct ParamLayout {
    std::vector<TensorSpec> tensors;
    size_t total = 0;
};

// Flat parameter vector plus the tensor layout that maps it back to
// per-layer weights. Row-major per tensor, tensors in declaration order.
struct ParamVector {
    Vec values;
    std::shared_ptr<const ParamLayout> layout;

    const double* tensor(int idx) const { return values.data() + layout->tensors[idx].offset; }
    double* tensor(int idx) { return values.data() + layout->tensors[idx].offset; }
};

struct MultiTaskModel {
    ModelArch arch;
    ParamVector shared;               // trunk
    std::vector<ParamVector> heads;   // one per task
};

// One multi-task sample: shared features, one label per task.
struct MtlSample {
    Vec x;
    Vec labels;
    std::vector<uint8_t> present;  // empty means all present
    bool has_label(int t) const { return present.empty() || present[t] != 0; }
};

std::shared_ptr<const ParamLayout> trunk_layout(const ModelArch& arch);
std::shared_ptr<const ParamLayout> head_layout(const ModelArch& arch);

// Weights and biases uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]. The trunk
// is drawn from the stream; a single head draw is shared by every task so two
// tasks with identical data have identical gradients at initialization.
MultiTaskModel init_shared(const ModelArch& arch, SeededRng& rng);

struct ForwardCache {
    std::vector<Vec> trunk_pre, trunk_act;
    std::vector<Vec> head_pre, head_act;
    double output = 0.0;
};

// Prediction for task t; bce heads return the pre-sigmoid logit.
double forward(const MultiTaskModel& model, int t, const Vec& x, ForwardCache* cache = nullptr);

double task_loss(double p, double y, LossKind kind);
double loss_grad_output(double p, double y, LossKind kind);  // dL/dp

Vec shared_grad(const MultiTaskModel& model, int t, const MtlSample& sample);
Vec head_grad(const MultiTaskModel& model, int t, const MtlSample& sample);

// Single backward pass through the trunk under the (1/T)-averaged loss.
Vec averaged_shared_grad(const MultiTaskModel& model, const MtlSample& sample);

double average_multitask_loss(const MultiTaskModel& model, const MtlSample& sample);

// Whole-model flattening: trunk tensors first, then each head's in task order.
ParamVector flatten(const MultiTaskModel& model);
MultiTaskModel unflatten(const Vec& flat, const ModelArch& arch);

size_t param_count(const ModelArch& arch);

}  // namespace taskaff
