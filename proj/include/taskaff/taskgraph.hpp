#pragma once

#include <vector>

#include "taskaff/numcore.hpp"
#include "taskaff/sca.hpp"

namespace taskaff {

// Complete weighted graph over tasks with self-loops. Node features are the
// rows of the normalized affinity matrix; edge weights are kept for
// reporting and do not enter the attention computation.
struct TaskGraph {
    int T = 0;
    Mat features;  // T x T, f_i = A_i,:
    Mat weights;   // symmetric, w_ij = (A_ij + A_ji) / 2
    std::vector<std::string> task_names;
};

TaskGraph build_graph(const AffinityMatrix& A);
TaskGraph graph_from_normalized(const Mat& normalized, const std::vector<std::string>& names);

struct GatHead {
    Mat W;  // units x in_dim
    Vec a;  // 2 * units
};

enum class GatActivation { elu, identity };

struct GatLayer {
    std::vector<GatHead> heads;
    double leaky_slope = 0.2;
    GatActivation activation = GatActivation::elu;

    int in_dim() const { return heads[0].W.cols; }
    int units() const { return heads[0].W.rows; }
    int out_dim() const { return units() * static_cast<int>(heads.size()); }
};

// Two layers: (T units, 2 heads, elu, concat) then (T units, 1 head,
// identity) reconstructing the T-dimensional feature rows.
struct GatNetwork {
    GatLayer layer1;
    GatLayer layer2;
};

struct GatConfig {
    int epochs = 100;
    double learning_rate = 0.001;
    int layer1_heads = 2;
    double leaky_slope = 0.2;
    uint64_t seed = 0;
};

struct NodeEmbeddings {
    Mat Z;  // T x 2T
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int epochs = 0;
};

GatNetwork init_gat(int T, const GatConfig& config, SeededRng& rng);

// Per-head caches for one layer's forward pass.
struct GatHeadCache {
    Mat Z;       // N x units, z_i = W h_i
    Mat pre_e;   // N x N attention logits before leaky relu
    Mat alpha;   // N x N, rows sum to 1
    Mat S;       // N x N-agg: sum_j alpha_ij z_j, N x units
    Mat out;     // post-activation, N x units
};

struct GatLayerCache {
    std::vector<GatHeadCache> heads;
    Mat input;   // N x in_dim
    Mat output;  // N x out_dim (heads concatenated)
};

Mat attention_coefficients(const GatLayer& layer, const Mat& H_in, int head);
Mat gat_layer_forward(const GatLayer& layer, const Mat& H_in, GatLayerCache* cache = nullptr);

// Reconstruction F' and optionally the layer caches.
Mat gat_forward(const GatNetwork& net, const Mat& F, GatLayerCache* c1 = nullptr,
                GatLayerCache* c2 = nullptr);

double gat_reconstruction_loss(const GatNetwork& net, const Mat& F);

Vec gat_pack(const GatNetwork& net);
void gat_unpack(const Vec& flat, GatNetwork& net);

// Analytic gradient of the reconstruction MSE w.r.t. the packed parameters.
Vec gat_loss_grad(const GatNetwork& net, const Mat& F, double* loss_out = nullptr);

NodeEmbeddings train_gat(const TaskGraph& graph, const GatConfig& config, GatNetwork* trained = nullptr);

}  // namespace taskaff
