#include "taskaff/taskgraph.hpp"

#include <cmath>

namespace taskaff {

TaskGraph build_graph(const AffinityMatrix& A) {
    return graph_from_normalized(A.normalized, A.task_names);
}

TaskGraph graph_from_normalized(const Mat& normalized, const std::vector<std::string>& names) {
    require(normalized.rows == normalized.cols, "build_graph: affinity matrix must be square");
    TaskGraph g;
    g.T = normalized.rows;
    g.features = normalized;
    g.task_names = names;
    g.weights = Mat(g.T, g.T);
    for (int i = 0; i < g.T; ++i) {
        for (int j = 0; j < g.T; ++j) {
            g.weights(i, j) = 0.5 * (normalized(i, j) + normalized(j, i));
        }
    }
    return g;
}

namespace {

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_deriv(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

void init_mat(Mat& m, int fan_in, SeededRng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : m.data) v = rng.uniform(-bound, bound);
}

}  // namespace

GatNetwork init_gat(int T, const GatConfig& config, SeededRng& rng) {
    require(T >= 1, "init_gat: need at least one node");
    GatNetwork net;
    net.layer1.leaky_slope = config.leaky_slope;
    net.layer1.activation = GatActivation::elu;
    for (int h = 0; h < config.layer1_heads; ++h) {
        GatHead head;
        head.W = Mat(T, T);
        init_mat(head.W, T, rng);
        head.a.resize(2 * T);
        double bound = 1.0 / std::sqrt(static_cast<double>(2 * T));
        for (double& v : head.a) v = rng.uniform(-bound, bound);
        net.layer1.heads.push_back(std::move(head));
    }
    net.layer2.leaky_slope = config.leaky_slope;
    net.layer2.activation = GatActivation::identity;
    {
        GatHead head;
        int in_dim = T * config.layer1_heads;
        head.W = Mat(T, in_dim);
        init_mat(head.W, in_dim, rng);
        head.a.resize(2 * T);
        double bound = 1.0 / std::sqrt(static_cast<double>(2 * T));
        for (double& v : head.a) v = rng.uniform(-bound, bound);
        net.layer2.heads.push_back(std::move(head));
    }
    return net;
}

namespace {

GatHeadCache head_forward(const GatLayer& layer, const Mat& H_in, int head_idx) {
    const GatHead& head = layer.heads[head_idx];
    int N = H_in.rows;
    int units = head.W.rows;
    int in_dim = head.W.cols;
    require(H_in.cols == in_dim, "gat: input width mismatch");

    GatHeadCache c;
    c.Z = Mat(N, units);
    for (int i = 0; i < N; ++i) {
        for (int u = 0; u < units; ++u) {
            double acc = 0.0;
            for (int f = 0; f < in_dim; ++f) acc += head.W(u, f) * H_in(i, f);
            c.Z(i, u) = acc;
        }
    }

    const double* a_left = head.a.data();
    const double* a_right = head.a.data() + units;
    Vec left(N), right(N);
    for (int i = 0; i < N; ++i) {
        double l = 0.0, r = 0.0;
        for (int u = 0; u < units; ++u) {
            l += a_left[u] * c.Z(i, u);
            r += a_right[u] * c.Z(i, u);
        }
        left[i] = l;
        right[i] = r;
    }

    c.pre_e = Mat(N, N);
    c.alpha = Mat(N, N);
    for (int i = 0; i < N; ++i) {
        double maxv = -1e300;
        for (int j = 0; j < N; ++j) {
            c.pre_e(i, j) = left[i] + right[j];
            double e = c.pre_e(i, j) > 0.0 ? c.pre_e(i, j) : layer.leaky_slope * c.pre_e(i, j);
            c.alpha(i, j) = e;
            maxv = std::max(maxv, e);
        }
        double denom = 0.0;
        for (int j = 0; j < N; ++j) {
            c.alpha(i, j) = std::exp(c.alpha(i, j) - maxv);
            denom += c.alpha(i, j);
        }
        for (int j = 0; j < N; ++j) c.alpha(i, j) /= denom;
    }

    c.S = Mat(N, units);
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            double aij = c.alpha(i, j);
            for (int u = 0; u < units; ++u) c.S(i, u) += aij * c.Z(j, u);
        }
    }

    c.out = Mat(N, units);
    for (int i = 0; i < N; ++i) {
        for (int u = 0; u < units; ++u) {
            c.out(i, u) =
                layer.activation == GatActivation::elu ? elu(c.S(i, u)) : c.S(i, u);
        }
    }
    return c;
}

}  // namespace

Mat attention_coefficients(const GatLayer& layer, const Mat& H_in, int head) {
    require(head >= 0 && head < static_cast<int>(layer.heads.size()),
            "attention_coefficients: head index out of range");
    return head_forward(layer, H_in, head).alpha;
}

Mat gat_layer_forward(const GatLayer& layer, const Mat& H_in, GatLayerCache* cache) {
    int N = H_in.rows;
    int n_heads = static_cast<int>(layer.heads.size());
    int units = layer.units();
    Mat out(N, units * n_heads);
    GatLayerCache local;
    GatLayerCache& c = cache ? *cache : local;
    c.heads.clear();
    c.input = H_in;
    for (int h = 0; h < n_heads; ++h) {
        GatHeadCache hc = head_forward(layer, H_in, h);
        for (int i = 0; i < N; ++i) {
            for (int u = 0; u < units; ++u) out(i, h * units + u) = hc.out(i, u);
        }
        c.heads.push_back(std::move(hc));
    }
    c.output = out;
    return out;
}

Mat gat_forward(const GatNetwork& net, const Mat& F, GatLayerCache* c1, GatLayerCache* c2) {
    Mat h1 = gat_layer_forward(net.layer1, F, c1);
    return gat_layer_forward(net.layer2, h1, c2);
}

double gat_reconstruction_loss(const GatNetwork& net, const Mat& F) {
    Mat Fp = gat_forward(net, F);
    double acc = 0.0;
    for (size_t k = 0; k < F.data.size(); ++k) {
        double d = Fp.data[k] - F.data[k];
        acc += d * d;
    }
    return acc / static_cast<double>(F.data.size());
}

Vec gat_pack(const GatNetwork& net) {
    Vec flat;
    for (const GatLayer* layer : {&net.layer1, &net.layer2}) {
        for (const GatHead& h : layer->heads) {
            flat.insert(flat.end(), h.W.data.begin(), h.W.data.end());
            flat.insert(flat.end(), h.a.begin(), h.a.end());
        }
    }
    return flat;
}

void gat_unpack(const Vec& flat, GatNetwork& net) {
    size_t need = 0;
    for (const GatLayer* layer : {&net.layer1, &net.layer2}) {
        for (const GatHead& h : layer->heads) need += h.W.data.size() + h.a.size();
    }
    require(flat.size() == need, "gat_unpack: flat length mismatch");
    size_t off = 0;
    for (GatLayer* layer : {&net.layer1, &net.layer2}) {
        for (GatHead& h : layer->heads) {
            std::copy(flat.begin() + off, flat.begin() + off + h.W.data.size(), h.W.data.begin());
            off += h.W.data.size();
            std::copy(flat.begin() + off, flat.begin() + off + h.a.size(), h.a.begin());
            off += h.a.size();
        }
    }
}

namespace {

struct HeadGrads {
    Mat dW;
    Vec da;
};

// Backward through one layer. dOut is N x out_dim (heads concatenated);
// returns per-head parameter grads and accumulates dL/dH_in.
std::vector<HeadGrads> layer_backward(const GatLayer& layer, const GatLayerCache& c,
                                      const Mat& dOut, Mat* dH_in) {
    int N = c.input.rows;
    int in_dim = c.input.cols;
    int units = layer.units();
    std::vector<HeadGrads> grads;

    for (size_t h = 0; h < layer.heads.size(); ++h) {
        const GatHead& head = layer.heads[h];
        const GatHeadCache& hc = c.heads[h];
        const double* a_left = head.a.data();
        const double* a_right = head.a.data() + units;

        Mat dS(N, units);
        for (int i = 0; i < N; ++i) {
            for (int u = 0; u < units; ++u) {
                double g = dOut(i, static_cast<int>(h) * units + u);
                dS(i, u) = layer.activation == GatActivation::elu
                               ? g * elu_deriv(hc.S(i, u))
                               : g;
            }
        }

        Mat dAlpha(N, N);
        Mat dZ(N, units);
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j < N; ++j) {
                double acc = 0.0;
                for (int u = 0; u < units; ++u) acc += dS(i, u) * hc.Z(j, u);
                dAlpha(i, j) = acc;
                double aij = hc.alpha(i, j);
                for (int u = 0; u < units; ++u) dZ(j, u) += aij * dS(i, u);
            }
        }

        Mat dPre(N, N);
        for (int i = 0; i < N; ++i) {
            double dot = 0.0;
            for (int k = 0; k < N; ++k) dot += hc.alpha(i, k) * dAlpha(i, k);
            for (int j = 0; j < N; ++j) {
                double dE = hc.alpha(i, j) * (dAlpha(i, j) - dot);
                dPre(i, j) = dE * (hc.pre_e(i, j) > 0.0 ? 1.0 : layer.leaky_slope);
            }
        }

        HeadGrads hg;
        hg.dW = Mat(units, in_dim);
        hg.da.assign(2 * units, 0.0);
        for (int i = 0; i < N; ++i) {
            double row_sum = 0.0;
            for (int j = 0; j < N; ++j) row_sum += dPre(i, j);
            // left attention term: pre_e(i, j) depends on z_i via a_left
            for (int u = 0; u < units; ++u) {
                hg.da[u] += row_sum * hc.Z(i, u);
                dZ(i, u) += row_sum * a_left[u];
            }
        }
        for (int j = 0; j < N; ++j) {
            double col_sum = 0.0;
            for (int i = 0; i < N; ++i) col_sum += dPre(i, j);
            for (int u = 0; u < units; ++u) {
                hg.da[units + u] += col_sum * hc.Z(j, u);
                dZ(j, u) += col_sum * a_right[u];
            }
        }

        for (int u = 0; u < units; ++u) {
            for (int f = 0; f < in_dim; ++f) {
                double acc = 0.0;
                for (int i = 0; i < N; ++i) acc += dZ(i, u) * c.input(i, f);
                hg.dW(u, f) = acc;
            }
        }
        if (dH_in) {
            for (int i = 0; i < N; ++i) {
                for (int f = 0; f < in_dim; ++f) {
                    double acc = 0.0;
                    for (int u = 0; u < units; ++u) acc += dZ(i, u) * head.W(u, f);
                    (*dH_in)(i, f) += acc;
                }
            }
        }
        grads.push_back(std::move(hg));
    }
    return grads;
}

}  // namespace

Vec gat_loss_grad(const GatNetwork& net, const Mat& F, double* loss_out) {
    GatLayerCache c1, c2;
    Mat Fp = gat_forward(net, F, &c1, &c2);

    double loss = 0.0;
    Mat dFp(Fp.rows, Fp.cols);
    double scale = 2.0 / static_cast<double>(F.data.size());
    for (size_t k = 0; k < F.data.size(); ++k) {
        double d = Fp.data[k] - F.data[k];
        loss += d * d;
        dFp.data[k] = scale * d;
    }
    loss /= static_cast<double>(F.data.size());
    if (loss_out) *loss_out = loss;

    Mat dH1(c1.output.rows, c1.output.cols);
    std::vector<HeadGrads> g2 = layer_backward(net.layer2, c2, dFp, &dH1);
    std::vector<HeadGrads> g1 = layer_backward(net.layer1, c1, dH1, nullptr);

    Vec flat;
    for (const std::vector<HeadGrads>* gs : {&g1, &g2}) {
        for (const HeadGrads& hg : *gs) {
            flat.insert(flat.end(), hg.dW.data.begin(), hg.dW.data.end());
            flat.insert(flat.end(), hg.da.begin(), hg.da.end());
        }
    }
    return flat;
}

NodeEmbeddings train_gat(const TaskGraph& graph, const GatConfig& config, GatNetwork* trained) {
    require(graph.T >= 2, "train_gat: need at least two nodes");
    SeededRng rng(config.seed, 1);
    GatNetwork net = init_gat(graph.T, config, rng);

    Vec params = gat_pack(net);
    OptimizerState opt = OptimizerState::adam(config.learning_rate, params.size());

    NodeEmbeddings emb;
    emb.epochs = config.epochs;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss = 0.0;
        Vec grad = gat_loss_grad(net, graph.features, &loss);
        if (!std::isfinite(loss)) {
            throw std::runtime_error("train_gat: non-finite loss at epoch " +
                                     std::to_string(epoch));
        }
        if (epoch == 0) emb.initial_loss = loss;
        params = adam_step(opt, params, grad);
        gat_unpack(params, net);
    }
    emb.final_loss = gat_reconstruction_loss(net, graph.features);

    GatLayerCache c1;
    gat_layer_forward(net.layer1, graph.features, &c1);
    emb.Z = c1.output;
    if (trained) *trained = net;
    return emb;
}

}  // namespace taskaff
