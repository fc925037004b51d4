#pragma once

#include <string>
#include <vector>

#include "svc/autodiff.hpp"
#include "svc/rng.hpp"

namespace svc {

// Uniform(-a, a) with a = 1/sqrt(fan_in).
template <class S>
void init_uniform(TensorT<S>& t, Rng& rng, int fan_in) {
    const double a = 1.0 / std::sqrt(double(std::max(fan_in, 1)));
    for (auto& v : t.data) v = S(rng.uniform(-a, a));
}

template <class S>
struct LinearT {
    ParameterT<S> w, b;

    void init(const std::string& name, Rng& rng, int in, int out) {
        w = ParameterT<S>(name + ".w", TensorT<S>({out, in}));
        b = ParameterT<S>(name + ".b", TensorT<S>({out}));
        init_uniform(w.value, rng, in);
        init_uniform(b.value, rng, in);
    }

    // x is (in, T) or (in, 1); returns (out, T)
    Ref<S> forward(GraphT<S>& g, Ref<S> x) {
        return g.add_col(g.matmul(g.param(w), x), g.param(b));
    }

    void params(std::vector<ParameterT<S>*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

template <class S>
struct Conv1dT {
    ParameterT<S> w, b;
    int stride = 1, pad = 0, dil = 1;

    void init(const std::string& name, Rng& rng, int cin, int cout, int k, int stride_ = 1, int pad_ = 0,
              int dil_ = 1) {
        stride = stride_;
        pad = pad_;
        dil = dil_;
        w = ParameterT<S>(name + ".w", TensorT<S>({cout, cin, k}));
        b = ParameterT<S>(name + ".b", TensorT<S>({cout}));
        init_uniform(w.value, rng, cin * k);
        init_uniform(b.value, rng, cin * k);
    }

    void zero_init() {
        std::fill(w.value.data.begin(), w.value.data.end(), S(0));
        std::fill(b.value.data.begin(), b.value.data.end(), S(0));
    }

    Ref<S> forward(GraphT<S>& g, Ref<S> x) {
        return g.conv1d(x, g.param(w), g.param(b), stride, pad, dil);
    }

    // Weights enter the graph as constants: gradients still flow to x, but
    // none are accumulated into the parameters.
    Ref<S> forward_frozen(GraphT<S>& g, Ref<S> x) {
        return g.conv1d(x, g.constant(w.value), g.constant(b.value), stride, pad, dil);
    }

    void params(std::vector<ParameterT<S>*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

template <class S>
struct TConv1dT {
    ParameterT<S> w, b;
    int stride = 1, pad = 0;

    void init(const std::string& name, Rng& rng, int cin, int cout, int k, int stride_, int pad_) {
        stride = stride_;
        pad = pad_;
        w = ParameterT<S>(name + ".w", TensorT<S>({cin, cout, k}));
        b = ParameterT<S>(name + ".b", TensorT<S>({cout}));
        init_uniform(w.value, rng, cin * k / std::max(stride_, 1));
        init_uniform(b.value, rng, cin * k / std::max(stride_, 1));
    }

    Ref<S> forward(GraphT<S>& g, Ref<S> x) {
        return g.tconv1d(x, g.param(w), g.param(b), stride, pad);
    }

    void params(std::vector<ParameterT<S>*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

template <class S>
struct EmbeddingT {
    ParameterT<S> table;

    void init(const std::string& name, Rng& rng, int vocab, int dim) {
        table = ParameterT<S>(name + ".table", TensorT<S>({vocab, dim}));
        for (auto& v : table.value.data) v = S(rng.gaussian() * 0.1);
    }

    // returns (dim, T)
    Ref<S> forward(GraphT<S>& g, const std::vector<int>& indices) {
        return g.embedding(g.param(table), indices);
    }

    void params(std::vector<ParameterT<S>*>& out) { out.push_back(&table); }
};

template <class S>
struct LayerNormT {
    ParameterT<S> gain, bias;

    void init(const std::string& name, int channels) {
        gain = ParameterT<S>(name + ".gain", TensorT<S>({channels}, S(1)));
        bias = ParameterT<S>(name + ".bias", TensorT<S>({channels}));
    }

    Ref<S> forward(GraphT<S>& g, Ref<S> x) {
        return g.layer_norm(x, g.param(gain), g.param(bias));
    }

    void params(std::vector<ParameterT<S>*>& out) {
        out.push_back(&gain);
        out.push_back(&bias);
    }
};

}  // namespace svc
