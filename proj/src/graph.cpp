#include "offrec/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>

namespace offrec::nn {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

CMap emap(const Tensor& t) {
    return CMap(t.values.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}
MMap emap(Tensor& t) {
    return MMap(t.values.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

}  // namespace

Ref Graph::input(Tensor t) {
    Node n;
    n.value = std::move(t);
    return push(std::move(n));
}

Ref Graph::param(ParamStore& store, const std::string& name) {
    Node n;
    n.value = store.value(name);
    n.store = &store;
    n.pname = name;
    return push(std::move(n));
}

Ref Graph::embedding(ParamStore& store, const std::string& name, const std::vector<int>& ids) {
    const Tensor& table = store.value(name);
    Tensor out(ids.size(), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        int id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= table.rows())
            throw DimensionError("embedding: id out of range: " + std::to_string(id));
        for (std::size_t c = 0; c < table.cols(); ++c)
            out(i, c) = table.at(static_cast<std::size_t>(id), c);
    }
    Node n;
    n.value = std::move(out);
    n.store = &store;
    n.pname = name;
    n.ids = ids;
    n.back = [](Graph&, Node& self) {
        const Tensor& table = self.store->value(self.pname);
        Tensor g = Tensor::zeros_like(table);
        for (std::size_t i = 0; i < self.ids.size(); ++i)
            for (std::size_t c = 0; c < table.cols(); ++c)
                g(static_cast<std::size_t>(self.ids[i]), c) += self.grad.at(i, c);
        self.store->accumulate_grad(self.pname, g);
    };
    return push(std::move(n));
}

Ref Graph::matmul(Ref a, Ref b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.cols() != tb.rows())
        throw DimensionError("matmul: inner dimensions differ: " + ta.shape_str() + " x " +
                             tb.shape_str());
    Tensor out(ta.rows(), tb.cols());
    emap(out) = emap(ta) * emap(tb);
    Node n;
    n.value = std::move(out);
    int ia = a.id, ib = b.id;
    n.back = [ia, ib](Graph& g, Node& self) {
        const Tensor& ta = g.nodes_[static_cast<std::size_t>(ia)].value;
        const Tensor& tb = g.nodes_[static_cast<std::size_t>(ib)].value;
        emap(g.grad_of(ia)) += emap(self.grad) * emap(tb).transpose();
        emap(g.grad_of(ib)) += emap(ta).transpose() * emap(self.grad);
    };
    return push(std::move(n));
}

Ref Graph::add(Ref a, Ref b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb))
        throw DimensionError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += tb.values[i];
    Node n;
    n.value = std::move(out);
    int ia = a.id, ib = b.id;
    n.back = [ia, ib](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        Tensor& gb = g.grad_of(ib);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            ga.values[i] += self.grad.values[i];
            gb.values[i] += self.grad.values[i];
        }
    };
    return push(std::move(n));
}

Ref Graph::sub(Ref a, Ref b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb))
        throw DimensionError("sub: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= tb.values[i];
    Node n;
    n.value = std::move(out);
    int ia = a.id, ib = b.id;
    n.back = [ia, ib](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        Tensor& gb = g.grad_of(ib);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            ga.values[i] += self.grad.values[i];
            gb.values[i] -= self.grad.values[i];
        }
    };
    return push(std::move(n));
}

Ref Graph::mul(Ref a, Ref b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb))
        throw DimensionError("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= tb.values[i];
    Node n;
    n.value = std::move(out);
    int ia = a.id, ib = b.id;
    n.back = [ia, ib](Graph& g, Node& self) {
        const Tensor& ta = g.nodes_[static_cast<std::size_t>(ia)].value;
        const Tensor& tb = g.nodes_[static_cast<std::size_t>(ib)].value;
        Tensor& ga = g.grad_of(ia);
        Tensor& gb = g.grad_of(ib);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            ga.values[i] += self.grad.values[i] * tb.values[i];
            gb.values[i] += self.grad.values[i] * ta.values[i];
        }
    };
    return push(std::move(n));
}

Ref Graph::add_rowwise(Ref a, Ref bias) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(bias);
    if (tb.rows() != 1 || tb.cols() != ta.cols())
        throw DimensionError("add_rowwise: bias must be [1, " + std::to_string(ta.cols()) +
                             "], got " + tb.shape_str());
    Tensor out = ta;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += tb.values[c];
    Node n;
    n.value = std::move(out);
    int ia = a.id, ib = bias.id;
    n.back = [ia, ib](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        Tensor& gb = g.grad_of(ib);
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
            for (std::size_t c = 0; c < self.grad.cols(); ++c) {
                ga(r, c) += self.grad(r, c);
                gb.values[c] += self.grad(r, c);
            }
    };
    return push(std::move(n));
}

Ref Graph::add_colwise(Ref a, Ref col) {
    const Tensor& ta = value(a);
    const Tensor& tc = value(col);
    if (tc.cols() != 1 || tc.rows() != ta.rows())
        throw DimensionError("add_colwise: column must be [" + std::to_string(ta.rows()) +
                             ", 1], got " + tc.shape_str());
    Tensor out = ta;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += tc.values[r];
    Node n;
    n.value = std::move(out);
    int ia = a.id, ic = col.id;
    n.back = [ia, ic](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        Tensor& gc = g.grad_of(ic);
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
            for (std::size_t c = 0; c < self.grad.cols(); ++c) {
                ga(r, c) += self.grad(r, c);
                gc.values[r] += self.grad(r, c);
            }
    };
    return push(std::move(n));
}

Ref Graph::mul_colwise(Ref a, Ref col) {
    const Tensor& ta = value(a);
    const Tensor& tc = value(col);
    if (tc.cols() != 1 || tc.rows() != ta.rows())
        throw DimensionError("mul_colwise: column must be [" + std::to_string(ta.rows()) +
                             ", 1], got " + tc.shape_str());
    Tensor out = ta;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= tc.values[r];
    Node n;
    n.value = std::move(out);
    int ia = a.id, ic = col.id;
    n.back = [ia, ic](Graph& g, Node& self) {
        const Tensor& ta = g.nodes_[static_cast<std::size_t>(ia)].value;
        const Tensor& tc = g.nodes_[static_cast<std::size_t>(ic)].value;
        Tensor& ga = g.grad_of(ia);
        Tensor& gc = g.grad_of(ic);
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
            for (std::size_t c = 0; c < self.grad.cols(); ++c) {
                ga(r, c) += self.grad(r, c) * tc.values[r];
                gc.values[r] += self.grad(r, c) * ta(r, c);
            }
    };
    return push(std::move(n));
}

Ref Graph::scale(Ref a, double c) {
    Tensor out = value(a);
    for (double& v : out.values) v *= c;
    Node n;
    n.value = std::move(out);
    int ia = a.id;
    n.back = [ia, c](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        for (std::size_t i = 0; i < self.grad.size(); ++i) ga.values[i] += c * self.grad.values[i];
    };
    return push(std::move(n));
}

Ref Graph::sigmoid(Ref a) {
    Tensor out = value(a);
    for (double& v : out.values) v = 1.0 / (1.0 + std::exp(-v));
    Node n;
    n.value = std::move(out);
    int ia = a.id;
    n.back = [ia](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            double y = self.value.values[i];
            ga.values[i] += self.grad.values[i] * y * (1.0 - y);
        }
    };
    return push(std::move(n));
}

Ref Graph::tanh_fn(Ref a) {
    Tensor out = value(a);
    for (double& v : out.values) v = std::tanh(v);
    Node n;
    n.value = std::move(out);
    int ia = a.id;
    n.back = [ia](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            double y = self.value.values[i];
            ga.values[i] += self.grad.values[i] * (1.0 - y * y);
        }
    };
    return push(std::move(n));
}

Ref Graph::exp_fn(Ref a) {
    Tensor out = value(a);
    for (double& v : out.values) v = std::exp(v);
    Node n;
    n.value = std::move(out);
    int ia = a.id;
    n.back = [ia](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            ga.values[i] += self.grad.values[i] * self.value.values[i];
    };
    return push(std::move(n));
}

Ref Graph::square(Ref a) {
    const Tensor& ta = value(a);
    Tensor out = ta;
    for (double& v : out.values) v *= v;
    Node n;
    n.value = std::move(out);
    int ia = a.id;
    n.back = [ia](Graph& g, Node& self) {
        const Tensor& ta = g.nodes_[static_cast<std::size_t>(ia)].value;
        Tensor& ga = g.grad_of(ia);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            ga.values[i] += self.grad.values[i] * 2.0 * ta.values[i];
    };
    return push(std::move(n));
}

Ref Graph::log_softmax_rows(Ref a) {
    const Tensor& ta = value(a);
    Tensor out = ta;
    for (std::size_t r = 0; r < ta.rows(); ++r) {
        double mx = -1e308;
        for (std::size_t c = 0; c < ta.cols(); ++c) mx = std::max(mx, ta(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < ta.cols(); ++c) sum += std::exp(ta(r, c) - mx);
        double lse = mx + std::log(sum);
        for (std::size_t c = 0; c < ta.cols(); ++c) out(r, c) = ta(r, c) - lse;
    }
    Node n;
    n.value = std::move(out);
    int ia = a.id;
    n.back = [ia](Graph& g, Node& self) {
        // d/dx_j = dy_j - softmax_j * sum_k dy_k
        Tensor& ga = g.grad_of(ia);
        for (std::size_t r = 0; r < self.grad.rows(); ++r) {
            double gsum = 0.0;
            for (std::size_t c = 0; c < self.grad.cols(); ++c) gsum += self.grad(r, c);
            for (std::size_t c = 0; c < self.grad.cols(); ++c)
                ga(r, c) += self.grad(r, c) - std::exp(self.value(r, c)) * gsum;
        }
    };
    return push(std::move(n));
}

Ref Graph::logsumexp_rows(Ref a) {
    const Tensor& ta = value(a);
    Tensor out(ta.rows(), 1);
    for (std::size_t r = 0; r < ta.rows(); ++r) {
        double mx = -1e308;
        for (std::size_t c = 0; c < ta.cols(); ++c) mx = std::max(mx, ta(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < ta.cols(); ++c) sum += std::exp(ta(r, c) - mx);
        out(r, 0) = mx + std::log(sum);
    }
    Node n;
    n.value = std::move(out);
    int ia = a.id;
    n.back = [ia](Graph& g, Node& self) {
        const Tensor& ta = g.nodes_[static_cast<std::size_t>(ia)].value;
        Tensor& ga = g.grad_of(ia);
        for (std::size_t r = 0; r < ta.rows(); ++r)
            for (std::size_t c = 0; c < ta.cols(); ++c)
                ga(r, c) += self.grad(r, 0) * std::exp(ta(r, c) - self.value(r, 0));
    };
    return push(std::move(n));
}

Ref Graph::gather_cols(Ref a, std::vector<int> idx) {
    const Tensor& ta = value(a);
    if (idx.size() != ta.rows()) throw DimensionError("gather_cols: one index per row required");
    Tensor out(ta.rows(), 1);
    for (std::size_t r = 0; r < ta.rows(); ++r) {
        int c = idx[r];
        if (c < 0 || static_cast<std::size_t>(c) >= ta.cols())
            throw DimensionError("gather_cols: index out of range: " + std::to_string(c));
        out(r, 0) = ta(r, static_cast<std::size_t>(c));
    }
    Node n;
    n.value = std::move(out);
    int ia = a.id;
    auto indices = std::make_shared<std::vector<int>>(std::move(idx));
    n.back = [ia, indices](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
            ga(r, static_cast<std::size_t>((*indices)[r])) += self.grad(r, 0);
    };
    return push(std::move(n));
}

Ref Graph::concat_cols(Ref a, Ref b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rows() != tb.rows())
        throw DimensionError("concat_cols: row counts differ: " + ta.shape_str() + " vs " +
                             tb.shape_str());
    Tensor out(ta.rows(), ta.cols() + tb.cols());
    for (std::size_t r = 0; r < ta.rows(); ++r) {
        for (std::size_t c = 0; c < ta.cols(); ++c) out(r, c) = ta(r, c);
        for (std::size_t c = 0; c < tb.cols(); ++c) out(r, ta.cols() + c) = tb(r, c);
    }
    Node n;
    n.value = std::move(out);
    int ia = a.id, ib = b.id;
    std::size_t na = ta.cols();
    n.back = [ia, ib, na](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        Tensor& gb = g.grad_of(ib);
        for (std::size_t r = 0; r < self.grad.rows(); ++r) {
            for (std::size_t c = 0; c < na; ++c) ga(r, c) += self.grad(r, c);
            for (std::size_t c = na; c < self.grad.cols(); ++c) gb(r, c - na) += self.grad(r, c);
        }
    };
    return push(std::move(n));
}

Ref Graph::slice_cols(Ref a, std::size_t start, std::size_t len) {
    const Tensor& ta = value(a);
    if (start + len > ta.cols()) throw DimensionError("slice_cols: range out of bounds");
    Tensor out(ta.rows(), len);
    for (std::size_t r = 0; r < ta.rows(); ++r)
        for (std::size_t c = 0; c < len; ++c) out(r, c) = ta(r, start + c);
    Node n;
    n.value = std::move(out);
    int ia = a.id;
    n.back = [ia, start, len](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
            for (std::size_t c = 0; c < len; ++c) ga(r, start + c) += self.grad(r, c);
    };
    return push(std::move(n));
}

Ref Graph::sum_cols(Ref a) {
    const Tensor& ta = value(a);
    Tensor out(ta.rows(), 1);
    for (std::size_t r = 0; r < ta.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < ta.cols(); ++c) s += ta(r, c);
        out(r, 0) = s;
    }
    Node n;
    n.value = std::move(out);
    int ia = a.id;
    n.back = [ia](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        for (std::size_t r = 0; r < ga.rows(); ++r)
            for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += self.grad(r, 0);
    };
    return push(std::move(n));
}

Ref Graph::sum_all(Ref a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (double v : ta.values) s += v;
    Node n;
    n.value = Tensor::scalar(s);
    int ia = a.id;
    n.back = [ia](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        for (double& v : ga.values) v += self.grad.values[0];
    };
    return push(std::move(n));
}

Ref Graph::mean_all(Ref a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (double v : ta.values) s += v;
    double inv = ta.size() ? 1.0 / static_cast<double>(ta.size()) : 0.0;
    Node n;
    n.value = Tensor::scalar(s * inv);
    int ia = a.id;
    n.back = [ia, inv](Graph& g, Node& self) {
        Tensor& ga = g.grad_of(ia);
        for (double& v : ga.values) v += self.grad.values[0] * inv;
    };
    return push(std::move(n));
}

double Graph::scalar_value(Ref r) const {
    const Tensor& t = value(r);
    if (t.size() != 1) throw DimensionError("scalar_value: tensor is not a scalar");
    return t.values[0];
}

void Graph::backward(Ref loss) {
    Node& top = node(loss);
    if (top.value.size() != 1) throw UsageError("backward: loss must be a scalar");
    top.grad = Tensor::scalar(1.0);
    top.grad_set = true;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.grad_set) continue;
        if (n.back) {
            n.back(*this, n);
        } else if (n.store != nullptr) {
            n.store->accumulate_grad(n.pname, n.grad);
        }
    }
}

}  // namespace offrec::nn
