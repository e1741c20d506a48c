#pragma once

#include <functional>
#include <string>
#include <vector>

#include "offrec/params.hpp"
#include "offrec/tensor.hpp"

namespace offrec::nn {

// Define-by-run reverse-mode tape. A Graph is built fresh for every forward
// pass; node creation order is a topological order, so backward() is a single
// reverse sweep. Parameter leaves push their gradients back into the owning
// ParamStore.
class Graph {
 public:
    struct Ref {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    Ref input(Tensor t);
    Ref param(ParamStore& store, const std::string& name);
    // rows of store[name] selected by id; backward scatter-adds
    Ref embedding(ParamStore& store, const std::string& name, const std::vector<int>& ids);

    Ref matmul(Ref a, Ref b);
    Ref add(Ref a, Ref b);
    Ref sub(Ref a, Ref b);
    Ref mul(Ref a, Ref b);
    Ref add_rowwise(Ref a, Ref bias);  // bias [1, n] broadcast over rows
    Ref add_colwise(Ref a, Ref col);   // col [m, 1] broadcast over columns
    Ref mul_colwise(Ref a, Ref col);   // col [m, 1] broadcast over columns
    Ref scale(Ref a, double c);
    Ref sigmoid(Ref a);
    Ref tanh_fn(Ref a);
    Ref exp_fn(Ref a);
    Ref square(Ref a);
    Ref log_softmax_rows(Ref a);
    Ref softmax_rows(Ref a) { return exp_fn(log_softmax_rows(a)); }
    Ref logsumexp_rows(Ref a);                     // [m, 1]
    Ref gather_cols(Ref a, std::vector<int> idx);  // [m, 1], picks a(i, idx[i])
    Ref concat_cols(Ref a, Ref b);
    Ref slice_cols(Ref a, std::size_t start, std::size_t len);
    Ref sum_cols(Ref a);  // [m, 1]
    Ref sum_all(Ref a);
    Ref mean_all(Ref a);

    const Tensor& value(Ref r) const { return node(r).value; }
    double scalar_value(Ref r) const;

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Accumulates
    // into every reachable ParamStore leaf.
    void backward(Ref loss);

    std::size_t size() const { return nodes_.size(); }

 private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool grad_set = false;
        std::function<void(Graph&, Node&)> back;  // reads own grad, pushes to parents
        ParamStore* store = nullptr;              // param/embedding leaves only
        std::string pname;
        std::vector<int> ids;  // embedding lookups
    };

    Node& node(Ref r) {
        if (!r.valid() || r.id >= static_cast<int>(nodes_.size()))
            throw UsageError("invalid graph ref");
        return nodes_[static_cast<std::size_t>(r.id)];
    }
    const Node& node(Ref r) const {
        if (!r.valid() || r.id >= static_cast<int>(nodes_.size()))
            throw UsageError("invalid graph ref");
        return nodes_[static_cast<std::size_t>(r.id)];
    }

    Ref push(Node n) {
        nodes_.push_back(std::move(n));
        return Ref{static_cast<int>(nodes_.size()) - 1};
    }

    // Lazily allocated gradient accumulator for a parent node.
    Tensor& grad_of(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.grad_set) {
            n.grad = Tensor::zeros_like(n.value);
            n.grad_set = true;
        }
        return n.grad;
    }

    std::vector<Node> nodes_;
};

using Ref = Graph::Ref;

}  // namespace offrec::nn
