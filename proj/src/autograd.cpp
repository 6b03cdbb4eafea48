#include "avp/autograd.hpp"

#include <unordered_set>

#include "avp/errors.hpp"

namespace avp {

Tensor& Node::grad_buffer() {
    if (!has_grad) {
        grad = Tensor(value.shape(), 0.0);
        has_grad = true;
    }
    return grad;
}

const Tensor& Var::grad() const {
    if (!node_->has_grad) throw ContractError("gradient requested for a node that has none");
    return node_->grad;
}

void Var::clear_grad() {
    node_->has_grad = false;
    node_->grad = Tensor();
}

Var parameter(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    return Var(std::move(node));
}

Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = "const";
    return Var(std::move(node));
}

Var make_result(Tensor value, std::vector<Var> inputs, std::string_view op,
                std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = op;
    for (const Var& v : inputs) node->requires_grad = node->requires_grad || v.requires_grad();
    if (node->requires_grad) {
        node->inputs.reserve(inputs.size());
        for (Var& v : inputs) node->inputs.push_back(v.ptr());
        node->backward = std::move(backward_fn);
    }
    return Var(std::move(node));
}

void backward(const Var& loss) {
    if (loss.value().numel() != 1) {
        throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS; reversed it is a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.ptr().get(), 0);
    visited.insert(loss.ptr().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (!n->inputs.empty()) {
            n->has_grad = false;
            n->grad = Tensor();
        }
    }
    loss.node().grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && n->has_grad) n->backward(*n);
    }
}

}  // namespace avp
