#pragma once

#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "avp/tensor.hpp"

namespace avp {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the computation graph. Leaves have no inputs; a leaf with
// requires_grad set is a trainable parameter.
struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::string_view op = "leaf";
    std::vector<NodePtr> inputs;
    // Reads this node's grad and accumulates into inputs that require grad.
    std::function<void(Node&)> backward;

    // Returns the grad buffer, allocating zeros on first use.
    Tensor& grad_buffer();
};

// Handle to a graph node. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return node_->has_grad; }
    const Tensor& grad() const;
    void clear_grad();
    std::string_view op() const { return node_->op; }

    Node& node() const { return *node_; }
    const NodePtr& ptr() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    NodePtr node_;
};

Var parameter(Tensor value);
Var constant(Tensor value);

// Creates an op result. When no input requires grad the result is a constant
// and `backward` is dropped along with the input references.
Var make_result(Tensor value, std::vector<Var> inputs, std::string_view op,
                std::function<void(Node&)> backward);

// Reverse sweep from a scalar loss. Leaf grads accumulate across calls;
// intermediate grads are reset at the start of every sweep.
void backward(const Var& loss);

}  // namespace avp
