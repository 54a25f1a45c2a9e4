#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hazardops::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Storage node shared by tensor handles. Gradients of leaves with
// requires_grad accumulate across backward calls; gradients of taped
// intermediates are scratch space owned by the backward pass.
struct TensorData {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad; // allocated on first use, same length as values
    bool requires_grad = false;
    bool needs_grad = false; // requires_grad, or computed from something that does

    void ensure_grad();
    void zero_grad();
};

// Value-semantics handle onto a TensorData node. Copies alias the node.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->values.size(); }
    std::size_t rank() const { return node_->shape.size(); }

    std::span<const double> values() const { return node_->values; }
    std::span<double> values_mut() { return node_->values; }
    std::span<const double> grad() const { return node_->grad; }

    bool requires_grad() const { return node_->requires_grad; }
    bool needs_grad() const { return node_->needs_grad; }

    // Scalar access; throws DimensionError unless the tensor has one element.
    double value() const;
    double grad_value() const;

    double operator[](std::size_t i) const { return node_->values[i]; }

    void zero_grad() { node_->zero_grad(); }

    std::shared_ptr<TensorData> node() const { return node_; }

private:
    std::shared_ptr<TensorData> node_;
};

// Define-by-run tape. Records one entry per forward op in execution order
// (inputs always precede consumers); the backward pass walks entries exactly
// once in reverse. The tape is meant to be cleared and rebuilt every
// forward pass.
class Tape {
public:
    struct Entry {
        // Output nodes of the op; their grad buffers are reset at the start
        // of every backward pass so repeated passes stay independent.
        std::vector<std::shared_ptr<TensorData>> outputs;
        std::function<void()> backward;
    };

    void record(std::vector<std::shared_ptr<TensorData>> outputs,
                std::function<void()> backward);

    void clear();
    std::size_t size() const { return entries_.size(); }

    // Seeds d(loss)/d(loss) = 1 and propagates through all entries in
    // reverse. Leaf gradients accumulate; call zero_grad between steps.
    void backward(const Tensor& loss);

private:
    std::vector<Entry> entries_;
};

// Thread-confined active tape used implicitly by all ops.
Tape& active_tape();
void clear_tape();

// Convenience wrapper over active_tape().backward(loss).
void backward(const Tensor& loss);

// Throws NumericalError if any value is NaN/Inf. Called by every op on its
// outputs so non-finite results surface at the op that produced them.
void check_finite(const TensorData& data, const char* op_name);

} // namespace hazardops::ad
