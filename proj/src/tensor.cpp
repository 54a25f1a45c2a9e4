#include "hazardops/tensor.hpp"

#include "hazardops/errors.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace hazardops::ad {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

void TensorData::ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void TensorData::zero_grad() {
    grad.assign(values.size(), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("Tensor: shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    }
    for (std::size_t d : shape) {
        if (d == 0) throw DimensionError("Tensor: zero-sized dimension");
    }
    node_ = std::make_shared<TensorData>();
    node_->shape = std::move(shape);
    node_->values = std::move(values);
    node_->requires_grad = requires_grad;
    node_->needs_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

double Tensor::value() const {
    if (size() != 1) {
        throw DimensionError("Tensor::value: tensor of shape " + shape_str(shape()) +
                             " is not a scalar");
    }
    return node_->values[0];
}

double Tensor::grad_value() const {
    if (size() != 1) {
        throw DimensionError("Tensor::grad_value: not a scalar");
    }
    return node_->grad.empty() ? 0.0 : node_->grad[0];
}

void Tape::record(std::vector<std::shared_ptr<TensorData>> outputs,
                  std::function<void()> backward) {
    entries_.push_back(Entry{std::move(outputs), std::move(backward)});
}

void Tape::clear() {
    entries_.clear();
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined()) throw StateError("backward: undefined loss tensor");
    if (loss.size() != 1) {
        throw DimensionError("backward: loss must be scalar, got shape " +
                             shape_str(loss.shape()));
    }
    // Intermediate grads belong to this pass only; leaves keep accumulating.
    for (auto& entry : entries_) {
        for (auto& out : entry.outputs) out->zero_grad();
    }
    auto loss_node = loss.node();
    if (loss_node->needs_grad) {
        loss_node->ensure_grad();
        loss_node->grad[0] += 1.0;
    }
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        it->backward();
    }
}

namespace {
thread_local Tape g_tape;
}

Tape& active_tape() {
    return g_tape;
}

void clear_tape() {
    g_tape.clear();
}

void backward(const Tensor& loss) {
    g_tape.backward(loss);
}

void check_finite(const TensorData& data, const char* op_name) {
    for (double v : data.values) {
        if (!std::isfinite(v)) {
            throw NumericalError(std::string(op_name) + ": non-finite value in output");
        }
    }
}

} // namespace hazardops::ad
