#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "stationing/core/error.hpp"

namespace stationing::numerics {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) {
        STATIONING_REQUIRE(e >= 0, "negative extent in shape");
        n *= e;
    }
    return n;
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

// Shared handle to a dense array with an optional gradient buffer. Copies
// alias the same storage; use clone() for a deep copy. The engine runs in
// float32; the double instantiation exists for finite-difference checks.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;

    static BasicTensor zeros(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), T(0), requires_grad);
    }

    static BasicTensor full(Shape shape, T value, bool requires_grad = false) {
        auto impl = std::make_shared<Impl>();
        const auto n = shape_numel(shape);
        impl->shape = std::move(shape);
        impl->values.assign(static_cast<std::size_t>(n), value);
        impl->requires_grad = requires_grad;
        return BasicTensor(std::move(impl));
    }

    static BasicTensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
        STATIONING_REQUIRE(shape_numel(shape) == static_cast<std::int64_t>(values.size()),
                           "value count " + std::to_string(values.size()) + " does not match shape " +
                               shape_string(shape));
        auto impl = std::make_shared<Impl>();
        impl->shape = std::move(shape);
        impl->values = std::move(values);
        impl->requires_grad = requires_grad;
        return BasicTensor(std::move(impl));
    }

    static BasicTensor scalar(T value, bool requires_grad = false) { return from({1}, {value}, requires_grad); }

    bool defined() const noexcept { return impl_ != nullptr; }
    const Shape& shape() const { return impl().shape; }
    std::size_t rank() const { return shape().size(); }
    std::int64_t dim(std::size_t axis) const {
        STATIONING_REQUIRE(axis < rank(), "axis out of range");
        return shape()[axis];
    }
    std::int64_t numel() const { return static_cast<std::int64_t>(impl().values.size()); }

    std::span<T> values() { return impl().values; }
    std::span<const T> values() const { return impl().values; }
    T* data() { return impl().values.data(); }
    const T* data() const { return impl().values.data(); }
    T item() const {
        STATIONING_REQUIRE(numel() == 1, "item() on tensor of shape " + shape_string(shape()));
        return impl().values[0];
    }

    bool requires_grad() const { return impl().requires_grad; }
    void set_requires_grad(bool flag) { impl().requires_grad = flag; }

    bool has_grad() const { return impl().grad.size() == impl().values.size(); }
    // Gradient storage is shallow-mutable through const handles, like the
    // pointee of a shared_ptr; it allocates zeros on first use.
    std::span<T> grad() const {
        auto& d = const_cast<Impl&>(impl());
        if (d.grad.size() != d.values.size()) d.grad.assign(d.values.size(), T(0));
        return d.grad;
    }
    void zero_grad() const {
        auto g = grad();
        std::fill(g.begin(), g.end(), T(0));
    }
    void drop_grad() {
        impl().grad.clear();
        impl().grad.shrink_to_fit();
    }

    BasicTensor clone() const { return BasicTensor(std::make_shared<Impl>(impl())); }
    // Value copy without gradient state.
    BasicTensor detached() const { return from(shape(), std::vector<T>(values().begin(), values().end())); }
    bool same_storage(const BasicTensor& other) const noexcept { return impl_ == other.impl_; }

    template <typename U>
    BasicTensor<U> cast(bool requires_grad = false) const {
        std::vector<U> v(values().begin(), values().end());
        return BasicTensor<U>::from(shape(), std::move(v), requires_grad);
    }

private:
    struct Impl {
        Shape shape;
        std::vector<T> values;
        std::vector<T> grad;
        bool requires_grad = false;
    };
    explicit BasicTensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
    const Impl& impl() const {
        STATIONING_REQUIRE(impl_ != nullptr, "use of undefined tensor");
        return *impl_;
    }
    Impl& impl() {
        STATIONING_REQUIRE(impl_ != nullptr, "use of undefined tensor");
        return *impl_;
    }

    std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

}  // namespace stationing::numerics
