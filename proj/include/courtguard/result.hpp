#pragma once

#include <cassert>
#include <utility>
#include <variant>

namespace courtguard {

/// Value-or-error holder. Stands in for std::expected until the codebase
/// moves past C++20.
template <typename T, typename E>
class Result {
public:
    Result(T value) : data_(std::in_place_index<0>, std::move(value)) {}
    Result(E error) : data_(std::in_place_index<1>, std::move(error)) {}

    bool ok() const noexcept { return data_.index() == 0; }
    explicit operator bool() const noexcept { return ok(); }

    const T& value() const& {
        assert(ok());
        return std::get<0>(data_);
    }
    T& value() & {
        assert(ok());
        return std::get<0>(data_);
    }
    T&& value() && {
        assert(ok());
        return std::get<0>(std::move(data_));
    }

    const E& error() const& {
        assert(!ok());
        return std::get<1>(data_);
    }
    E& error() & {
        assert(!ok());
        return std::get<1>(data_);
    }
    E&& error() && {
        assert(!ok());
        return std::get<1>(std::move(data_));
    }

    const T* operator->() const { return &value(); }
    const T& operator*() const& { return value(); }

private:
    std::variant<T, E> data_;
};

}  // namespace courtguard
