#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>

#include "cnmm/errors.hpp"

namespace cnmm {

// Dense row-major extents, rank 0 (scalar) through 4 (NCHW feature maps).
class Shape {
public:
    Shape() = default;

    Shape(std::initializer_list<int> dims) {
        if (dims.size() > 4) throw ValidationError("Shape: rank > 4 not supported");
        rank_ = static_cast<int>(dims.size());
        int i = 0;
        for (int d : dims) {
            if (d <= 0) throw ValidationError("Shape: non-positive extent");
            d_[i++] = d;
        }
    }

    static Shape scalar() { return Shape{}; }

    int rank() const { return rank_; }

    int dim(int i) const {
        if (i < 0 || i >= rank_) throw ValidationError("Shape: dim index out of range");
        return d_[i];
    }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int i = 0; i < rank_; ++i) n *= d_[i];
        return n;
    }

    bool operator==(const Shape& o) const {
        if (rank_ != o.rank_) return false;
        for (int i = 0; i < rank_; ++i)
            if (d_[i] != o.d_[i]) return false;
        return true;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        std::ostringstream ss;
        ss << '[';
        for (int i = 0; i < rank_; ++i) ss << (i ? "," : "") << d_[i];
        ss << ']';
        return ss.str();
    }

private:
    std::array<int, 4> d_{1, 1, 1, 1};
    int rank_ = 0;
};

}  // namespace cnmm
