#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "fruitnet/prng.hpp"

namespace fruitnet {

// Row-major shape. Image tensors are NCHW, dense activations are [N, features].
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }
    explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

    std::size_t rank() const { return dims_.size(); }
    std::size_t operator[](std::size_t i) const { return dims_[i]; }
    const std::vector<std::size_t>& dims() const { return dims_; }

    std::size_t count() const {
        std::size_t n = 1;
        for (std::size_t d : dims_) n *= d;
        return n;
    }

    bool operator==(const Shape& o) const { return dims_ == o.dims_; }
    bool operator!=(const Shape& o) const { return dims_ != o.dims_; }

    std::string str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

private:
    void validate() const {
        if (dims_.empty()) throw std::invalid_argument("Shape: rank must be >= 1");
        std::size_t n = 1;
        for (std::size_t d : dims_) {
            if (d == 0) throw std::invalid_argument("Shape: every extent must be >= 1");
            if (__builtin_mul_overflow(n, d, &n))
                throw std::invalid_argument("Shape: element count overflows size_t");
        }
    }

    std::vector<std::size_t> dims_;
};

// Dense N-dimensional array. T is float or double; gradient checking requires
// double. All public operations produce finite elements unless documented.
template <class T>
class Tensor {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                  "Tensor supports float and double only");

public:
    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)), data_(shape_.count(), fill) {}

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.rank(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    // Same data, new geometry. Element count must match.
    Tensor reshaped(Shape s) const {
        if (s.count() != size())
            throw std::invalid_argument("reshape: element count mismatch " + shape_.str() +
                                        " -> " + s.str());
        Tensor out = *this;
        out.shape_ = std::move(s);
        return out;
    }

    bool operator==(const Tensor& o) const {
        return shape_ == o.shape_ && data_ == o.data_;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

namespace detail {
inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.str() +
                                    " vs " + b.str());
}
}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a.shape(), b.shape(), "add");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a.shape(), b.shape(), "sub");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a.shape(), b.shape(), "mul");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

namespace detail {

// Raw accumulating kernels shared by matmul and the im2col convolution path.
// k-middle loop order keeps the inner loop a contiguous multiply-add over
// rows of B, which the compiler vectorizes.

// C(m,n) += A(m,k) * B(k,n)
template <class T>
void gemm(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        const T* arow = a + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = arow[kk];
            const T* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C(m,n) += A(m,k) * B(n,k)^T  (row-by-row dot products)
template <class T>
void gemm_bt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = 0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            c[i * n + j] += acc;
        }
    }
}

// C(m,n) += A(k,m)^T * B(k,n)
template <class T>
void gemm_at(std::size_t k, std::size_t m, std::size_t n, const T* a, const T* b, T* c) {
    for (std::size_t kk = 0; kk < k; ++kk) {
        const T* arow = a + kk * m;
        const T* brow = b + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = arow[i];
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

// C = A(m,k) * B(k,n), double-precision accumulation when T = double.
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: operands must be rank 2, got " +
                                    a.shape().str() + " and " + b.shape().str());
    if (a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: inner dimensions disagree " +
                                    a.shape().str() + " x " + b.shape().str());
    Tensor<T> c(Shape{a.dim(0), b.dim(1)});
    detail::gemm(a.dim(0), a.dim(1), b.dim(1), a.data(), b.data(), c.data());
    return c;
}

// C = A(m,k) * B(n,k)^T
template <class T>
Tensor<T> matmul_bt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw std::invalid_argument("matmul_bt: incompatible shapes " + a.shape().str() +
                                    " x " + b.shape().str() + "^T");
    Tensor<T> c(Shape{a.dim(0), b.dim(0)});
    detail::gemm_bt(a.dim(0), a.dim(1), b.dim(0), a.data(), b.data(), c.data());
    return c;
}

// C = A(k,m)^T * B(k,n)
template <class T>
Tensor<T> matmul_at(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
        throw std::invalid_argument("matmul_at: incompatible shapes " + a.shape().str() +
                                    "^T x " + b.shape().str());
    Tensor<T> c(Shape{a.dim(1), b.dim(1)});
    detail::gemm_at(a.dim(0), a.dim(1), b.dim(1), a.data(), b.data(), c.data());
    return c;
}

// Every element uniform in [lo, hi); the stream is a pure function of the
// Prng state, so equal seeds give byte-identical tensors.
template <class T>
Tensor<T> uniform_fill(Prng& prng, const Shape& shape, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("uniform_fill: lo must be < hi");
    Tensor<T> out(shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
        T v = static_cast<T>(prng.uniform(lo, hi));
        if (v >= static_cast<T>(hi)) v = static_cast<T>(lo);
        out[i] = v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// FNT1 dump format: "FNT1", width byte (4|8), rank byte, rank x u32 LE dims,
// then raw little-endian elements row-major.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("FNT1: truncated while reading u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

template <class T>
void put_scalar_le(std::ostream& os, T v) {
    if constexpr (sizeof(T) == 4) {
        put_u32_le(os, std::bit_cast<std::uint32_t>(v));
    } else {
        std::uint64_t u = std::bit_cast<std::uint64_t>(v);
        put_u32_le(os, static_cast<std::uint32_t>(u));
        put_u32_le(os, static_cast<std::uint32_t>(u >> 32));
    }
}

template <class T>
T get_scalar_le(std::istream& is) {
    if constexpr (sizeof(T) == 4) {
        return std::bit_cast<T>(get_u32_le(is));
    } else {
        std::uint64_t lo = get_u32_le(is);
        std::uint64_t hi = get_u32_le(is);
        return std::bit_cast<T>(lo | (hi << 32));
    }
}

}  // namespace detail

template <class T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
    os.write("FNT1", 4);
    unsigned char meta[2] = {static_cast<unsigned char>(sizeof(T)),
                             static_cast<unsigned char>(t.rank())};
    os.write(reinterpret_cast<const char*>(meta), 2);
    for (std::size_t d : t.shape().dims())
        detail::put_u32_le(os, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size(); ++i) detail::put_scalar_le(os, t[i]);
    if (!os) throw std::runtime_error("FNT1: write failed");
}

// Reads header only; reports the stored element width (4 or 8).
inline int peek_tensor_width(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "FNT1", 4) != 0)
        throw std::runtime_error("FNT1: bad magic");
    int width = is.get();
    if (width != 4 && width != 8)
        throw std::runtime_error("FNT1: bad width code " + std::to_string(width));
    return width;
}

template <class T>
Tensor<T> read_tensor(std::istream& is) {
    int width = peek_tensor_width(is);
    if (width != static_cast<int>(sizeof(T)))
        throw std::runtime_error("FNT1: stored width " + std::to_string(width) +
                                 " does not match requested element size " +
                                 std::to_string(sizeof(T)));
    int rank = is.get();
    if (rank <= 0 || rank > 8) throw std::runtime_error("FNT1: bad rank");
    std::vector<std::size_t> dims(static_cast<std::size_t>(rank));
    for (auto& d : dims) d = detail::get_u32_le(is);
    Tensor<T> t{Shape(dims)};
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = detail::get_scalar_le<T>(is);
    return t;
}

}  // namespace fruitnet
