// Dense rank-4 tensor (batch, channels, height, width), double precision,
// row-major with w fastest. All numeric kernels in the library operate on
// this type.
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fgwarp {

struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t count() const {
        return std::size_t(n) * std::size_t(c) * std::size_t(h) * std::size_t(w);
    }
    bool operator==(const Shape4&) const = default;
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

class Tensor4 {
public:
    Tensor4() = default;
    Tensor4(int n, int c, int h, int w, double fill = 0.0) : shape_{n, c, h, w} {
        if (n <= 0 || c <= 0 || h <= 0 || w <= 0)
            throw std::invalid_argument("Tensor4: dims must be positive, got " + shape_.str());
        data_.assign(shape_.count(), fill);
    }
    explicit Tensor4(Shape4 s, double fill = 0.0) : Tensor4(s.n, s.c, s.h, s.w, fill) {}

    static Tensor4 from_data(Shape4 s, std::vector<double> values) {
        Tensor4 t(s);
        if (values.size() != t.size())
            throw std::invalid_argument("Tensor4::from_data: " + std::to_string(values.size()) +
                                        " values for shape " + s.str());
        t.data_ = std::move(values);
        return t;
    }

    const Shape4& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    double at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    // offset of the (n, c) plane; inner loops then index y * w + x directly
    std::size_t plane(int n, int c) const {
        return (std::size_t(n) * shape_.c + c) * (std::size_t(shape_.h) * shape_.w);
    }

    bool same_shape(const Tensor4& o) const { return shape_ == o.shape_; }

    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

private:
    std::size_t index(int n, int c, int y, int x) const {
        return ((std::size_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    Shape4 shape_;
    std::vector<double> data_;
};

// 2-D convolution parameters. Kernel layout (out_c, in_c, kh, kw); odd kernel
// sizes only, symmetric zero padding.
struct ConvParams {
    Tensor4 weight;            // (out_c, in_c, kh, kw)
    std::vector<double> bias;  // out_c
    int stride = 1;
    int pad = 0;

    ConvParams() = default;
    ConvParams(int out_c, int in_c, int kh, int kw, int stride_ = 1, int pad_ = 0)
        : weight(out_c, in_c, kh, kw), bias(std::size_t(out_c), 0.0), stride(stride_), pad(pad_) {
        validate();
    }

    int out_channels() const { return weight.n(); }
    int in_channels() const { return weight.c(); }

    void validate() const {
        if (weight.h() % 2 == 0 || weight.w() % 2 == 0)
            throw std::invalid_argument("ConvParams: kernel dims must be odd, got " +
                                        weight.shape().str());
        if (stride < 1) throw std::invalid_argument("ConvParams: stride must be >= 1");
        if (pad < 0) throw std::invalid_argument("ConvParams: pad must be >= 0");
        if (bias.size() != std::size_t(weight.n()))
            throw std::invalid_argument("ConvParams: bias length " + std::to_string(bias.size()) +
                                        " != out channels " + std::to_string(weight.n()));
    }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace fgwarp
