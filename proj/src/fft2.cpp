#include "otfs/detail/fft2.hpp"

#include <unsupported/Eigen/FFT>

namespace otfs::detail {

namespace {

void transform(Eigen::FFT<double>& fft, CVec& line, CVec& out, Sign sign) {
    // Eigen's fwd uses exp(-j...), inv uses exp(+j...); Unscaled keeps inv raw.
    if (sign == Sign::negative) {
        fft.fwd(out, line);
    } else {
        fft.inv(out, line);
    }
}

}  // namespace

CVec dft2(const CVec& values, std::size_t rows, std::size_t cols, Sign row_sign, Sign col_sign) {
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);

    CVec result(values);
    CVec line(cols), out(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(result.begin() + static_cast<std::ptrdiff_t>(r * cols), cols, line.begin());
        transform(fft, line, out, col_sign);
        std::copy_n(out.begin(), cols, result.begin() + static_cast<std::ptrdiff_t>(r * cols));
    }
    line.assign(rows, {});
    out.assign(rows, {});
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) line[r] = result[r * cols + c];
        transform(fft, line, out, row_sign);
        for (std::size_t r = 0; r < rows; ++r) result[r * cols + c] = out[r];
    }
    return result;
}

}  // namespace otfs::detail
