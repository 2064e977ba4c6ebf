#pragma once

#include "otfs/types.hpp"

namespace otfs::detail {

enum class Sign { negative, positive };

// Unnormalized 2D DFT over a row-major rows x cols grid, with an independent
// exponent sign per axis: sum exp(+-j2pi r k / rows) exp(+-j2pi c l / cols).
CVec dft2(const CVec& values, std::size_t rows, std::size_t cols, Sign row_sign, Sign col_sign);

}  // namespace otfs::detail
