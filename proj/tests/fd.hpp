// Central finite differences for gradient tests.
#pragma once

#include "slat/common.hpp"

#include <algorithm>
#include <functional>

namespace fd {

inline slat::Matrix gradient(const std::function<double()>& loss, slat::Matrix& param,
                             double h = 1e-5) {
    slat::Matrix g(param.rows(), param.cols());
    for (slat::Index i = 0; i < param.size(); ++i) {
        const double saved = param.data()[i];
        param.data()[i] = saved + h;
        const double up = loss();
        param.data()[i] = saved - h;
        const double down = loss();
        param.data()[i] = saved;
        g.data()[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double rel_error(const slat::Matrix& a, const slat::Matrix& n) {
    const double scale = std::max({a.norm(), n.norm(), 1e-12});
    return (a - n).norm() / scale;
}

}  // namespace fd
