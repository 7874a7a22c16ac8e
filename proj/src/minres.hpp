#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gpspike/errors.hpp"

namespace gpspike::detail {

using Vec = std::vector<double>;

inline double vdot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// Preconditioned MINRES (Paige-Saunders recurrences) for symmetric A and SPD M^{-1}.
inline int minres(const std::function<void(const Vec&, Vec&)>& A, const std::function<void(const Vec&, Vec&)>& Minv,
           const Vec& b, Vec& x, double tol, int max_iter) {
    const std::size_t n = b.size();
    x.assign(n, 0.0);
    Vec r1 = b, r2 = b, y(n), v(n), w(n, 0.0), w1(n, 0.0), w2(n, 0.0);
    Minv(r1, y);
    const double beta1 = std::sqrt(std::max(0.0, vdot(r1, y)));
    if (beta1 == 0.0) return 0;
    double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1, cs = -1.0, sn = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        const double s = 1.0 / beta;
        for (std::size_t k = 0; k < n; ++k) v[k] = s * y[k];
        A(v, y);
        if (it >= 2)
            for (std::size_t k = 0; k < n; ++k) y[k] -= (beta / oldb) * r1[k];
        const double alfa = vdot(v, y);
        for (std::size_t k = 0; k < n; ++k) y[k] -= (alfa / beta) * r2[k];
        r1.swap(r2);
        r2 = y;
        Minv(r2, y);
        oldb = beta;
        beta = std::sqrt(std::max(0.0, vdot(r2, y)));
        const double oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        const double gamma = std::max(std::hypot(gbar, beta), 1e-300);
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar *= sn;
        w1.swap(w2);
        w2.swap(w);
        for (std::size_t k = 0; k < n; ++k) {
            w[k] = (v[k] - oldeps * w1[k] - delta * w2[k]) / gamma;
            x[k] += phi * w[k];
        }
        if (phibar < tol * beta1 || beta == 0.0) return it;
    }
    throw Error(ErrorKind::NoConvergence, "MINRES did not reach the requested residual");
}

}  // namespace gpspike::detail
