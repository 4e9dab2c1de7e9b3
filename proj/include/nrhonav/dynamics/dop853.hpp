#pragma once

/**
 * @file dop853.hpp
 * @brief Explicit embedded Runge-Kutta 8(5,3) integrator (Dormand-Prince coefficients,
 *        Hairer-Wanner error estimate) with a PI step-size controller.
 *
 * The integrator is a template over a fixed-size Eigen column vector so the
 * 6-state and the 42-state (state + STM) problems compile to allocation-free
 * loops. Only the first `error_dims` components enter the error norm; the
 * remaining ones ride along on the same step sequence.
 */

#include "nrhonav/core/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace nrhonav {

struct IntegratorConfig {
    double abs_tol = 1e-13;          ///< canonical units
    double rel_tol = 1e-13;
    double max_step = 50.0;          ///< canonical time units
    double min_step = 1e-12;         ///< canonical time units
    long max_steps = 2'000'000;
    double initial_step = 0.0;       ///< 0 selects an automatic guess

    void validate() const {
        if (!(abs_tol > 0 && rel_tol > 0 && min_step > 0 && min_step < max_step && max_steps > 0)) {
            throw Error(ErrorCode::InvalidArgument, "invalid integrator configuration");
        }
    }
};

namespace dop853 {

// clang-format off
inline constexpr double c2 = 0.526001519587677318785587544488e-01;
inline constexpr double c3 = 0.789002279381515978178381316732e-01;
inline constexpr double c4 = 0.118350341907227396726757197510e+00;
inline constexpr double c5 = 0.281649658092772603273242802490e+00;
inline constexpr double c6 = 0.333333333333333333333333333333e+00;
inline constexpr double c7 = 0.25e+00;
inline constexpr double c8 = 0.307692307692307692307692307692e+00;
inline constexpr double c9 = 0.651282051282051282051282051282e+00;
inline constexpr double c10 = 0.6e+00;
inline constexpr double c11 = 0.857142857142857142857142857142e+00;

inline constexpr double a21 = 5.26001519587677318785587544488e-2;
inline constexpr double a31 = 1.97250569845378994544595329183e-2;
inline constexpr double a32 = 5.91751709536136983633785987549e-2;
inline constexpr double a41 = 2.95875854768068491816892993775e-2;
inline constexpr double a43 = 8.87627564304205475450678981324e-2;
inline constexpr double a51 = 2.41365134159266685502369798665e-1;
inline constexpr double a53 = -8.84549479328286085344864962717e-1;
inline constexpr double a54 = 9.24834003261792003115737966543e-1;
inline constexpr double a61 = 3.7037037037037037037037037037e-2;
inline constexpr double a64 = 1.70828608729473871279604482173e-1;
inline constexpr double a65 = 1.25467687566822425016691814123e-1;
inline constexpr double a71 = 3.7109375e-2;
inline constexpr double a74 = 1.70252211019544039314978060272e-1;
inline constexpr double a75 = 6.02165389804559606850219397283e-2;
inline constexpr double a76 = -1.7578125e-2;
inline constexpr double a81 = 3.70920001185047927108779319836e-2;
inline constexpr double a84 = 1.70383925712239993810214054705e-1;
inline constexpr double a85 = 1.07262030446373284651809199168e-1;
inline constexpr double a86 = -1.53194377486244017527936158236e-2;
inline constexpr double a87 = 8.27378916381402288758473766002e-3;
inline constexpr double a91 = 6.24110958716075717114429577812e-1;
inline constexpr double a94 = -3.36089262944694129406857109825e0;
inline constexpr double a95 = -8.68219346841726006818189891453e-1;
inline constexpr double a96 = 2.75920996994467083049415600797e1;
inline constexpr double a97 = 2.01540675504778934086186788979e1;
inline constexpr double a98 = -4.34898841810699588477366255144e1;
inline constexpr double a101 = 4.77662536438264365890433908527e-1;
inline constexpr double a104 = -2.48811461997166764192642586468e0;
inline constexpr double a105 = -5.90290826836842996371446475743e-1;
inline constexpr double a106 = 2.12300514481811942347288949897e1;
inline constexpr double a107 = 1.52792336328824235832596922938e1;
inline constexpr double a108 = -3.32882109689848629194453265587e1;
inline constexpr double a109 = -2.03312017085086261358222928593e-2;
inline constexpr double a111 = -9.3714243008598732571704021658e-1;
inline constexpr double a114 = 5.18637242884406370830023853209e0;
inline constexpr double a115 = 1.09143734899672957818500254654e0;
inline constexpr double a116 = -8.14978701074692612513997267357e0;
inline constexpr double a117 = -1.85200656599969598641566180701e1;
inline constexpr double a118 = 2.27394870993505042818970056734e1;
inline constexpr double a119 = 2.49360555267965238987089396762e0;
inline constexpr double a1110 = -3.0467644718982195003823669022e0;
inline constexpr double a121 = 2.27331014751653820792359768449e0;
inline constexpr double a124 = -1.05344954667372501984066689879e1;
inline constexpr double a125 = -2.00087205822486249909675718444e0;
inline constexpr double a126 = -1.79589318631187989172765950534e1;
inline constexpr double a127 = 2.79488845294199600508499808837e1;
inline constexpr double a128 = -2.85899827713502369474065508674e0;
inline constexpr double a129 = -8.87285693353062954433549289258e0;
inline constexpr double a1210 = 1.23605671757943030647266201528e1;
inline constexpr double a1211 = 6.43392746015763530355970484046e-1;

inline constexpr double b1 = 5.42937341165687622380535766363e-2;
inline constexpr double b6 = 4.45031289275240888144113950566e0;
inline constexpr double b7 = 1.89151789931450038304281599044e0;
inline constexpr double b8 = -5.8012039600105847814672114227e0;
inline constexpr double b9 = 3.1116436695781989440891606237e-1;
inline constexpr double b10 = -1.52160949662516078556178806805e-1;
inline constexpr double b11 = 2.01365400804030348374776537501e-1;
inline constexpr double b12 = 4.47106157277725905176885569043e-2;

inline constexpr double bhh1 = 0.244094488188976377952755905512e+00;
inline constexpr double bhh2 = 0.733846688281611857341361741547e+00;
inline constexpr double bhh3 = 0.220588235294117647058823529412e-01;

inline constexpr double er1 = 0.1312004499419488073250102996e-01;
inline constexpr double er6 = -0.1225156446376204440720569753e+01;
inline constexpr double er7 = -0.4957589496572501915214079952e+00;
inline constexpr double er8 = 0.1664377182454986536961530415e+01;
inline constexpr double er9 = -0.3503288487499736816886487290e+00;
inline constexpr double er10 = 0.3341791187130174790297318841e+00;
inline constexpr double er11 = 0.8192320648511571246570742613e-01;
inline constexpr double er12 = -0.2235530786388629525884427845e-01;
// clang-format on

}  // namespace dop853

struct IntegrationStats {
    long accepted = 0;
    long rejected = 0;
    long evaluations = 0;
};

/**
 * Integrates dx/dt = f(t, x) from t0 to t1 (either direction).
 *
 * `f(t, x, dxdt)` evaluates the right-hand side.
 * `observer(t_prev, x_prev, dx_prev, t, x, dx)` is called after every accepted
 * step and returns false to stop early; the returned time is where the
 * integration ended.
 */
template <int N, int ErrorDims = N>
class Dop853 {
public:
    using State = Eigen::Matrix<double, N, 1>;

    explicit Dop853(IntegratorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    const IntegrationStats& stats() const { return stats_; }

    template <class Rhs, class Observer>
    double integrate(Rhs&& f, double t0, State& x, double t1, Observer&& observer) {
        stats_ = {};
        if (t1 == t0) return t0;
        const double dir = t1 > t0 ? 1.0 : -1.0;
        const double span = std::abs(t1 - t0);

        State k1, k2, k3, k4, k5, k6, k7, k8, k9, k10, k11, k12, xs, xn, kn;
        f(t0, x, k1);
        ++stats_.evaluations;

        double h = cfg_.initial_step > 0 ? cfg_.initial_step : initial_step(f, t0, x, k1, dir);
        h = std::min({h, cfg_.max_step, span});
        double t = t0;
        double facold = 1e-4;
        bool last_rejected = false;

        constexpr double expo1 = 1.0 / 8.0 - 0.04 * 0.2;
        constexpr double beta = 0.04;
        constexpr double safe = 0.9;
        constexpr double facc1 = 1.0 / 0.333;
        constexpr double facc2 = 1.0 / 6.0;

        using namespace dop853;
        for (long n = 0;; ++n) {
            if (n >= cfg_.max_steps) {
                throw Error(ErrorCode::MaxStepsExceeded, "integrator step budget exhausted");
            }
            bool final_step = false;
            const double remaining = std::abs(t1 - t);
            if (h >= remaining * (1.0 - 1e-14)) {
                h = remaining;
                final_step = true;
            }
            if (h < cfg_.min_step && !final_step) {
                throw Error(ErrorCode::StepUnderflow, "step size fell below the minimum");
            }
            const double hs = dir * h;

            xs = x + hs * a21 * k1;
            f(t + c2 * hs, xs, k2);
            xs = x + hs * (a31 * k1 + a32 * k2);
            f(t + c3 * hs, xs, k3);
            xs = x + hs * (a41 * k1 + a43 * k3);
            f(t + c4 * hs, xs, k4);
            xs = x + hs * (a51 * k1 + a53 * k3 + a54 * k4);
            f(t + c5 * hs, xs, k5);
            xs = x + hs * (a61 * k1 + a64 * k4 + a65 * k5);
            f(t + c6 * hs, xs, k6);
            xs = x + hs * (a71 * k1 + a74 * k4 + a75 * k5 + a76 * k6);
            f(t + c7 * hs, xs, k7);
            xs = x + hs * (a81 * k1 + a84 * k4 + a85 * k5 + a86 * k6 + a87 * k7);
            f(t + c8 * hs, xs, k8);
            xs = x + hs * (a91 * k1 + a94 * k4 + a95 * k5 + a96 * k6 + a97 * k7 + a98 * k8);
            f(t + c9 * hs, xs, k9);
            xs = x + hs * (a101 * k1 + a104 * k4 + a105 * k5 + a106 * k6 + a107 * k7 + a108 * k8 +
                           a109 * k9);
            f(t + c10 * hs, xs, k10);
            xs = x + hs * (a111 * k1 + a114 * k4 + a115 * k5 + a116 * k6 + a117 * k7 + a118 * k8 +
                           a119 * k9 + a1110 * k10);
            f(t + c11 * hs, xs, k11);
            const double t_new = final_step ? t1 : t + hs;
            xs = x + hs * (a121 * k1 + a124 * k4 + a125 * k5 + a126 * k6 + a127 * k7 + a128 * k8 +
                           a129 * k9 + a1210 * k10 + a1211 * k11);
            f(t_new, xs, k12);
            stats_.evaluations += 11;

            kn = b1 * k1 + b6 * k6 + b7 * k7 + b8 * k8 + b9 * k9 + b10 * k10 + b11 * k11 + b12 * k12;
            xn = x + hs * kn;

            double err5 = 0.0, err3 = 0.0;
            for (int i = 0; i < ErrorDims; ++i) {
                const double sk = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(x[i]), std::abs(xn[i]));
                const double e3 = kn[i] - bhh1 * k1[i] - bhh2 * k9[i] - bhh3 * k12[i];
                const double e5 = er1 * k1[i] + er6 * k6[i] + er7 * k7[i] + er8 * k8[i] + er9 * k9[i] +
                                  er10 * k10[i] + er11 * k11[i] + er12 * k12[i];
                err3 += (e3 / sk) * (e3 / sk);
                err5 += (e5 / sk) * (e5 / sk);
            }
            double deno = err5 + 0.01 * err3;
            if (deno <= 0.0) deno = 1.0;
            const double err = h * err5 * std::sqrt(1.0 / (ErrorDims * deno));
            if (!std::isfinite(err)) {
                throw Error(ErrorCode::StepUnderflow, "non-finite error estimate");
            }

            const double fac11 = std::pow(err, expo1);
            double fac = fac11 / std::pow(facold, beta);
            fac = std::max(facc2, std::min(facc1, fac / safe));
            double h_new = h / fac;

            if (err <= 1.0) {
                facold = std::max(err, 1e-4);
                ++stats_.accepted;
                f(t_new, xn, k4);  // derivative at the new point, reused as the next k1
                ++stats_.evaluations;
                const bool keep_going = observer(t, x, k1, t_new, xn, k4);
                x = xn;
                k1 = k4;
                t = t_new;
                if (!keep_going || final_step) return t;
                if (std::abs(h_new) > cfg_.max_step) h_new = cfg_.max_step;
                if (last_rejected) h_new = std::min(h_new, h);
                last_rejected = false;
                h = h_new;
            } else {
                ++stats_.rejected;
                h_new = h / std::min(facc1, fac11 / safe);
                last_rejected = true;
                h = h_new;
            }
        }
    }

    template <class Rhs>
    double integrate(Rhs&& f, double t0, State& x, double t1) {
        return integrate(std::forward<Rhs>(f), t0, x, t1,
                         [](double, const State&, const State&, double, const State&, const State&) {
                             return true;
                         });
    }

private:
    template <class Rhs>
    double initial_step(Rhs& f, double t0, const State& x0, const State& f0, double dir) {
        double dnf = 0.0, dny = 0.0;
        for (int i = 0; i < ErrorDims; ++i) {
            const double sk = cfg_.abs_tol + cfg_.rel_tol * std::abs(x0[i]);
            dnf += (f0[i] / sk) * (f0[i] / sk);
            dny += (x0[i] / sk) * (x0[i] / sk);
        }
        double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
        h = std::min(h, cfg_.max_step);
        State x1 = x0 + dir * h * f0;
        State f1;
        f(t0 + dir * h, x1, f1);
        ++stats_.evaluations;
        double der2 = 0.0;
        for (int i = 0; i < ErrorDims; ++i) {
            const double sk = cfg_.abs_tol + cfg_.rel_tol * std::abs(x0[i]);
            der2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
        }
        der2 = std::sqrt(der2) / h;
        const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
        const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::abs(h) * 1e-3)
                                         : std::pow(0.01 / der12, 1.0 / 8.0);
        return std::min({100.0 * std::abs(h), h1, cfg_.max_step});
    }

    IntegratorConfig cfg_;
    IntegrationStats stats_;
};

}  // namespace nrhonav
