#include <algorithm>
#include <cmath>
#include <string>

#include "cqed/error.hpp"
#include "cqed/kernels.hpp"
#include "cqed/modespace.hpp"

namespace cqed {

void HilbertSpec::validate() const {
    if (n_max < 1) throw InvalidInput("n_max must be >= 1, got " + std::to_string(n_max));
}

namespace {

// Builds a jump operator from a map basis index -> (target index, amplitude).
template <class F>
Generator::Jump make_jump(const HilbertSpec& spec, double rate, bool cavity, F&& image) {
    const int dim = spec.dim();
    Generator::Jump j;
    j.rate = rate;
    j.cavity = cavity;
    j.src.assign(static_cast<std::size_t>(dim), -1);
    j.amp.assign(static_cast<std::size_t>(dim), 0.0);
    j.weight.assign(static_cast<std::size_t>(dim), 0.0);
    const int n = spec.levels();
    for (int e = 0; e < 2; ++e) {
        for (int nt = 0; nt < n; ++nt) {
            for (int nf = 0; nf < n; ++nf) {
                const int col = spec.index(e, nt, nf);
                const auto [row, a] = image(e, nt, nf);
                if (row < 0 || a == 0.0) continue;
                j.src[static_cast<std::size_t>(row)] = col;
                j.amp[static_cast<std::size_t>(row)] = a;
                j.weight[static_cast<std::size_t>(col)] += a * a;
            }
        }
    }
    return j;
}

}  // namespace

Generator make_generator(const HilbertSpec& spec, const SystemParams& params, double frame_omega,
                         const DebugHooks& hooks) {
    spec.validate();
    Generator gen;
    gen.spec = spec;
    gen.dim = spec.dim();
    gen.hooks = hooks;
    gen.frame_omega = frame_omega;
    gen.omega0 = params.emitter.omega0;
    gen.omega_t = params.target.omega;

    const int n = spec.levels();
    const int dim = gen.dim;
    const double g = params.emitter.g;
    const double eta = params.eta;

    gen.occ_e.resize(static_cast<std::size_t>(dim));
    gen.occ_t.resize(static_cast<std::size_t>(dim));
    gen.occ_fp.resize(static_cast<std::size_t>(dim));

    // Off-diagonal couplings g (a_t sigma+ + h.c.) and eta (a_t^dag a_fp + h.c.), row by row.
    gen.row_ptr.assign(1, 0);
    for (int e = 0; e < 2; ++e) {
        for (int nt = 0; nt < n; ++nt) {
            for (int nf = 0; nf < n; ++nf) {
                const auto i = static_cast<std::size_t>(spec.index(e, nt, nf));
                gen.occ_e[i] = e;
                gen.occ_t[i] = nt;
                gen.occ_fp[i] = nf;
                std::vector<std::pair<int, double>> row;
                if (g != 0.0) {
                    // <e=1, nt| a_t sigma+ |e=0, nt+1>
                    if (e == 1 && nt + 1 < n) row.emplace_back(spec.index(0, nt + 1, nf), g * std::sqrt(nt + 1.0));
                    // <e=0, nt| a_t^dag sigma- |e=1, nt-1>
                    if (e == 0 && nt > 0) row.emplace_back(spec.index(1, nt - 1, nf), g * std::sqrt(double(nt)));
                }
                if (eta != 0.0) {
                    // <nt, nf| a_t^dag a_fp |nt-1, nf+1>
                    if (nt > 0 && nf + 1 < n) {
                        row.emplace_back(spec.index(e, nt - 1, nf + 1), eta * std::sqrt(nt * (nf + 1.0)));
                    }
                    // <nt, nf| a_fp^dag a_t |nt+1, nf-1>
                    if (nf > 0 && nt + 1 < n) {
                        row.emplace_back(spec.index(e, nt + 1, nf - 1), eta * std::sqrt((nt + 1.0) * nf));
                    }
                }
                std::sort(row.begin(), row.end());
                for (const auto& [c, v] : row) {
                    gen.cols.push_back(c);
                    gen.vals.push_back(v);
                }
                gen.row_ptr.push_back(static_cast<int>(gen.cols.size()));
            }
        }
    }

    using Img = std::pair<int, double>;
    // target loss 2 kappa_t D[a_t]
    gen.jumps.push_back(make_jump(spec, 2.0 * params.target.kappa, true, [&](int e, int nt, int nf) -> Img {
        return nt > 0 ? Img{spec.index(e, nt - 1, nf), std::sqrt(double(nt))} : Img{-1, 0.0};
    }));
    // FP loss 2 kappa_fp D[a_fp]; rate set by update()
    gen.jumps.push_back(make_jump(spec, 2.0 * params.fp.kappa, true, [&](int e, int nt, int nf) -> Img {
        return nf > 0 ? Img{spec.index(e, nt, nf - 1), std::sqrt(double(nf))} : Img{-1, 0.0};
    }));
    // leaky-mode SE gamma D[sigma-]
    gen.jumps.push_back(make_jump(spec, params.emitter.gamma_leaky, false, [&](int e, int nt, int nf) -> Img {
        return e == 1 ? Img{spec.index(0, nt, nf), 1.0} : Img{-1, 0.0};
    }));
    // incoherent emitter pump P(t) D[sigma+]; rate set by update()
    gen.jumps.push_back(make_jump(spec, params.pump.cw_rate, false, [&](int e, int nt, int nf) -> Img {
        return e == 0 ? Img{spec.index(1, nt, nf), 1.0} : Img{-1, 0.0};
    }));
    // pure dephasing 2 gamma_phi D[sigma+ sigma-]: coherences decay at gamma_phi
    gen.jumps.push_back(make_jump(spec, 2.0 * params.emitter.dephasing, false, [&](int e, int nt, int nf) -> Img {
        return e == 1 ? Img{spec.index(1, nt, nf), 1.0} : Img{-1, 0.0};
    }));
    // incoherent target-cavity pump D[a_t^dag]
    gen.jumps.push_back(make_jump(spec, params.pump.cavity_rate, false, [&](int e, int nt, int nf) -> Img {
        return nt + 1 < n ? Img{spec.index(e, nt + 1, nf), std::sqrt(nt + 1.0)} : Img{-1, 0.0};
    }));

    gen.diag.assign(static_cast<std::size_t>(dim), cplx{});
    gen.update(params.fp.omega, params.fp.kappa, params.pump.cw_rate);
    return gen;
}

void Generator::update(double omega_fp, double kappa_fp, double pump_rate) {
    jumps[1].rate = 2.0 * kappa_fp;
    jumps[3].rate = pump_rate;
    const double de = omega0 - frame_omega;
    const double dt = omega_t - frame_omega;
    const double df = omega_fp - frame_omega;
    for (int i = 0; i < dim; ++i) {
        const auto u = static_cast<std::size_t>(i);
        double loss = 0.0;
        for (const auto& j : jumps) {
            const double sign = (hooks.flip_cavity_anticommutator && j.cavity) ? -1.0 : 1.0;
            loss += sign * j.rate * j.weight[u];
        }
        diag[u] = cplx{de * occ_e[u] + dt * occ_t[u] + df * occ_fp[u], -0.5 * loss};
    }
}

double Generator::rate_scale() const {
    double s = 0.0;
    for (const auto& d : diag) s = std::max(s, std::abs(d));
    double off = 0.0;
    for (int i = 0; i < dim; ++i) {
        double row = 0.0;
        for (int k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
            row += std::abs(vals[static_cast<std::size_t>(k)]);
        }
        off = std::max(off, row);
    }
    double jump = 0.0;
    for (const auto& j : jumps) {
        const double w = *std::max_element(j.weight.begin(), j.weight.end());
        jump += std::abs(j.rate) * w;
    }
    return s + off + jump;
}

Eigen::MatrixXcd dense_k(const Generator& gen) {
    Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(gen.dim, gen.dim);
    for (int i = 0; i < gen.dim; ++i) {
        k(i, i) = gen.diag[static_cast<std::size_t>(i)];
        for (int p = gen.row_ptr[static_cast<std::size_t>(i)]; p < gen.row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
            k(i, gen.cols[static_cast<std::size_t>(p)]) += gen.vals[static_cast<std::size_t>(p)];
        }
    }
    return k;
}

Eigen::MatrixXcd dense_jump(const Generator& gen, std::size_t k) {
    const auto& j = gen.jumps.at(k);
    Eigen::MatrixXcd l = Eigen::MatrixXcd::Zero(gen.dim, gen.dim);
    for (int i = 0; i < gen.dim; ++i) {
        const int c = j.src[static_cast<std::size_t>(i)];
        if (c >= 0) l(i, c) = j.amp[static_cast<std::size_t>(i)];
    }
    return l;
}

Eigen::SparseMatrix<cplx> sparse_superoperator(const Generator& gen) {
    const int d = gen.dim;
    const auto vec = [d](int i, int j) { return i + j * d; };
    const cplx I{0.0, 1.0};
    std::vector<Eigen::Triplet<cplx>> t;
    t.reserve(static_cast<std::size_t>(d) * static_cast<std::size_t>(d) * 8);
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < d; ++i) {
            const int r = vec(i, j);
            t.emplace_back(r, r, -I * gen.diag[static_cast<std::size_t>(i)] + I * std::conj(gen.diag[static_cast<std::size_t>(j)]));
            for (int p = gen.row_ptr[static_cast<std::size_t>(i)]; p < gen.row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
                t.emplace_back(r, vec(gen.cols[static_cast<std::size_t>(p)], j), -I * gen.vals[static_cast<std::size_t>(p)]);
            }
            for (int p = gen.row_ptr[static_cast<std::size_t>(j)]; p < gen.row_ptr[static_cast<std::size_t>(j) + 1]; ++p) {
                t.emplace_back(r, vec(i, gen.cols[static_cast<std::size_t>(p)]), I * gen.vals[static_cast<std::size_t>(p)]);
            }
            for (const auto& jump : gen.jumps) {
                if (jump.rate == 0.0) continue;
                const int ci = jump.src[static_cast<std::size_t>(i)];
                const int cj = jump.src[static_cast<std::size_t>(j)];
                if (ci < 0 || cj < 0) continue;
                t.emplace_back(r, vec(ci, cj),
                               jump.rate * jump.amp[static_cast<std::size_t>(i)] * jump.amp[static_cast<std::size_t>(j)]);
            }
        }
    }
    Eigen::SparseMatrix<cplx> s(d * d, d * d);
    s.setFromTriplets(t.begin(), t.end());
    return s;
}

}  // namespace cqed
