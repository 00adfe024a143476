#include "cqed/kernels.hpp"

namespace cqed {

void apply_generator(const Generator& gen, const cplx* rho, cplx* out, bool parallel) {
    const int d = gen.dim;
    const cplx I{0.0, 1.0};
    const int* row_ptr = gen.row_ptr.data();
    const int* cols = gen.cols.data();
    const double* vals = gen.vals.data();
    const cplx* diag = gen.diag.data();

    // Column j of the output only reads columns of rho named by row j of K and by
    // the jump sources, so columns are independent work items.
#pragma omp parallel for schedule(static) if (parallel && d >= 32)
    for (int j = 0; j < d; ++j) {
        cplx* o = out + static_cast<std::ptrdiff_t>(j) * d;
        const cplx* rj = rho + static_cast<std::ptrdiff_t>(j) * d;
        const cplx right = I * std::conj(diag[j]);

        // -i K rho(:, j) + i rho(:, j) conj(K_jj)
        for (int i = 0; i < d; ++i) {
            cplx acc = (right - I * diag[i]) * rj[i];
            for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) acc -= I * vals[p] * rj[cols[p]];
            o[i] = acc;
        }
        // + i sum_m rho(:, m) K_jm over the off-diagonal part (real symmetric)
        for (int p = row_ptr[j]; p < row_ptr[j + 1]; ++p) {
            const cplx c = I * vals[p];
            const cplx* rm = rho + static_cast<std::ptrdiff_t>(cols[p]) * d;
            for (int i = 0; i < d; ++i) o[i] += c * rm[i];
        }
        // + sum_k r_k L rho L^dag
        for (const auto& jump : gen.jumps) {
            if (jump.rate == 0.0) continue;
            const int cj = jump.src[static_cast<std::size_t>(j)];
            if (cj < 0) continue;
            const double aj = jump.rate * jump.amp[static_cast<std::size_t>(j)];
            const cplx* rc = rho + static_cast<std::ptrdiff_t>(cj) * d;
            const int* src = jump.src.data();
            const double* amp = jump.amp.data();
            for (int i = 0; i < d; ++i) {
                if (src[i] >= 0) o[i] += (aj * amp[i]) * rc[src[i]];
            }
        }
    }
}

}  // namespace cqed
