#include "cqed/kernels.hpp"

namespace cqed {

// Straight transcription of the master equation with dense matrices. Kept as the
// reference the parallel kernel is tested and benchmarked against.
Eigen::MatrixXcd apply_generator_reference(const Generator& gen, const Eigen::MatrixXcd& rho) {
    const cplx I{0.0, 1.0};
    const Eigen::MatrixXcd k = dense_k(gen);
    Eigen::MatrixXcd out = -I * (k * rho - rho * k.adjoint());
    for (std::size_t n = 0; n < gen.jumps.size(); ++n) {
        if (gen.jumps[n].rate == 0.0) continue;
        const Eigen::MatrixXcd l = dense_jump(gen, n);
        out += gen.jumps[n].rate * (l * rho * l.adjoint());
    }
    return out;
}

}  // namespace cqed
