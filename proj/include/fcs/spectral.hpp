#pragma once

// Galerkin discretization of the identity embedding
//
//   Id : H_gamma -> L^2_beta (+) R
//
// on the grid space. Basis curves b_i have derivative equal to the hat
// function of node i and b_i(inf) = 0; the optional level curve is the
// constant 1. A grid curve's coordinates are therefore its stored data
// (h'(x_0), ..., h'(x_n)[, h(inf)]).

#include "fcs/curve.hpp"
#include "fcs/curve_space.hpp"
#include "fcs/error.hpp"
#include "fcs/grid.hpp"
#include "fcs/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace fcs {

class BasisSet {
public:
    BasisSet(GridPtr grid, WeightParams w, bool with_level = false)
        : grid_(std::move(grid)), w_(w), with_level_(with_level) {}

    [[nodiscard]] std::size_t dimension() const noexcept { return grid_->n_nodes() + (with_level_ ? 1 : 0); }
    [[nodiscard]] const GridPtr& grid_ptr() const noexcept { return grid_; }
    [[nodiscard]] const Grid& grid() const noexcept { return *grid_; }
    [[nodiscard]] const WeightParams& params() const noexcept { return w_; }
    [[nodiscard]] bool with_level() const noexcept { return with_level_; }

    /// Basis curve i; index n_nodes is the level curve when present.
    [[nodiscard]] ForwardCurve curve(std::size_t i) const {
        std::vector<double> c(dimension(), 0.0);
        c.at(i) = 1.0;
        return from_coordinates(c);
    }

    [[nodiscard]] ForwardCurve from_coordinates(std::span<const double> c) const {
        return ForwardCurve::from_coordinates(grid_, c, with_level_);
    }

    [[nodiscard]] ForwardCurve from_coordinates(const Eigen::VectorXd& c) const {
        return from_coordinates(std::span<const double>(c.data(), static_cast<std::size_t>(c.size())));
    }

    [[nodiscard]] Eigen::VectorXd coordinates(const ForwardCurve& h) const {
        if (!same_grid(h.grid_ptr(), grid_)) fail(ErrorCode::BasisMismatch, "spectral.coordinates", "curve grid differs");
        if (!with_level_ && !h.in_h0()) {
            fail(ErrorCode::BasisMismatch, "spectral.coordinates", "basis spans H0_gamma but h(inf) != 0");
        }
        Eigen::VectorXd c(static_cast<Eigen::Index>(dimension()));
        auto d = h.dcoef();
        for (std::size_t i = 0; i < d.size(); ++i) c[static_cast<Eigen::Index>(i)] = d[i];
        if (with_level_) c[c.size() - 1] = h.h_inf();
        return c;
    }

    friend bool operator==(const BasisSet& a, const BasisSet& b) {
        return same_grid(a.grid_, b.grid_) && a.w_ == b.w_ && a.with_level_ == b.with_level_;
    }

private:
    GridPtr grid_;
    WeightParams w_;
    bool with_level_;
};

using BasisPtr = std::shared_ptr<const BasisSet>;

inline BasisPtr make_basis(GridPtr grid, WeightParams w, bool with_level = false) {
    return std::make_shared<const BasisSet>(std::move(grid), w, with_level);
}

/// Gram matrices of the basis in the source space H_gamma (gram_h) and the
/// target space L^2_beta (+) R (gram_l; plain L^2_beta without a level curve).
struct GramPair {
    Eigen::MatrixXd gram_h;
    Eigen::MatrixXd gram_l;
};

namespace detail {

/// Value polynomial of basis curve i (derivative = hat at node i) on cell k.
inline std::array<double, 3> hat_basis_value_poly(const Grid& g, std::size_t i, std::size_t k) {
    std::size_t n = g.n_cells();
    double left = i > 0 ? 0.5 * g.width(i - 1) : 0.0;
    double right = i < n ? 0.5 * g.width(i) : 0.0;
    if (k + 1 < i) return {-(left + right), 0.0, 0.0};
    if (k + 1 == i) return {-(left + right), 0.0, left};
    if (k == i) {
        double w = g.width(i);
        return {-0.5 * w, w, -0.5 * w};
    }
    return {0.0, 0.0, 0.0};
}

inline double hat_mass(const Grid& g, std::size_t i) {
    double left = i > 0 ? 0.5 * g.width(i - 1) : 0.0;
    double right = i < g.n_cells() ? 0.5 * g.width(i) : 0.0;
    return left + right;
}

}  // namespace detail

inline GramPair assemble_gram(const BasisSet& basis) {
    const Grid& g = basis.grid();
    const auto nn = g.n_nodes();
    const auto m = static_cast<Eigen::Index>(basis.dimension());
    CellMoments mg(g, basis.params().gamma());
    CellMoments mb(g, basis.params().beta());

    GramPair out{Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(m, m)};
    auto& gh = out.gram_h;
    auto& gl = out.gram_l;

    std::vector<double> b0(nn);
    for (std::size_t i = 0; i < nn; ++i) b0[i] = -detail::hat_mass(g, i);

    // H_gamma: point evaluation at 0 plus weighted hat products on shared cells.
    for (std::size_t i = 0; i < nn; ++i) {
        for (std::size_t j = 0; j < nn; ++j) {
            gh(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = b0[i] * b0[j];
        }
    }
    for (std::size_t k = 0; k < g.n_cells(); ++k) {
        const auto& mm = mg[k];
        auto a = static_cast<Eigen::Index>(k);
        gh(a, a) += mm[0] - 2.0 * mm[1] + mm[2];
        gh(a + 1, a + 1) += mm[2];
        gh(a, a + 1) += mm[1] - mm[2];
        gh(a + 1, a) += mm[1] - mm[2];
    }

    // L^2_beta: b_i is constant on cells left of node i-1, so the far-left
    // contributions collapse into prefix sums of the zeroth moments.
    std::vector<double> prefix(g.n_cells() + 1, 0.0);
    for (std::size_t k = 0; k < g.n_cells(); ++k) prefix[k + 1] = prefix[k] + mb[k][0];
    for (std::size_t i = 0; i < nn; ++i) {
        for (std::size_t j = i; j < nn; ++j) {
            double v = 0.0;
            if (i >= 2) v += b0[i] * b0[j] * prefix[i - 1];
            std::size_t k_lo = i >= 1 ? i - 1 : 0;
            for (std::size_t k = k_lo; k <= i && k < g.n_cells(); ++k) {
                v += detail::poly_product_moment(detail::hat_basis_value_poly(g, i, k),
                                                 detail::hat_basis_value_poly(g, j, k), mb[k]);
            }
            gl(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            gl(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }

    if (basis.with_level()) {
        auto L = m - 1;
        for (std::size_t i = 0; i < nn; ++i) {
            gh(static_cast<Eigen::Index>(i), L) = b0[i];
            gh(L, static_cast<Eigen::Index>(i)) = b0[i];
        }
        gh(L, L) = 1.0;
        gl(L, L) = 1.0;
    }
    return out;
}

/// Singular system (s_k, e_k, f_k) of the discretized embedding: e_k are
/// H_gamma-orthonormal, f_k = e_k / s_k are orthonormal in the target space,
/// and s_k is non-increasing.
class SingularSystem {
public:
    [[nodiscard]] std::size_t rank() const noexcept { return s_.size(); }
    [[nodiscard]] std::span<const double> s() const noexcept { return s_; }
    [[nodiscard]] double s_at(std::size_t k) const { return k < s_.size() ? s_[k] : 0.0; }
    [[nodiscard]] const Eigen::MatrixXd& e_coefs() const noexcept { return e_; }
    [[nodiscard]] const Eigen::MatrixXd& f_coefs() const noexcept { return f_; }
    [[nodiscard]] const BasisPtr& basis() const noexcept { return basis_; }
    [[nodiscard]] const GramPair& gram() const noexcept { return gram_; }

    /// k is zero-based: e(0) is e_1.
    [[nodiscard]] ForwardCurve e(std::size_t k) const { return basis_->from_coordinates(Eigen::VectorXd(e_.col(idx(k)))); }
    [[nodiscard]] ForwardCurve f(std::size_t k) const { return basis_->from_coordinates(Eigen::VectorXd(f_.col(idx(k)))); }

    /// sup_{||h||_{H_gamma} <= 1} ||M h||_target for a coordinate map M.
    [[nodiscard]] double operator_norm(const Eigen::MatrixXd& M) const {
        Eigen::MatrixXd scaled = scale_.cwiseInverse().asDiagonal() * M * scale_.asDiagonal();
        Eigen::MatrixXd Y = r2_ * scaled;  // target-orthonormal output
        // Z = Y Lh^{-T}
        Eigen::MatrixXd Z = lh_.triangularView<Eigen::Lower>().solve(Y.transpose()).transpose();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(Z);
        return svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
    }

    friend SingularSystem singular_system(BasisPtr basis, GramPair g);

private:
    Eigen::Index idx(std::size_t k) const {
        if (k >= s_.size()) fail(ErrorCode::RankTooLarge, "spectral.SingularSystem", "mode index out of range");
        return static_cast<Eigen::Index>(k);
    }

    BasisPtr basis_;
    GramPair gram_;
    std::vector<double> s_;
    Eigen::MatrixXd e_;
    Eigen::MatrixXd f_;
    Eigen::VectorXd scale_;  // coordinate scaling diag(gram_h)^{-1/2}
    Eigen::MatrixXd lh_;     // scaled gram_h = lh lh^T
    Eigen::MatrixXd r2_;     // scaled gram_l = r2^T r2
};

inline constexpr double kModeThreshold = 1e-13;

/// Cholesky-reduce the source Gram, factor the target Gram, and take the SVD
/// of the reduced map. Avoids forming s_k^2, which loses the small modes.
inline SingularSystem singular_system(BasisPtr basis, GramPair g) {
    const char* where = "spectral.singular_system";
    const Eigen::Index m = g.gram_h.rows();
    if (g.gram_h.cols() != m || g.gram_l.rows() != m || g.gram_l.cols() != m ||
        m != static_cast<Eigen::Index>(basis->dimension())) {
        fail(ErrorCode::BasisMismatch, where, "Gram matrix size does not match the basis");
    }
    SingularSystem sys;
    sys.basis_ = std::move(basis);

    Eigen::VectorXd diag = g.gram_h.diagonal();
    if ((diag.array() <= 0.0).any() || !diag.allFinite()) fail(ErrorCode::SingularGram, where, "non-positive diagonal");
    sys.scale_ = diag.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd ah = sys.scale_.asDiagonal() * g.gram_h * sys.scale_.asDiagonal();
    Eigen::MatrixXd a2 = sys.scale_.asDiagonal() * g.gram_l * sys.scale_.asDiagonal();

    Eigen::LLT<Eigen::MatrixXd> llt(ah);
    if (llt.info() != Eigen::Success) fail(ErrorCode::SingularGram, where, "source Gram is not positive definite");
    sys.lh_ = llt.matrixL();

    Eigen::LLT<Eigen::MatrixXd> llt2(a2);
    if (llt2.info() == Eigen::Success) {
        sys.r2_ = llt2.matrixU();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a2);
        if (es.info() != Eigen::Success) fail(ErrorCode::EigenFailure, where, "target Gram eigensolve failed");
        Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        sys.r2_ = lam.asDiagonal() * es.eigenvectors().transpose();
    }

    // K = r2 lh^{-T} maps H-orthonormal coordinates to target-orthonormal ones.
    Eigen::MatrixXd K = sys.lh_.triangularView<Eigen::Lower>().solve(sys.r2_.transpose()).transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) fail(ErrorCode::EigenFailure, where, "SVD did not converge");

    const Eigen::VectorXd& sv = svd.singularValues();
    Eigen::Index r = 0;
    while (r < sv.size() && sv[r] >= kModeThreshold) ++r;

    // e = D lh^{-T} v
    Eigen::MatrixXd ev = sys.lh_.transpose().triangularView<Eigen::Upper>().solve(svd.matrixV().leftCols(r));
    ev = sys.scale_.asDiagonal() * ev;
    for (Eigen::Index k = 0; k < r; ++k) {
        auto col = ev.col(k);
        double big = col.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < col.size(); ++i) {
            if (std::abs(col[i]) > 1e-12 * big) {
                if (col[i] < 0.0) col = -col;
                break;
            }
        }
    }
    sys.s_.assign(sv.data(), sv.data() + r);
    sys.e_ = ev;
    sys.f_ = ev;
    for (Eigen::Index k = 0; k < r; ++k) sys.f_.col(k) /= sv[k];
    sys.gram_ = std::move(g);
    return sys;
}

inline SingularSystem singular_system(const BasisPtr& basis) { return singular_system(basis, assemble_gram(*basis)); }

/// h -> sum_k s_k <h, zeta_k>_{H_gamma} f_k. zeta_k = e_k gives T_n.
class FiniteRankOperator {
public:
    FiniteRankOperator(BasisPtr basis, std::vector<double> weights, Eigen::MatrixXd functionals,
                       Eigen::MatrixXd targets, const Eigen::MatrixXd& gram_h)
        : basis_(std::move(basis)), weights_(std::move(weights)), zeta_(std::move(functionals)),
          targets_(std::move(targets)), duals_(gram_h * zeta_) {}

    [[nodiscard]] std::size_t rank() const noexcept { return weights_.size(); }
    [[nodiscard]] const BasisPtr& basis() const noexcept { return basis_; }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
    [[nodiscard]] const Eigen::MatrixXd& functionals() const noexcept { return zeta_; }
    [[nodiscard]] const Eigen::MatrixXd& targets() const noexcept { return targets_; }

    [[nodiscard]] ForwardCurve functional(std::size_t k) const {
        return basis_->from_coordinates(Eigen::VectorXd(zeta_.col(static_cast<Eigen::Index>(k))));
    }

    /// Coordinates of op(h) in f_1..f_n: s_k <h, zeta_k>_{H_gamma}.
    [[nodiscard]] Eigen::VectorXd coefficients(const ForwardCurve& h) const {
        Eigen::VectorXd c = basis_->coordinates(h);
        Eigen::VectorXd out = duals_.transpose() * c;
        for (std::size_t k = 0; k < rank(); ++k) out[static_cast<Eigen::Index>(k)] *= weights_[k];
        return out;
    }

    /// sum_k coeffs_k f_k as a grid curve.
    [[nodiscard]] ForwardCurve reconstruct(const Eigen::VectorXd& coeffs) const {
        if (coeffs.size() != static_cast<Eigen::Index>(rank())) {
            fail(ErrorCode::BasisMismatch, "spectral.reconstruct", "coefficient count differs from rank");
        }
        Eigen::VectorXd c = rank() == 0 ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis_->dimension()))
                                        : Eigen::VectorXd(targets_ * coeffs);
        return basis_->from_coordinates(c);
    }

    [[nodiscard]] ForwardCurve apply(const ForwardCurve& h) const { return reconstruct(coefficients(h)); }

    /// Coordinate matrix of the operator.
    [[nodiscard]] Eigen::MatrixXd matrix() const {
        const auto m = static_cast<Eigen::Index>(basis_->dimension());
        if (rank() == 0) return Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights_.data(), static_cast<Eigen::Index>(rank()));
        return targets_ * w.asDiagonal() * duals_.transpose();
    }

private:
    BasisPtr basis_;
    std::vector<double> weights_;
    Eigen::MatrixXd zeta_;
    Eigen::MatrixXd targets_;
    Eigen::MatrixXd duals_;
};

inline FiniteRankOperator make_tn(const SingularSystem& sys, std::size_t n) {
    if (n > sys.rank()) {
        fail(ErrorCode::RankTooLarge, "spectral.make_tn",
             "rank " + std::to_string(n) + " exceeds " + std::to_string(sys.rank()) + " retained modes");
    }
    auto cols = static_cast<Eigen::Index>(n);
    std::vector<double> w(sys.s().begin(), sys.s().begin() + static_cast<std::ptrdiff_t>(n));
    return FiniteRankOperator(sys.basis(), std::move(w), sys.e_coefs().leftCols(cols), sys.f_coefs().leftCols(cols),
                              sys.gram().gram_h);
}

/// ||op - Id|| as a map H_gamma -> target space.
inline double operator_defect(const SingularSystem& sys, const FiniteRankOperator& op) {
    if (!(*op.basis() == *sys.basis())) {
        fail(ErrorCode::BasisMismatch, "spectral.operator_defect", "operator and system use different bases");
    }
    const auto m = static_cast<Eigen::Index>(sys.basis()->dimension());
    return sys.operator_norm(op.matrix() - Eigen::MatrixXd::Identity(m, m));
}

/// ||a - b|| as a map H_gamma -> target space.
inline double operator_distance(const SingularSystem& sys, const FiniteRankOperator& a, const FiniteRankOperator& b) {
    if (!(*a.basis() == *sys.basis()) || !(*b.basis() == *sys.basis())) {
        fail(ErrorCode::BasisMismatch, "spectral.operator_distance", "operators and system use different bases");
    }
    return sys.operator_norm(a.matrix() - b.matrix());
}

/// Fraction of the budget eps / (2^k s_k) used by each perturbation.
inline constexpr double kPerturbationFill = 0.5;

/// S_n: functionals zeta_k = e_k + delta_k with ||delta_k||_{H_gamma} equal to
/// half the budget eps / (2^k s_k). Directions are isotropic in H_gamma
/// (Gaussian combinations of all e_j) and depend only on (seed, k).
inline FiniteRankOperator perturb_functionals(const SingularSystem& sys, std::size_t n, double eps, std::uint64_t seed) {
    if (n > sys.rank()) {
        fail(ErrorCode::RankTooLarge, "spectral.perturb_functionals",
             "rank " + std::to_string(n) + " exceeds " + std::to_string(sys.rank()) + " retained modes");
    }
    if (!(eps > 0.0)) fail(ErrorCode::InvalidArgument, "spectral.perturb_functionals", "eps must be positive");
    const auto m = static_cast<Eigen::Index>(sys.basis()->dimension());
    const auto r = static_cast<Eigen::Index>(sys.rank());
    Eigen::MatrixXd zeta = sys.e_coefs().leftCols(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        Eigen::VectorXd g(r);
        for (Eigen::Index j = 0; j < r; ++j) g[j] = rng::normal(seed, 0x5EED, k, static_cast<std::uint64_t>(j));
        // e_j are H_gamma-orthonormal, so ||sum g_j e_j|| = |g|.
        Eigen::VectorXd delta = sys.e_coefs() * g / g.norm();
        double budget = eps / (std::ldexp(1.0, static_cast<int>(k + 1)) * sys.s()[k]);
        zeta.col(static_cast<Eigen::Index>(k)) += kPerturbationFill * budget * delta;
    }
    (void)m;
    auto cols = static_cast<Eigen::Index>(n);
    std::vector<double> w(sys.s().begin(), sys.s().begin() + static_cast<std::ptrdiff_t>(n));
    return FiniteRankOperator(sys.basis(), std::move(w), std::move(zeta), sys.f_coefs().leftCols(cols),
                              sys.gram().gram_h);
}

}  // namespace fcs
