#pragma once

#include <array>
#include <memory>
#include <vector>

#include "gpspike/field2d.hpp"
#include "gpspike/potential.hpp"
#include "gpspike/radial_core.hpp"

namespace gpspike {

struct LinearOptions {
    double lin_tol = 1e-3;
    double orth_tol = 1e-4;
    double solver_tol = 1e-10;
    int max_iter = 3000;
};

// L = -Lap + 1 - 3 w^2 on the interior nodes of a CartesianGrid2D, zero on the boundary ring.
// The Laplacian is the fourth-order five-point-per-axis stencil closed by odd reflection, so a
// two-dimensional DST-I diagonalises it exactly; that transform is the preconditioner.
class LinearOperator {
public:
    LinearOperator(const TownesProfile& townes, const CartesianGrid2D& grid, const LinearOptions& opts = {});
    ~LinearOperator();
    LinearOperator(LinearOperator&&) noexcept;
    LinearOperator& operator=(LinearOperator&&) noexcept;

    const CartesianGrid2D& grid() const { return grid_; }
    const TownesProfile& townes() const { return *townes_; }
    const LinearOptions& options() const { return opts_; }
    const Field2D& w() const { return w_; }
    const Field2D& dw(int axis) const { return dw_[axis]; }

    Field2D apply(const Field2D& f) const;
    // (-Lap_h + 1)^{-1} on interior values; boundary ring of the result is zero.
    void precondition(const double* in, double* out) const;

private:
    const TownesProfile* townes_;
    CartesianGrid2D grid_;
    LinearOptions opts_;
    Field2D w_, q_;
    std::array<Field2D, 2> dw_;
    struct Fft;
    std::unique_ptr<Fft> fft_;
};

struct SolveReport {
    int iterations = 0;
    double residual = 0.0;  // max |L psi - f| after the kernel shift
    Vec2 projection{0.0, 0.0};  // <f, d_j w> / (|f| |d_j w|)
    Vec2 shift{0.0, 0.0};  // coefficients of d_1 w, d_2 w added to enforce grad psi(0) = 0
    double shift_det = 0.0;
};

// Unique psi with L psi = f, grad psi(0) = 0. Throws NotSolvable when f is not orthogonal to
// the translation modes.
Field2D solve_mod_kernel(const LinearOperator& op, const Field2D& f, SolveReport* report = nullptr);

// -psi'' - psi'/r + (1 - 3w^2) psi = f on the profile grid, psi'(0) = 0, psi(R) = 0.
std::vector<double> solve_radial(const TownesProfile& townes, const std::vector<double>& f);
// Cubic interpolation of a radial profile sampled on the Townes grid.
Field2D lift_radial(const TownesProfile& townes, const std::vector<double>& values, const CartesianGrid2D& grid);

Field2D build_psi1(const LinearOperator& op, const PotentialSpec& spec, const PotentialAnalysis& an,
                   SolveReport* report = nullptr);
// Closed form -(w + x . grad w)/2.
Field2D build_psi2(const LinearOperator& op);

// Right-hand side vector of the y-sup system and the resulting vector.
struct YSupSolution {
    Vec2 y_sup{0.0, 0.0};
    Mat2 matrix{};
    Vec2 i5{0.0, 0.0};
};
YSupSolution solve_y_sup(const LinearOperator& op, const PotentialSpec& spec, const PotentialAnalysis& an,
                         const Field2D& psi1);

struct Psi345 {
    Field2D psi3, psi4, psi5;
    double radial_agreement = 0.0;  // max |psi4 (2D) - psi4 (radial solve)|
    std::array<Vec2, 3> shifts{};
};
Psi345 build_psi345(const LinearOperator& op, const PotentialSpec& spec, const PotentialAnalysis& an,
                    const Field2D& psi1, const Field2D& psi2, const Vec2& y_sup);

// Envelope correction; phi = 0 and x0 = 0 for a constant envelope. Requires even h.
struct PhiSolution {
    Field2D phi;
    Vec2 x0{0.0, 0.0};
    Field2D forcing;
};
PhiSolution build_phi(const LinearOperator& op, const PotentialSpec& spec, const PotentialAnalysis& an);

struct CorrectionSet {
    Field2D psi1, psi2, psi3, psi4, psi5, phi;
    bool has_phi = false;
    Vec2 y_sup{0.0, 0.0};
    Vec2 i5{0.0, 0.0};
    Vec2 x0{0.0, 0.0};
    std::array<Vec2, 5> normalization_shift{};
    double psi4_radial_agreement = 0.0;
};

CorrectionSet build_corrections(const LinearOperator& op, const PotentialSpec& spec, const PotentialAnalysis& an);

void export_corrections(const std::string& dir, const CorrectionSet& c, double p);

}  // namespace gpspike
