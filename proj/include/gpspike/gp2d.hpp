#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpspike/asymptotics.hpp"

namespace gpspike {

// Periodic n x n lattice on [-L, L)^2; node n/2 sits at the origin.
struct PeriodicGrid {
    int n = 512;
    double half_width = 4.0;

    double step() const { return 2.0 * half_width / n; }
    double coord(int i) const { return (i - n / 2) * step(); }
    std::size_t size() const { return static_cast<std::size_t>(n) * n; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n + j; }
};

struct MinimizeOptions {
    double collapse_margin = 1e-3;  // reject a >= a* (1 - margin)
    double min_cells = 12.0;        // required eps / (lambda dx)
    double flow_exit = 0.05;        // hand over to Newton once max|r| < flow_exit |mu|
    int max_flow = 20000;
    double el_tol = 1e-10;          // on max|H u - mu u| / (|mu| max u)
    int max_newton = 40;
    double newton_tol = 1e-11;
    double minres_tol = 1e-10;
    int max_minres = 4000;
    const std::vector<double>* initial = nullptr;  // optional start; default is the scaled bubble
};

struct GroundState2D {
    PeriodicGrid grid;
    std::vector<double> u;
    double a = 0.0;
    double energy = 0.0;
    double mu = 0.0;
    double mu_rayleigh = 0.0;
    double quartic = 0.0;  // int u^4
    Vec2 x_max{0.0, 0.0};
    ScaleParameters scale;
    int flow_iters = 0;
    int newton_iters = 0;
    int iters = 0;
    double el_residual = 0.0;
    int local_maxima = 0;
};

GroundState2D minimize(const PotentialSpec& spec, const TownesProfile& townes, const PotentialAnalysis& an, double a,
                       const PeriodicGrid& grid, const MinimizeOptions& opts = {});

// e(a) - (a/2) int u^4.
double extract_mu(const GroundState2D& state);

// Sub-grid maximum from the quadratic through the 3x3 stencil around the discrete argmax.
Vec2 locate_maximum(const PeriodicGrid& grid, const std::vector<double>& u);
int count_local_maxima(const PeriodicGrid& grid, const std::vector<double>& u, double rel_floor = 1e-3);

// Bilinear interpolation of periodic node data.
double bilinear(const PeriodicGrid& grid, const std::vector<double>& f, double x, double y);
// Spectral partial derivative.
std::vector<double> spectral_derivative(const PeriodicGrid& grid, const std::vector<double>& f, int axis);

struct PohozaevResult {
    Vec2 area{0.0, 0.0};          // int_B d_j V u^2
    Vec2 boundary{0.0, 0.0};      // flux side of the translation identity
    Vec2 mismatch{0.0, 0.0};      // area - boundary
    double virial = 0.0;          // dilation identity residual about the ball centre
    double scale = 0.0;           // sum of magnitudes entering the identities
};
PohozaevResult pohozaev_residual(const GroundState2D& state, const PotentialSpec& spec, double radius);

struct UniquenessResult {
    double max_distance = 0.0;
    int starts = 0;
    std::vector<double> energies;
};
UniquenessResult uniqueness_probe(const PotentialSpec& spec, const TownesProfile& townes, const PotentialAnalysis& an,
                                  double a, const PeriodicGrid& grid, int n_starts, std::uint64_t seed,
                                  const MinimizeOptions& opts = {});

std::string sweep_record_json(const GroundState2D& state);
void write_state_csv(const std::string& path, const GroundState2D& state);

}  // namespace gpspike
