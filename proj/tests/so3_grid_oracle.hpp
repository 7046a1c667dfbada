#pragma once

// Brute-force rotation search over a ZYZ Euler grid, independent of the SVD
// path it is used to check.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <span>
#include <vector>

namespace testutil {

inline double cell_energy_direct(std::span<const Eigen::Vector3d> edges,
                                 std::span<const Eigen::Vector3d> deformed,
                                 std::span<const double> weights, const Eigen::Matrix3d& r) {
    double e = 0.0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        e += weights[i] * (deformed[i] - r * edges[i]).squaredNorm();
    }
    return e;
}

class So3Grid {
public:
    explicit So3Grid(double step_degrees) {
        const double step = step_degrees * M_PI / 180.0;
        const int na = static_cast<int>(std::lround(2.0 * M_PI / step));
        const int nb = static_cast<int>(std::lround(M_PI / step)) + 1;
        rotations_.reserve(static_cast<std::size_t>(na) * static_cast<std::size_t>(nb) *
                           static_cast<std::size_t>(na));
        for (int ia = 0; ia < na; ++ia) {
            for (int ib = 0; ib < nb; ++ib) {
                for (int ic = 0; ic < na; ++ic) {
                    rotations_.push_back(
                        (Eigen::AngleAxisd(ia * step, Eigen::Vector3d::UnitZ()) *
                         Eigen::AngleAxisd(ib * step, Eigen::Vector3d::UnitY()) *
                         Eigen::AngleAxisd(ic * step, Eigen::Vector3d::UnitZ()))
                            .toRotationMatrix());
                }
            }
        }
    }

    // Minimizes the cell energy over the grid. The scan uses the expansion
    // energy = const - 2 tr(R S); the returned minimum is re-evaluated with
    // the direct sum.
    Eigen::Matrix3d best_rotation(std::span<const Eigen::Vector3d> edges,
                                  std::span<const Eigen::Vector3d> deformed,
                                  std::span<const double> weights) const {
        Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
        for (std::size_t i = 0; i < edges.size(); ++i) {
            s += weights[i] * edges[i] * deformed[i].transpose();
        }
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t k = 0; k < rotations_.size(); ++k) {
            const double trace = (rotations_[k] * s).trace();
            if (trace > best) {
                best = trace;
                best_idx = k;
            }
        }
        return rotations_[best_idx];
    }

    std::size_t size() const { return rotations_.size(); }

private:
    std::vector<Eigen::Matrix3d> rotations_;
};

}  // namespace testutil
