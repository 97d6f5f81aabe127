// Dynamic 2D+t image stack and its Casorati-matrix view.
#pragma once

#include <Eigen/Core>
#include <vector>

#include "perfquant/types.hpp"

namespace perfquant {

struct ImageSeries {
    std::vector<Eigen::MatrixXd> frames;  ///< each ny x nx, row = y
    double spacing_y = 1.0;               ///< mm per pixel
    double spacing_x = 1.0;

    int nt() const { return static_cast<int>(frames.size()); }
    int ny() const { return frames.empty() ? 0 : static_cast<int>(frames[0].rows()); }
    int nx() const { return frames.empty() ? 0 : static_cast<int>(frames[0].cols()); }

    /// nt >= 2, consistent frame shapes, finite values.
    void validate() const;

    /// One column per frame, pixels stacked row-major (y major).
    Eigen::MatrixXd casorati() const;

    static ImageSeries from_casorati(const Eigen::MatrixXd& m, int ny, int nx,
                                     double spacing_y = 1.0, double spacing_x = 1.0);
};

}  // namespace perfquant
