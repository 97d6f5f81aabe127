#include "perfquant/image_series.hpp"

#include <string>

namespace perfquant {

void ImageSeries::validate() const {
    if (nt() < 2) throw ValidationError("series: needs at least 2 frames");
    const int rows = ny(), cols = nx();
    if (rows < 1 || cols < 1) throw ValidationError("series: empty frames");
    for (int t = 0; t < nt(); ++t) {
        if (frames[t].rows() != rows || frames[t].cols() != cols)
            throw ValidationError("series: frame " + std::to_string(t) + " shape mismatch");
        if (!frames[t].allFinite())
            throw ValidationError("series: frame " + std::to_string(t) + " has non-finite values");
    }
}

Eigen::MatrixXd ImageSeries::casorati() const {
    validate();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(ny()) * nx(), nt());
    for (int t = 0; t < nt(); ++t) {
        const auto& f = frames[t];
        for (int y = 0; y < ny(); ++y)
            for (int x = 0; x < nx(); ++x)
                m(static_cast<Eigen::Index>(y) * nx() + x, t) = f(y, x);
    }
    return m;
}

ImageSeries ImageSeries::from_casorati(const Eigen::MatrixXd& m, int ny, int nx,
                                       double spacing_y, double spacing_x) {
    if (m.rows() != static_cast<Eigen::Index>(ny) * nx)
        throw ValidationError("from_casorati: row count does not match ny*nx");
    ImageSeries s;
    s.spacing_y = spacing_y;
    s.spacing_x = spacing_x;
    s.frames.resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
        Eigen::MatrixXd f(ny, nx);
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                f(y, x) = m(static_cast<Eigen::Index>(y) * nx + x, t);
        s.frames[static_cast<std::size_t>(t)] = std::move(f);
    }
    return s;
}

}  // namespace perfquant
