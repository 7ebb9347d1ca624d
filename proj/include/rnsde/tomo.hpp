#pragma once

#include <vector>

#include "rnsde/tensor.hpp"

namespace rnsde {

// Parallel-beam projection geometry. Angles are radians in [0, pi),
// covering [0, 180 - theta_miss] degrees at uniform steps. The missing
// wedge is encoded by omitting rows entirely.
struct Geometry {
    int num_detectors = 0;
    std::vector<double> angles;
    double theta_miss_deg = 0.0;
    double angle_step_deg = 0.0;

    int num_angles() const { return static_cast<int>(angles.size()); }
    bool operator==(const Geometry& o) const {
        return num_detectors == o.num_detectors && angles == o.angles;
    }
};

Geometry make_geometry(int num_detectors, double theta_miss_deg, double angle_step_deg);

struct Sinogram {
    Geometry geom;
    Tensor values;  // [A, D]
};

enum class RampWindow { none, hann };

// Joseph's method: 1-D interpolation along the dominant axis; the
// back-projection below is its exact adjoint.
Sinogram radon(const Tensor& image, const Geometry& geom);
Tensor backproject(const Sinogram& sino, int height, int width);
Sinogram ramp_filter(const Sinogram& sino, RampWindow window = RampWindow::none);
// backproject(ramp_filter(sino)) * pi/A, masked to the inscribed circle.
Tensor fbp(const Sinogram& sino, int output_size);

// Discrete Ram-Lak spatial kernel h[k] (closed form), exposed for tests.
double ramlak_kernel(int k);

}  // namespace rnsde
