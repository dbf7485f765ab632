#pragma once

namespace plateopt {

// In-plane strain, tensor convention (xy = half the engineering shear).
struct StrainTensor2D {
    double xx = 0, yy = 0, xy = 0;

    friend bool operator==(const StrainTensor2D&, const StrainTensor2D&) = default;
    StrainTensor2D scaled(double c) const { return {c * xx, c * yy, c * xy}; }
};

} // namespace plateopt
