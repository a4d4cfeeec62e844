#pragma once

#include <complex>
#include <utility>

#include "nops/array.hpp"

namespace nops {

enum class FieldKind { RealScalar, Complex };

/// A physical field on the uniform unit-square grid: [C,H,W] values with
/// spacing 1/(H-1). Real scalar fields have one channel; complex fields carry
/// two (real, imaginary).
struct GridField {
    DenseArray values;  // [C,H,W]
    double spacing = 0.0;
    FieldKind kind = FieldKind::RealScalar;

    GridField() = default;

    static GridField real(DenseArray v) { return make(std::move(v), FieldKind::RealScalar); }
    static GridField complex(DenseArray v) { return make(std::move(v), FieldKind::Complex); }

    static GridField zeros(FieldKind kind, int h, int w) {
        const int c = kind == FieldKind::Complex ? 2 : 1;
        return make(DenseArray::zeros({c, h, w}), kind);
    }

    int channels() const { return values.shape[0]; }
    int height() const { return values.shape[1]; }
    int width() const { return values.shape[2]; }

    double& at(int c, int i, int j) { return values.at3(c, i, j); }
    double at(int c, int i, int j) const { return values.at3(c, i, j); }

    std::complex<double> cplx(int i, int j) const {
        return {values.at3(0, i, j), values.at3(1, i, j)};
    }

  private:
    static GridField make(DenseArray v, FieldKind kind) {
        if (v.ndim() != 3) throw dimension_error("GridField: values must be [C,H,W]");
        const int c = v.shape[0], h = v.shape[1], w = v.shape[2];
        if (h != w) throw dimension_error("GridField: grid must be square, got " + shape_str(v.shape));
        if (h < 2) throw dimension_error("GridField: grid too small");
        if (kind == FieldKind::RealScalar && c != 1)
            throw dimension_error("GridField: real-scalar field must have 1 channel");
        if (kind == FieldKind::Complex && c != 2)
            throw dimension_error("GridField: complex field must have 2 channels");
        GridField f;
        f.values = std::move(v);
        f.spacing = 1.0 / static_cast<double>(h - 1);
        f.kind = kind;
        return f;
    }
};

}  // namespace nops
