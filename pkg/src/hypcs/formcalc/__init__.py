"""Matrix-valued differential forms, Chern-Simons forms and gauge maps."""

from .forms import (AD_BASIS, SL2_BASIS, MatrixForm, adjoint_form,
                    adjoint_jet, assemble, combos, constant_form,
                    curvature_form, cs_form, exterior_d, sup_norm,
                    variation_residual, wedge, zero_form)
from .gauge import (ClosedPatch, GaugeMap, builtin_map, cocycle_value,
                    gauge_cs_residual, gauge_transform, maurer_cartan,
                    product_map, rotate_connection, so3_normalization,
                    wznw_degree, wznw_form)
from .quadrature import Axis, QuadratureError, fsum_complex, integrate

__all__ = [
    "AD_BASIS", "SL2_BASIS", "MatrixForm", "adjoint_form", "adjoint_jet",
    "assemble", "combos", "constant_form", "curvature_form", "cs_form",
    "exterior_d", "sup_norm", "variation_residual", "wedge", "zero_form",
    "ClosedPatch", "GaugeMap", "builtin_map", "cocycle_value",
    "gauge_cs_residual", "gauge_transform", "maurer_cartan", "product_map",
    "rotate_connection", "so3_normalization", "wznw_degree", "wznw_form",
    "Axis", "QuadratureError", "fsum_complex", "integrate",
]
