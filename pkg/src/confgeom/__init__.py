"""Conformal invariants of submanifolds in pseudo-Riemannian space forms."""

from .calculus import Axis, Calculus, ParamGrid, StencilConfig
from .catalog import catalog, catalog_names
from .conformal import (canonical_frame, conformal_data, conformal_factor, identity_suite,
                        integrability_suite, invariants_extrinsic, invariants_frame)
from .indefinite import Signature, gram, indefinite_gram_schmidt, inner, random_pseudo_orthogonal
from .isometric import isometric_data, scalar_curvature_checked
from .isotropy import Verdict, classify, fit_lambda, isotropy, isotropy_from
from .spaceforms import Immersion, Kind, SpaceForm, apply_conformal, dehomogenize, lift
from .willmore import BumpSpec, Form, first_variation_check, residual_crosscheck, willmore_residual

__version__ = "0.1.0"
