"""scikit-learn style wrapper around the oriented depthwise convolution."""
from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_kernel, check_nhwc
from .fast import DEFAULT_CACHE_BUDGET, dwconv1d_fast_fwd, plan_build
from .geometry import ConvConfig, InvalidConfigError, direction_angles, layerwise_angles
from .reference import dwconv1d_fwd
from .tensor import tensor_random


class OrientedConv1D(BaseEstimator, TransformerMixin):
    """Fixed-weight oriented 1xK depthwise convolution as a transformer.

    ``fit`` only looks at the input geometry: it derives per-channel angles
    from ``n_directions`` (rotated by ``layer_index`` steps of
    ``shift_deg``), draws weights when none are given, and builds the
    execution plan. ``transform`` applies the convolution to NHWC input.
    """

    def __init__(self, kernel_size=31, n_directions=8, layer_index=0, shift_deg=90.0, stride=1,
                 weights=None, backend="fast", threads=None, cache_budget=DEFAULT_CACHE_BUDGET,
                 random_state=0):
        self.kernel_size = kernel_size
        self.n_directions = n_directions
        self.layer_index = layer_index
        self.shift_deg = shift_deg
        self.stride = stride
        self.weights = weights
        self.backend = backend
        self.threads = threads
        self.cache_budget = cache_budget
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_nhwc(X, "X")
        if self.backend not in ("fast", "reference"):
            raise InvalidConfigError(f"backend must be 'fast' or 'reference', got {self.backend!r}")
        _, H, W, C = X.shape
        self.cfg_ = ConvConfig(int(self.kernel_size), stride=int(self.stride))
        base = direction_angles(int(self.n_directions), C)
        self.angles_ = layerwise_angles(base, int(self.layer_index), float(self.shift_deg))
        if self.weights is None:
            self.weights_ = tensor_random((self.cfg_.K, C), X.dtype, int(self.random_state))
        else:
            self.weights_ = check_kernel(self.weights, X.dtype, ndim=2, name="weights")
            if self.weights_.shape != (self.cfg_.K, C):
                raise ValueError(f"weights must be {(self.cfg_.K, C)}, got {self.weights_.shape}")
        self.plan_ = None
        if self.backend == "fast":
            self.plan_ = plan_build(H, W, self.cfg_.K, self.angles_, X.dtype, self.cache_budget,
                                    self.threads, cfg=self.cfg_)
        self.n_features_in_ = C
        self.input_hw_ = (H, W)
        return self

    def transform(self, X):
        check_is_fitted(self, ("weights_", "angles_"))
        X = check_nhwc(X, "X")
        if X.shape[3] != self.n_features_in_ or X.shape[1:3] != self.input_hw_:
            raise ValueError(
                f"fitted on (H, W, C)={(*self.input_hw_, self.n_features_in_)}, got {X.shape[1:]}"
            )
        w = self.weights_.astype(X.dtype, copy=False)
        if self.plan_ is not None and X.dtype == self.plan_.dtype:
            return dwconv1d_fast_fwd(X, w, self.angles_, self.cfg_, self.plan_)
        return dwconv1d_fwd(X, w, self.angles_, self.cfg_)


def as_nhwc(X, name="X"):
    """Validate and return a contiguous float NHWC array."""
    return check_nhwc(X, name)


__all__ = ["OrientedConv1D", "as_nhwc"]
