"""Speech depression-severity regression: spectral + neural feature fusion
with a from-scratch 1D-CNN regressor, plus serving and CLI surfaces."""

__version__ = "0.1.0"
