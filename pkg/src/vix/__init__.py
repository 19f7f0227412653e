"""Vision transformers with linear-attention token mixers, on a small f64 autodiff core."""

__version__ = "0.1.0"
