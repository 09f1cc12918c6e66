"""Two-phase toolkit: diffusion super-resolution of small satellite-style
tiles, followed by imbalance-aware fine-grained classification with
teacher distillation, plus a metrics/report harness and CLI."""

__version__ = "0.1.0"
