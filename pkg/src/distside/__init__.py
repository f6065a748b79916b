"""Source coding with distortion side information: rate-distortion oracles,
curve-fitting and transform codes, and the uninformed-encoder rate penalty."""

__version__ = "0.1.0"
