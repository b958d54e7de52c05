"""Two-level multi-agent actor-critic learning with a communication medium.

Subpackages:

- :mod:`commnav.nets`: dense ReLU approximators, exact gradients, Adam.
- :mod:`commnav.env`: noisy cooperative-navigation particle worlds.
- :mod:`commnav.medium`: assembly and decoding of the shared medium.
- :mod:`commnav.agents`: per-agent actor-critic bundles, noise, replay.
- :mod:`commnav.trainer`: the two-timescale training loop and evaluation.
- :mod:`commnav.cli`: ``commnav train|eval|report`` command line front end.
"""

__version__ = "0.1.0"
