"""fedflex: user-controlled federated movie recommendations.

Clients train BPR ranking models on local viewing histories, share only
clipped + Gaussian-noised item-parameter deltas with an averaging
aggregator, and let the user switch the live ranking objective between
personalization-only and diversity-enhanced (MMR) modes.
"""

__version__ = "0.1.0"
