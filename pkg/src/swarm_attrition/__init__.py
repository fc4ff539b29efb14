"""Adversarial swarm engagements with probabilistic attrition."""

__version__ = "0.1.0"
