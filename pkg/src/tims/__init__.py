"""Simulated bilateral micromanipulation trainer.

Layers, bottom up: geometry primitives; leader-follower motion mapping;
guide-path learning from demonstrations (Gaussian process regression);
virtual-fixture haptic guidance; silicone-phantom scene simulation; wearable
tactile display dynamics; telemetry bus with recording and replay; skill
analytics; scripted operator models and the trial runner on top.
"""

__version__ = "0.1.0"

from .geometry import Vec3

__all__ = ["Vec3", "__version__"]
