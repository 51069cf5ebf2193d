"""Index formula for hypoelliptic operators on contact manifolds via Bargmann-Fock cocycles."""

__version__ = "0.1.0"
