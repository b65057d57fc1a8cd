"""EMLA sizing, surrogate modeling and sensorless control toolkit.

Subpackages/modules:

- ``emla``        actuator electromechanics and simulation
- ``vdc``         spatial-vector manipulator kinematics/dynamics
- ``trajectory``  quintic Cartesian trajectories and joint-space safety
- ``dnn``         steady-state efficiency dataset + feedforward surrogate
- ``nsga2``       constrained multi-objective configuration optimization
- ``pik``         physics-informed Kriging of load-side quantities
- ``control``     hierarchical sensorless control on a simulated testbed
- ``cli``         command-line entry point
"""

from ._core import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
