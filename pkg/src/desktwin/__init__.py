"""Desk-scale digital twin of a small Ackermann-steered vehicle.

Library layout:

- ``config`` / ``tires`` / ``dynamics``: vehicle model (suspension, slip
  curves, actuators, fixed-step integration)
- ``sensors`` / ``world``: lidar, encoders, IMU, IPS, scenes, collision
- ``mapping`` / ``localization`` / ``planning`` / ``parking``: the
  autonomous-parking pipeline
- ``imitation`` / ``network`` / ``expert``: behavioral-cloning pipeline
- ``simulation`` / ``server`` / ``cli`` / ``report``: session loop, wire
  protocol, command line, figures
"""

__version__ = "0.1.0"
