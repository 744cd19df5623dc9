"""microdrive: a desk-scale urban driving lab.

A 2D micro-simulator with lane-graph maps, traffic lights, background
vehicles and pedestrians; a privileged reinforcement-learned coach that
drives from bird's-eye-view observations; and a sensor-limited student
distilled from the coach's action distributions, features and values.
"""

__version__ = "0.1.0"
