"""Closed-loop simulation of planned runs on a kinematic robot."""
