"""Online inverse linear optimization: learners, simulators and regret metrics."""

__version__ = "0.1.0"
