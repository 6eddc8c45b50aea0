"""
Journey Detector package.
Battery-aware detection of journeys in GPS and accelerometer traces.
"""

__version__ = '1.0.0'
