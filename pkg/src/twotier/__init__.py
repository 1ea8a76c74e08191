"""Uplink outage and operating contours for shared-spectrum two-tier femtocell networks."""

__version__ = "0.1.0"
