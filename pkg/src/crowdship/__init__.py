"""Crowdship: a crowdsourced parcel-delivery platform service."""

__version__ = "0.1.0"
