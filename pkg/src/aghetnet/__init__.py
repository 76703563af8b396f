"""Air-ground LTE-A HetNet simulator with eICIC/FeICIC and UABS placement search."""

__version__ = "0.1.0"
