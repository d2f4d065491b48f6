"""u6gsat: aggregate uplink interference from upper-6GHz base stations
at a geostationary satellite, with characteristic-function aggregation
over cities and whole satellite footprints."""

__version__ = "0.1.0"
