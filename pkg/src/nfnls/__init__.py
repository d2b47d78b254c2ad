"""Normal-form laboratory for the cubic NLS on a periodic grid."""

__version__ = "0.1.0"
