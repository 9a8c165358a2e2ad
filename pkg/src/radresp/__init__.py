"""Radiomics response prediction: preprocessing, features, selection and nested CV."""

__version__ = "0.1.0"
