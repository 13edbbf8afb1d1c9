"""Pydantic data models.

``Config`` validates the package defaults in ``config.yaml``, ``Experiment``
validates experiment files passed to the command line interface and ``Report``
defines the JSON documents written after each run.
"""
